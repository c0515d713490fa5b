#include "greenpeel/dataset.hpp"

#include <bit>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "greenpeel/errors.hpp"

namespace greenpeel {

namespace {

template <class T>
void put_le(std::vector<unsigned char>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

template <class T>
T get_le(const unsigned char* p) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(p[b]) << (8 * b);
    return std::bit_cast<T>(bits);
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".meta.json");
}

}  // namespace

void TrainingSet::append(const Matrix& f, const Matrix& u) {
    if (f.rows() != grid.total() || u.rows() != grid.total() || f.cols() != u.cols())
        throw ValidationError("training pair shape does not match the grid");
    const Index old = forcings.cols();
    forcings.conservativeResize(Eigen::NoChange, old + f.cols());
    solutions.conservativeResize(Eigen::NoChange, old + u.cols());
    forcings.rightCols(f.cols()) = f;
    solutions.rightCols(u.cols()) = u;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void dataset_write(const std::filesystem::path& path, const TrainingSet& data) {
    const Index total = data.grid.total();
    const Index count = data.size();
    std::vector<unsigned char> bytes;
    bytes.reserve(dataset_header_bytes + static_cast<std::size_t>(2 * count * total) * 8);
    bytes.insert(bytes.end(), {'G', 'P', 'D', 'E'});
    put_le<std::uint32_t>(bytes, dataset_version);
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(data.grid.dim()));
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(data.grid.n()));
    put_le<std::uint64_t>(bytes, static_cast<std::uint64_t>(count));
    for (const Matrix* m : {&data.forcings, &data.solutions})
        for (Index j = 0; j < count; ++j)
            for (Index i = 0; i < total; ++i) put_le<double>(bytes, (*m)(i, j));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw RuntimeFailure("short write to '" + path.string() + "'");

    nlohmann::json meta = {
        {"kernel", data.provenance.kernel},
        {"length_scale", data.provenance.length_scale},
        {"seed", data.provenance.seed},
        {"coefficient", data.provenance.coefficient},
        {"created", data.provenance.created.empty() ? utc_timestamp() : data.provenance.created},
    };
    std::ofstream side(sidecar(path));
    side << meta.dump(2) << '\n';
}

TrainingSet dataset_read(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < dataset_header_bytes)
        throw FormatError("dataset header truncated: expected " + std::to_string(dataset_header_bytes) +
                          " bytes, found " + std::to_string(bytes.size()));
    if (bytes[0] != 'G' || bytes[1] != 'P' || bytes[2] != 'D' || bytes[3] != 'E')
        throw FormatError("bad magic in '" + path.string() + "' (expected GPDE)");
    const auto version = get_le<std::uint32_t>(&bytes[4]);
    if (version != dataset_version)
        throw FormatError("unsupported dataset version " + std::to_string(version) + " (expected " +
                          std::to_string(dataset_version) + ")");
    const auto d = get_le<std::uint32_t>(&bytes[8]);
    const auto n = get_le<std::uint32_t>(&bytes[12]);
    const auto count = get_le<std::uint64_t>(&bytes[16]);

    TrainingSet data(Grid(static_cast<int>(d), static_cast<int>(n)));
    const auto total = static_cast<std::uint64_t>(data.grid.total());
    const std::uint64_t expected = dataset_header_bytes + 2 * count * total * 8;
    if (bytes.size() != expected)
        throw FormatError("dataset length mismatch: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(bytes.size()));

    data.forcings.resize(static_cast<Index>(total), static_cast<Index>(count));
    data.solutions.resize(static_cast<Index>(total), static_cast<Index>(count));
    const unsigned char* p = bytes.data() + dataset_header_bytes;
    for (Matrix* m : {&data.forcings, &data.solutions})
        for (Index j = 0; j < m->cols(); ++j)
            for (Index i = 0; i < m->rows(); ++i, p += 8) (*m)(i, j) = get_le<double>(p);

    std::ifstream side(sidecar(path));
    if (!side) {
        if (warnings) warnings->push_back("metadata sidecar '" + sidecar(path).string() + "' not found");
        return data;
    }
    try {
        const auto meta = nlohmann::json::parse(side);
        data.provenance.kernel = meta.value("kernel", "unknown");
        data.provenance.length_scale = meta.value("length_scale", 0.0);
        data.provenance.seed = meta.value("seed", std::uint64_t{0});
        data.provenance.coefficient = meta.value("coefficient", "unknown");
        data.provenance.created = meta.value("created", "");
    } catch (const nlohmann::json::exception& e) {
        if (warnings) warnings->push_back(std::string("unreadable metadata sidecar: ") + e.what());
    }
    return data;
}

double consistency_residual(const TrainingSet& data, const DiscreteOperator& op, int pairs) {
    if (!(data.grid == op.grid())) throw ValidationError("dataset grid does not match the operator grid");
    double worst = 0.0;
    for (Index j = 0; j < std::min<Index>(pairs, data.size()); ++j) {
        const double fn = data.forcings.col(j).norm();
        if (fn == 0.0) continue;
        worst = std::max(worst, (op.stiffness() * data.solutions.col(j) - data.forcings.col(j)).norm() / fn);
    }
    return worst;
}

}  // namespace greenpeel
