#include "greenpeel/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "greenpeel/errors.hpp"

namespace greenpeel {

namespace {

using nlohmann::json;

constexpr const char* model_format = "greenpeel-model";
constexpr int model_version = 1;

json pack(const Matrix& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

Matrix unpack(const json& j, Index rows, Index cols) {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != rows * cols)
        throw FormatError("model factor has " + std::to_string(v.size()) + " entries, expected " +
                          std::to_string(rows * cols));
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace

void write_model(const std::filesystem::path& path, const RunConfig& config, const HierarchicalApprox& approx) {
    json levels = json::array();
    for (int l = first_admissible_level; l <= approx.tree().depth(); ++l) {
        json blocks = json::array();
        for (const LowRankBlock& b : approx.level_blocks(l))
            blocks.push_back({{"target", b.target},
                              {"source", b.source},
                              {"rows", b.rows},
                              {"cols", b.cols},
                              {"rank", b.rank()},
                              {"u", pack(b.u)},
                              {"s", pack(b.s)},
                              {"v", pack(b.v)},
                              {"tolerance_met", b.tolerance_met},
                              {"error_estimate", b.error_estimate}});
        levels.push_back({{"level", l}, {"blocks", std::move(blocks)}});
    }
    json near = json::array();
    for (const DenseBlock& b : approx.near_blocks())
        near.push_back({{"target", b.target},
                        {"source", b.source},
                        {"rows", b.values.rows()},
                        {"cols", b.values.cols()},
                        {"values", pack(b.values)}});
    const json model = {{"format", model_format},
                        {"version", model_version},
                        {"config", to_json(config)},
                        {"near_field", to_string(approx.near_field_policy())},
                        {"levels", std::move(levels)},
                        {"near", std::move(near)}};
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    out << model.dump() << '\n';
}

StoredModel read_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model '" + path.string() + "'");
    try {
        const json j = json::parse(in);
        if (j.value("format", "") != model_format || j.value("version", 0) != model_version)
            throw FormatError("'" + path.string() + "' is not a version-1 greenpeel model");
        RunConfig config = parse_config(j.at("config"));
        const Grid grid(config.problem.d, config.problem.n);
        auto tree = std::make_shared<const BoxTree>(grid, config.hierarchy.levels);
        HierarchicalApprox approx(tree, parse_near_field(j.at("near_field").get<std::string>()));
        for (const json& lj : j.at("levels")) {
            const int l = lj.at("level").get<int>();
            std::vector<LowRankBlock> blocks;
            for (const json& bj : lj.at("blocks")) {
                LowRankBlock b;
                b.target = bj.at("target").get<int>();
                b.source = bj.at("source").get<int>();
                b.rows = bj.at("rows").get<Index>();
                b.cols = bj.at("cols").get<Index>();
                const auto k = bj.at("rank").get<Index>();
                b.u = unpack(bj.at("u"), b.rows, k);
                b.s = unpack(bj.at("s"), k, 1);
                b.v = unpack(bj.at("v"), b.cols, k);
                b.tolerance_met = bj.at("tolerance_met").get<bool>();
                b.error_estimate = bj.at("error_estimate").get<double>();
                blocks.push_back(std::move(b));
            }
            approx.set_level_blocks(l, std::move(blocks));
        }
        std::vector<DenseBlock> near;
        for (const json& nj : j.at("near"))
            near.push_back(DenseBlock{nj.at("target").get<int>(), nj.at("source").get<int>(),
                                      unpack(nj.at("values"), nj.at("rows").get<Index>(), nj.at("cols").get<Index>())});
        approx.set_near_blocks(std::move(near));
        return StoredModel{std::move(config), std::move(approx)};
    } catch (const json::exception& e) {
        throw FormatError("malformed model '" + path.string() + "': " + e.what());
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const ValidationError*>(&e)) throw;
        throw FormatError("model '" + path.string() + "' does not match its hierarchy: " + e.what());
    }
}

}  // namespace greenpeel
