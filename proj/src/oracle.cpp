#include "greenpeel/oracle.hpp"

#include <bit>
#include <cstring>

#include "greenpeel/errors.hpp"
#include "greenpeel/philox.hpp"

namespace greenpeel {

namespace {

std::uint64_t hash_column(const double* data, Index n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (Index i = 0; i < n; ++i) h = mix64(h ^ std::bit_cast<std::uint64_t>(data[i]));
    return h;
}

}  // namespace

KernelOracle::KernelOracle(Grid grid, Matrix kernel) : grid_(grid), kernel_(std::move(kernel)) {
    if (kernel_.rows() != grid_.total() || kernel_.cols() != grid_.total())
        throw ValidationError("kernel size does not match the grid");
}

Matrix KernelOracle::solve(const Matrix& forcings, Execution exec) const {
    if (forcings.rows() != grid_.total()) throw ValidationError("forcing length does not match the grid");
    Matrix out(forcings.rows(), forcings.cols());
    const double w = grid_.quadrature_weight();
    parallel_for(exec, forcings.cols(), [&](std::int64_t j) { out.col(j) = w * (kernel_ * forcings.col(j)); });
    return out;
}

Matrix RecordingOracle::solve(const Matrix& forcings, Execution exec) const {
    Matrix u = inner_.solve(forcings, exec);
    std::lock_guard lock(mutex_);
    record_.append(forcings, u);
    return u;
}

ReplayOracle::ReplayOracle(const TrainingSet& data) : data_(data) {
    for (Index j = 0; j < data.size(); ++j)
        index_.emplace(hash_column(data.forcings.col(j).data(), data.forcings.rows()), j);
}

Matrix ReplayOracle::solve(const Matrix& forcings, Execution) const {
    if (forcings.rows() != data_.grid.total()) throw ValidationError("forcing length does not match the grid");
    Matrix out(forcings.rows(), forcings.cols());
    const auto bytes = static_cast<std::size_t>(forcings.rows()) * sizeof(double);
    for (Index j = 0; j < forcings.cols(); ++j) {
        const double* f = forcings.col(j).data();
        auto [lo, hi] = index_.equal_range(hash_column(f, forcings.rows()));
        bool found = false;
        for (auto it = lo; it != hi && !found; ++it) {
            if (std::memcmp(data_.forcings.col(it->second).data(), f, bytes) == 0) {
                out.col(j) = data_.solutions.col(it->second);
                found = true;
            }
        }
        if (!found) throw ReplayMiss("forcing not present in the dataset");
    }
    return out;
}

Matrix poisson1d_kernel(const Grid& grid) {
    if (grid.dim() != 1) throw ValidationError("analytic Poisson kernel is one-dimensional");
    const Index n = grid.total();
    Matrix g(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) {
            const double x = grid.coordinate(static_cast<int>(i));
            const double y = grid.coordinate(static_cast<int>(j));
            g(i, j) = std::min(x, y) * (1.0 - std::max(x, y));
        }
    return g;
}

Matrix synthetic_hierarchical_kernel(const BoxTree& tree, int rank, std::uint64_t seed, bool dense_near) {
    const Index total = tree.grid().total();
    Matrix g = Matrix::Zero(total, total);
    const auto lists = block_lists(tree);
    auto gaussian = [&](Index rows, Index cols, std::uint64_t stream) {
        Matrix m(rows, cols);
        for (Index j = 0; j < cols; ++j)
            fill_standard_normal(seed, stream, static_cast<std::uint32_t>(j),
                                 std::span<double>(m.col(j).data(), static_cast<std::size_t>(rows)));
        return m;
    };
    for (const BlockList& list : lists) {
        const TreeLevel& lvl = tree.level(list.level);
        for (auto [t, s] : list.admissible) {
            if (t > s) continue;
            const auto& rows = lvl.boxes[static_cast<std::size_t>(t)].nodes;
            const auto& cols = lvl.boxes[static_cast<std::size_t>(s)].nodes;
            const auto r = static_cast<Index>(rows.size());
            const auto c = static_cast<Index>(cols.size());
            const auto id = static_cast<std::uint64_t>(list.level);
            const Matrix u = gaussian(r, rank, stream_key({0xA, id, std::uint64_t(t), std::uint64_t(s)}));
            const Matrix v = gaussian(c, rank, stream_key({0xB, id, std::uint64_t(t), std::uint64_t(s)}));
            const Matrix block = u * v.transpose() / std::sqrt(static_cast<double>(r * c));
            g(rows, cols) = block;
            g(cols, rows) = block.transpose();
        }
    }
    if (dense_near) {
        const BlockList& finest = lists.back();
        const TreeLevel& lvl = tree.level(finest.level);
        for (auto [t, s] : finest.near) {
            if (t > s) continue;
            const auto& rows = lvl.boxes[static_cast<std::size_t>(t)].nodes;
            const auto& cols = lvl.boxes[static_cast<std::size_t>(s)].nodes;
            Matrix block = gaussian(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()),
                                    stream_key({0xC, std::uint64_t(t), std::uint64_t(s)}));
            if (t == s) block = 0.5 * (block + block.transpose()).eval();
            g(rows, cols) = block;
            g(cols, rows) = block.transpose();
        }
    }
    return g;
}

}  // namespace greenpeel
