#include "greenpeel/evaluation.hpp"

#include <cmath>

#include "greenpeel/errors.hpp"
#include "greenpeel/philox.hpp"

namespace greenpeel {

namespace {

enum : std::uint64_t { test_stream = 0x7e57, hs_eval_stream = 0x45a1 };

Matrix near_part(const HierarchicalApprox& approx, const Matrix& kernel) {
    const BoxTree& tree = approx.tree();
    const TreeLevel& fine = tree.level(tree.depth());
    Matrix near = Matrix::Zero(kernel.rows(), kernel.cols());
    for (auto [t, s] : approx.lists().back().near) {
        const auto& rows = fine.boxes[static_cast<std::size_t>(t)].nodes;
        const auto& cols = fine.boxes[static_cast<std::size_t>(s)].nodes;
        near(rows, cols) = kernel(rows, cols);
    }
    return near;
}

}  // namespace

ExactErrors evaluate_exact(const HierarchicalApprox& approx, const Matrix& kernel, bool with_op_norms) {
    const Index total = approx.tree().grid().total();
    if (kernel.rows() != total || kernel.cols() != total)
        throw ValidationError("kernel size does not match the learned operator");
    const double g = kernel.norm();
    if (g == 0.0) throw ValidationError("reference kernel is zero");
    const Matrix diff = kernel - approx.to_dense();
    const Matrix near_g = near_part(approx, kernel);
    const Matrix near_diff = near_part(approx, diff);

    ExactErrors e;
    e.err_hs_rel = diff.norm() / g;
    e.floor_hs_rel = near_g.norm() / g;
    e.far_hs_rel = std::sqrt(std::max(0.0, diff.squaredNorm() - near_diff.squaredNorm())) / g;
    if (with_op_norms) {
        e.err_op_rel = spectral_norm(diff) / g;
        e.floor_op_rel = spectral_norm(near_g) / g;
    }
    return e;
}

ExactErrors evaluate_exact(const HierarchicalApprox& approx, const DiscreteOperator& op, Index dense_cap) {
    return evaluate_exact(approx, dense_kernel(op, dense_cap));
}

SampledErrors evaluate_sampled(const HierarchicalApprox& approx, const TrainingSet& test, double hs_norm_estimate,
                               Execution exec) {
    if (test.size() == 0) throw ValidationError("evaluation needs at least one test pair");
    if (!(hs_norm_estimate > 0.0)) throw ValidationError("HS-norm estimate must be positive");
    const Matrix predicted = approx.apply(test.forcings, exec);
    SampledErrors out;
    out.pairs = test.size();
    out.hs_norm_estimate = hs_norm_estimate;
    Index used = 0;
    for (Index j = 0; j < test.size(); ++j) {
        const double fn = test.forcings.col(j).norm();
        if (fn == 0.0) continue;
        const double r = (test.solutions.col(j) - predicted.col(j)).norm() / fn;
        out.mean_raw += r;
        out.max_raw = std::max(out.max_raw, r);
        ++used;
    }
    if (used == 0) throw ValidationError("every test forcing is zero");
    out.mean_raw /= static_cast<double>(used);
    out.mean_rel = out.mean_raw / hs_norm_estimate;
    out.max_rel = out.max_raw / hs_norm_estimate;
    return out;
}

double hs_norm_estimate(const SolutionOracle& oracle, int probes, std::uint64_t seed, Execution exec) {
    if (probes < 1) throw ValidationError("HS estimate needs at least one probe");
    const Matrix f = CovarianceFactor::white(oracle.grid().total(), seed).draw(probes, stream_key({hs_eval_stream}));
    const Matrix u = oracle.solve(f, exec);
    return std::sqrt(u.colwise().squaredNorm().mean());
}

TrainingSet make_test_set(const SolutionOracle& oracle, int count, const KernelSpec& kernel, std::uint64_t seed,
                          Execution exec) {
    if (count < 1) throw ValidationError("evaluation.test_set_size must be >= 1");
    const Grid& grid = oracle.grid();
    const CovarianceFactor factor = kernel.kind == KernelKind::white
                                        ? CovarianceFactor::white(grid.total(), seed)
                                        : factorize(covariance_matrix(grid, kernel), seed);
    const Matrix f = factor.draw(count, stream_key({test_stream}));
    TrainingSet set(grid);
    set.append(f, oracle.solve(f, exec));
    set.provenance.kernel = kernel.name();
    set.provenance.length_scale = kernel.length_scale;
    set.provenance.seed = seed;
    return set;
}

}  // namespace greenpeel
