#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "greenpeel/gp_sampling.hpp"
#include "greenpeel/grid.hpp"

namespace greenpeel {

/// Distribution of sketch probes: standard normal, or a GP factor over the
/// source box.
class ProbeSource {
public:
    static ProbeSource standard_normal(Index dim, std::uint64_t seed);
    static ProbeSource gaussian_process(CovarianceFactor factor);

    Index dim() const { return factor_.size(); }
    Matrix draw(Index count, std::uint64_t stream, std::uint32_t first = 0) const {
        return factor_.draw(count, stream, first);
    }

private:
    explicit ProbeSource(CovarianceFactor f) : factor_(std::move(f)) {}
    CovarianceFactor factor_;
};

/// Matrix-free access to one operator block. Both maps act column-wise on
/// blocks of vectors.
struct BlockOracle {
    Index rows = 0;
    Index cols = 0;
    std::function<Matrix(const Matrix&)> apply;            ///< cols x m -> rows x m
    std::function<Matrix(const Matrix&)> apply_transpose;  ///< rows x m -> cols x m
    ProbeSource probes = ProbeSource::standard_normal(0, 0);

    static BlockOracle from_dense(const Matrix& a, std::uint64_t seed = 1);
};

/// U diag(s) V^T with orthonormal U, V and nonincreasing s >= 0.
struct LowRankBlock {
    int target = -1;
    int source = -1;
    Index rows = 0;
    Index cols = 0;
    Matrix u;
    Vector s;
    Matrix v;
    bool tolerance_met = true;
    double error_estimate = 0.0;
    int selected_rank = 0;  ///< candidate k at which adaptive selection stopped

    Index rank() const { return s.size(); }
    Matrix apply(const Matrix& x) const;
    double frob() const { return s.norm(); }
    Matrix to_dense() const;

    static LowRankBlock empty(Index rows, Index cols);
};

struct RsvdOptions {
    int oversampling = 10;
    int posterior_probes = 10;
    int power_iterations = 0;
    std::uint64_t stream = 0;
};

/// Orthonormal basis for range(A Omega), Omega with k + p columns. A zero
/// sketch gives an empty (rows x 0) basis.
Matrix range_finder(const BlockOracle& oracle, int k, int p, std::uint64_t stream = 0,
                    int power_iterations = 0);

/// Rank-k SVD of Q Q^T A, computed from A^T Q.
LowRankBlock truncated_svd_from_range(const BlockOracle& oracle, const Matrix& q, int k);

/// max_i ||Y_i - B Omega_i|| / ||Omega_i|| over held-out probe/response pairs.
double posterior_error(const LowRankBlock& block, const Matrix& probes, const Matrix& responses);

/// Smallest tried rank (0, k_step, 2 k_step, ..., k_max) whose posterior
/// estimate is <= tol. If none passes, returns the k_max block with
/// tolerance_met = false.
LowRankBlock rsvd_adaptive(const BlockOracle& oracle, double tol, int k_max, int k_step,
                           const RsvdOptions& options = {});

/// Sketches of one block A gathered without oracle access to A^T:
/// range = A * omega_source, corange = A^T * omega_target (from the mirrored
/// block of a self-adjoint operator).
struct BlockSketch {
    Matrix range;         ///< rows x m
    Matrix corange;       ///< cols x m'
    Matrix omega_source;  ///< cols x m
    Matrix post_probes;   ///< cols x q (may be empty)
    Matrix post_responses;///< rows x q
};

/// Rank-k reconstruction from a two-sided sketch: A ~ Q_t C Q_s^T with
/// Q_t = orth(range), Q_s = leading k left singular vectors of corange and
/// C solving C (Q_s^T omega_source) = Q_t^T range in least squares.
LowRankBlock reconstruct_from_sketch(const BlockSketch& sketch, int k);

/// Adaptive rank over the same candidate ranks as rsvd_adaptive, using the
/// sketch's held-out probes. `tol` is compared with the posterior estimate.
LowRankBlock rsvd_adaptive_from_sketch(const BlockSketch& sketch, double tol, int k_max, int k_step);

/// Orthonormal basis of the numerical range of y (SVD, relative cut-off).
Matrix orthonormal_basis(const Matrix& y);

}  // namespace greenpeel
