#include "greenpeel/lowrank.hpp"

#include <algorithm>
#include <vector>

#include "greenpeel/errors.hpp"
#include "greenpeel/philox.hpp"

namespace greenpeel {

namespace {

constexpr double rank_cutoff = 1e-14;

std::vector<int> candidate_ranks(int k_max, int k_step) {
    std::vector<int> ks{0};
    for (int k = k_step; k < k_max; k += k_step) ks.push_back(k);
    if (k_max > 0) ks.push_back(k_max);
    return ks;
}

// Leading left singular vectors of y above the relative cut-off, at most `cap`.
Matrix leading_left_vectors(const Matrix& y, Index cap) {
    if (y.cols() == 0 || y.rows() == 0 || cap == 0) return Matrix(y.rows(), 0);
    Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv[0] > 0.0)) return Matrix(y.rows(), 0);
    Index r = 0;
    while (r < sv.size() && r < cap && sv[r] > rank_cutoff * sv[0]) ++r;
    return svd.matrixU().leftCols(r);
}

LowRankBlock from_core(const Matrix& left, const Matrix& core, const Matrix& right, int k) {
    LowRankBlock b = LowRankBlock::empty(left.rows(), right.rows());
    if (core.size() == 0 || k == 0) return b;
    Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index r = std::min<Index>(k, svd.singularValues().size());
    b.u = left * svd.matrixU().leftCols(r);
    b.s = svd.singularValues().head(r);
    b.v = right * svd.matrixV().leftCols(r);
    return b;
}

}  // namespace

ProbeSource ProbeSource::standard_normal(Index dim, std::uint64_t seed) {
    return ProbeSource(CovarianceFactor::white(dim, seed));
}

ProbeSource ProbeSource::gaussian_process(CovarianceFactor factor) { return ProbeSource(std::move(factor)); }

BlockOracle BlockOracle::from_dense(const Matrix& a, std::uint64_t seed) {
    BlockOracle o;
    o.rows = a.rows();
    o.cols = a.cols();
    o.apply = [a](const Matrix& x) -> Matrix { return a * x; };
    o.apply_transpose = [a](const Matrix& y) -> Matrix { return a.transpose() * y; };
    o.probes = ProbeSource::standard_normal(a.cols(), seed);
    return o;
}

LowRankBlock LowRankBlock::empty(Index rows, Index cols) {
    LowRankBlock b;
    b.rows = rows;
    b.cols = cols;
    b.u = Matrix(rows, 0);
    b.s = Vector(0);
    b.v = Matrix(cols, 0);
    return b;
}

Matrix LowRankBlock::apply(const Matrix& x) const {
    if (x.rows() != cols)
        throw ValidationError("low-rank block expects " + std::to_string(cols) + " rows, got " +
                              std::to_string(x.rows()));
    if (rank() == 0) return Matrix::Zero(rows, x.cols());
    return u * (s.asDiagonal() * (v.transpose() * x));
}

Matrix LowRankBlock::to_dense() const {
    if (rank() == 0) return Matrix::Zero(rows, cols);
    return u * s.asDiagonal() * v.transpose();
}

Matrix orthonormal_basis(const Matrix& y) { return leading_left_vectors(y, y.cols()); }

Matrix range_finder(const BlockOracle& oracle, int k, int p, std::uint64_t stream, int power_iterations) {
    const Index width = k + p;
    if (k < 0 || p < 0 || width > std::min(oracle.rows, oracle.cols))
        throw ValidationError("range finder needs k + p <= min(rows, cols)");
    if (width == 0) return Matrix(oracle.rows, 0);
    Matrix y = oracle.apply(oracle.probes.draw(width, stream));
    for (int it = 0; it < power_iterations; ++it) {
        const Matrix q = orthonormal_basis(y);
        if (q.cols() == 0) break;
        const Matrix z = orthonormal_basis(oracle.apply_transpose(q));
        if (z.cols() == 0) return Matrix(oracle.rows, 0);
        y = oracle.apply(z);
    }
    return orthonormal_basis(y);
}

LowRankBlock truncated_svd_from_range(const BlockOracle& oracle, const Matrix& q, int k) {
    if (k <= 0 || q.cols() == 0) return LowRankBlock::empty(oracle.rows, oracle.cols);
    const Matrix bt = oracle.apply_transpose(q);  // A^T Q = (Q^T A)^T
    Eigen::BDCSVD<Matrix> svd(bt.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index r = std::min<Index>(k, svd.singularValues().size());
    LowRankBlock b = LowRankBlock::empty(oracle.rows, oracle.cols);
    b.u = q * svd.matrixU().leftCols(r);
    b.s = svd.singularValues().head(r);
    b.v = svd.matrixV().leftCols(r);
    return b;
}

double posterior_error(const LowRankBlock& block, const Matrix& probes, const Matrix& responses) {
    if (probes.cols() == 0) return 0.0;
    const Matrix residual = responses - block.apply(probes);
    double worst = 0.0;
    for (Index j = 0; j < probes.cols(); ++j) {
        const double pn = probes.col(j).norm();
        if (pn > 0.0) worst = std::max(worst, residual.col(j).norm() / pn);
    }
    return worst;
}

LowRankBlock rsvd_adaptive(const BlockOracle& oracle, double tol, int k_max, int k_step,
                           const RsvdOptions& options) {
    if (!(tol >= 0.0)) throw ValidationError("adaptive tolerance must be non-negative");
    if (k_step < 1 || k_max < 0) throw ValidationError("k_step must be >= 1 and k_max >= 0");
    const Index limit = std::min(oracle.rows, oracle.cols);
    k_max = static_cast<int>(std::min<Index>(k_max, limit));
    const Index width = std::min<Index>(k_max + options.oversampling, limit);

    const Matrix omega = oracle.probes.draw(width, stream_key({options.stream, 1}));
    const Matrix y = oracle.apply(omega);
    const Matrix post_in = oracle.probes.draw(options.posterior_probes, stream_key({options.stream, 2}));
    const Matrix post_out = oracle.apply(post_in);

    LowRankBlock best = LowRankBlock::empty(oracle.rows, oracle.cols);
    best.error_estimate = posterior_error(best, post_in, post_out);
    if (y.isZero(0.0) || best.error_estimate <= tol) return best;

    for (int k : candidate_ranks(k_max, k_step)) {
        if (k == 0) continue;
        const Index m = std::min<Index>(k + options.oversampling, width);
        Matrix sketch = y.leftCols(m);
        for (int it = 0; it < options.power_iterations; ++it) {
            const Matrix z = orthonormal_basis(oracle.apply_transpose(orthonormal_basis(sketch)));
            if (z.cols() == 0) break;
            sketch = oracle.apply(z);
        }
        LowRankBlock b = truncated_svd_from_range(oracle, orthonormal_basis(sketch), k);
        b.error_estimate = posterior_error(b, post_in, post_out);
        b.selected_rank = k;
        best = std::move(b);
        if (best.error_estimate <= tol) return best;
    }
    best.tolerance_met = false;
    return best;
}

namespace {

// Pieces of the two-sided reconstruction that do not depend on the rank.
struct SketchBases {
    Matrix qt;        // orth(range)
    Matrix qs_all;    // left singular vectors of corange, cut-off applied
    Matrix qt_range;  // qt^T range
};

SketchBases prepare(const BlockSketch& sk) {
    SketchBases b;
    b.qt = orthonormal_basis(sk.range);
    b.qs_all = orthonormal_basis(sk.corange);
    b.qt_range = b.qt.transpose() * sk.range;
    return b;
}

LowRankBlock reconstruct(const SketchBases& bases, const BlockSketch& sk, int k) {
    const Index rows = sk.range.rows();
    const Index cols = sk.omega_source.rows();
    const Index r = std::min<Index>(k, bases.qs_all.cols());
    if (k <= 0 || bases.qt.cols() == 0 || r == 0) return LowRankBlock::empty(rows, cols);
    const Matrix qs = bases.qs_all.leftCols(r);
    const Matrix m = qs.transpose() * sk.omega_source;  // r x m, full row rank
    // C m = qt^T range  <=>  m^T C^T = (qt^T range)^T
    const Matrix core = m.transpose().colPivHouseholderQr().solve(bases.qt_range.transpose()).transpose();
    return from_core(bases.qt, core, qs, k);
}

}  // namespace

LowRankBlock reconstruct_from_sketch(const BlockSketch& sketch, int k) {
    return reconstruct(prepare(sketch), sketch, k);
}

LowRankBlock rsvd_adaptive_from_sketch(const BlockSketch& sketch, double tol, int k_max, int k_step) {
    if (!(tol >= 0.0)) throw ValidationError("adaptive tolerance must be non-negative");
    if (k_step < 1 || k_max < 0) throw ValidationError("k_step must be >= 1 and k_max >= 0");
    const Index rows = sketch.range.rows();
    const Index cols = sketch.omega_source.rows();

    LowRankBlock best = LowRankBlock::empty(rows, cols);
    best.error_estimate = posterior_error(best, sketch.post_probes, sketch.post_responses);
    if (sketch.range.isZero(0.0) || best.error_estimate <= tol) return best;

    const SketchBases bases = prepare(sketch);
    for (int k : candidate_ranks(k_max, k_step)) {
        if (k == 0) continue;
        LowRankBlock b = reconstruct(bases, sketch, k);
        b.error_estimate = posterior_error(b, sketch.post_probes, sketch.post_responses);
        b.selected_rank = k;
        best = std::move(b);
        if (best.error_estimate <= tol) return best;
    }
    best.tolerance_met = false;
    return best;
}

}  // namespace greenpeel
