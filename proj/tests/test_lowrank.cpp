#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "greenpeel/errors.hpp"
#include "greenpeel/lowrank.hpp"
#include "greenpeel/philox.hpp"

using namespace greenpeel;

namespace {

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
    return CovarianceFactor::white(rows, seed).draw(cols, 99);
}

Matrix orthonormal(Index rows, Index cols, std::uint64_t seed) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(rows, cols, seed));
    return qr.householderQ() * Matrix::Identity(rows, cols);
}

Matrix with_spectrum(Index n, const Vector& s, std::uint64_t seed) {
    const Index k = s.size();
    return orthonormal(n, k, seed) * s.asDiagonal() * orthonormal(n, k, seed + 1000).transpose();
}

double orthonormality_defect(const Matrix& q) {
    return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(RangeFinder, ZeroBlockGivesEmptyBasis) {
    const Matrix q = range_finder(BlockOracle::from_dense(Matrix::Zero(20, 15)), 3, 2);
    EXPECT_EQ(q.rows(), 20);
    EXPECT_EQ(q.cols(), 0);
}

TEST(RangeFinder, CapturesRankOne) {
    const Vector u = gaussian(30, 1, 1).col(0), v = gaussian(25, 1, 2).col(0);
    const Matrix q = range_finder(BlockOracle::from_dense(u * v.transpose(), 5), 1, 2);
    EXPECT_LE((u - q * (q.transpose() * u)).norm() / u.norm(), 1e-12);
    EXPECT_LE(orthonormality_defect(q), 1e-10);
}

TEST(RangeFinder, GeometricSpectrumSubspaceError) {
    Vector s(64);
    for (int j = 0; j < 64; ++j) s(j) = std::ldexp(1.0, -(j + 1));
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix a = with_spectrum(64, s, 7);
        const Matrix q = range_finder(BlockOracle::from_dense(a, seed), 8, 4);
        const Matrix resid = a - q * (q.transpose() * a);
        Eigen::JacobiSVD<Matrix> svd(resid);
        EXPECT_LE(svd.singularValues()(0), 10.0 * s(8)) << seed;
    }
}

TEST(RangeFinder, RejectsOversizedSketch) {
    EXPECT_THROW(range_finder(BlockOracle::from_dense(Matrix::Ones(4, 4)), 3, 2), ValidationError);
}

TEST(BlockOracle, ApplyIsLinear) {
    const Matrix a = gaussian(12, 9, 3);
    const BlockOracle o = BlockOracle::from_dense(a);
    const Matrix x = gaussian(9, 2, 4), y = gaussian(9, 2, 5);
    const Matrix lhs = o.apply(2.5 * x - 0.5 * y), rhs = 2.5 * o.apply(x) - 0.5 * o.apply(y);
    EXPECT_LE((lhs - rhs).norm() / rhs.norm(), 1e-10);
    EXPECT_LE((o.apply_transpose(gaussian(12, 1, 6)) - a.transpose() * gaussian(12, 1, 6)).norm(), 1e-12);
}

TEST(TruncatedSvd, ExactRankTwo) {
    const Matrix a = gaussian(40, 2, 1) * gaussian(30, 2, 2).transpose();
    const BlockOracle o = BlockOracle::from_dense(a, 3);
    const LowRankBlock b = truncated_svd_from_range(o, range_finder(o, 2, 5), 2);
    EXPECT_EQ(b.rank(), 2);
    EXPECT_LE((b.to_dense() - a).norm() / a.norm(), 1e-11);
}

TEST(TruncatedSvd, RankZeroIsEmpty) {
    const BlockOracle o = BlockOracle::from_dense(gaussian(10, 10, 1));
    const LowRankBlock b = truncated_svd_from_range(o, range_finder(o, 2, 2), 0);
    EXPECT_EQ(b.rank(), 0);
    EXPECT_EQ(b.apply(Matrix::Ones(10, 1)).norm(), 0.0);
}

TEST(TruncatedSvd, DiagonalKnownSpectrum) {
    const Matrix a = Vector(Eigen::Vector3d(3, 2, 1)).asDiagonal();
    const BlockOracle o = BlockOracle::from_dense(a);
    const Matrix q = orthonormal_basis(a);
    const LowRankBlock b = truncated_svd_from_range(o, q, 2);
    ASSERT_EQ(b.rank(), 2);
    EXPECT_NEAR(b.s(0), 3.0, 1e-14);
    EXPECT_NEAR(b.s(1), 2.0, 1e-14);
}

TEST(RsvdAdaptive, ZeroBlockIsRankZero) {
    const LowRankBlock b = rsvd_adaptive(BlockOracle::from_dense(Matrix::Zero(16, 16)), 1e-3, 8, 2);
    EXPECT_EQ(b.rank(), 0);
    EXPECT_TRUE(b.tolerance_met);
}

TEST(RsvdAdaptive, FlatRankThreeStopsAtFour) {
    const Matrix a = with_spectrum(40, Vector::Ones(3), 11);
    const LowRankBlock b = rsvd_adaptive(BlockOracle::from_dense(a, 2), 1e-8, 16, 2);
    EXPECT_EQ(b.selected_rank, 4);
    EXPECT_EQ(b.rank(), 3);
    EXPECT_TRUE(b.tolerance_met);
    EXPECT_LE((b.to_dense() - a).norm(), 1e-10);
}

TEST(RsvdAdaptive, DecadeSpectrumSelectsFourToSix) {
    Vector s(32);
    for (int j = 0; j < 32; ++j) s(j) = std::pow(10.0, -j);
    const Matrix a = with_spectrum(32, s, 21);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RsvdOptions opt;
        opt.oversampling = 5;
        opt.stream = seed;
        const LowRankBlock b = rsvd_adaptive(BlockOracle::from_dense(a, seed), 1e-4, 12, 1, opt);
        EXPECT_GE(b.rank(), 4) << seed;
        EXPECT_LE(b.rank(), 6) << seed;
    }
}

TEST(RsvdAdaptive, FlagsUnmetTolerance) {
    const Matrix a = gaussian(30, 30, 8);
    const LowRankBlock b = rsvd_adaptive(BlockOracle::from_dense(a), 1e-12, 4, 2);
    EXPECT_FALSE(b.tolerance_met);
    EXPECT_EQ(b.rank(), 4);
}

TEST(RsvdAdaptive, EstimateIsMonotoneInRankMedian) {
    Vector s(48);
    for (int j = 0; j < 48; ++j) s(j) = std::pow(0.6, j);
    const Matrix a = with_spectrum(48, s, 5);
    std::vector<double> med;
    for (int k = 1; k <= 10; ++k) {
        std::vector<double> est;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const BlockOracle o = BlockOracle::from_dense(a, seed);
            const LowRankBlock b = truncated_svd_from_range(o, range_finder(o, k, 10, seed), k);
            const Matrix probes = gaussian(48, 10, seed + 500);
            est.push_back(posterior_error(b, probes, a * probes));
        }
        std::nth_element(est.begin(), est.begin() + 10, est.end());
        med.push_back(est[10]);
    }
    for (std::size_t i = 1; i < med.size(); ++i) EXPECT_LE(med[i], med[i - 1]);
}

TEST(LowRank, ExactRankRecoveryManySeeds) {
    const Index sizes[] = {16, 64, 256};
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const Index n = sizes[seed % 3];
        const int r = 1 + static_cast<int>(seed % 5);
        const Matrix a = gaussian(n, r, seed) * gaussian(n - 3, r, seed + 77).transpose();
        const BlockOracle o = BlockOracle::from_dense(a, seed);
        const int p = std::min(10, static_cast<int>(n) - 3 - r);
        const LowRankBlock b = truncated_svd_from_range(o, range_finder(o, r, p, seed), r);
        EXPECT_LE((b.to_dense() - a).norm() / a.norm(), 1e-11) << seed;
        EXPECT_LE(orthonormality_defect(b.u), 1e-10);
        EXPECT_LE(orthonormality_defect(b.v), 1e-10);
        for (Index i = 1; i < b.s.size(); ++i) EXPECT_LE(b.s(i), b.s(i - 1));
        EXPECT_GE(b.s.minCoeff(), 0.0);
    }
}

TEST(LowRank, WhiteGaussianProcessProbesRecoverExactRank) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix a = gaussian(40, 3, seed) * gaussian(36, 3, seed + 9).transpose();
        BlockOracle o = BlockOracle::from_dense(a, seed);
        o.probes = ProbeSource::gaussian_process(factorize(Matrix::Identity(36, 36), seed));
        const LowRankBlock b = truncated_svd_from_range(o, range_finder(o, 3, 10, seed), 3);
        EXPECT_LE((b.to_dense() - a).norm() / a.norm(), 1e-11);
    }
}

TEST(LowRank, ApplyAndFrobenius) {
    EXPECT_EQ(LowRankBlock::empty(5, 4).apply(Matrix::Ones(4, 1)).norm(), 0.0);
    LowRankBlock id;
    id.rows = id.cols = 6;
    id.u = id.v = Matrix::Identity(6, 6);
    id.s = Vector::Ones(6);
    const Matrix x = gaussian(6, 1, 3);
    EXPECT_LE((id.apply(x) - x).norm(), 1e-12);
    LowRankBlock b;
    b.rows = b.cols = 2;
    b.u = b.v = Matrix::Identity(2, 2);
    b.s = Vector(Eigen::Vector2d(3, 4));
    EXPECT_DOUBLE_EQ(b.frob(), 5.0);
    EXPECT_THROW(b.apply(Matrix::Ones(3, 1)), ValidationError);
}

TEST(SketchReconstruction, ExactRankFromMirroredSketch) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix a = gaussian(24, 3, seed) * gaussian(20, 3, seed + 1).transpose();
        const Matrix omega_s = gaussian(20, 8, seed + 2), omega_t = gaussian(24, 8, seed + 3);
        BlockSketch sk;
        sk.range = a * omega_s;
        sk.corange = a.transpose() * omega_t;
        sk.omega_source = omega_s;
        const LowRankBlock b = reconstruct_from_sketch(sk, 3);
        EXPECT_LE((b.to_dense() - a).norm() / a.norm(), 1e-10) << seed;
        EXPECT_LE(orthonormality_defect(b.u), 1e-10);
        EXPECT_LE(orthonormality_defect(b.v), 1e-10);
    }
}

TEST(SketchReconstruction, AdaptiveUsesHeldOutProbes) {
    const Matrix a = gaussian(30, 2, 4) * gaussian(30, 2, 5).transpose();
    BlockSketch sk;
    sk.omega_source = gaussian(30, 12, 6);
    sk.range = a * sk.omega_source;
    sk.corange = a.transpose() * gaussian(30, 12, 7);
    sk.post_probes = gaussian(30, 10, 8);
    sk.post_responses = a * sk.post_probes;
    const LowRankBlock b = rsvd_adaptive_from_sketch(sk, 1e-9, 10, 1);
    EXPECT_EQ(b.rank(), 2);
    EXPECT_TRUE(b.tolerance_met);
    BlockSketch zero = sk;
    zero.range.setZero();
    zero.corange.setZero();
    zero.post_responses.setZero();
    EXPECT_EQ(rsvd_adaptive_from_sketch(zero, 1e-9, 10, 1).rank(), 0);
}
