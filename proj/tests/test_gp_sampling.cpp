#include <cmath>

#include <gtest/gtest.h>

#include "greenpeel/errors.hpp"
#include "greenpeel/gp_sampling.hpp"

using namespace greenpeel;

TEST(Covariance, WhiteIsIdentity) {
    const Matrix c = covariance_matrix(Grid(2, 5), KernelSpec::white());
    EXPECT_EQ((c - Matrix::Identity(25, 25)).norm(), 0.0);
}

TEST(Covariance, SquaredExponentialAtOneLengthScale) {
    const Point pts[] = {{0.1, 0.0, 0.0}, {0.4, 0.0, 0.0}};
    const Matrix c = covariance_matrix(pts, KernelSpec::squared_exponential(0.3));
    EXPECT_NEAR(c(0, 1), std::exp(-0.5), 1e-12);
    EXPECT_NEAR(c(0, 1), 0.606531, 1e-6);
}

TEST(Covariance, UnitDiagonalAndSymmetric) {
    for (const KernelSpec& k : {KernelSpec::white(), KernelSpec::squared_exponential(0.15)}) {
        const Matrix c = covariance_matrix(Grid(2, 6), k);
        EXPECT_EQ((c.diagonal().array() - 1.0).abs().maxCoeff(), 0.0);
        EXPECT_EQ((c - c.transpose()).norm(), 0.0);
    }
}

TEST(Covariance, RejectsBadLengthAndCap) {
    EXPECT_THROW(KernelSpec::squared_exponential(0.0), ValidationError);
    EXPECT_THROW(KernelSpec::squared_exponential(-1.0), ValidationError);
    EXPECT_THROW(KernelSpec::squared_exponential(INFINITY), ValidationError);
    EXPECT_THROW(covariance_matrix(Grid(2, 80), KernelSpec::white()), CapExceeded);
}

TEST(Covariance, LevelScaling) {
    const KernelSpec k = KernelSpec::squared_exponential(0.2);
    EXPECT_DOUBLE_EQ(k.for_level(0).length_scale, 0.2);
    EXPECT_DOUBLE_EQ(k.for_level(3).length_scale, 0.025);
    EXPECT_EQ(KernelSpec::white().for_level(4).kind, KernelKind::white);
}

TEST(Factorize, IdentityGetsOneJitterStep) {
    const CovarianceFactor f = factorize(Matrix::Identity(6, 6), 1, 1e-12);
    EXPECT_DOUBLE_EQ(f.jitter(), 1e-12);
    EXPECT_LT((f.lower() - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Factorize, SmoothKernelNeedsLittleJitter) {
    const Matrix c = covariance_matrix(Grid(1, 32), KernelSpec::squared_exponential(0.2));
    const CovarianceFactor f = factorize(c, 1);
    EXPECT_LE(f.jitter(), 1e-8);
    const Matrix llt = f.lower() * f.lower().transpose();
    EXPECT_LE((llt - c).cwiseAbs().maxCoeff(), f.jitter() + 1e-10);
}

TEST(Factorize, IndefiniteInputFails) {
    Matrix c = Matrix::Identity(4, 4);
    c(2, 2) = -1.0;
    try {
        factorize(c, 1);
        FAIL() << "expected FactorizationError";
    } catch (const FactorizationError& e) {
        EXPECT_NE(std::string(e.what()).find("covariance not factorizable"), std::string::npos);
    }
}

TEST(Draw, EmpiricalCovarianceMatchesIdentity) {
    const int count = 10000;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const CovarianceFactor f = factorize(Matrix::Identity(8, 8), seed);
        const Matrix z = f.draw(count, 7);
        const Matrix emp = z * z.transpose() / count;
        EXPECT_LE((emp - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 5.0 / std::sqrt(count)) << seed;
    }
}

TEST(Draw, EmpiricalCovarianceMatchesKernel) {
    const int count = 10000;
    const Matrix c = covariance_matrix(Grid(1, 8), KernelSpec::squared_exponential(0.3));
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const Matrix z = factorize(c, seed).draw(count, 2);
        const Matrix emp = z * z.transpose() / count;
        EXPECT_LE((emp - c).cwiseAbs().maxCoeff(), 5.0 / std::sqrt(count)) << seed;
    }
}

TEST(Draw, DeterministicAndOrderIndependent) {
    const Matrix c = covariance_matrix(Grid(1, 16), KernelSpec::squared_exponential(0.1));
    const CovarianceFactor f = factorize(c, 42);
    const Matrix a = f.draw(6, 3);
    const Matrix b = f.draw(6, 3);
    EXPECT_EQ((a - b).norm(), 0.0);
    const Matrix tail = f.draw(2, 3, 4);
    EXPECT_EQ((a.rightCols(2) - tail).norm(), 0.0);
    EXPECT_GT((f.draw(6, 4) - a).norm(), 0.0);
    EXPECT_GT((factorize(c, 43).draw(6, 3) - a).norm(), 0.0);
}

TEST(Draw, VectorInterface) {
    const CovarianceFactor f = CovarianceFactor::white(5, 1);
    EXPECT_TRUE(draw(f, 0, 1).empty());
    const auto v = draw(f, 3, 1);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0].values.size(), 5);
    EXPECT_EQ(v[0].role, FieldRole::forcing);
}

TEST(Mask, Examples) {
    const FieldVector f{(Vector(4) << 1, 2, 3, 4).finished(), FieldRole::forcing};
    const Index all[] = {0, 1, 2, 3};
    EXPECT_EQ((mask(f, all).values - f.values).norm(), 0.0);
    EXPECT_EQ(mask(f, {}).values.norm(), 0.0);
    const Index some[] = {0, 2};
    const Vector expected = (Vector(4) << 1, 0, 3, 0).finished();
    EXPECT_EQ((mask(f, some).values - expected).norm(), 0.0);
}

TEST(Mask, IsAProjection) {
    const CovarianceFactor fac = CovarianceFactor::white(20, 5);
    const FieldVector f{fac.draw(1, 0).col(0), FieldRole::forcing};
    const Index s[] = {1, 4, 9, 19};
    const FieldVector once = mask(f, s);
    EXPECT_EQ((mask(once, s).values - once.values).norm(), 0.0);
}

TEST(Quality, IdentityCovarianceIsPerfect) {
    const Matrix c = Matrix::Identity(10, 10);
    const Matrix v = Eigen::HouseholderQR<Matrix>(Matrix::Random(10, 3)).householderQ() * Matrix::Identity(10, 3);
    const QualityReport q = quality_proxy(c, v);
    EXPECT_NEAR(q.gamma_hat, 1.0, 1e-10);
    EXPECT_EQ(q.k, 3);
    EXPECT_FALSE(q.method.empty());
}

TEST(Quality, MissedModeIsTiny) {
    Vector d = Vector::Constant(6, 1e-12);
    d(0) = 1.0;
    const Matrix c = d.asDiagonal();
    const Matrix v = Matrix::Identity(6, 6).col(1);
    const QualityReport q = quality_proxy(c, v);
    EXPECT_NEAR(q.gamma_hat, 1e-12, 1e-14);
    EXPECT_GT(q.gamma_hat, 0.0);
}

TEST(Quality, NearWhiteKernelProbesPoissonModes) {
    const Grid g(1, 32);
    Matrix modes(32, 4);
    for (int k = 0; k < 4; ++k) {
        for (int i = 0; i < 32; ++i) modes(i, k) = std::sin((k + 1) * M_PI * g.coordinate(i));
        modes.col(k).normalize();
    }
    const QualityReport q = quality_proxy(covariance_matrix(g, KernelSpec::squared_exponential(0.01)), modes);
    EXPECT_GE(q.gamma_hat, 0.5);
    EXPECT_LE(q.gamma_hat, 1.0);
}

TEST(Quality, ScaleInvariant) {
    const Matrix c = covariance_matrix(Grid(1, 16), KernelSpec::squared_exponential(0.1));
    Matrix v = Matrix::Zero(16, 2);
    v(3, 0) = 1.0;
    v(9, 1) = 1.0;
    EXPECT_NEAR(quality_proxy(c, v).gamma_hat, quality_proxy(7.5 * c, v).gamma_hat, 1e-12);
}

TEST(Quality, RejectsNonOrthonormalModes) {
    EXPECT_THROW(quality_proxy(Matrix::Identity(4, 4), Matrix::Ones(4, 2)), ValidationError);
}

TEST(Quality, DominantModesAreOrthonormal) {
    const Matrix c = covariance_matrix(Grid(1, 20), KernelSpec::squared_exponential(0.1));
    const Matrix v = dominant_modes(c, 5);
    EXPECT_LE((v.transpose() * v - Matrix::Identity(5, 5)).norm(), 1e-10);
}
