#include "greenpeel/gp_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "greenpeel/errors.hpp"
#include "greenpeel/philox.hpp"

namespace greenpeel {

KernelSpec KernelSpec::squared_exponential(double length_scale) {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
        throw ValidationError("squared_exponential length scale must be finite and positive");
    return {KernelKind::squared_exponential, length_scale};
}

KernelSpec KernelSpec::for_level(int level) const {
    if (kind == KernelKind::white) return *this;
    return {kind, std::ldexp(length_scale, -level)};
}

std::string KernelSpec::name() const {
    return kind == KernelKind::white ? "white" : "squared_exponential";
}

KernelSpec KernelSpec::parse(const std::string& name, double length_scale) {
    if (name == "white") return white();
    if (name == "squared_exponential") return squared_exponential(length_scale);
    throw ValidationError("unknown kernel '" + name + "' (expected squared_exponential or white)");
}

Matrix covariance_matrix(std::span<const Point> points, const KernelSpec& kernel) {
    const auto m = static_cast<Index>(points.size());
    if (kernel.kind == KernelKind::white) return Matrix::Identity(m, m);
    const double inv2l2 = 1.0 / (2.0 * kernel.length_scale * kernel.length_scale);
    Matrix c(m, m);
    for (Index j = 0; j < m; ++j) {
        c(j, j) = 1.0;
        for (Index i = j + 1; i < m; ++i) {
            double r2 = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double dx = points[i][k] - points[j][k];
                r2 += dx * dx;
            }
            c(i, j) = c(j, i) = std::exp(-r2 * inv2l2);
        }
    }
    return c;
}

Matrix covariance_matrix(const Grid& grid, const KernelSpec& kernel, Index dense_cap) {
    if (grid.total() > dense_cap)
        throw CapExceeded("covariance of " + std::to_string(grid.total()) + " nodes exceeds the dense cap " +
                          std::to_string(dense_cap));
    std::vector<Point> pts(static_cast<std::size_t>(grid.total()));
    for (Index i = 0; i < grid.total(); ++i) pts[static_cast<std::size_t>(i)] = grid.node(i);
    return covariance_matrix(pts, kernel);
}

CovarianceFactor CovarianceFactor::white(Index size, std::uint64_t seed) {
    CovarianceFactor f;
    f.size_ = size;
    f.seed_ = seed;
    f.identity_ = true;
    return f;
}

Matrix CovarianceFactor::draw(Index count, std::uint64_t stream, std::uint32_t first) const {
    Matrix z(size_, count);
    for (Index j = 0; j < count; ++j)
        fill_standard_normal(seed_, stream, first + static_cast<std::uint32_t>(j),
                             std::span<double>(z.col(j).data(), static_cast<std::size_t>(size_)));
    if (identity_) return z;
    return lower_.triangularView<Eigen::Lower>() * z;
}

CovarianceFactor factorize(const Matrix& covariance, std::uint64_t seed, double jitter_start) {
    if (covariance.rows() != covariance.cols()) throw ValidationError("covariance must be square");
    const Index m = covariance.rows();
    constexpr int max_escalations = 8;
    double tau = jitter_start * (m > 0 ? covariance.diagonal().mean() : 1.0);
    for (int attempt = 0; attempt <= max_escalations; ++attempt, tau *= 10.0) {
        Matrix shifted = covariance;
        shifted.diagonal().array() += tau;
        Eigen::LLT<Matrix> llt(shifted);
        if (llt.info() != Eigen::Success) continue;
        CovarianceFactor f;
        f.lower_ = llt.matrixL();
        f.size_ = m;
        f.jitter_ = tau;
        f.seed_ = seed;
        return f;
    }
    throw FactorizationError("covariance not factorizable after " + std::to_string(max_escalations) +
                             " jitter escalations");
}

std::vector<FieldVector> draw(const CovarianceFactor& factor, int count, std::uint64_t stream_id) {
    std::vector<FieldVector> out;
    if (count <= 0) return out;
    const Matrix samples = factor.draw(count, stream_id);
    out.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) out.push_back({samples.col(j), FieldRole::forcing});
    return out;
}

FieldVector mask(const FieldVector& f, std::span<const Index> support) {
    FieldVector out{Vector::Zero(f.values.size()), f.role};
    for (Index i : support) {
        if (i < 0 || i >= f.values.size()) throw ValidationError("mask index out of range");
        out.values[i] = f.values[i];
    }
    return out;
}

QualityReport quality_proxy(const Matrix& covariance, const Matrix& modes) {
    if (modes.rows() != covariance.rows())
        throw ValidationError("modes have " + std::to_string(modes.rows()) + " rows, covariance has " +
                              std::to_string(covariance.rows()));
    const Index k = modes.cols();
    const double defect = (modes.transpose() * modes - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
    if (!(defect <= 1e-10))
        throw ValidationError("modes are not orthonormal (max |V^T V - I| = " + std::to_string(defect) + ")");

    const Matrix projected = modes.transpose() * covariance * modes;
    Eigen::SelfAdjointEigenSolver<Matrix> small(projected, Eigen::EigenvaluesOnly);
    const double lambda_max = spectral_norm(covariance, 0x9a77a, 10000, 1e-12);

    QualityReport report;
    report.k = static_cast<int>(k);
    report.method = "proxy:min-rayleigh-over-lambda-max";
    double gamma = lambda_max > 0.0 ? small.eigenvalues().minCoeff() / lambda_max : 0.0;
    if (!(gamma > 0.0)) {
        gamma = std::numeric_limits<double>::min();
        report.underflow = true;
    }
    report.gamma_hat = std::min(gamma, 1.0);
    return report;
}

Matrix dominant_modes(const Matrix& symmetric_kernel, int k) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric_kernel);
    const Index n = symmetric_kernel.rows();
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return std::abs(eig.eigenvalues()[a]) > std::abs(eig.eigenvalues()[b]);
    });
    Matrix v(n, k);
    for (int j = 0; j < k; ++j) v.col(j) = eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    return v;
}

}  // namespace greenpeel
