#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "greenpeel/discrete_operator.hpp"
#include "greenpeel/grid.hpp"

namespace greenpeel {

enum class KernelKind { squared_exponential, white };

struct KernelSpec {
    KernelKind kind = KernelKind::squared_exponential;
    double length_scale = 0.2;

    static KernelSpec white() { return {KernelKind::white, 0.0}; }
    static KernelSpec squared_exponential(double length_scale);

    /// Probe kernel used on hierarchy level `level`: length scale / 2^level.
    KernelSpec for_level(int level) const;
    std::string name() const;
    static KernelSpec parse(const std::string& name, double length_scale);
};

/// C_ij = k(x_i, x_j); unit diagonal for both kernel kinds.
Matrix covariance_matrix(const Grid& grid, const KernelSpec& kernel, Index dense_cap = default_dense_cap);
Matrix covariance_matrix(std::span<const Point> points, const KernelSpec& kernel);

/// Lower-triangular L with L L^T = C + tau I, plus the seed that keys draws.
/// Immutable once built; concurrent draws are safe.
class CovarianceFactor {
public:
    /// Exact identity factor of the given size (white noise without forming C).
    static CovarianceFactor white(Index size, std::uint64_t seed);

    Index size() const { return size_; }
    double jitter() const { return jitter_; }
    std::uint64_t seed() const { return seed_; }
    bool is_identity() const { return identity_; }
    /// Dense lower factor; only valid when !is_identity().
    const Matrix& lower() const { return lower_; }

    /// Columns L z_j, z_j the standard normals of (seed, stream, first + j).
    Matrix draw(Index count, std::uint64_t stream, std::uint32_t first = 0) const;

private:
    friend CovarianceFactor factorize(const Matrix&, std::uint64_t, double);

    Matrix lower_;
    Index size_ = 0;
    double jitter_ = 0.0;
    std::uint64_t seed_ = 0;
    bool identity_ = false;
};

/// Cholesky of C + tau I. tau starts at jitter_start * mean(diag C) and grows
/// tenfold per failure; after 8 escalations throws FactorizationError.
CovarianceFactor factorize(const Matrix& covariance, std::uint64_t seed, double jitter_start = 1e-12);

std::vector<FieldVector> draw(const CovarianceFactor& factor, int count, std::uint64_t stream_id);

/// f on `support`, zero elsewhere.
FieldVector mask(const FieldVector& f, std::span<const Index> support);

/// Labelled stand-in for the training-data quality factor: how well the probe
/// covariance excites the dominant modes spanned by V_k.
struct QualityReport {
    int k = 0;
    double gamma_hat = 1.0;
    std::string method;
    bool underflow = false;
};

/// gamma_hat = lambda_min(V_k^T C V_k) / lambda_max(C), clamped into (0, 1].
QualityReport quality_proxy(const Matrix& covariance, const Matrix& modes);

/// Orthonormal eigenvectors of the k largest-magnitude eigenvalues of a
/// symmetric kernel, for use as `modes` above.
Matrix dominant_modes(const Matrix& symmetric_kernel, int k);

}  // namespace greenpeel
