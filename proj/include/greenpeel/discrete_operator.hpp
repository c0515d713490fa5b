#pragma once

#include <atomic>
#include <cstdint>
#include <memory>

#include <Eigen/SparseCore>

#include "greenpeel/grid.hpp"
#include "greenpeel/parallel.hpp"

namespace greenpeel {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Largest n^d for which dense kernels and dense covariances may be formed.
inline constexpr Index default_dense_cap = 4096;

/// Flux-form finite-difference discretisation of -div(a grad u) with zero
/// Dirichlet data, together with a reusable factorisation.
///
/// Solves are const and may run concurrently; the solve counter is atomic.
class DiscreteOperator {
public:
    DiscreteOperator(Grid grid, SparseMatrix stiffness);
    ~DiscreteOperator();
    DiscreteOperator(DiscreteOperator&&) noexcept;
    DiscreteOperator& operator=(DiscreteOperator&&) noexcept;

    const Grid& grid() const { return grid_; }
    const SparseMatrix& stiffness() const { return stiffness_; }

    /// u with K u = f; throws SolverError if the relative residual exceeds 1e-10.
    Vector solve(const Vector& f) const;
    /// Column-wise solve. Columns are independent; `exec` controls threading.
    Matrix solve(const Matrix& forcings, Execution exec) const;

    std::uint64_t solve_count() const { return solves_->load(); }
    void reset_solve_count() const { solves_->store(0); }

    static constexpr double residual_tolerance = 1e-10;

private:
    struct Factorization;
    friend Matrix dense_kernel(const DiscreteOperator&, Index);

    Vector solve_uncounted(const Vector& f) const;

    Grid grid_;
    SparseMatrix stiffness_;
    std::unique_ptr<Factorization> factor_;
    std::unique_ptr<std::atomic<std::uint64_t>> solves_;
};

DiscreteOperator assemble(const Grid& grid, const CoefficientField& coeff);

FieldVector solve(const DiscreteOperator& op, const FieldVector& f);

/// Kernel samples G_ij ~ G(x_i, x_j): K^{-1} / h^d.
Matrix dense_kernel(const DiscreteOperator& op, Index dense_cap = default_dense_cap);

/// Discrete Hilbert-Schmidt norm h^d ||G||_F.
double hs_norm(const Matrix& kernel, const Grid& grid);

/// L2 -> L2 operator norm h^d ||G||_2, by power iteration on G^T G.
double op_norm(const Matrix& kernel, const Grid& grid, std::uint64_t seed = 0x5eed,
               int max_iterations = 5000, double rel_tol = 1e-8);

/// ||A||_2 of a general dense matrix by the same power iteration.
double spectral_norm(const Matrix& a, std::uint64_t seed = 0x5eed, int max_iterations = 5000,
                     double rel_tol = 1e-8);

}  // namespace greenpeel
