#include "greenpeel/discrete_operator.hpp"

#include <cmath>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "greenpeel/errors.hpp"

namespace greenpeel {

namespace {

using DirectSolver = Eigen::SimplicialLLT<SparseMatrix>;
using IterativeSolver = Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>;

constexpr double cg_tolerance = 1e-11;

}  // namespace

// Direct sparse Cholesky for d <= 2; CG for d = 3 where fill-in would dominate.
// Eigen's CG keeps iteration statistics in the solver object, so each solve
// builds its own (the Jacobi preconditioner setup is a single pass).
struct DiscreteOperator::Factorization {
    std::variant<std::monostate, DirectSolver> solver;
};

DiscreteOperator::DiscreteOperator(Grid grid, SparseMatrix stiffness)
    : grid_(grid),
      stiffness_(std::move(stiffness)),
      factor_(std::make_unique<Factorization>()),
      solves_(std::make_unique<std::atomic<std::uint64_t>>(0)) {
    if (grid_.dim() <= 2) {
        auto& llt = factor_->solver.emplace<DirectSolver>();
        llt.compute(stiffness_);
        if (llt.info() != Eigen::Success)
            throw FactorizationError("sparse Cholesky failed: stiffness matrix is not positive definite");
    } else {
        for (Index k = 0; k < stiffness_.outerSize(); ++k)
            if (!(stiffness_.coeff(k, k) > 0.0))
                throw FactorizationError("stiffness matrix has a non-positive diagonal entry");
    }
}

DiscreteOperator::~DiscreteOperator() = default;
DiscreteOperator::DiscreteOperator(DiscreteOperator&&) noexcept = default;
DiscreteOperator& DiscreteOperator::operator=(DiscreteOperator&&) noexcept = default;

Vector DiscreteOperator::solve(const Vector& f) const {
    if (f.size() != grid_.total())
        throw ValidationError("forcing has length " + std::to_string(f.size()) + ", grid has " +
                              std::to_string(grid_.total()) + " nodes");
    solves_->fetch_add(1);
    return solve_uncounted(f);
}

Vector DiscreteOperator::solve_uncounted(const Vector& f) const {
    const double fnorm = f.norm();
    if (fnorm == 0.0) return Vector::Zero(f.size());

    Vector u;
    if (auto* llt = std::get_if<DirectSolver>(&factor_->solver)) {
        u = llt->solve(f);
    } else {
        IterativeSolver cg;
        cg.setTolerance(cg_tolerance);
        cg.setMaxIterations(std::max<Index>(1000, 10 * grid_.n() * grid_.dim()));
        cg.compute(stiffness_);
        u = cg.solve(f);
    }
    const double residual = (stiffness_ * u - f).norm() / fnorm;
    if (!(residual <= residual_tolerance)) throw SolverError("solve did not reach tolerance", residual);
    return u;
}

Matrix DiscreteOperator::solve(const Matrix& forcings, Execution exec) const {
    Matrix out(forcings.rows(), forcings.cols());
    parallel_for(exec, forcings.cols(), [&](std::int64_t j) { out.col(j) = solve(Vector(forcings.col(j))); });
    return out;
}

DiscreteOperator assemble(const Grid& grid, const CoefficientField& coeff) {
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(grid.total()) * (2 * grid.dim() + 1));

    auto flux = [&](const MultiIndex& m, int axis) {
        const double a = coeff.at_flux(grid, m, axis);
        if (!(a > 0.0) || !std::isfinite(a))
            throw EllipticityError("coefficient '" + coeff.name() + "' is not positive at a flux point (value " +
                                   std::to_string(a) + ")");
        return a;
    };

    Index stride = 1;
    std::array<Index, 3> strides{};
    for (int k = grid.dim() - 1; k >= 0; --k) {
        strides[k] = stride;
        stride *= grid.n();
    }

    for (Index i = 0; i < grid.total(); ++i) {
        const MultiIndex m = grid.multi_index(i);
        double diag = 0.0;
        for (int axis = 0; axis < grid.dim(); ++axis) {
            MultiIndex lower = m;
            lower[axis] -= 1;
            diag += flux(lower, axis);
            const double a_up = flux(m, axis);
            diag += a_up;
            if (m[axis] + 1 < grid.n()) {
                const Index j = i + strides[axis];
                triplets.emplace_back(i, j, -a_up * inv_h2);
                triplets.emplace_back(j, i, -a_up * inv_h2);
            }
        }
        triplets.emplace_back(i, i, diag * inv_h2);
    }
    SparseMatrix k(grid.total(), grid.total());
    k.setFromTriplets(triplets.begin(), triplets.end());
    return DiscreteOperator(grid, std::move(k));
}

FieldVector solve(const DiscreteOperator& op, const FieldVector& f) {
    return {op.solve(f.values), FieldRole::solution};
}

Matrix dense_kernel(const DiscreteOperator& op, Index dense_cap) {
    const Grid& g = op.grid();
    if (g.total() > dense_cap)
        throw CapExceeded("dense kernel of " + std::to_string(g.total()) + " nodes exceeds the dense cap " +
                          std::to_string(dense_cap));
    // Test-oracle use; these solves are not part of any training budget.
    Matrix kernel(g.total(), g.total());
    for (Index j = 0; j < g.total(); ++j) kernel.col(j) = op.solve_uncounted(Vector::Unit(g.total(), j));
    return kernel / g.quadrature_weight();
}

double hs_norm(const Matrix& kernel, const Grid& grid) { return grid.quadrature_weight() * kernel.norm(); }

double spectral_norm(const Matrix& a, std::uint64_t seed, int max_iterations, double rel_tol) {
    if (a.size() == 0) return 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vector x(a.cols());
    for (Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
    x.normalize();

    double sigma = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
        const Vector y = a * x;
        const double next = y.norm();
        if (next == 0.0) return sigma;
        Vector z = a.transpose() * y;
        const double znorm = z.norm();
        if (znorm == 0.0) return next;
        x = z / znorm;
        if (std::abs(next - sigma) <= rel_tol * next) return next;
        sigma = next;
    }
    return sigma;
}

double op_norm(const Matrix& kernel, const Grid& grid, std::uint64_t seed, int max_iterations, double rel_tol) {
    return grid.quadrature_weight() * spectral_norm(kernel, seed, max_iterations, rel_tol);
}

}  // namespace greenpeel
