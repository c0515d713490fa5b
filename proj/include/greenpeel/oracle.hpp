#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "greenpeel/dataset.hpp"
#include "greenpeel/errors.hpp"
#include "greenpeel/discrete_operator.hpp"
#include "greenpeel/hierarchy.hpp"
#include "greenpeel/parallel.hpp"

namespace greenpeel {

/// Black-box forcing -> solution map, the only access the learner has to
/// the unknown operator. Solutions include the quadrature weight:
/// u = h^d G f.
class SolutionOracle {
public:
    virtual ~SolutionOracle() = default;
    virtual const Grid& grid() const = 0;
    virtual Matrix solve(const Matrix& forcings, Execution exec) const = 0;
};

class PdeOracle final : public SolutionOracle {
public:
    explicit PdeOracle(const DiscreteOperator& op) : op_(op) {}
    const Grid& grid() const override { return op_.grid(); }
    Matrix solve(const Matrix& forcings, Execution exec) const override { return op_.solve(forcings, exec); }

private:
    const DiscreteOperator& op_;
};

/// Oracle backed by an explicit kernel matrix (analytic or synthetic).
class KernelOracle final : public SolutionOracle {
public:
    KernelOracle(Grid grid, Matrix kernel);
    const Grid& grid() const override { return grid_; }
    const Matrix& kernel() const { return kernel_; }
    Matrix solve(const Matrix& forcings, Execution exec) const override;

private:
    Grid grid_;
    Matrix kernel_;
};

/// Forwards to another oracle and keeps every pair it served, in call order.
class RecordingOracle final : public SolutionOracle {
public:
    explicit RecordingOracle(const SolutionOracle& inner) : inner_(inner), record_(inner.grid()) {}
    const Grid& grid() const override { return inner_.grid(); }
    Matrix solve(const Matrix& forcings, Execution exec) const override;
    const TrainingSet& record() const { return record_; }

private:
    const SolutionOracle& inner_;
    mutable std::mutex mutex_;
    mutable TrainingSet record_;
};

/// Thrown by ReplayOracle when a requested forcing is not in its dataset.
class ReplayMiss : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

/// Answers solves by bit-exact lookup of the forcing in a dataset.
class ReplayOracle final : public SolutionOracle {
public:
    explicit ReplayOracle(const TrainingSet& data);
    const Grid& grid() const override { return data_.grid; }
    Matrix solve(const Matrix& forcings, Execution exec) const override;

private:
    const TrainingSet& data_;
    std::unordered_multimap<std::uint64_t, Index> index_;
};

/// G(x, y) = min(x, y) (1 - max(x, y)) sampled at the nodes of a 1D grid.
Matrix poisson1d_kernel(const Grid& grid);

/// Symmetric kernel whose admissible blocks are exact rank-`rank` products of
/// Gaussian factors and whose near field is zero (or Gaussian-dense when
/// `dense_near` is set). Block (s, t) is the transpose of block (t, s).
Matrix synthetic_hierarchical_kernel(const BoxTree& tree, int rank, std::uint64_t seed, bool dense_near = false);

}  // namespace greenpeel
