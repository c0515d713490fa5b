#pragma once

#include "greenpeel/discrete_operator.hpp"
#include "greenpeel/oracle.hpp"
#include "greenpeel/peeling.hpp"

namespace greenpeel {

/// Errors of a learned operator against the dense kernel, all relative to
/// the kernel's HS norm.
struct ExactErrors {
    double err_hs_rel = 0.0;    ///< ||G - A||_HS / ||G||_HS
    double err_op_rel = 0.0;    ///< ||G - A||_2 / ||G||_HS
    double far_hs_rel = 0.0;    ///< HS error restricted to the admissible region
    double floor_hs_rel = 0.0;  ///< HS mass of the finest near blocks of G
    double floor_op_rel = 0.0;  ///< ||G restricted to near blocks||_2 / ||G||_HS
};

/// Compares against explicit kernel samples G (n^d x n^d). The floors are
/// those of the neglect policy regardless of the approximation's policy.
ExactErrors evaluate_exact(const HierarchicalApprox& approx, const Matrix& kernel, bool with_op_norms = true);
ExactErrors evaluate_exact(const HierarchicalApprox& approx, const DiscreteOperator& op,
                           Index dense_cap = default_dense_cap);

/// Sampled test error over forcing/solution pairs.
struct SampledErrors {
    double mean_raw = 0.0;  ///< mean ||u - A f|| / ||f||
    double max_raw = 0.0;
    double mean_rel = 0.0;  ///< mean_raw / hs_norm_estimate
    double max_rel = 0.0;
    double hs_norm_estimate = 0.0;
    Index pairs = 0;
};

/// Throws ValidationError on an empty test set or a non-positive estimate.
SampledErrors evaluate_sampled(const HierarchicalApprox& approx, const TrainingSet& test, double hs_norm_estimate,
                               Execution exec = {});

/// Randomized estimate of the HS norm h^d ||G||_F from `probes` standard-normal
/// solves: E ||u||^2 = h^(2d) ||G||_F^2.
double hs_norm_estimate(const SolutionOracle& oracle, int probes, std::uint64_t seed, Execution exec = {});

/// Smooth test forcings: `count` draws of a squared-exponential field over the
/// whole grid, and their solutions.
TrainingSet make_test_set(const SolutionOracle& oracle, int count, const KernelSpec& kernel, std::uint64_t seed,
                          Execution exec = {});

}  // namespace greenpeel
