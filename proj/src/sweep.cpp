#include "greenpeel/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "greenpeel/errors.hpp"
#include "greenpeel/evaluation.hpp"

namespace greenpeel {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr int sweep_hs_probes = 10;

}  // namespace

SweepResult run_sweep(const RunConfig& config, int workers) {
    validate(config);
    if (config.sweep.budgets.size() < 2) throw ValidationError("sweep.budgets: at least two budget points required");

    const Grid grid(config.problem.d, config.problem.n);
    const DiscreteOperator op = assemble(grid, CoefficientField::preset(config.problem.coefficient));
    const PdeOracle oracle(op);
    const Execution pool{std::max(1, workers)};

    Matrix kernel;
    double gamma_hat = nan;
    if (config.evaluation.dense_oracle) {
        kernel = dense_kernel(op);
        const Matrix modes = dominant_modes(kernel, std::min<int>(config.evaluation.quality_modes,
                                                                   static_cast<int>(grid.total())));
        gamma_hat = quality_proxy(covariance_matrix(grid, probe_kernel(config)), modes).gamma_hat;
    }
    const KernelSpec test_kernel =
        grid.total() <= default_dense_cap ? KernelSpec::squared_exponential(0.2) : KernelSpec::white();
    const TrainingSet test =
        make_test_set(oracle, config.evaluation.test_set_size, test_kernel, config.sampling.seed, pool);
    const double hs_est = hs_norm_estimate(oracle, sweep_hs_probes, config.sampling.seed, pool);

    std::vector<double> budgets = config.sweep.budgets;
    std::vector<std::uint64_t> seeds = config.sweep.seeds;
    std::sort(budgets.begin(), budgets.end());
    std::sort(seeds.begin(), seeds.end());

    SweepResult result;
    result.variable = config.sweep.variable;
    result.rows.resize(budgets.size() * seeds.size());
    // Points run concurrently; each point's learn is serial so that its
    // output does not depend on how the pool is sized.
    parallel_for(pool, static_cast<std::int64_t>(result.rows.size()), [&](std::int64_t i) {
        const double budget = budgets[static_cast<std::size_t>(i) / seeds.size()];
        const std::uint64_t seed = seeds[static_cast<std::size_t>(i) % seeds.size()];
        RunConfig point = config;
        point.sampling.seed = seed;
        if (config.sweep.variable == "rank") point.algorithm.rank = {static_cast<int>(budget)};
        else {
            point.algorithm.rank.clear();
            point.algorithm.epsilon = budget;
        }
        PeelConfig peel = peel_config(point);
        peel.exec = Execution::serial();

        SweepRow& row = result.rows[static_cast<std::size_t>(i)];
        row.target = budget;
        row.levels = point.hierarchy.levels;
        row.seed = seed;
        row.gamma_hat = gamma_hat;
        const auto start = std::chrono::steady_clock::now();
        try {
            const LearnResult learned = learn(oracle, peel);
            row.n_train = learned.ledger.training_total();
            if (config.evaluation.dense_oracle) {
                const ExactErrors e = evaluate_exact(learned.approx, kernel);
                row.err_hs_rel = e.err_hs_rel;
                row.err_op_rel = e.err_op_rel;
            } else {
                row.err_hs_rel = nan;
                row.err_op_rel = nan;
            }
            row.sampled_err = evaluate_sampled(learned.approx, test, hs_est).mean_rel;
        } catch (const std::exception& e) {
            row.n_train = expected_training_solves(BoxTree(grid, peel.levels), peel);
            row.err_hs_rel = row.err_op_rel = row.sampled_err = nan;
            row.note = e.what();
        }
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return result;
}

}  // namespace greenpeel
