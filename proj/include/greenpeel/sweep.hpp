#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "greenpeel/config.hpp"

namespace greenpeel {

/// One (budget, seed) point. `target` is the fixed rank k or the tolerance
/// epsilon, depending on the sweep variable.
struct SweepRow {
    std::uint64_t n_train = 0;
    double target = 0.0;
    int levels = 0;
    double err_hs_rel = 0.0;
    double err_op_rel = 0.0;
    double sampled_err = 0.0;
    double gamma_hat = 0.0;
    std::uint64_t seed = 0;
    double wall_time = 0.0;
    std::string note;  ///< empty on success, the failure message otherwise
};

struct SweepResult {
    std::string variable = "rank";
    std::vector<SweepRow> rows;
};

/// Runs every (budget, seed) point of `config.sweep` on the configured PDE,
/// `workers` points at a time. Rows are ordered by (budget, seed) whatever
/// the completion order; a failing point becomes a row with a note.
SweepResult run_sweep(const RunConfig& config, int workers = 1);

}  // namespace greenpeel
