#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "greenpeel/sweep.hpp"

namespace greenpeel {

/// Column names of the sweep CSV, in order.
inline constexpr const char* csv_header =
    "N_train,target,L,err_hs_rel,err_op_rel,sampled_err,gamma_hat,seed,wall_time,note";

void write_csv(std::ostream& out, const SweepResult& result);
void write_csv(const std::filesystem::path& path, const SweepResult& result);
/// Throws FormatError on a header mismatch or a malformed row.
SweepResult read_csv(const std::filesystem::path& path, const std::string& variable = "rank");

/// Per-target medians over seeds (failed rows skipped).
struct MedianRow {
    double target = 0.0;
    double n_train = 0.0;
    double err_hs_rel = 0.0;
    double err_op_rel = 0.0;
    double sampled_err = 0.0;
    int runs = 0;
    int failures = 0;
};

std::vector<MedianRow> median_table(const SweepResult& result);
std::string format_median_table(const std::vector<MedianRow>& table, const std::string& variable);

/// Theory overlay fitted to the successful rows: C0 chosen so that
/// C0 * n_theory(err, gamma) matches the observed N in the log-median sense.
struct TheoryFit {
    bool valid = false;
    double c0 = 0.0;
    double gamma = 1.0;
    int points = 0;
};

TheoryFit fit_theory(const SweepResult& result);

/// Log-linear plot: x = N_train, y = err_hs_rel (log axis), one series per
/// seed, the median, and the dashed fitted theory curve.
std::string render_svg(const SweepResult& result);
void write_svg(const std::filesystem::path& path, const SweepResult& result);

/// Footer shared by the SVG and the text table.
extern const char* const budget_footer;

}  // namespace greenpeel
