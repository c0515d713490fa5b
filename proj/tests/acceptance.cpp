// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "greenpeel/config.hpp"
#include "greenpeel/dataset.hpp"
#include "greenpeel/evaluation.hpp"
#include "greenpeel/oracle.hpp"
#include "greenpeel/peeling.hpp"
#include "greenpeel/report.hpp"
#include "greenpeel/sweep.hpp"
#include "greenpeel/theory.hpp"

using namespace greenpeel;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Budget bookkeeping shared by every run: (ledger N, closed form, oracle count).
struct BudgetAudit {
    int runs = 0;
    int mismatches = 0;
    void record(const LearnResult& r, const PeelConfig& cfg, std::uint64_t oracle_solves) {
        ++runs;
        const std::uint64_t n = r.ledger.training_total();
        if (n != expected_training_solves(r.approx.tree(), cfg) || n != oracle_solves) ++mismatches;
    }
};

class CountingOracle final : public SolutionOracle {
public:
    explicit CountingOracle(const SolutionOracle& inner) : inner_(inner) {}
    const Grid& grid() const override { return inner_.grid(); }
    Matrix solve(const Matrix& f, Execution exec) const override {
        count_ += static_cast<std::uint64_t>(f.cols());
        return inner_.solve(f, exec);
    }
    std::uint64_t count() const { return count_; }
    void reset() { count_ = 0; }

private:
    const SolutionOracle& inner_;
    mutable std::uint64_t count_ = 0;
};

LearnResult audited_learn(const SolutionOracle& oracle, const PeelConfig& cfg, BudgetAudit& audit) {
    CountingOracle counter(oracle);
    LearnResult r = learn(counter, cfg);
    audit.record(r, cfg, counter.count());
    return r;
}

PeelConfig fixed_rank(int levels, int rank, NearFieldPolicy near, std::uint64_t seed) {
    PeelConfig c;
    c.levels = levels;
    c.fixed_ranks = {rank};
    c.near_field = near;
    c.seed = seed;
    return c;
}

// Node samples of min(x, y)(1 - max(x, y)), the 1D Dirichlet Laplacian kernel.
Matrix analytic_poisson(int n) {
    Matrix k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = (i + 1.0) / (n + 1), y = (j + 1.0) / (n + 1);
            k(i, j) = std::min(x, y) * (1 - std::max(x, y));
        }
    return k;
}

// Fraction of the kernel's squared HS mass within one leaf box of the diagonal.
double analytic_near_fraction(int n, int levels) {
    const int w = n >> levels;
    long double near = 0, all = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const long double x = (i + 1.0L) / (n + 1), y = (j + 1.0L) / (n + 1);
            const long double g = std::min(x, y) * (1 - std::max(x, y));
            all += g * g;
            if (std::abs(i / w - j / w) <= 1) near += g * g;
        }
    return static_cast<double>(std::sqrt(near / all));
}

Outcome criterion1(BudgetAudit& audit) {
    const auto start = Clock::now();
    const Grid g(1, 128);
    const BoxTree tree(g, 4);
    int failures = 0;
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const Matrix k = synthetic_hierarchical_kernel(tree, 3, seed, false);
        const KernelOracle oracle(g, k);
        const LearnResult r = audited_learn(oracle, fixed_rank(4, 3, NearFieldPolicy::neglect, seed), audit);
        bool ok = true;
        for (int l = first_admissible_level; l <= 4; ++l) {
            const TreeLevel& lvl = r.approx.tree().level(l);
            for (const LowRankBlock& b : r.approx.level_blocks(l)) {
                const Matrix exact = k(lvl.boxes[b.target].nodes, lvl.boxes[b.source].nodes);
                const double e = (b.to_dense() - exact).norm() / exact.norm();
                worst = std::max(worst, e);
                if (!(e <= 1e-10)) ok = false;
            }
        }
        failures += !ok;
    }
    const double t = seconds_since(start);
    return {failures == 0 && t < 30.0, "50 seeds, " + std::to_string(failures) + " failures, worst block error " +
                                           fmt("%.2e", worst) + ", " + fmt("%.1f s", t) + " (limit 30 s)"};
}

Outcome criterion2(BudgetAudit& audit) {
    const Grid g(1, 256);
    const DiscreteOperator op = assemble(g, CoefficientField::identity());
    const PdeOracle oracle(op);
    const Matrix k = analytic_poisson(256);
    Outcome o;
    const LearnResult dense = audited_learn(oracle, fixed_rank(5, 1, NearFieldPolicy::dense_probe, 1), audit);
    const double e_dense = (dense.approx.to_dense() - k).norm() / k.norm();
    o.pass = e_dense <= 1e-8;
    o.detail = "dense_probe err " + fmt("%.2e", e_dense) + " (<= 1e-8); neglect";
    double previous = 1.0;
    for (int L : {3, 4, 5}) {
        const LearnResult r = audited_learn(oracle, fixed_rank(L, 1, NearFieldPolicy::neglect, 1), audit);
        const double err = (r.approx.to_dense() - k).norm() / k.norm();
        const double floor = analytic_near_fraction(256, L);
        o.pass = o.pass && std::abs(err - floor) <= 1e-6 && floor < previous;
        previous = floor;
        o.detail += " L=" + std::to_string(L) + ": " + fmt("%.6f", err) + " vs " + fmt("%.6f", floor);
    }
    return o;
}

struct RankSweep {
    std::vector<double> n_train, err, far, floor;
};

RankSweep poisson_rank_sweep(const PdeOracle& oracle, const Matrix& kernel, NearFieldPolicy near,
                             BudgetAudit& audit) {
    RankSweep s;
    for (int k = 1; k <= 8; ++k) {
        std::vector<double> n, e, f, fl;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const LearnResult r = audited_learn(oracle, fixed_rank(3, k, near, seed), audit);
            const ExactErrors ee = evaluate_exact(r.approx, kernel, false);
            n.push_back(static_cast<double>(r.ledger.training_total()));
            e.push_back(ee.err_hs_rel);
            f.push_back(ee.far_hs_rel);
            fl.push_back(ee.floor_hs_rel);
        }
        s.n_train.push_back(median(n));
        s.err.push_back(median(e));
        s.far.push_back(median(f));
        s.floor.push_back(median(fl));
    }
    return s;
}

Outcome criterion3(const RankSweep& s, double seconds) {
    Outcome o;
    std::ostringstream d;
    d << "floor " << fmt("%.4f", s.floor[0]) << "; median err_hs_rel k=1..8:";
    for (double e : s.err) d << ' ' << fmt("%.6f", e);
    d << "; far-field ratios:";
    for (std::size_t i = 1; i < s.far.size(); ++i) {
        if (s.far[i - 1] < 1e-12) break;
        const double ratio = s.far[i] / s.far[i - 1];
        d << ' ' << fmt("%.3f", ratio);
        if (!(ratio <= 0.8)) o.pass = false;
    }
    d << "; " << fmt("%.1f s", seconds) << " (limit 300 s)";
    if (!(seconds < 300.0)) o.pass = false;
    o.detail = d.str();
    return o;
}

// Global randomized SVD using exactly `budget` solves: half sketch the range,
// half apply the operator to the orthonormal basis (the kernel is symmetric).
double global_rsvd_error(const SolutionOracle& oracle, const Matrix& kernel, Index budget, std::uint64_t seed) {
    const Index total = kernel.rows();
    const Index width = std::min(total, budget / 2);
    const double w = oracle.grid().quadrature_weight();
    const Matrix omega = CovarianceFactor::white(total, seed).draw(width, 0x61);
    const Matrix y = oracle.solve(omega, Execution::serial()) / w;
    Eigen::HouseholderQR<Matrix> qr(y);
    const Matrix q = qr.householderQ() * Matrix::Identity(total, width);
    const Matrix gq = oracle.solve(q, Execution::serial()) / w;
    const Matrix approx = q * gq.transpose();
    return (approx - kernel).norm() / kernel.norm();
}

struct TrendCheck {
    bool convex = false;
    double ratio = 0.0;
    std::string detail;
};

TrendCheck sample_efficiency(const RankSweep& s, const PdeOracle& oracle, const Matrix& kernel) {
    TrendCheck c;
    std::ostringstream d;
    std::vector<double> slope;
    for (std::size_t i = 1; i < s.err.size(); ++i)
        slope.push_back((std::log(s.err[i]) - std::log(s.err[i - 1])) /
                        (std::log(s.n_train[i]) - std::log(s.n_train[i - 1])));
    d << "|slope| of log err vs log N:";
    for (double v : slope) d << ' ' << fmt("%.3g", std::abs(v));
    c.convex = true;
    for (std::size_t t = 0; t < 3; ++t)
        if (!(std::abs(slope[t + 1]) > std::abs(slope[t]))) c.convex = false;
    d << (c.convex ? " (increasing over first 3 triples)" : " (not increasing over first 3 triples)");
    std::vector<double> baseline;
    const auto budget = static_cast<Index>(s.n_train.back());
    for (std::uint64_t seed = 1; seed <= 10; ++seed) baseline.push_back(global_rsvd_error(oracle, kernel, budget, seed));
    const double global = median(baseline);
    c.ratio = global / s.err.back();
    d << "; global rSVD at N=" << budget << ": " << fmt("%.3e", global) << " vs hierarchical "
      << fmt("%.3e", s.err.back()) << " (ratio " << fmt("%.3g", c.ratio) << ", need >= 2)";
    c.detail = d.str();
    return c;
}

Outcome criterion4(const RankSweep& s, const RankSweep& dense, const PdeOracle& oracle, const Matrix& kernel) {
    const TrendCheck neglect = sample_efficiency(s, oracle, kernel);
    const TrendCheck probed = sample_efficiency(dense, oracle, kernel);
    return {neglect.convex && neglect.ratio >= 2.0,
            "neglect sweep: " + neglect.detail + " | for reference, dense_probe sweep (not scored): " + probed.detail};
}

Outcome criterion5(BudgetAudit& audit) {
    const Grid g(2, 32);
    const DiscreteOperator op = assemble(g, CoefficientField::preset("checkerboard"));
    const PdeOracle oracle(op);
    const Matrix kernel = dense_kernel(op);
    Outcome o;
    int failures = 0;
    double worst_margin = -1;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        PeelConfig cfg;
        cfg.levels = 3;
        cfg.epsilon = 1e-2;
        cfg.seed = seed;
        try {
            const LearnResult r = audited_learn(oracle, cfg, audit);
            const ExactErrors e = evaluate_exact(r.approx, kernel);
            const double margin = e.err_op_rel - (1e-2 + e.floor_op_rel);
            worst_margin = std::max(worst_margin, margin);
            failures += !(margin <= 0);
        } catch (const std::exception&) {
            ++failures;
        }
    }
    o.pass = failures == 0;
    o.detail = "10 seeds, " + std::to_string(failures) + " failures, max err_op_rel - (1e-2 + floor) = " +
               fmt("%.3e", worst_margin);
    return o;
}

Outcome criterion6(const BudgetAudit& audit) {
    return {audit.runs > 0 && audit.mismatches == 0,
            std::to_string(audit.runs) + " runs, " + std::to_string(audit.mismatches) +
                " where ledger N differs from the closed form or the oracle count"};
}

Outcome criterion7() {
    using big = boost::multiprecision::cpp_bin_float_50;
    Outcome o;
    const double lf = failure_bound_log10(1e-3);
    const double fb = failure_bound(1e-3);
    o.pass = fb > 1e-144 && fb < 1e-143;
    double worst = 0;
    double prev_n = 0, prev_f = 1;
    bool monotone = true;
    for (int i = 0; i < 120; ++i) {
        const double eps = 0.35 * std::pow(10.0, -i / 12.0);
        for (double gamma : {1.0, 0.3, 1e-3}) {
            const big l = boost::multiprecision::log(1 / big(eps));
            const big ref = boost::multiprecision::pow(l, 5) *
                            boost::multiprecision::pow(boost::multiprecision::log(l) -
                                                           boost::multiprecision::log(big(gamma)), 4);
            worst = std::max(worst, std::abs(n_theory(eps, gamma) / static_cast<double>(ref) - 1));
        }
        const big ref_f = -boost::multiprecision::pow(boost::multiprecision::log(1 / big(eps)), 3) /
                          boost::multiprecision::log(big(10));
        worst = std::max(worst, std::abs(failure_bound_log10(eps) / static_cast<double>(ref_f) - 1));
        const double n = n_theory(eps, 1.0), f = failure_bound(eps);
        monotone = monotone && n > prev_n && f <= prev_f;
        prev_n = n;
        prev_f = f;
    }
    prev_n = 0;
    for (int i = 0; i < 60; ++i) {
        const double n = n_theory(1e-3, std::pow(10.0, -i / 6.0));
        monotone = monotone && n > prev_n;
        prev_n = n;
    }
    o.pass = o.pass && monotone && worst <= 1e-12;
    o.detail = "failure_bound(1e-3) = 10^" + fmt("%.4f", lf) + ", monotone " + (monotone ? "yes" : "no") +
               ", max relative deviation from 50-digit reference " + fmt("%.2e", worst);
    return o;
}

std::string rows_without_timing(const SweepResult& r) {
    SweepResult copy = r;
    for (SweepRow& row : copy.rows) row.wall_time = 0;
    std::ostringstream out;
    write_csv(out, copy);
    return out.str();
}

Outcome criterion8() {
    RunConfig c;
    c.problem.d = 2;
    c.problem.n = 16;
    c.problem.coefficient = "smooth";
    c.hierarchy.levels = 2;
    c.sweep.budgets = {1, 2, 3};
    c.sweep.seeds = {1, 2, 3};
    const std::string one = rows_without_timing(run_sweep(c, 1));
    const std::string eight = rows_without_timing(run_sweep(c, 8));
    Outcome o;
    o.pass = one == eight;

    const auto dir = std::filesystem::temp_directory_path() / "greenpeel_acceptance";
    std::filesystem::create_directories(dir);
    const Grid g(2, 16);
    TrainingSet data(g);
    const DiscreteOperator op = assemble(g, CoefficientField::preset("checkerboard"));
    const Matrix f = CovarianceFactor::white(g.total(), 3).draw(7, 1);
    data.append(f, op.solve(f, Execution::serial()));
    dataset_write(dir / "roundtrip.gpde", data);
    const TrainingSet back = dataset_read(dir / "roundtrip.gpde");
    const auto bytes = static_cast<std::size_t>(f.size()) * sizeof(double);
    const bool exact = back.size() == data.size() &&
                       std::memcmp(back.forcings.data(), data.forcings.data(), bytes) == 0 &&
                       std::memcmp(back.solutions.data(), data.solutions.data(), bytes) == 0;
    std::filesystem::remove_all(dir);
    o.pass = o.pass && exact;
    o.detail = std::string("sweep CSV rows with 1 and 8 workers ") + (one == eight ? "identical" : "differ") +
               ", dataset round trip " + (exact ? "bit-exact" : "differs");
    return o;
}

}  // namespace

int main() {
    BudgetAudit audit;
    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "exact hierarchical recovery", [&] { return criterion1(audit); });
    report(2, "analytic 1D Poisson", [&] { return criterion2(audit); });

    const Grid g(2, 32);
    const DiscreteOperator op = assemble(g, CoefficientField::identity());
    const PdeOracle oracle(op);
    const Matrix kernel = dense_kernel(op);
    const auto start = Clock::now();
    RankSweep sweep, dense_sweep;
    bool swept = true;
    double sweep_seconds = 0;
    try {
        sweep = poisson_rank_sweep(oracle, kernel, NearFieldPolicy::neglect, audit);
        sweep_seconds = seconds_since(start);
        dense_sweep = poisson_rank_sweep(oracle, kernel, NearFieldPolicy::dense_probe, audit);
    } catch (const std::exception& e) {
        swept = false;
        std::printf("rank sweep failed: %s\n", e.what());
    }
    report(3, "2D Poisson rank decay",
           [&] { return swept ? criterion3(sweep, sweep_seconds) : Outcome{false, "no sweep"}; });
    report(4, "sample-efficiency trend", [&] {
        return swept ? criterion4(sweep, dense_sweep, oracle, kernel) : Outcome{false, "no sweep"};
    });
    report(5, "variable coefficients", [&] { return criterion5(audit); });
    report(6, "budget accounting", [&] { return criterion6(audit); });
    report(7, "theory overlays", [] { return criterion7(); });
    report(8, "determinism and IO", [] { return criterion8(); });
    return failed == 0 ? 0 : 1;
}
