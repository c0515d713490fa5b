// Serial reference vs OpenMP kernels: wall time and bit-identity of results.
//   bench_peel [workers] [n]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "greenpeel/oracle.hpp"
#include "greenpeel/peeling.hpp"

using namespace greenpeel;

namespace {

double time_best_of(int repeats, const std::function<void()>& body) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s %10.4f %10.4f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
                identical ? "identical" : "DIFFERENT");
}

}  // namespace

int main(int argc, char** argv) {
    const int workers = argc > 1 ? std::atoi(argv[1]) : Execution::all_cores().workers;
    const int n = argc > 2 ? std::atoi(argv[2]) : 64;
    const Grid grid(2, n);
    const DiscreteOperator op = assemble(grid, CoefficientField::preset("checkerboard"));
    const PdeOracle oracle(op);
    const Execution serial = Execution::serial(), par{workers};
    std::printf("2D checkerboard n=%d (%lld nodes), %d workers\n", n, static_cast<long long>(grid.total()), workers);
    std::printf("%-28s %10s %10s %9s\n", "kernel", "serial s", "openmp s", "speedup");

    const Matrix f = CovarianceFactor::white(grid.total(), 1).draw(64, 1);
    Matrix us, up;
    const double ts = time_best_of(3, [&] { us = op.solve(f, serial); });
    const double tp = time_best_of(3, [&] { up = op.solve(f, par); });
    row("64 solves", ts, tp, us == up);

    PeelConfig cfg;
    cfg.levels = 4;
    cfg.near_field = NearFieldPolicy::dense_probe;
    cfg.exec = serial;
    LearnResult ls = learn(oracle, cfg);
    const double ls_t = time_best_of(1, [&] { ls = learn(oracle, cfg); });
    cfg.exec = par;
    LearnResult lp = learn(oracle, cfg);
    const double lp_t = time_best_of(1, [&] { lp = learn(oracle, cfg); });
    const Matrix probe = CovarianceFactor::white(grid.total(), 2).draw(32, 1);
    row("learn (adaptive, L=4)", ls_t, lp_t, ls.approx.apply(probe, serial) == lp.approx.apply(probe, serial));

    Matrix as, ap;
    const double as_t = time_best_of(3, [&] { as = ls.approx.apply(probe, serial); });
    const double ap_t = time_best_of(3, [&] { ap = ls.approx.apply(probe, par); });
    row("apply 32 vectors", as_t, ap_t, as == ap);
    std::printf("training solves per learn: %llu\n", static_cast<unsigned long long>(ls.ledger.training_total()));
    return 0;
}
