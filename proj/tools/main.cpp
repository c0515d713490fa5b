// Command-line driver: check, sample, learn, evaluate, sweep, report.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "greenpeel/config.hpp"
#include "greenpeel/dataset.hpp"
#include "greenpeel/errors.hpp"
#include "greenpeel/evaluation.hpp"
#include "greenpeel/model_io.hpp"
#include "greenpeel/oracle.hpp"
#include "greenpeel/philox.hpp"
#include "greenpeel/report.hpp"
#include "greenpeel/sweep.hpp"
#include "greenpeel/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace greenpeel;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> budget;
    std::optional<int> workers;
    std::string record;  // learn
    std::string model;   // evaluate
    std::string csv;     // report
    std::string variable = "rank";  // report
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<double> parse_budget_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("--budget: '" + item + "' is not a number");
        }
    }
    return out;
}

int parse_budget_int(const std::string& s) {
    const auto v = parse_budget_list(s);
    if (v.size() != 1 || v[0] < 0 || v[0] != std::floor(v[0]))
        throw ValidationError("--budget: expected a single non-negative integer, got '" + s + "'");
    return static_cast<int>(v[0]);
}

RunConfig load(const Options& o) {
    RunConfig c = load_config(o.config);
    if (o.seed) c.sampling.seed = *o.seed;
    if (o.out) c.output.dir = *o.out;
    if (o.workers) c.algorithm.workers = *o.workers;
    validate(c);
    return c;
}

fs::path output_dir(const RunConfig& c) {
    fs::path dir(c.output.dir);
    fs::create_directories(dir);
    return dir;
}

void write_summary(const fs::path& dir, const std::string& command, json summary) {
    summary["command"] = command;
    const fs::path path = dir / (command + "_summary.json");
    std::ofstream out(path);
    out << summary.dump(2) << '\n';
    std::cout << "summary: " << path.string() << '\n';
}

json ledger_json(const SolveLedger& ledger, int levels) {
    json sketch = json::object(), posterior = json::object();
    for (int l = first_admissible_level; l <= levels; ++l) {
        sketch[std::to_string(l)] = ledger.sketch(l);
        posterior[std::to_string(l)] = ledger.posterior(l);
    }
    return {{"N_train", ledger.training_total()}, {"sketch", sketch},       {"posterior", posterior},
            {"hs_estimate", ledger.hs_estimate()}, {"near_field", ledger.near_field()},
            {"dataset", ledger.dataset()},         {"evaluation", ledger.evaluation()}};
}

json levels_json(const std::vector<LevelDiagnostics>& levels) {
    json out = json::array();
    for (const auto& d : levels)
        out.push_back({{"level", d.level},
                       {"colors", d.colors},
                       {"probes_per_color", d.probes_per_color},
                       {"blocks", d.blocks},
                       {"min_rank", d.min_rank},
                       {"max_rank", d.max_rank},
                       {"mean_rank", d.mean_rank},
                       {"tolerance_misses", d.tolerance_misses},
                       {"block_tolerance", d.block_tolerance}});
    return out;
}

json exact_json(const ExactErrors& e) {
    return {{"err_hs_rel", e.err_hs_rel},     {"err_op_rel", e.err_op_rel},
            {"far_hs_rel", e.far_hs_rel},     {"near_field_floor_hs_rel", e.floor_hs_rel},
            {"near_field_floor_op_rel", e.floor_op_rel}};
}

DiscreteOperator build_operator(const RunConfig& c) {
    return assemble(Grid(c.problem.d, c.problem.n), CoefficientField::preset(c.problem.coefficient));
}

int cmd_check(const Options& o) {
    const RunConfig c = load(o);
    const DiscreteOperator op = build_operator(c);
    const Grid& g = op.grid();
    json checks = json::array();
    bool ok = true;
    auto record = [&](const std::string& name, double value, double tol) {
        const bool pass = value <= tol;
        ok = ok && pass;
        checks.push_back({{"name", name}, {"value", value}, {"tolerance", tol}, {"pass", pass}});
        std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << value << " (tol " << tol << ")\n";
    };

    const SparseMatrix kt = op.stiffness().transpose();
    record("stiffness symmetry (max |K - K^T|)", (op.stiffness() - kt).norm(), 0.0);
    Matrix f = CovarianceFactor::white(g.total(), c.sampling.seed).draw(3, stream_key({0xc4ec}));
    const Matrix u = op.solve(f, Execution{c.algorithm.workers});
    double residual = 0.0;
    for (Index j = 0; j < f.cols(); ++j)
        residual = std::max(residual, (op.stiffness() * u.col(j) - f.col(j)).norm() / f.col(j).norm());
    record("solve relative residual", residual, DiscreteOperator::residual_tolerance);
    if (g.dim() == 1 && c.problem.coefficient == "identity") {
        const Vector x1 = op.solve(Vector::Ones(g.total()));
        double err = 0.0;
        for (Index i = 0; i < g.total(); ++i) {
            const double x = g.coordinate(static_cast<int>(i));
            err = std::max(err, std::abs(x1(i) - 0.5 * x * (1.0 - x)));
        }
        record("1D Poisson f = 1 against x(1-x)/2", err, 1e-10);
    }
    if (c.evaluation.dense_oracle) {
        const Matrix gk = dense_kernel(op);
        record("dense kernel symmetry (relative)", (gk - gk.transpose()).norm() / gk.norm(), 1e-10);
        const Matrix via_kernel = g.quadrature_weight() * gk * f;
        record("quadrature consistency h^d G f vs solve", (via_kernel - u).norm() / u.norm(), 1e-9);
    }
    write_summary(output_dir(c), "check", {{"checks", checks}, {"pass", ok}, {"config", to_json(c)}});
    return ok ? 0 : 2;
}

int cmd_sample(const Options& o) {
    const RunConfig c = load(o);
    const int count = o.budget ? parse_budget_int(*o.budget) : 100;
    if (count < 1) throw ValidationError("--budget: dataset size must be >= 1");
    const DiscreteOperator op = build_operator(c);
    const PdeOracle oracle(op);
    const KernelSpec kernel = probe_kernel(c);
    const Grid& g = op.grid();
    const CovarianceFactor factor = kernel.kind == KernelKind::white
                                        ? CovarianceFactor::white(g.total(), c.sampling.seed)
                                        : factorize(covariance_matrix(g, kernel), c.sampling.seed);
    const Matrix f = factor.draw(count, stream_key({0x5a3b1e}));
    TrainingSet data(g);
    data.append(f, oracle.solve(f, Execution{c.algorithm.workers}));
    data.provenance = Provenance{kernel.name(), kernel.length_scale, c.sampling.seed, c.problem.coefficient,
                                 utc_timestamp()};
    const fs::path dir = output_dir(c);
    const fs::path path = dir / "dataset.gpde";
    dataset_write(path, data);
    std::cout << "wrote " << count << " pairs to " << path.string() << '\n';
    write_summary(dir, "sample",
                  {{"dataset", path.string()},
                   {"pairs", count},
                   {"jitter", factor.jitter()},
                   {"consistency_residual", consistency_residual(data, op)},
                   {"config", to_json(c)}});
    return 0;
}

struct Learned {
    LearnResult result;
    json extra = json::object();
};

Learned run_learn(const RunConfig& c, const Options& o, const DiscreteOperator& op) {
    PeelConfig peel = peel_config(c);
    if (o.budget) peel.fixed_ranks = {parse_budget_int(*o.budget)};
    validate(peel, op.grid());
    if (c.algorithm.mode == "dataset") {
        std::vector<std::string> warnings;
        const TrainingSet data = dataset_read(c.algorithm.dataset, &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
        if (!(data.grid == op.grid())) throw ValidationError("algorithm.dataset: grid does not match problem.d/n");
        DatasetLearnResult r = learn_from_dataset(data, peel);
        json energy = json::object();
        for (std::size_t l = 0; l < r.diagnostics.box_energy.size(); ++l) {
            if (r.diagnostics.box_energy[l].empty()) continue;
            const auto& e = r.diagnostics.box_energy[l];
            energy[std::to_string(l)] = {{"min", *std::min_element(e.begin(), e.end())},
                                         {"max", *std::max_element(e.begin(), e.end())}};
        }
        return Learned{std::move(r.result),
                       {{"dataset_mode", r.diagnostics.mode}, {"dataset_pairs", data.size()}, {"box_energy", energy},
                        {"warnings", warnings}}};
    }
    const PdeOracle pde(op);
    if (o.record.empty()) return Learned{learn(pde, peel)};
    RecordingOracle recorder(pde);
    Learned out{learn(recorder, peel)};
    TrainingSet data = recorder.record();
    const KernelSpec kernel = probe_kernel(c);
    data.provenance = Provenance{kernel.name(), kernel.length_scale, c.sampling.seed, c.problem.coefficient,
                                 utc_timestamp()};
    dataset_write(o.record, data);
    out.extra["recorded_dataset"] = o.record;
    out.extra["recorded_pairs"] = data.size();
    return out;
}

int cmd_learn(const Options& o) {
    RunConfig c = load(o);
    if (o.budget) c.algorithm.rank = {parse_budget_int(*o.budget)};
    const DiscreteOperator op = build_operator(c);
    const auto start = std::chrono::steady_clock::now();
    Learned learned = run_learn(c, o, op);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const LearnResult& r = learned.result;
    const fs::path dir = output_dir(c);
    const fs::path model = dir / "model.json";
    write_model(model, c, r.approx);

    json summary = learned.extra;
    summary["model"] = model.string();
    summary["ledger"] = ledger_json(r.ledger, c.hierarchy.levels);
    if (c.algorithm.mode == "active")
        summary["expected_training_solves"] = expected_training_solves(r.approx.tree(), peel_config(c));
    summary["levels"] = levels_json(r.levels);
    summary["near_field"] = to_string(r.approx.near_field_policy());
    summary["wall_time"] = seconds;
    if (r.schedule) {
        summary["schedule"] = {{"kind", r.schedule->kind}, {"epsilon", r.schedule->epsilon},
                               {"tolerances", r.schedule->tolerances}};
        summary["kernel_frobenius_estimate"] = r.kernel_frobenius_estimate;
    }
    if (c.evaluation.dense_oracle) summary["exact"] = exact_json(evaluate_exact(r.approx, op));
    summary["config"] = to_json(c);
    std::cout << "learned " << c.problem.d << "D n=" << c.problem.n << " L=" << c.hierarchy.levels
              << " with N = " << r.ledger.training_total() << " solves in " << seconds << " s\n";
    if (summary.contains("exact"))
        std::cout << "err_hs_rel = " << summary["exact"]["err_hs_rel"] << ", err_op_rel = "
                  << summary["exact"]["err_op_rel"] << '\n';
    write_summary(dir, "learn", summary);
    return 0;
}

int cmd_evaluate(const Options& o) {
    RunConfig c = load(o);
    const fs::path dir = output_dir(c);
    const fs::path model = o.model.empty() ? dir / "model.json" : fs::path(o.model);
    std::optional<StoredModel> stored;
    json summary = json::object();
    const DiscreteOperator op = build_operator(c);
    if (fs::exists(model)) {
        stored.emplace(read_model(model));
        if (stored->config.problem.d != c.problem.d || stored->config.problem.n != c.problem.n ||
            stored->config.problem.coefficient != c.problem.coefficient)
            throw ValidationError("model '" + model.string() + "' was learned for a different problem section");
        summary["model"] = model.string();
    } else {
        if (o.budget) c.algorithm.rank = {parse_budget_int(*o.budget)};
        Learned l = run_learn(c, o, op);
        summary["ledger"] = ledger_json(l.result.ledger, c.hierarchy.levels);
        stored.emplace(StoredModel{c, std::move(l.result.approx)});
        summary["model"] = nullptr;
    }
    const HierarchicalApprox& approx = stored->approx;
    const PdeOracle oracle(op);
    const Execution exec{c.algorithm.workers};
    const Grid& g = op.grid();
    const KernelSpec test_kernel =
        g.total() <= default_dense_cap ? KernelSpec::squared_exponential(0.2) : KernelSpec::white();
    const TrainingSet test = make_test_set(oracle, c.evaluation.test_set_size, test_kernel, c.sampling.seed, exec);
    const double hs_est = hs_norm_estimate(oracle, 10, c.sampling.seed, exec);
    const SampledErrors s = evaluate_sampled(approx, test, hs_est, exec);
    summary["sampled"] = {{"mean_raw", s.mean_raw}, {"max_raw", s.max_raw},
                          {"mean_rel", s.mean_rel}, {"max_rel", s.max_rel},
                          {"hs_norm_estimate", s.hs_norm_estimate}, {"pairs", s.pairs},
                          {"test_kernel", test_kernel.name()}};
    summary["evaluation_solves"] = c.evaluation.test_set_size + 10;
    if (c.evaluation.dense_oracle) {
        const ExactErrors e = evaluate_exact(approx, op);
        summary["exact"] = exact_json(e);
        std::cout << "err_hs_rel = " << e.err_hs_rel << ", err_op_rel = " << e.err_op_rel
                  << ", near-field floor (HS) = " << e.floor_hs_rel << '\n';
    }
    std::cout << "sampled error (mean, HS-normalised) = " << s.mean_rel << '\n';
    summary["config"] = to_json(c);
    write_summary(dir, "evaluate", summary);
    return 0;
}

json fit_json(const TheoryFit& fit) {
    return {{"fitted", fit.valid}, {"C0", finite_or_null(fit.c0)}, {"gamma_hat", fit.gamma}, {"points", fit.points}};
}

json table_json(const std::vector<MedianRow>& table, const std::string& variable) {
    json rows = json::array();
    for (const MedianRow& m : table) {
        json r = {{"target", m.target},
                  {"N_train", finite_or_null(m.n_train)},
                  {"err_hs_rel", finite_or_null(m.err_hs_rel)},
                  {"err_op_rel", finite_or_null(m.err_op_rel)},
                  {"sampled_err", finite_or_null(m.sampled_err)},
                  {"runs", m.runs},
                  {"failures", m.failures}};
        if (variable == "epsilon") r["failure_bound_log10"] = failure_bound_log10(m.target);
        rows.push_back(std::move(r));
    }
    return rows;
}

int cmd_sweep(const Options& o) {
    RunConfig c = load(o);
    if (o.budget) c.sweep.budgets = parse_budget_list(*o.budget);
    validate(c);
    const SweepResult result = run_sweep(c, c.algorithm.workers);
    const fs::path dir = output_dir(c);
    write_csv(dir / "sweep.csv", result);
    write_svg(dir / "sweep.svg", result);
    const auto table = median_table(result);
    const std::string text = format_median_table(table, result.variable);
    std::ofstream(dir / "table.txt") << text;
    std::cout << text;
    std::size_t failures = 0;
    for (const auto& r : result.rows) failures += !r.note.empty();
    write_summary(dir, "sweep",
                  {{"csv", (dir / "sweep.csv").string()},
                   {"svg", (dir / "sweep.svg").string()},
                   {"rows", result.rows.size()},
                   {"failures", failures},
                   {"medians", table_json(table, result.variable)},
                   {"theory_fit", fit_json(fit_theory(result))},
                   {"footer", budget_footer},
                   {"config", to_json(c)}});
    return 0;
}

int cmd_report(const Options& o) {
    fs::path dir;
    fs::path csv(o.csv);
    std::string variable = o.variable;
    if (!o.config.empty()) {
        const RunConfig c = load(o);
        dir = output_dir(c);
        if (o.csv.empty()) csv = dir / "sweep.csv";
        variable = c.sweep.variable;
    } else {
        if (o.csv.empty()) throw ValidationError("report: give a config file or --csv");
        dir = o.out ? fs::path(*o.out) : csv.parent_path();
        if (dir.empty()) dir = ".";
        fs::create_directories(dir);
    }
    const SweepResult result = read_csv(csv, variable);
    write_svg(dir / "report.svg", result);
    const auto table = median_table(result);
    const std::string text = format_median_table(table, variable);
    std::ofstream(dir / "table.txt") << text;
    std::cout << text;
    write_summary(dir, "report",
                  {{"csv", csv.string()},
                   {"svg", (dir / "report.svg").string()},
                   {"table", (dir / "table.txt").string()},
                   {"medians", table_json(table, variable)},
                   {"theory_fit", fit_json(fit_theory(result))},
                   {"footer", budget_footer}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"greenpeel: learn Green's functions of elliptic PDEs from solves"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool config_required = true) {
        auto* opt = sub->add_option("config", o.config, "run configuration (JSON)");
        if (config_required) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "override sampling.seed");
        sub->add_option("--out", o.out, "override output.dir");
        sub->add_option("--budget", o.budget,
                        "sample: pairs; learn/evaluate: per-block rank; sweep: comma-separated budgets");
        sub->add_option("--workers", o.workers, "override algorithm.workers");
    };

    auto* check = app.add_subcommand("check", "solver self-tests on the configured problem");
    common(check);
    auto* sample = app.add_subcommand("sample", "draw GP forcings, solve, and write a GPDE dataset");
    common(sample);
    auto* learn_cmd = app.add_subcommand("learn", "learn the hierarchical approximation");
    common(learn_cmd);
    learn_cmd->add_option("--record", o.record, "write every probe/solution pair to this GPDE file");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a learned model (learning one if absent)");
    common(evaluate);
    evaluate->add_option("--model", o.model, "model file (default: <out>/model.json)");
    auto* sweep = app.add_subcommand("sweep", "error-vs-budget sweep to CSV and SVG");
    common(sweep);
    auto* report = app.add_subcommand("report", "SVG plot and median table from a sweep CSV");
    common(report, false);
    report->add_option("--csv", o.csv, "sweep CSV (default: <out>/sweep.csv)");
    report->add_option("--variable", o.variable, "sweep variable label when no config is given");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*check) return cmd_check(o);
        if (*sample) return cmd_sample(o);
        if (*learn_cmd) return cmd_learn(o);
        if (*evaluate) return cmd_evaluate(o);
        if (*sweep) return cmd_sweep(o);
        if (*report) return cmd_report(o);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
