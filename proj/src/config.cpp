#include "greenpeel/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "greenpeel/errors.hpp"
#include "greenpeel/grid.hpp"

namespace greenpeel {

namespace {

using nlohmann::json;

class Section {
public:
    Section(const json& root, std::string name) : name_(std::move(name)) {
        if (!root.contains(name_)) return;
        node_ = &root.at(name_);
        if (!node_->is_object()) throw ValidationError(name_ + ": expected an object");
        for (auto it = node_->begin(); it != node_->end(); ++it) keys_.insert(it.key());
    }

    template <class T>
    void get(const char* key, T& out) {
        if (!node_ || !node_->contains(key)) return;
        keys_.erase(key);
        try {
            out = node_->at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError(name_ + "." + key + ": wrong type (" + node_->at(key).dump() + ")");
        }
    }

    void rank(const char* key, std::vector<int>& out) {
        if (!node_ || !node_->contains(key)) return;
        keys_.erase(key);
        const json& v = node_->at(key);
        if (v.is_null()) out.clear();
        else if (v.is_number_integer()) out = {v.get<int>()};
        else if (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number_integer(); }))
            out = v.get<std::vector<int>>();
        else throw ValidationError(name_ + "." + key + ": expected null, an integer or a list of integers");
    }

    void finish() const {
        if (!keys_.empty()) throw ValidationError("unknown config key '" + name_ + "." + *keys_.begin() + "'");
    }

private:
    std::string name_;
    const json* node_ = nullptr;
    std::set<std::string> keys_;
};

void require(bool ok, const std::string& key, const std::string& rule) {
    if (!ok) throw ValidationError(key + ": " + rule);
}

}  // namespace

RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw ValidationError("config: expected a JSON object at the top level");
    static const std::set<std::string> sections{"problem", "hierarchy", "sampling", "algorithm",
                                                "evaluation", "sweep", "output"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!sections.count(it.key())) throw ValidationError("unknown config key '" + it.key() + "'");

    RunConfig c;
    Section p(j, "problem");
    p.get("d", c.problem.d);
    p.get("n", c.problem.n);
    p.get("coefficient", c.problem.coefficient);
    p.finish();

    Section h(j, "hierarchy");
    h.get("levels", c.hierarchy.levels);
    h.get("window", c.hierarchy.window);
    h.finish();

    Section s(j, "sampling");
    s.get("kernel", c.sampling.kernel);
    s.get("length_scale", c.sampling.length_scale);
    s.get("seed", c.sampling.seed);
    s.finish();

    Section a(j, "algorithm");
    a.get("epsilon", c.algorithm.epsilon);
    a.rank("rank", c.algorithm.rank);
    a.get("k_max", c.algorithm.k_max);
    a.get("k_step", c.algorithm.k_step);
    a.get("oversampling", c.algorithm.oversampling);
    a.get("posterior_probes", c.algorithm.posterior_probes);
    a.get("hs_probes", c.algorithm.hs_probes);
    a.get("power_iterations", c.algorithm.power_iterations);
    a.get("near_field", c.algorithm.near_field);
    a.get("mode", c.algorithm.mode);
    a.get("dataset", c.algorithm.dataset);
    a.get("workers", c.algorithm.workers);
    a.finish();

    Section e(j, "evaluation");
    e.get("dense_oracle", c.evaluation.dense_oracle);
    e.get("test_set_size", c.evaluation.test_set_size);
    e.get("quality_modes", c.evaluation.quality_modes);
    e.finish();

    Section w(j, "sweep");
    w.get("variable", c.sweep.variable);
    w.get("budgets", c.sweep.budgets);
    w.get("seeds", c.sweep.seeds);
    w.finish();

    Section o(j, "output");
    o.get("dir", c.output.dir);
    o.finish();

    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& ex) {
        throw ValidationError("config '" + path.string() + "' is not valid JSON: " + ex.what());
    }
    return parse_config(j);
}

json to_json(const RunConfig& c) {
    json rank = nullptr;
    if (c.algorithm.rank.size() == 1) rank = c.algorithm.rank.front();
    else if (!c.algorithm.rank.empty()) rank = c.algorithm.rank;
    return {
        {"problem", {{"d", c.problem.d}, {"n", c.problem.n}, {"coefficient", c.problem.coefficient}}},
        {"hierarchy", {{"levels", c.hierarchy.levels}, {"window", c.hierarchy.window}}},
        {"sampling",
         {{"kernel", c.sampling.kernel}, {"length_scale", c.sampling.length_scale}, {"seed", c.sampling.seed}}},
        {"algorithm",
         {{"epsilon", c.algorithm.epsilon},
          {"rank", rank},
          {"k_max", c.algorithm.k_max},
          {"k_step", c.algorithm.k_step},
          {"oversampling", c.algorithm.oversampling},
          {"posterior_probes", c.algorithm.posterior_probes},
          {"hs_probes", c.algorithm.hs_probes},
          {"power_iterations", c.algorithm.power_iterations},
          {"near_field", c.algorithm.near_field},
          {"mode", c.algorithm.mode},
          {"dataset", c.algorithm.dataset},
          {"workers", c.algorithm.workers}}},
        {"evaluation",
         {{"dense_oracle", c.evaluation.dense_oracle},
          {"test_set_size", c.evaluation.test_set_size},
          {"quality_modes", c.evaluation.quality_modes}}},
        {"sweep", {{"variable", c.sweep.variable}, {"budgets", c.sweep.budgets}, {"seeds", c.sweep.seeds}}},
        {"output", {{"dir", c.output.dir}}},
    };
}

void validate(const RunConfig& c) {
    require(c.problem.d >= 1 && c.problem.d <= 3, "problem.d", "must be 1, 2 or 3");
    require(c.problem.n >= 2, "problem.n", "must be >= 2");
    Grid grid(c.problem.d, c.problem.n);
    try {
        CoefficientField::preset(c.problem.coefficient);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("problem.coefficient: ") + e.what());
    }
    require(c.hierarchy.levels >= first_admissible_level, "hierarchy.levels",
            "must be >= " + std::to_string(first_admissible_level));
    require(c.hierarchy.levels < 31 && c.problem.n % (1 << c.hierarchy.levels) == 0,
            "hierarchy.levels", "n = " + std::to_string(c.problem.n) + " must be divisible by 2^L = " +
                                    std::to_string(c.hierarchy.levels < 31 ? 1 << c.hierarchy.levels : 0));
    require(c.hierarchy.window >= 7, "hierarchy.window", "must be >= 7");
    try {
        KernelSpec::parse(c.sampling.kernel, c.sampling.length_scale);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("sampling.kernel: ") + e.what());
    }
    require(c.algorithm.epsilon > 0.0 && c.algorithm.epsilon < 1.0, "algorithm.epsilon", "must lie in (0, 1)");
    for (int k : c.algorithm.rank) require(k >= 0, "algorithm.rank", "must be non-negative");
    require(c.algorithm.rank.size() <= 1 ||
                c.algorithm.rank.size() == static_cast<std::size_t>(c.hierarchy.levels) + 1,
            "algorithm.rank", "a list must give one rank per level 0..L");
    require(c.algorithm.k_max >= 1, "algorithm.k_max", "must be >= 1");
    require(c.algorithm.k_step >= 1, "algorithm.k_step", "must be >= 1");
    require(c.algorithm.oversampling >= 0, "algorithm.oversampling", "must be >= 0");
    require(c.algorithm.posterior_probes >= 1, "algorithm.posterior_probes", "must be >= 1");
    require(c.algorithm.hs_probes >= 1, "algorithm.hs_probes", "must be >= 1");
    require(c.algorithm.power_iterations == 0, "algorithm.power_iterations",
            "must be 0 (sketches are assembled from mirrored blocks, without extra passes)");
    try {
        parse_near_field(c.algorithm.near_field);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("algorithm.near_field: ") + e.what());
    }
    require(c.algorithm.mode == "active" || c.algorithm.mode == "dataset", "algorithm.mode",
            "must be 'active' or 'dataset'");
    require(c.algorithm.mode != "dataset" || !c.algorithm.dataset.empty(), "algorithm.dataset",
            "required when algorithm.mode is 'dataset'");
    require(c.algorithm.workers >= 1, "algorithm.workers", "must be >= 1");
    require(!c.evaluation.dense_oracle || grid.total() <= default_dense_cap, "evaluation.dense_oracle",
            "n^d = " + std::to_string(grid.total()) + " exceeds the dense cap " + std::to_string(default_dense_cap));
    require(c.evaluation.test_set_size >= 1, "evaluation.test_set_size", "must be >= 1");
    require(c.evaluation.quality_modes >= 1, "evaluation.quality_modes", "must be >= 1");
    require(c.sweep.variable == "rank" || c.sweep.variable == "epsilon", "sweep.variable",
            "must be 'rank' or 'epsilon'");
    for (double b : c.sweep.budgets) {
        if (c.sweep.variable == "rank")
            require(b >= 0.0 && b == std::floor(b), "sweep.budgets", "ranks must be non-negative integers");
        else
            require(b > 0.0 && b < 1.0, "sweep.budgets", "tolerances must lie in (0, 1)");
    }
    require(!c.sweep.seeds.empty(), "sweep.seeds", "must list at least one seed");
    require(!c.output.dir.empty(), "output.dir", "must not be empty");
}

KernelSpec probe_kernel(const RunConfig& c) { return KernelSpec::parse(c.sampling.kernel, c.sampling.length_scale); }

PeelConfig peel_config(const RunConfig& c) {
    PeelConfig p;
    p.levels = c.hierarchy.levels;
    p.window = c.hierarchy.window;
    p.probe_kernel = probe_kernel(c);
    p.seed = c.sampling.seed;
    p.fixed_ranks = c.algorithm.rank;
    p.epsilon = c.algorithm.epsilon;
    p.k_max = c.algorithm.k_max;
    p.k_step = c.algorithm.k_step;
    p.oversampling = c.algorithm.oversampling;
    p.posterior_probes = c.algorithm.posterior_probes;
    p.hs_probes = c.algorithm.hs_probes;
    p.near_field = parse_near_field(c.algorithm.near_field);
    p.exec.workers = c.algorithm.workers;
    return p;
}

}  // namespace greenpeel
