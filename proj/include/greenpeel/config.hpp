#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "greenpeel/gp_sampling.hpp"
#include "greenpeel/peeling.hpp"

namespace greenpeel {

struct RunConfig {
    struct Problem {
        int d = 1;
        int n = 64;
        std::string coefficient = "identity";
    } problem;
    struct Hierarchy {
        int levels = 3;
        int window = 7;
    } hierarchy;
    struct Sampling {
        std::string kernel = "squared_exponential";
        double length_scale = 0.2;
        std::uint64_t seed = 1;
    } sampling;
    struct Algorithm {
        double epsilon = 1e-2;
        std::vector<int> rank;  ///< empty: adaptive
        int k_max = 16;
        int k_step = 2;
        int oversampling = 10;
        int posterior_probes = 10;
        int hs_probes = 10;
        int power_iterations = 0;
        std::string near_field = "neglect";
        std::string mode = "active";  ///< active | dataset
        std::string dataset;          ///< GPDE path for mode = dataset
        int workers = 1;
    } algorithm;
    struct Evaluation {
        bool dense_oracle = true;
        int test_set_size = 10;
        int quality_modes = 4;
    } evaluation;
    struct Sweep {
        std::string variable = "rank";  ///< rank | epsilon
        std::vector<double> budgets;
        std::vector<std::uint64_t> seeds{1};
    } sweep;
    struct Output {
        std::string dir = "out";
    } output;
};

/// Parses and validates. Unknown keys, wrong types and inconsistent values
/// throw ValidationError naming the offending key ("section.key").
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

/// Cross-field checks (divisibility, dense cap, mode requirements).
void validate(const RunConfig& c);

PeelConfig peel_config(const RunConfig& c);
KernelSpec probe_kernel(const RunConfig& c);

}  // namespace greenpeel
