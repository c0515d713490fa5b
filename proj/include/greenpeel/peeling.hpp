#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "greenpeel/gp_sampling.hpp"
#include "greenpeel/hierarchy.hpp"
#include "greenpeel/lowrank.hpp"
#include "greenpeel/oracle.hpp"
#include "greenpeel/parallel.hpp"

namespace greenpeel {

/// Per-level accuracy targets, tightest on the coarsest admissible level.
struct LevelSchedule {
    double epsilon = 0.0;
    int levels = 0;       ///< L
    int first_level = 0;  ///< l_min
    std::vector<double> tolerances;  ///< tolerances[l - first_level]
    std::string kind = "geometric";

    double at(int level) const { return tolerances.at(static_cast<std::size_t>(level - first_level)); }
};

/// eps_l = eps * 2^(l - L) for l = l_min..L.
LevelSchedule tolerance_schedule(double epsilon, int levels, int first_level);

enum class NearFieldPolicy { neglect, dense_probe };

std::string to_string(NearFieldPolicy p);
NearFieldPolicy parse_near_field(const std::string& s);

/// `dataset` counts pairs consumed by passive (least-squares) learning.
enum class SolvePurpose { sketch, posterior, hs_estimate, near_field, dataset, evaluation };

/// Oracle solves by purpose. Only the orchestrating thread records into a
/// ledger (solves are batched per color class), so plain counters suffice.
class SolveLedger {
public:
    void add(SolvePurpose purpose, std::uint64_t count, int level = -1);

    std::uint64_t sketch(int level) const;
    std::uint64_t posterior(int level) const;
    std::uint64_t sketch_total() const;
    std::uint64_t posterior_total() const;
    std::uint64_t hs_estimate() const { return hs_; }
    std::uint64_t near_field() const { return near_; }
    std::uint64_t dataset() const { return dataset_; }
    std::uint64_t evaluation() const { return evaluation_; }

    /// N: every training solve, evaluation excluded.
    std::uint64_t training_total() const;
    std::uint64_t total() const { return training_total() + evaluation_; }

private:
    std::map<int, std::uint64_t> sketch_;
    std::map<int, std::uint64_t> posterior_;
    std::uint64_t hs_ = 0;
    std::uint64_t near_ = 0;
    std::uint64_t dataset_ = 0;
    std::uint64_t evaluation_ = 0;
};

struct DenseBlock {
    int target = -1;
    int source = -1;
    Matrix values;
};

/// The learned operator: low-rank blocks for every admissible pair at levels
/// l_min..L plus an optional dense near field on the finest level.
class HierarchicalApprox {
public:
    HierarchicalApprox(std::shared_ptr<const BoxTree> tree, NearFieldPolicy policy);

    const BoxTree& tree() const { return *tree_; }
    const std::vector<BlockList>& lists() const { return lists_; }
    NearFieldPolicy near_field_policy() const { return policy_; }
    double quadrature_weight() const { return tree_->grid().quadrature_weight(); }

    /// Blocks aligned with lists()[level].admissible.
    const std::vector<LowRankBlock>& level_blocks(int level) const;
    void set_level_blocks(int level, std::vector<LowRankBlock> blocks);
    const std::vector<DenseBlock>& near_blocks() const { return near_; }
    void set_near_blocks(std::vector<DenseBlock> blocks) { near_ = std::move(blocks); }

    /// Kernel action (no quadrature weight) of admissible blocks on levels
    /// < `below_level`; near blocks are included when below_level > L.
    Matrix apply_kernel(const Matrix& f, int below_level, Execution exec = {}) const;
    /// u = h^d * (sum of all blocks) f.
    Matrix apply(const Matrix& f, Execution exec = {}) const;
    Vector apply(const Vector& f) const;
    Matrix to_dense() const;

    /// max over admissible pairs of ||B_ts - B_st^T||_F at `level`.
    double symmetry_defect(int level) const;

    /// Position of (t, s) in lists()[level].admissible, or -1.
    int admissible_index(int level, int target, int source) const;

private:
    std::shared_ptr<const BoxTree> tree_;
    std::vector<BlockList> lists_;
    NearFieldPolicy policy_;
    std::vector<std::vector<LowRankBlock>> blocks_;
    std::vector<DenseBlock> near_;
};

struct PeelConfig {
    int levels = 3;   ///< L
    int window = 7;   ///< coloring window W
    KernelSpec probe_kernel = KernelSpec::squared_exponential(0.2);  ///< scaled by 2^-l on level l
    std::uint64_t seed = 1;

    /// Fixed per-block rank: empty means adaptive; one entry applies to every
    /// level; otherwise indexed by level.
    std::vector<int> fixed_ranks;
    double epsilon = 1e-2;  ///< global target for the adaptive schedule
    int k_max = 16;
    int k_step = 2;
    int oversampling = 10;
    int posterior_probes = 10;  ///< per color class, adaptive mode only
    int hs_probes = 10;         ///< randomized HS-norm estimate, adaptive mode only

    NearFieldPolicy near_field = NearFieldPolicy::neglect;
    Execution exec;

    bool adaptive() const { return fixed_ranks.empty(); }
    int rank_for_level(int level) const;
    /// Sketch probes per color class on `level`.
    int sketch_width(int level) const;
    int posterior_width() const { return adaptive() ? posterior_probes : 0; }
};

/// Throws ValidationError when the config cannot run on `grid`.
void validate(const PeelConfig& config, const Grid& grid);

struct LevelDiagnostics {
    int level = 0;
    int colors = 0;
    int probes_per_color = 0;
    int blocks = 0;
    int min_rank = 0;
    int max_rank = 0;
    double mean_rank = 0.0;
    int tolerance_misses = 0;
    double block_tolerance = 0.0;  ///< Frobenius target per block (adaptive)
};

struct LearnResult {
    HierarchicalApprox approx;
    SolveLedger ledger;
    std::optional<LevelSchedule> schedule;
    double kernel_frobenius_estimate = 0.0;  ///< ||G||_F from the HS probes (adaptive)
    std::vector<LevelDiagnostics> levels;
};

/// Learns one admissible level. Requires every coarser level in `state`.
std::vector<LowRankBlock> peel_level(const HierarchicalApprox& state, int level, const SolutionOracle& oracle,
                                     const PeelConfig& config, double block_tolerance, SolveLedger& ledger,
                                     LevelDiagnostics* diagnostics = nullptr);

/// Dense near-field blocks of the finest level from indicator probes.
std::vector<DenseBlock> probe_near_field(const HierarchicalApprox& state, const SolutionOracle& oracle,
                                         const PeelConfig& config, SolveLedger& ledger);

LearnResult learn(const SolutionOracle& oracle, const PeelConfig& config);

/// Closed-form count of training solves `learn` will consume.
std::uint64_t expected_training_solves(const BoxTree& tree, const PeelConfig& config);

/// Window used for near-field probing: isolates sources within distance 1.
inline constexpr int near_field_window = 3;

/// Passive learning from a fixed dataset.
struct DatasetDiagnostics {
    std::string mode;  ///< "replay" or "least_squares"
    /// Per level, per box: mean squared forcing amplitude on the box.
    std::vector<std::vector<double>> box_energy;
    /// Per level, per box: numerical rank of the forcings restricted to the box.
    std::vector<std::vector<int>> box_rank;
};

struct DatasetLearnResult {
    LearnResult result;
    DatasetDiagnostics diagnostics;
};

/// If the dataset holds exactly the probes `learn` would issue, replays them
/// (bit-identical to the active path). Otherwise extracts each block by least
/// squares on the restricted forcings, subtracting coarser learned levels.
/// Throws InsufficientDiversity naming boxes whose forcings are rank deficient.
DatasetLearnResult learn_from_dataset(const TrainingSet& data, const PeelConfig& config);

}  // namespace greenpeel
