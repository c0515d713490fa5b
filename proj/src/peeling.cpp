#include "greenpeel/peeling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "greenpeel/errors.hpp"
#include "greenpeel/philox.hpp"

namespace greenpeel {

namespace {

enum StreamPurpose : std::uint64_t { sketch_stream = 1, posterior_stream = 2, hs_stream = 3 };

// Columns are processed in fixed-size chunks so that the arithmetic for a
// column never depends on the worker count.
constexpr Index column_chunk = 16;

std::vector<Point> box_points(const BoxTree& tree, int level, int box) {
    const auto& nodes = tree.level(level).boxes[static_cast<std::size_t>(box)].nodes;
    std::vector<Point> pts;
    pts.reserve(nodes.size());
    for (Index i : nodes) pts.push_back(tree.grid().node(i));
    return pts;
}

// All boxes on a level have the same shape, so one factor serves every box.
CovarianceFactor level_probe_factor(const BoxTree& tree, int level, const PeelConfig& cfg) {
    const auto pts = box_points(tree, level, 0);
    if (cfg.probe_kernel.kind == KernelKind::white)
        return CovarianceFactor::white(static_cast<Index>(pts.size()), cfg.seed);
    return factorize(covariance_matrix(pts, cfg.probe_kernel.for_level(level)), cfg.seed);
}

}  // namespace

LevelSchedule tolerance_schedule(double epsilon, int levels, int first_level) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
    if (levels < first_level)
        throw ValidationError("L = " + std::to_string(levels) + " is below the first admissible level " +
                              std::to_string(first_level));
    LevelSchedule s;
    s.epsilon = epsilon;
    s.levels = levels;
    s.first_level = first_level;
    for (int l = first_level; l <= levels; ++l) s.tolerances.push_back(std::ldexp(epsilon, l - levels));
    return s;
}

std::string to_string(NearFieldPolicy p) { return p == NearFieldPolicy::neglect ? "neglect" : "dense_probe"; }

NearFieldPolicy parse_near_field(const std::string& s) {
    if (s == "neglect") return NearFieldPolicy::neglect;
    if (s == "dense_probe") return NearFieldPolicy::dense_probe;
    throw ValidationError("unknown near-field policy '" + s + "' (expected neglect or dense_probe)");
}

void SolveLedger::add(SolvePurpose purpose, std::uint64_t count, int level) {
    switch (purpose) {
        case SolvePurpose::sketch: sketch_[level] += count; break;
        case SolvePurpose::posterior: posterior_[level] += count; break;
        case SolvePurpose::hs_estimate: hs_ += count; break;
        case SolvePurpose::near_field: near_ += count; break;
        case SolvePurpose::dataset: dataset_ += count; break;
        case SolvePurpose::evaluation: evaluation_ += count; break;
    }
}

std::uint64_t SolveLedger::sketch(int level) const {
    auto it = sketch_.find(level);
    return it == sketch_.end() ? 0 : it->second;
}

std::uint64_t SolveLedger::posterior(int level) const {
    auto it = posterior_.find(level);
    return it == posterior_.end() ? 0 : it->second;
}

std::uint64_t SolveLedger::sketch_total() const {
    std::uint64_t t = 0;
    for (auto& [l, c] : sketch_) t += c;
    return t;
}

std::uint64_t SolveLedger::posterior_total() const {
    std::uint64_t t = 0;
    for (auto& [l, c] : posterior_) t += c;
    return t;
}

std::uint64_t SolveLedger::training_total() const { return sketch_total() + posterior_total() + hs_ + near_ + dataset_; }

HierarchicalApprox::HierarchicalApprox(std::shared_ptr<const BoxTree> tree, NearFieldPolicy policy)
    : tree_(std::move(tree)), lists_(block_lists(*tree_)), policy_(policy) {
    blocks_.resize(lists_.size());
    for (std::size_t l = 0; l < lists_.size(); ++l) {
        const TreeLevel& lvl = tree_->level(static_cast<int>(l));
        for (auto [t, s] : lists_[l].admissible) {
            auto b = LowRankBlock::empty(static_cast<Index>(lvl.boxes[static_cast<std::size_t>(t)].nodes.size()),
                                         static_cast<Index>(lvl.boxes[static_cast<std::size_t>(s)].nodes.size()));
            b.target = t;
            b.source = s;
            blocks_[l].push_back(std::move(b));
        }
    }
}

const std::vector<LowRankBlock>& HierarchicalApprox::level_blocks(int level) const {
    return blocks_.at(static_cast<std::size_t>(level));
}

void HierarchicalApprox::set_level_blocks(int level, std::vector<LowRankBlock> blocks) {
    if (blocks.size() != lists_.at(static_cast<std::size_t>(level)).admissible.size())
        throw std::logic_error("level block count does not match the admissible list");
    blocks_[static_cast<std::size_t>(level)] = std::move(blocks);
}

int HierarchicalApprox::admissible_index(int level, int target, int source) const {
    const auto& adm = lists_.at(static_cast<std::size_t>(level)).admissible;
    auto it = std::lower_bound(adm.begin(), adm.end(), BoxPair{target, source});
    if (it == adm.end() || *it != BoxPair{target, source}) return -1;
    return static_cast<int>(it - adm.begin());
}

Matrix HierarchicalApprox::apply_kernel(const Matrix& f, int below_level, Execution exec) const {
    const Grid& g = tree_->grid();
    if (f.rows() != g.total())
        throw ValidationError("input has " + std::to_string(f.rows()) + " rows, grid has " +
                              std::to_string(g.total()) + " nodes");
    Matrix out = Matrix::Zero(f.rows(), f.cols());
    const int top = std::min<int>(below_level, static_cast<int>(blocks_.size()));
    const bool with_near = below_level > tree_->depth();
    const Index chunks = (f.cols() + column_chunk - 1) / column_chunk;
    parallel_for(exec, chunks, [&](std::int64_t c) {
        const Index j0 = c * column_chunk;
        const Index width = std::min(column_chunk, f.cols() - j0);
        const auto cols = Eigen::seqN(j0, width);
        for (int l = 0; l < top; ++l) {
            const TreeLevel& lvl = tree_->level(l);
            for (const LowRankBlock& b : blocks_[static_cast<std::size_t>(l)]) {
                if (b.rank() == 0) continue;
                const auto& rows = lvl.boxes[static_cast<std::size_t>(b.target)].nodes;
                const auto& src = lvl.boxes[static_cast<std::size_t>(b.source)].nodes;
                out(rows, cols) += b.apply(f(src, cols));
            }
        }
        if (with_near) {
            const TreeLevel& lvl = tree_->level(tree_->depth());
            for (const DenseBlock& b : near_) {
                const auto& rows = lvl.boxes[static_cast<std::size_t>(b.target)].nodes;
                const auto& src = lvl.boxes[static_cast<std::size_t>(b.source)].nodes;
                out(rows, cols) += b.values * f(src, cols);
            }
        }
    });
    return out;
}

Matrix HierarchicalApprox::apply(const Matrix& f, Execution exec) const {
    return quadrature_weight() * apply_kernel(f, tree_->depth() + 1, exec);
}

Vector HierarchicalApprox::apply(const Vector& f) const {
    const Matrix m = f;
    return apply(m, Execution::serial()).col(0);
}

Matrix HierarchicalApprox::to_dense() const {
    const Index n = tree_->grid().total();
    Matrix a = Matrix::Zero(n, n);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const TreeLevel& lvl = tree_->level(static_cast<int>(l));
        for (const LowRankBlock& b : blocks_[l]) {
            if (b.rank() == 0) continue;
            a(lvl.boxes[static_cast<std::size_t>(b.target)].nodes, lvl.boxes[static_cast<std::size_t>(b.source)].nodes) =
                b.to_dense();
        }
    }
    const TreeLevel& fine = tree_->level(tree_->depth());
    for (const DenseBlock& b : near_)
        a(fine.boxes[static_cast<std::size_t>(b.target)].nodes, fine.boxes[static_cast<std::size_t>(b.source)].nodes) =
            b.values;
    return a;
}

double HierarchicalApprox::symmetry_defect(int level) const {
    double worst = 0.0;
    const auto& blocks = level_blocks(level);
    for (const LowRankBlock& b : blocks) {
        const int mirror = admissible_index(level, b.source, b.target);
        if (mirror < 0) continue;
        const Matrix diff = b.to_dense() - blocks[static_cast<std::size_t>(mirror)].to_dense().transpose();
        worst = std::max(worst, diff.norm());
    }
    return worst;
}

int PeelConfig::rank_for_level(int level) const {
    if (fixed_ranks.empty()) return k_max;
    if (fixed_ranks.size() == 1) return fixed_ranks.front();
    return fixed_ranks.at(static_cast<std::size_t>(level));
}

int PeelConfig::sketch_width(int level) const { return rank_for_level(level) + oversampling; }

void validate(const PeelConfig& cfg, const Grid& grid) {
    if (cfg.levels < first_admissible_level)
        throw ValidationError("hierarchy.levels must be >= " + std::to_string(first_admissible_level) +
                              " (no admissible blocks above that level)");
    if (grid.n() % (1 << cfg.levels) != 0 || (1 << cfg.levels) > grid.n())
        throw ValidationError("hierarchy.levels: n = " + std::to_string(grid.n()) + " must be divisible by 2^L = " +
                              std::to_string(1 << cfg.levels));
    if (cfg.window < 7)
        throw ValidationError("hierarchy.window must be >= 7 to isolate sources within box distance 3");
    if (cfg.oversampling < 0) throw ValidationError("algorithm.oversampling must be >= 0");
    if (cfg.adaptive()) {
        if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw ValidationError("algorithm.epsilon must lie in (0, 1)");
        if (cfg.k_max < 1 || cfg.k_step < 1) throw ValidationError("algorithm.k_max and algorithm.k_step must be >= 1");
        if (cfg.posterior_probes < 1) throw ValidationError("algorithm.posterior_probes must be >= 1");
        if (cfg.hs_probes < 1) throw ValidationError("algorithm.hs_probes must be >= 1");
    } else {
        if (cfg.fixed_ranks.size() != 1 && cfg.fixed_ranks.size() != static_cast<std::size_t>(cfg.levels) + 1)
            throw ValidationError("algorithm.rank must be a single rank or one per level 0..L");
        for (int k : cfg.fixed_ranks)
            if (k < 0) throw ValidationError("algorithm.rank must be non-negative");
    }
}

std::vector<LowRankBlock> peel_level(const HierarchicalApprox& state, int level, const SolutionOracle& oracle,
                                     const PeelConfig& cfg, double block_tolerance, SolveLedger& ledger,
                                     LevelDiagnostics* diagnostics) {
    const BoxTree& tree = state.tree();
    const Grid& grid = tree.grid();
    const int d = grid.dim();
    const TreeLevel& lvl = tree.level(level);
    const BlockList& list = state.lists()[static_cast<std::size_t>(level)];
    const Coloring colors = coloring(tree, level, cfg.window);
    if (!coloring_valid(tree, colors, 3))
        throw std::logic_error("coloring window " + std::to_string(cfg.window) + " is invalid at level " +
                               std::to_string(level));

    const Index m = cfg.sketch_width(level);
    const Index q = cfg.posterior_width();
    const auto nboxes = static_cast<std::int64_t>(lvl.boxes.size());
    const double weight = grid.quadrature_weight();

    // Independent probe content per box, keyed by (purpose, level, box).
    const CovarianceFactor factor = level_probe_factor(tree, level, cfg);
    std::vector<Matrix> omega(lvl.boxes.size()), post(lvl.boxes.size());
    parallel_for(cfg.exec, nboxes, [&](std::int64_t b) {
        const auto ub = static_cast<std::uint64_t>(b), ul = static_cast<std::uint64_t>(level);
        omega[static_cast<std::size_t>(b)] = factor.draw(m, stream_key({sketch_stream, ul, ub}));
        post[static_cast<std::size_t>(b)] = factor.draw(q, stream_key({posterior_stream, ul, ub}));
    });

    std::vector<Matrix> range(list.admissible.size()), post_out(list.admissible.size());
    for (std::size_t cls = 0; cls < colors.classes.size(); ++cls) {
        Matrix forcing = Matrix::Zero(grid.total(), m + q);
        for (int s : colors.classes[cls]) {
            const auto& nodes = lvl.boxes[static_cast<std::size_t>(s)].nodes;
            forcing(nodes, Eigen::seqN(0, m)) = omega[static_cast<std::size_t>(s)];
            forcing(nodes, Eigen::seqN(m, q)) = post[static_cast<std::size_t>(s)];
        }
        const Matrix solution = oracle.solve(forcing, cfg.exec);
        ledger.add(SolvePurpose::sketch, static_cast<std::uint64_t>(m), level);
        if (q > 0) ledger.add(SolvePurpose::posterior, static_cast<std::uint64_t>(q), level);

        // Peel off everything already learned on coarser levels.
        const Matrix residual = solution / weight - state.apply_kernel(forcing, level, cfg.exec);

        // By coloring validity each target sees at most one source of this
        // class among the boxes it still interacts with.
        parallel_for(cfg.exec, nboxes, [&](std::int64_t t) {
            const int s = colors.partner(lvl, static_cast<int>(t), static_cast<int>(cls), 3, d);
            if (s < 0) return;
            const int idx = state.admissible_index(level, static_cast<int>(t), s);
            if (idx < 0) return;
            const auto& rows = lvl.boxes[static_cast<std::size_t>(t)].nodes;
            range[static_cast<std::size_t>(idx)] = residual(rows, Eigen::seqN(0, m));
            post_out[static_cast<std::size_t>(idx)] = residual(rows, Eigen::seqN(m, q));
        });
    }

    std::vector<LowRankBlock> blocks(list.admissible.size());
    const auto nblocks = static_cast<std::int64_t>(list.admissible.size());
    parallel_for(cfg.exec, nblocks, [&](std::int64_t i) {
        const auto [t, s] = list.admissible[static_cast<std::size_t>(i)];
        const int mirror = state.admissible_index(level, s, t);
        BlockSketch sketch;
        sketch.range = range[static_cast<std::size_t>(i)];
        sketch.corange = range[static_cast<std::size_t>(mirror)];
        sketch.omega_source = omega[static_cast<std::size_t>(s)];
        sketch.post_probes = post[static_cast<std::size_t>(s)];
        sketch.post_responses = post_out[static_cast<std::size_t>(i)];
        LowRankBlock b;
        if (cfg.adaptive()) {
            // The estimator measures ||E w|| / ||w||, about ||E||_F / sqrt(cols)
            // for unit-variance probes; convert the Frobenius share accordingly.
            const double tol = block_tolerance / std::sqrt(static_cast<double>(sketch.omega_source.rows()));
            b = rsvd_adaptive_from_sketch(sketch, tol, cfg.k_max, cfg.k_step);
        } else {
            b = reconstruct_from_sketch(sketch, cfg.rank_for_level(level));
            b.error_estimate = posterior_error(b, sketch.post_probes, sketch.post_responses);
        }
        b.target = t;
        b.source = s;
        blocks[static_cast<std::size_t>(i)] = std::move(b);
    });

    if (diagnostics) {
        LevelDiagnostics& dg = *diagnostics;
        dg.level = level;
        dg.colors = static_cast<int>(colors.classes.size());
        dg.probes_per_color = static_cast<int>(m + q);
        dg.blocks = static_cast<int>(blocks.size());
        dg.block_tolerance = block_tolerance;
        dg.min_rank = blocks.empty() ? 0 : static_cast<int>(blocks.front().rank());
        dg.max_rank = 0;
        double sum = 0.0;
        for (const auto& b : blocks) {
            dg.min_rank = std::min<int>(dg.min_rank, static_cast<int>(b.rank()));
            dg.max_rank = std::max<int>(dg.max_rank, static_cast<int>(b.rank()));
            sum += static_cast<double>(b.rank());
            if (!b.tolerance_met) ++dg.tolerance_misses;
        }
        dg.mean_rank = blocks.empty() ? 0.0 : sum / static_cast<double>(blocks.size());
    }
    return blocks;
}

std::vector<DenseBlock> probe_near_field(const HierarchicalApprox& state, const SolutionOracle& oracle,
                                         const PeelConfig& cfg, SolveLedger& ledger) {
    const BoxTree& tree = state.tree();
    const Grid& grid = tree.grid();
    const int d = grid.dim();
    const int level = tree.depth();
    const TreeLevel& lvl = tree.level(level);
    const BlockList& list = state.lists().back();
    const Coloring colors = coloring(tree, level, near_field_window);
    const auto width = static_cast<Index>(lvl.boxes.front().nodes.size());
    const double weight = grid.quadrature_weight();

    std::vector<DenseBlock> near(list.near.size());
    auto near_index = [&](int t, int s) {
        auto it = std::lower_bound(list.near.begin(), list.near.end(), BoxPair{t, s});
        return static_cast<std::size_t>(it - list.near.begin());
    };

    for (std::size_t cls = 0; cls < colors.classes.size(); ++cls) {
        Matrix forcing = Matrix::Zero(grid.total(), width);
        for (int s : colors.classes[cls]) {
            const auto& nodes = lvl.boxes[static_cast<std::size_t>(s)].nodes;
            for (Index i = 0; i < width; ++i) forcing(nodes[static_cast<std::size_t>(i)], i) = 1.0;
        }
        const Matrix solution = oracle.solve(forcing, cfg.exec);
        ledger.add(SolvePurpose::near_field, static_cast<std::uint64_t>(width));
        const Matrix residual = solution / weight - state.apply_kernel(forcing, level + 1, cfg.exec);
        const auto nboxes = static_cast<std::int64_t>(lvl.boxes.size());
        parallel_for(cfg.exec, nboxes, [&](std::int64_t t) {
            const int s = colors.partner(lvl, static_cast<int>(t), static_cast<int>(cls), 1, d);
            if (s < 0) return;
            DenseBlock& b = near[near_index(static_cast<int>(t), s)];
            b.target = static_cast<int>(t);
            b.source = s;
            b.values = residual(lvl.boxes[static_cast<std::size_t>(t)].nodes, Eigen::all);
        });
    }
    return near;
}

std::uint64_t expected_training_solves(const BoxTree& tree, const PeelConfig& cfg) {
    std::uint64_t total = cfg.adaptive() ? static_cast<std::uint64_t>(cfg.hs_probes) : 0;
    for (int l = first_admissible_level; l <= tree.depth(); ++l) {
        const auto classes = coloring(tree, l, cfg.window).classes.size();
        total += classes * static_cast<std::uint64_t>(cfg.sketch_width(l) + cfg.posterior_width());
    }
    if (cfg.near_field == NearFieldPolicy::dense_probe) {
        const TreeLevel& fine = tree.level(tree.depth());
        total += coloring(tree, tree.depth(), near_field_window).classes.size() * fine.boxes.front().nodes.size();
    }
    return total;
}

LearnResult learn(const SolutionOracle& oracle, const PeelConfig& cfg) {
    const Grid& grid = oracle.grid();
    validate(cfg, grid);
    auto tree = std::make_shared<const BoxTree>(grid, cfg.levels);
    LearnResult out{HierarchicalApprox(tree, cfg.near_field), SolveLedger{}, std::nullopt, 0.0, {}};

    const auto lists = block_lists(*tree);
    if (cfg.adaptive()) {
        out.schedule = tolerance_schedule(cfg.epsilon, cfg.levels, first_admissible_level);
        // Randomized trace estimate: E ||G w||^2 = ||G||_F^2 for standard normal w.
        const auto probes = CovarianceFactor::white(grid.total(), cfg.seed).draw(cfg.hs_probes, stream_key({hs_stream}));
        const Matrix images = oracle.solve(probes, cfg.exec) / grid.quadrature_weight();
        out.ledger.add(SolvePurpose::hs_estimate, static_cast<std::uint64_t>(cfg.hs_probes));
        out.kernel_frobenius_estimate = std::sqrt(images.colwise().squaredNorm().mean());
    }

    for (int l = first_admissible_level; l <= cfg.levels; ++l) {
        double block_tol = 0.0;
        if (cfg.adaptive()) {
            const auto nadm = static_cast<double>(std::max<std::size_t>(1, lists[static_cast<std::size_t>(l)].admissible.size()));
            block_tol = out.schedule->at(l) * out.kernel_frobenius_estimate / std::sqrt(nadm);
        }
        LevelDiagnostics dg;
        auto blocks = peel_level(out.approx, l, oracle, cfg, block_tol, out.ledger, &dg);
        out.approx.set_level_blocks(l, std::move(blocks));
        out.levels.push_back(dg);
    }

    if (cfg.near_field == NearFieldPolicy::dense_probe)
        out.approx.set_near_blocks(probe_near_field(out.approx, oracle, cfg, out.ledger));
    return out;
}

}  // namespace greenpeel
