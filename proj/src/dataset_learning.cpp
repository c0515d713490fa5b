#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "greenpeel/errors.hpp"
#include "greenpeel/oracle.hpp"
#include "greenpeel/peeling.hpp"

namespace greenpeel {

namespace {

constexpr double rank_tolerance = 1e-10;

int numerical_rank(const Matrix& a) {
    if (a.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(a);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    return static_cast<int>((s.array() > rank_tolerance * s(0)).count());
}

std::vector<int> candidate_ranks(int k_max, int k_step) {
    std::vector<int> ranks;
    for (int k = 0; k < k_max; k += k_step) ranks.push_back(k);
    ranks.push_back(k_max);
    return ranks;
}

// Rank-k truncation of a dense block (k = -1 selects the smallest candidate
// rank whose discarded Frobenius mass is within tol).
LowRankBlock truncate(const Matrix& a, int k, double tol, int k_max, int k_step) {
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const auto limit = static_cast<int>(s.size());
    LowRankBlock b;
    b.rows = a.rows();
    b.cols = a.cols();
    int rank = k;
    if (k < 0) {
        b.tolerance_met = false;
        rank = std::min(k_max, limit);
        for (int r : candidate_ranks(k_max, k_step)) {
            const int rr = std::min(r, limit);
            const double tail = s.tail(limit - rr).norm();
            if (tail <= tol) {
                rank = rr;
                b.tolerance_met = true;
                break;
            }
        }
    }
    rank = std::min(rank, limit);
    while (rank > 0 && s(rank - 1) == 0.0) --rank;
    b.u = svd.matrixU().leftCols(rank);
    b.s = s.head(rank);
    b.v = svd.matrixV().leftCols(rank);
    b.error_estimate = s.tail(limit - rank).norm();
    return b;
}

// Boxes interacting with `target` at `level` once coarser levels are peeled:
// the admissible and near pairs with that target, in source order.
std::vector<int> neighborhood(const BlockList& list, int target) {
    std::vector<int> sources;
    for (const auto* pairs : {&list.admissible, &list.near})
        for (auto [t, s] : *pairs)
            if (t == target) sources.push_back(s);
    std::sort(sources.begin(), sources.end());
    return sources;
}

DatasetLearnResult least_squares(const TrainingSet& data, const PeelConfig& cfg) {
    const Grid& grid = data.grid;
    auto tree = std::make_shared<const BoxTree>(grid, cfg.levels);
    DatasetLearnResult out{
        LearnResult{HierarchicalApprox(tree, cfg.near_field), SolveLedger{}, std::nullopt, 0.0, {}},
        DatasetDiagnostics{"least_squares", {}, {}}};
    HierarchicalApprox& approx = out.result.approx;
    out.result.ledger.add(SolvePurpose::dataset, static_cast<std::uint64_t>(data.size()));

    const double weight = grid.quadrature_weight();
    const Matrix& f = data.forcings;
    const Matrix images = data.solutions / weight;

    // Per-box energy and rank of the restricted forcings; a box whose forcings
    // do not span its nodes cannot be separated from its neighbours.
    auto& energy = out.diagnostics.box_energy;
    auto& ranks = out.diagnostics.box_rank;
    energy.resize(static_cast<std::size_t>(cfg.levels) + 1);
    ranks.resize(static_cast<std::size_t>(cfg.levels) + 1);
    for (int l = first_admissible_level; l <= cfg.levels; ++l) {
        const TreeLevel& lvl = tree->level(l);
        auto& e = energy[static_cast<std::size_t>(l)];
        auto& r = ranks[static_cast<std::size_t>(l)];
        e.resize(lvl.boxes.size());
        r.resize(lvl.boxes.size());
        parallel_for(cfg.exec, static_cast<std::int64_t>(lvl.boxes.size()), [&](std::int64_t b) {
            const Matrix fb = f(lvl.boxes[static_cast<std::size_t>(b)].nodes, Eigen::all);
            e[static_cast<std::size_t>(b)] = fb.size() ? fb.squaredNorm() / static_cast<double>(fb.size()) : 0.0;
            r[static_cast<std::size_t>(b)] = numerical_rank(fb);
        });
        std::vector<int> starved;
        for (std::size_t b = 0; b < lvl.boxes.size(); ++b)
            if (r[b] < static_cast<int>(lvl.boxes[b].nodes.size())) starved.push_back(static_cast<int>(b));
        if (!starved.empty()) {
            std::ostringstream msg;
            msg << "insufficient probe diversity at level " << l << ": boxes";
            for (std::size_t i = 0; i < std::min<std::size_t>(starved.size(), 16); ++i) msg << ' ' << starved[i];
            if (starved.size() > 16) msg << " ... (" << starved.size() << " boxes)";
            msg << " have forcings of rank " << r[static_cast<std::size_t>(starved.front())] << " < "
                << lvl.boxes.front().nodes.size() << " nodes";
            throw InsufficientDiversity(msg.str(), starved, l);
        }
    }

    if (cfg.adaptive()) {
        out.result.schedule = tolerance_schedule(cfg.epsilon, cfg.levels, first_admissible_level);
        // E ||G f||^2 / ||f||^2 * total = ||G||_F^2 for isotropic forcings.
        double acc = 0.0;
        Index used = 0;
        for (Index j = 0; j < data.size(); ++j) {
            const double fn = f.col(j).squaredNorm();
            if (fn == 0.0) continue;
            acc += images.col(j).squaredNorm() / fn;
            ++used;
        }
        out.result.kernel_frobenius_estimate =
            used ? std::sqrt(acc / static_cast<double>(used) * static_cast<double>(grid.total())) : 0.0;
    }

    const auto& lists = approx.lists();
    for (int l = first_admissible_level; l <= cfg.levels; ++l) {
        const TreeLevel& lvl = tree->level(l);
        const BlockList& list = lists[static_cast<std::size_t>(l)];
        const Matrix residual = images - approx.apply_kernel(f, l, cfg.exec);
        double block_tol = 0.0;
        if (cfg.adaptive())
            block_tol = out.result.schedule->at(l) * out.result.kernel_frobenius_estimate /
                        std::sqrt(static_cast<double>(std::max<std::size_t>(1, list.admissible.size())));

        std::vector<LowRankBlock> blocks(list.admissible.size());
        std::vector<DenseBlock> near(l == cfg.levels ? list.near.size() : 0);
        parallel_for(cfg.exec, static_cast<std::int64_t>(lvl.boxes.size()), [&](std::int64_t tt) {
            const int t = static_cast<int>(tt);
            const std::vector<int> sources = neighborhood(list, t);
            const auto width = static_cast<Index>(lvl.boxes.front().nodes.size());
            Matrix stacked(width * static_cast<Index>(sources.size()), data.size());
            for (std::size_t i = 0; i < sources.size(); ++i)
                stacked.middleRows(static_cast<Index>(i) * width, width) =
                    f(lvl.boxes[static_cast<std::size_t>(sources[i])].nodes, Eigen::all);
            const Matrix rt = residual(lvl.boxes[static_cast<std::size_t>(t)].nodes, Eigen::all);
            // rt = X stacked  <=>  stacked^T X^T = rt^T
            const Matrix x = stacked.transpose().completeOrthogonalDecomposition().solve(rt.transpose()).transpose();
            for (std::size_t i = 0; i < sources.size(); ++i) {
                const int s = sources[i];
                const Matrix block = x.middleCols(static_cast<Index>(i) * width, width);
                const int idx = approx.admissible_index(l, t, s);
                if (idx >= 0) {
                    LowRankBlock b = cfg.adaptive() ? truncate(block, -1, block_tol, cfg.k_max, cfg.k_step)
                                                    : truncate(block, cfg.rank_for_level(l), 0.0, 0, 1);
                    b.target = t;
                    b.source = s;
                    blocks[static_cast<std::size_t>(idx)] = std::move(b);
                } else if (!near.empty()) {
                    auto it = std::lower_bound(list.near.begin(), list.near.end(), BoxPair{t, s});
                    near[static_cast<std::size_t>(it - list.near.begin())] = DenseBlock{t, s, block};
                }
            }
        });
        approx.set_level_blocks(l, std::move(blocks));
        if (l == cfg.levels && cfg.near_field == NearFieldPolicy::dense_probe) approx.set_near_blocks(std::move(near));
    }
    return out;
}

}  // namespace

DatasetLearnResult learn_from_dataset(const TrainingSet& data, const PeelConfig& cfg) {
    validate(cfg, data.grid);
    if (data.size() == 0) throw ValidationError("dataset is empty");
    try {
        ReplayOracle replay(data);
        LearnResult r = learn(replay, cfg);
        DatasetDiagnostics diag{"replay", {}, {}};
        return DatasetLearnResult{std::move(r), std::move(diag)};
    } catch (const ReplayMiss&) {
        return least_squares(data, cfg);
    }
}

}  // namespace greenpeel
