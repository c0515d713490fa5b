#include "greenpeel/hierarchy.hpp"

#include <algorithm>
#include <cstdlib>

#include "greenpeel/errors.hpp"

namespace greenpeel {

int TreeLevel::box_at(const MultiIndex& c, int d) const {
    int i = 0;
    for (int k = 0; k < d; ++k) i = i * boxes_per_dim + c[k];
    return i;
}

int TreeLevel::parent_of(int box, int d) const {
    MultiIndex c = boxes[static_cast<std::size_t>(box)].coords;
    int i = 0;
    for (int k = 0; k < d; ++k) i = i * (boxes_per_dim / 2) + c[k] / 2;
    return i;
}

BoxTree::BoxTree(const Grid& grid, int levels) : grid_(grid), depth_(levels) {
    if (levels < 0) throw ValidationError("number of levels must be non-negative");
    if (levels >= 31 || (1 << levels) > grid.n() || grid.n() % (1 << levels) != 0)
        throw ValidationError("n = " + std::to_string(grid.n()) + " must be divisible by 2^L = 2^" +
                              std::to_string(levels) + " (and 2^L <= n)");
    const int d = grid.dim();
    levels_.resize(static_cast<std::size_t>(levels) + 1);
    for (int l = 0; l <= levels; ++l) {
        TreeLevel& lvl = levels_[static_cast<std::size_t>(l)];
        lvl.level = l;
        lvl.boxes_per_dim = 1 << l;
        lvl.box_width = grid.n() >> l;
        int count = 1;
        for (int k = 0; k < d; ++k) count *= lvl.boxes_per_dim;
        lvl.boxes.resize(static_cast<std::size_t>(count));
        for (int b = 0; b < count; ++b) {
            MultiIndex c{0, 0, 0};
            int rest = b;
            for (int k = d - 1; k >= 0; --k) {
                c[k] = rest % lvl.boxes_per_dim;
                rest /= lvl.boxes_per_dim;
            }
            lvl.boxes[static_cast<std::size_t>(b)].coords = c;
        }
        // Nodes are visited in ascending linear order, so each box's list is sorted.
        for (Index i = 0; i < grid.total(); ++i) {
            MultiIndex m = grid.multi_index(i);
            MultiIndex c{0, 0, 0};
            for (int k = 0; k < d; ++k) c[k] = m[k] / lvl.box_width;
            lvl.boxes[static_cast<std::size_t>(lvl.box_at(c, d))].nodes.push_back(i);
        }
    }
}

BoxTree build_tree(const Grid& grid, int levels) { return BoxTree(grid, levels); }

int box_distance(const TreeLevel& level, int a, int b, int d) {
    const auto& ca = level.boxes[static_cast<std::size_t>(a)].coords;
    const auto& cb = level.boxes[static_cast<std::size_t>(b)].coords;
    int dist = 0;
    for (int k = 0; k < d; ++k) dist = std::max(dist, std::abs(ca[k] - cb[k]));
    return dist;
}

std::vector<BlockList> block_lists(const BoxTree& tree) {
    const int d = tree.grid().dim();
    std::vector<BlockList> lists(static_cast<std::size_t>(tree.depth()) + 1);
    lists[0].level = 0;
    lists[0].near.emplace_back(0, 0);
    for (int l = 1; l <= tree.depth(); ++l) {
        const TreeLevel& lvl = tree.level(l);
        const TreeLevel& up = tree.level(l - 1);
        BlockList& out = lists[static_cast<std::size_t>(l)];
        out.level = l;
        const int count = static_cast<int>(lvl.boxes.size());
        for (int t = 0; t < count; ++t) {
            const int pt = lvl.parent_of(t, d);
            // Children of the parent's near neighbours: coords within
            // [2(p-1), 2(p+1)+1] on every axis.
            MultiIndex lo{0, 0, 0}, hi{0, 0, 0};
            const auto& pc = up.boxes[static_cast<std::size_t>(pt)].coords;
            for (int k = 0; k < d; ++k) {
                lo[k] = std::max(0, 2 * (pc[k] - 1));
                hi[k] = std::min(lvl.boxes_per_dim - 1, 2 * (pc[k] + 1) + 1);
            }
            MultiIndex c = lo;
            while (true) {
                const int s = lvl.box_at(c, d);
                if (box_distance(lvl, t, s, d) <= 1)
                    out.near.emplace_back(t, s);
                else
                    out.admissible.emplace_back(t, s);
                int k = d - 1;
                while (k >= 0 && c[k] == hi[k]) {
                    c[k] = lo[k];
                    --k;
                }
                if (k < 0) break;
                ++c[k];
            }
        }
    }
    return lists;
}

Coloring coloring(const BoxTree& tree, int level, int window) {
    if (window < 1) throw ValidationError("coloring window must be positive");
    const int d = tree.grid().dim();
    const TreeLevel& lvl = tree.level(level);
    Coloring col;
    col.level = level;
    col.window = window;
    col.color_of.resize(lvl.boxes.size());
    for (std::size_t b = 0; b < lvl.boxes.size(); ++b) {
        int color = 0;
        for (int k = d - 1; k >= 0; --k) color = color * window + lvl.boxes[b].coords[k] % window;
        col.color_of[b] = color;
    }
    std::vector<int> ids = col.color_of;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    col.classes.resize(ids.size());
    col.class_of.resize(lvl.boxes.size());
    for (std::size_t b = 0; b < lvl.boxes.size(); ++b) {
        const auto cls = static_cast<int>(std::lower_bound(ids.begin(), ids.end(), col.color_of[b]) - ids.begin());
        col.class_of[b] = cls;
        col.classes[static_cast<std::size_t>(cls)].push_back(static_cast<int>(b));
    }
    return col;
}

int Coloring::partner(const TreeLevel& lvl, int target, int cls, int radius, int d) const {
    const auto& tc = lvl.boxes[static_cast<std::size_t>(target)].coords;
    MultiIndex lo{0, 0, 0}, hi{0, 0, 0};
    for (int k = 0; k < d; ++k) {
        lo[k] = std::max(0, tc[k] - radius);
        hi[k] = std::min(lvl.boxes_per_dim - 1, tc[k] + radius);
    }
    MultiIndex c = lo;
    while (true) {
        const int s = lvl.box_at(c, d);
        if (class_of[static_cast<std::size_t>(s)] == cls) return s;
        int k = d - 1;
        while (k >= 0 && c[k] == hi[k]) {
            c[k] = lo[k];
            --k;
        }
        if (k < 0) return -1;
        ++c[k];
    }
}

bool coloring_valid(const BoxTree& tree, const Coloring& colors, int radius) {
    const int d = tree.grid().dim();
    const TreeLevel& lvl = tree.level(colors.level);
    const int count = static_cast<int>(lvl.boxes.size());
    for (int t = 0; t < count; ++t) {
        std::vector<int> seen(colors.classes.size(), 0);
        for (int s = 0; s < count; ++s) {
            if (box_distance(lvl, t, s, d) > radius) continue;
            if (++seen[static_cast<std::size_t>(colors.class_of[static_cast<std::size_t>(s)])] > 1) return false;
        }
    }
    return true;
}

}  // namespace greenpeel
