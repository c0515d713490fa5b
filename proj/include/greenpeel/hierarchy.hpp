#pragma once

#include <utility>
#include <vector>

#include "greenpeel/grid.hpp"

namespace greenpeel {

struct Box {
    MultiIndex coords{0, 0, 0};  ///< box lattice coordinates at its level
    std::vector<Index> nodes;    ///< grid node indices, ascending
};

struct TreeLevel {
    int level = 0;
    int boxes_per_dim = 1;
    int box_width = 0;  ///< grid nodes per dimension inside one box
    std::vector<Box> boxes;  ///< lexicographic in coords, first axis slowest

    int box_at(const MultiIndex& c, int d) const;
    int parent_of(int box, int d) const;  ///< index at level - 1
};

/// Dyadic partition of the index lattice: level l has 2^(l d) boxes.
class BoxTree {
public:
    BoxTree(const Grid& grid, int levels);

    const Grid& grid() const { return grid_; }
    int depth() const { return depth_; }  ///< L, levels below the root
    const TreeLevel& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }

private:
    Grid grid_;
    int depth_;
    std::vector<TreeLevel> levels_;
};

BoxTree build_tree(const Grid& grid, int levels);

/// Chebyshev distance between the lattice coordinates of two same-level boxes.
int box_distance(const TreeLevel& level, int a, int b, int d);

using BoxPair = std::pair<int, int>;  ///< (target, source)

struct BlockList {
    int level = 0;
    std::vector<BoxPair> admissible;  ///< near parents, distance >= 2
    std::vector<BoxPair> near;        ///< distance <= 1
};

/// One list per level 0..L, pairs sorted by (target, source).
std::vector<BlockList> block_lists(const BoxTree& tree);

/// First level that can contain admissible pairs (4 boxes per dimension).
inline constexpr int first_admissible_level = 2;

/// Boxes grouped so that simultaneous probes on one group produce separable
/// responses: color = mixed-radix digits of (coords mod window).
struct Coloring {
    int level = 0;
    int window = 7;
    std::vector<int> color_of;               ///< per box
    std::vector<int> class_of;               ///< per box, index into classes
    std::vector<std::vector<int>> classes;   ///< nonempty classes, ascending color id

    /// The box of class `cls` within distance `radius` of `target`, or -1.
    /// Valid only when the coloring is valid for that radius.
    int partner(const TreeLevel& lvl, int target, int cls, int radius, int d) const;
};

Coloring coloring(const BoxTree& tree, int level, int window = 7);

/// True when every target sees at most one box of each color within
/// Chebyshev distance `radius`. Brute force.
bool coloring_valid(const BoxTree& tree, const Coloring& colors, int radius = 3);

}  // namespace greenpeel
