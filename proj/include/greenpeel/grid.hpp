#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace greenpeel {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Point = std::array<double, 3>;
using MultiIndex = std::array<int, 3>;

/// Uniform interior grid on the unit box [0,1]^d with zero Dirichlet boundary.
///
/// Nodes sit at (m+1)*h for m in {0..n-1} per dimension, h = 1/(n+1). Linear
/// indices are lexicographic with the first coordinate slowest.
class Grid {
public:
    static constexpr Index default_node_cap = Index{1} << 22;

    Grid(int d, int n, Index node_cap = default_node_cap);

    int dim() const { return d_; }
    int n() const { return n_; }
    double h() const { return h_; }
    Index total() const { return total_; }
    /// h^d, the weight turning kernel samples into operator action.
    double quadrature_weight() const { return weight_; }

    MultiIndex multi_index(Index i) const;
    Index linear_index(const MultiIndex& m) const;
    Point node(Index i) const;
    double coordinate(int m) const { return (m + 1) * h_; }

    bool operator==(const Grid& o) const { return d_ == o.d_ && n_ == o.n_; }

private:
    int d_;
    int n_;
    double h_;
    double weight_;
    Index total_;
};

Grid build_grid(int d, int n, Index node_cap = Grid::default_node_cap);

/// Isotropic scalar coefficient a(x), sampled at flux points (midpoints between
/// neighbouring nodes, or between a node and the boundary).
class CoefficientField {
public:
    using Function = std::function<double(const Point&)>;

    static CoefficientField identity();
    static CoefficientField from_function(std::string name, Function a);
    /// Flux values are the mean of the two adjacent nodal samples; at the
    /// boundary the single adjacent node is used.
    static CoefficientField from_nodal(const Grid& grid, Vector values);
    /// "identity", "smooth" or "checkerboard".
    static CoefficientField preset(std::string_view name);

    const std::string& name() const { return name_; }

    /// Value on the edge between multi-index m and m + e_axis. m[axis] may be -1
    /// (lower boundary edge); m[axis] == n-1 is the upper boundary edge.
    double at_flux(const Grid& grid, const MultiIndex& m, int axis) const;

private:
    std::string name_;
    Function fn_;
    Vector nodal_;
    int nodal_n_ = 0;
    int nodal_d_ = 0;
};

enum class FieldRole { forcing, solution };

struct FieldVector {
    Vector values;
    FieldRole role = FieldRole::forcing;
};

}  // namespace greenpeel
