#include "greenpeel/grid.hpp"

#include <cmath>
#include <numbers>

#include "greenpeel/errors.hpp"

namespace greenpeel {

Grid::Grid(int d, int n, Index node_cap) : d_(d), n_(n) {
    if (d < 1 || d > 3)
        throw ValidationError("grid dimension must be 1, 2 or 3 (got " + std::to_string(d) + ")");
    if (n < 2)
        throw ValidationError("grid needs at least 2 points per dimension (got " + std::to_string(n) + ")");
    total_ = 1;
    for (int k = 0; k < d; ++k) {
        total_ *= n;
        if (total_ > node_cap)
            throw CapExceeded("grid with n=" + std::to_string(n) + ", d=" + std::to_string(d) +
                              " exceeds the node cap " + std::to_string(node_cap));
    }
    h_ = 1.0 / (n + 1);
    weight_ = std::pow(h_, d);
}

MultiIndex Grid::multi_index(Index i) const {
    MultiIndex m{0, 0, 0};
    for (int k = d_ - 1; k >= 0; --k) {
        m[k] = static_cast<int>(i % n_);
        i /= n_;
    }
    return m;
}

Index Grid::linear_index(const MultiIndex& m) const {
    Index i = 0;
    for (int k = 0; k < d_; ++k) i = i * n_ + m[k];
    return i;
}

Point Grid::node(Index i) const {
    const auto m = multi_index(i);
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < d_; ++k) x[k] = coordinate(m[k]);
    return x;
}

Grid build_grid(int d, int n, Index node_cap) { return Grid(d, n, node_cap); }

CoefficientField CoefficientField::identity() {
    return from_function("identity", [](const Point&) { return 1.0; });
}

CoefficientField CoefficientField::from_function(std::string name, Function a) {
    CoefficientField c;
    c.name_ = std::move(name);
    c.fn_ = std::move(a);
    return c;
}

CoefficientField CoefficientField::from_nodal(const Grid& grid, Vector values) {
    if (values.size() != grid.total())
        throw ValidationError("nodal coefficient has " + std::to_string(values.size()) +
                              " samples, grid has " + std::to_string(grid.total()));
    CoefficientField c;
    c.name_ = "nodal";
    c.nodal_ = std::move(values);
    c.nodal_n_ = grid.n();
    c.nodal_d_ = grid.dim();
    return c;
}

CoefficientField CoefficientField::preset(std::string_view name) {
    using std::numbers::pi;
    if (name == "identity") return identity();
    if (name == "smooth") {
        // 1 + 0.5 sin(2 pi x1) cos(2 pi x2) cos(2 pi x3); trailing factors
        // are absent in lower dimensions (coordinates there are 0).
        return from_function("smooth", [](const Point& x) {
            return 1.0 + 0.5 * std::sin(2 * pi * x[0]) * std::cos(2 * pi * x[1]) *
                             std::cos(2 * pi * x[2]);
        });
    }
    if (name == "checkerboard") {
        // 2x..x2 cells; contrast 10 between neighbouring cells.
        return from_function("checkerboard", [](const Point& x) {
            int parity = 0;
            for (double xi : x) parity += xi >= 0.5 ? 1 : 0;
            return parity % 2 == 1 ? 10.0 : 1.0;
        });
    }
    throw ValidationError("unknown coefficient preset '" + std::string(name) +
                          "' (expected identity, smooth or checkerboard)");
}

double CoefficientField::at_flux(const Grid& grid, const MultiIndex& m, int axis) const {
    if (nodal_.size() > 0) {
        if (grid.n() != nodal_n_ || grid.dim() != nodal_d_)
            throw ValidationError("nodal coefficient was sampled on a different grid");
        MultiIndex lo = m;
        MultiIndex hi = m;
        hi[axis] += 1;
        const bool has_lo = lo[axis] >= 0;
        const bool has_hi = hi[axis] < grid.n();
        if (has_lo && has_hi)
            return 0.5 * (nodal_[grid.linear_index(lo)] + nodal_[grid.linear_index(hi)]);
        return has_lo ? nodal_[grid.linear_index(lo)] : nodal_[grid.linear_index(hi)];
    }
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < grid.dim(); ++k) x[k] = grid.coordinate(m[k]);
    x[axis] = (m[axis] + 1.5) * grid.h();
    return fn_(x);
}

}  // namespace greenpeel
