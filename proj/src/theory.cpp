#include "greenpeel/theory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "greenpeel/errors.hpp"

namespace greenpeel {

double n_theory(double epsilon, double gamma, double c0) {
    if (!(epsilon > 0.0 && epsilon < std::exp(-1.0)))
        throw ValidationError("n_theory: epsilon must lie in (0, 1/e), got " + std::to_string(epsilon));
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw ValidationError("n_theory: gamma must lie in (0, 1], got " + std::to_string(gamma));
    if (!(c0 > 0.0) || !std::isfinite(c0)) throw ValidationError("n_theory: C0 must be positive");
    const double l = std::log(1.0 / epsilon);
    const double bracket = std::log(l) + std::log(1.0 / gamma);
    return c0 * std::pow(l, 5) * std::pow(bracket, 4);
}

double failure_bound(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ValidationError("failure_bound: epsilon must lie in (0, 1), got " + std::to_string(epsilon));
    return std::exp(-std::pow(std::log(1.0 / epsilon), 3));
}

double failure_bound_log10(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ValidationError("failure_bound: epsilon must lie in (0, 1), got " + std::to_string(epsilon));
    return -std::pow(std::log(1.0 / epsilon), 3) / std::numbers::ln10;
}

}  // namespace greenpeel
