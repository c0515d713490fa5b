#pragma once

namespace greenpeel {

/// Sample-budget curve C0 * log(1/eps)^5 * (log log(1/eps) + log(1/gamma))^4.
/// C0 is a fitting constant. Requires 0 < eps < 1/e, 0 < gamma <= 1, C0 > 0.
double n_theory(double epsilon, double gamma, double c0 = 1.0);

/// exp(-log(1/eps)^3), the failure-probability bound. Requires 0 < eps < 1.
double failure_bound(double epsilon);

/// log10 of failure_bound, usable when the bound underflows.
double failure_bound_log10(double epsilon);

}  // namespace greenpeel
