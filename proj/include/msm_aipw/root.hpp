#pragma once

#include <functional>

namespace msm_aipw {

struct RootResult {
    double root = 0.0;
    double value = 0.0;  // f(root)
    int iterations = 0;
    double lo = 0.0;     // final bracket used
    double hi = 0.0;
};

struct BrentOptions {
    double x_tol = 1e-12;
    int max_iter = 200;
};

// Brent's method on a bracket [lo, hi] with f(lo) * f(hi) <= 0.
// Throws fit_error if the bracket does not straddle a root.
RootResult brent_root(const std::function<double(double)>& f, double lo, double hi,
                      const BrentOptions& opt = {});

// Root of a scalar estimating equation: starts from [-20, 20] and widens the
// bracket geometrically up to [-50, 50]. No sign change signals a degenerate
// estimating equation (separation-like data).
RootResult solve_beta(const std::function<double(double)>& u, const BrentOptions& opt = {});

// As solve_beta, for equations that may change sign more than once: scans the
// bracket on a mesh of width `step`, refines every sign change by Brent and
// returns the root nearest 0 among those satisfying `prefer`, or the root
// nearest 0 when none does.
RootResult solve_beta_scan(const std::function<double(double)>& u, const std::function<bool(double)>& prefer,
                           double step = 0.25, const BrentOptions& opt = {});

}  // namespace msm_aipw
