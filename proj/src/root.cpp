#include "msm_aipw/root.hpp"

#include <cmath>
#include <limits>
#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm_aipw/errors.hpp"

namespace msm_aipw {

RootResult brent_root(const std::function<double(double)>& f, double lo, double hi, const BrentOptions& opt) {
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (!std::isfinite(fa) || !std::isfinite(fb)) throw fit_error("non-finite function value at bracket end");
    if (fa == 0.0) return {a, fa, 0, lo, hi};
    if (fb == 0.0) return {b, fb, 0, lo, hi};
    if ((fa > 0.0) == (fb > 0.0)) throw fit_error("root is not bracketed");

    const double eps = std::numeric_limits<double>::epsilon();
    double c = b, fc = fb, d = 0.0, e = 0.0;
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            e = d = b - a;
        }
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2.0 * eps * std::fabs(b) + 0.5 * opt.x_tol;
        const double xm = 0.5 * (c - b);
        if (std::fabs(xm) <= tol1 || fb == 0.0) return {b, fb, iter, lo, hi};

        if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
            // inverse quadratic interpolation, or secant when a == c
            const double s = fb / fa;
            double p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qa = fa / fc, r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::fabs(p);
            const double min1 = 3.0 * xm * q - std::fabs(tol1 * q);
            const double min2 = std::fabs(e * q);
            if (2.0 * p < std::min(min1, min2)) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::fabs(d) > tol1 ? d : std::copysign(tol1, xm);
        fb = f(b);
        if (!std::isfinite(fb)) throw fit_error("non-finite function value during root search");
    }
    throw fit_error("Brent iteration limit (" + std::to_string(opt.max_iter) + ") reached");
}

RootResult solve_beta(const std::function<double(double)>& u, const BrentOptions& opt) {
    constexpr double start = 20.0, limit = 50.0, growth = 1.25;
    double half = start;
    while (true) {
        const double flo = u(-half), fhi = u(half);
        if (std::isfinite(flo) && std::isfinite(fhi) && (flo == 0.0 || fhi == 0.0 || (flo > 0.0) != (fhi > 0.0))) {
            return brent_root(u, -half, half, opt);
        }
        if (half >= limit) break;
        half = std::min(limit, half * growth);
    }
    throw fit_error("estimating equation has no root in range [-50, 50]");
}

RootResult solve_beta_scan(const std::function<double(double)>& u, const std::function<bool(double)>& prefer,
                           double step, const BrentOptions& opt) {
    constexpr double start = 20.0, limit = 50.0, growth = 1.25;
    if (!(step > 0.0)) throw std::invalid_argument("scan step must be positive");
    double half = start;
    while (true) {
        std::vector<RootResult> roots;
        const int cells = static_cast<int>(std::ceil(2.0 * half / step));
        double x0 = -half, f0 = u(x0);
        for (int i = 1; i <= cells; ++i) {
            const double x1 = i == cells ? half : -half + 2.0 * half * i / cells;
            const double f1 = u(x1);
            if (std::isfinite(f0) && std::isfinite(f1)) {
                if (f0 == 0.0) {
                    roots.push_back({x0, 0.0, 0, x0, x0});
                } else if (f1 != 0.0 && (f0 > 0.0) != (f1 > 0.0)) {
                    roots.push_back(brent_root(u, x0, x1, opt));
                } else if (i == cells && f1 == 0.0) {
                    roots.push_back({x1, 0.0, 0, x1, x1});
                }
            }
            x0 = x1;
            f0 = f1;
        }
        if (!roots.empty()) {
            auto nearer = [](const RootResult& a, const RootResult& b) { return std::fabs(a.root) < std::fabs(b.root); };
            std::stable_sort(roots.begin(), roots.end(), nearer);
            for (const auto& r : roots) {
                if (prefer(r.root)) return r;
            }
            return roots.front();
        }
        if (half >= limit) break;
        half = std::min(limit, half * growth);
    }
    throw fit_error("estimating equation has no root in range [-50, 50]");
}

}  // namespace msm_aipw
