#pragma once

// Naive evaluation of the AIPW score terms from their definitions, sharing no
// code with the library. Cox survival is evaluated in closed form and every
// sum runs over the grid explicitly. Only meant for a handful of subjects.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <vector>

namespace brute {

struct Subject {
    double x;
    int delta;
    int a;
    double z;
};

// S(t; a, z) = exp{-L(t) exp(ba a + bz z)}, L a right-continuous step function.
struct CoxStep {
    std::vector<double> jump_t, jump_h;  // jump times and increments of L
    double ba, bz;

    double surv(double t, int a, double z) const {
        double L = 0.0;
        for (std::size_t k = 0; k < jump_t.size(); ++k)
            if (jump_t[k] <= t) L += jump_h[k];
        return std::exp(-L * std::exp(ba * a + bz * z));
    }
};

struct Nuisance {
    double g0, g1;  // logit pi(z) = g0 + g1 z
    CoxStep event, cens;
    double ps_lo, ps_hi, floor;

    double pi(double z) const {
        const double p = 1.0 / (1.0 + std::exp(-(g0 + g1 * z)));
        return std::min(std::max(p, ps_lo), ps_hi);
    }
    double pi_of(int a, double z) const { return a == 1 ? pi(z) : 1.0 - pi(z); }
    double S(double t, int a, double z) const { return t <= 0 ? 1.0 : std::max(event.surv(t, a, z), floor); }
    double Sc(double t, int a, double z) const { return t <= 0 ? 1.0 : std::max(cens.surv(t, a, z), floor); }
};

inline double prev_t(const std::vector<double>& grid, std::size_t j) { return j == 0 ? 0.0 : grid[j - 1]; }

inline double Y(const Subject& s, double t) { return s.x >= t ? 1.0 : 0.0; }
inline double dN(const Subject& s, double t) { return s.delta == 1 && s.x == t ? 1.0 : 0.0; }
inline double dNc(const Subject& s, double t, double tau) { return s.delta == 0 && s.x < tau && s.x == t ? 1.0 : 0.0; }

inline double dS(const Nuisance& nu, const std::vector<double>& grid, std::size_t j, int a, double z) {
    return nu.S(grid[j], a, z) - nu.S(prev_t(grid, j), a, z);
}

inline double dMc(const Subject& s, const Nuisance& nu, const std::vector<double>& grid, std::size_t j, int a,
                  double tau) {
    const double dLc = -(std::log(nu.Sc(grid[j], a, s.z)) - std::log(nu.Sc(prev_t(grid, j), a, s.z)));
    return dNc(s, grid[j], tau) - Y(s, grid[j]) * dLc;
}

inline double J(const Subject& s, const Nuisance& nu, const std::vector<double>& grid, std::size_t j, int a,
                double tau) {
    double acc = 0.0;
    for (std::size_t u = 0; u <= j; ++u)
        acc += dMc(s, nu, grid, u, a, tau) / (nu.S(grid[u], a, s.z) * nu.Sc(grid[u], a, s.z));
    return acc;
}

inline double w(const Subject& s, const Nuisance& nu, int a) {
    return std::pow(s.a, a) * std::pow(1 - s.a, 1 - a) / nu.pi_of(a, s.z);
}

// d script-N^(l) at grid point j.
inline double dcalN(int l, const Subject& s, const Nuisance& nu, const std::vector<double>& grid, std::size_t j,
                    double tau) {
    const double t = grid[j];
    const double pt = nu.pi_of(s.a, s.z);
    double v = std::pow(s.a, l) * dN(s, t) / (pt * nu.Sc(t, s.a, s.z));
    v += std::pow(s.a, l) * dS(nu, grid, j, s.a, s.z) / pt;
    for (int a = 0; a <= 1; ++a)
        v -= std::pow(a, l) * (1.0 + w(s, nu, a) * J(s, nu, grid, j, a, tau)) * dS(nu, grid, j, a, s.z);
    return v;
}

inline double Gamma(int l, double beta, const Subject& s, const Nuisance& nu, const std::vector<double>& grid,
                    std::size_t j, double tau) {
    const double t = grid[j];
    const double pt = nu.pi_of(s.a, s.z);
    double v = std::pow(s.a, l) * Y(s, t) * std::exp(beta * s.a) / (pt * nu.Sc(t, s.a, s.z));
    v -= std::pow(s.a, l) * nu.S(t, s.a, s.z) * std::exp(beta * s.a) / pt;
    for (int a = 0; a <= 1; ++a)
        v += std::pow(a, l) * std::exp(beta * a) * (1.0 + w(s, nu, a) * J(s, nu, grid, j, a, tau)) * nu.S(t, a, s.z);
    return v;
}

// Cross-fitting problem: subjects, fold labels, one nuisance per fold.
struct Problem {
    std::vector<Subject> subjects;
    std::vector<int> fold;
    std::vector<Nuisance> nuisance;
    std::vector<double> grid;
    double tau;

    int k() const { return static_cast<int>(nuisance.size()); }
    std::vector<std::size_t> members(int m) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < subjects.size(); ++i)
            if (fold[i] == m) out.push_back(i);
        return out;
    }
    const Nuisance& nu_of(std::size_t i) const { return nuisance[static_cast<std::size_t>(fold[i])]; }

    double S_l(int l, int m, double beta, std::size_t j) const {
        const auto mem = members(m);
        double acc = 0.0;
        for (auto i : mem) acc += Gamma(l, beta, subjects[i], nu_of(i), grid, j, tau);
        return acc / static_cast<double>(mem.size());
    }
    double Abar(int m, double beta, std::size_t j) const { return S_l(1, m, beta, j) / S_l(0, m, beta, j); }

    double U(double beta) const {
        double total = 0.0;
        for (int m = 0; m < k(); ++m) {
            const auto mem = members(m);
            double um = 0.0;
            for (auto i : mem)
                for (std::size_t j = 0; j < grid.size(); ++j)
                    um += dcalN(1, subjects[i], nu_of(i), grid, j, tau) -
                          Abar(m, beta, j) * dcalN(0, subjects[i], nu_of(i), grid, j, tau);
            total += um / static_cast<double>(mem.size());
        }
        return total / k();
    }

    double Lambda_tilde(int m, double beta, double t) const {
        const auto mem = members(m);
        double acc = 0.0;
        for (auto i : mem)
            for (std::size_t j = 0; j < grid.size() && grid[j] <= t; ++j)
                acc += dcalN(0, subjects[i], nu_of(i), grid, j, tau) / S_l(0, m, beta, j);
        return acc / static_cast<double>(mem.size());
    }

    double psi(std::size_t i, double beta) const {
        const int m = fold[i];
        const auto& s = subjects[i];
        const auto& nu = nu_of(i);
        double d2 = 0.0, ad1 = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double dL = Lambda_tilde(m, beta, grid[j]) - (j == 0 ? 0.0 : Lambda_tilde(m, beta, grid[j - 1]));
            const double d1 = dcalN(0, s, nu, grid, j, tau) - Gamma(0, beta, s, nu, grid, j, tau) * dL;
            d2 += dcalN(1, s, nu, grid, j, tau) - Gamma(1, beta, s, nu, grid, j, tau) * dL;
            ad1 += Abar(m, beta, j) * d1;
        }
        return d2 - ad1;
    }

    double sigma2(double beta) const {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            const double p = psi(i, beta);
            num += p * p;
            const int m = fold[i];
            for (std::size_t j = 0; j < grid.size(); ++j) {
                const double ab = Abar(m, beta, j);
                den += (ab - ab * ab) * dcalN(0, subjects[i], nu_of(i), grid, j, tau);
            }
        }
        return static_cast<double>(subjects.size()) * num / (den * den);
    }
};

}  // namespace brute
