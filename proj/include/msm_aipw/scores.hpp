#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "msm_aipw/data.hpp"
#include "msm_aipw/nuisance.hpp"

namespace msm_aipw {

// Sorted, deduplicated evaluation times in (0, tau]. All dt-integrals become
// sums over increments between consecutive points, starting from t = 0.
struct TimeGrid {
    std::vector<double> times;

    std::size_t size() const { return times.size(); }
    // Number of grid points <= x (so points [0, count) have Y = 1 for follow-up x).
    std::size_t count_at_or_before(double x) const;
};

// Observed event and censoring times plus every jump time of the working
// models, restricted to (0, tau]. When a model is continuous, tau itself is
// added so the final stretch of its decline is not lost.
TimeGrid build_time_grid(const Dataset& data, std::span<const NuisanceTriple> nuisances);
TimeGrid build_time_grid(const Dataset& data, const NuisanceTriple& nuisance);

// dM_c(u; a) = dN_c(u) - Y(u) dLambda_c(u; a, z) at each grid point, where
// dLambda_c is minus the increment of the clipped log censoring survival.
std::vector<double> censoring_martingale_increments(const SurvivalRecord& r, double tau,
                                                    const NuisanceTriple& nuisance, int a, const TimeGrid& grid);

// Per-subject augmented increments and risk terms. Gamma is affine in e^beta:
//   Gamma0(t; beta) = g0(t) + e^beta g1(t),   Gamma1(t; beta) = e^beta g1(t).
struct SubjectScores {
    std::vector<double> dn0, dn1;
    std::vector<double> g0, g1;
    std::vector<double> j0, j1;  // cumulative J(t; a)

    double gamma0(std::size_t j, double beta) const { return g0[j] + std::exp(beta) * g1[j]; }
    double gamma1(std::size_t j, double beta) const { return std::exp(beta) * g1[j]; }
};

// Reusable buffers for compute_subject_scores.
struct ScoreWorkspace {
    std::vector<double> s[2], sc[2], logsc[2];
};

void compute_subject_scores(const SurvivalRecord& r, double tau, const NuisanceTriple& nuisance,
                            const TimeGrid& grid, SubjectScores& out, ScoreWorkspace& ws);
SubjectScores compute_subject_scores(const SurvivalRecord& r, double tau, const NuisanceTriple& nuisance,
                                     const TimeGrid& grid);

inline constexpr double kDenominatorGuard = 1e-8;

struct AggregatedScores {
    std::vector<double> s0, s1, abar, v;
    std::size_t guard_events = 0;  // grid points where s0 <= guard
};

AggregatedScores aggregate_scores(std::span<const SubjectScores> scores, double beta);

}  // namespace msm_aipw
