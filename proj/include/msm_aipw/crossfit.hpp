#pragma once

#include <cstddef>
#include <vector>

#include "msm_aipw/data.hpp"
#include "msm_aipw/nuisance.hpp"
#include "msm_aipw/scores.hpp"

namespace msm_aipw {

// Per-fold sums over in-fold subjects of the score building blocks at each
// grid point. Gamma is affine in e^beta, so these four vectors determine
// U_m(beta), its derivative and Lambda_m(t; beta) for every beta.
struct FoldSums {
    std::size_t n = 0;
    std::vector<double> g0, g1, d0, d1;
};

struct VarianceResult {
    double sigma2 = 0.0;           // sigma-hat squared
    double se = 0.0;               // sigma-hat / sqrt(n)
    double denominator = 0.0;      // sum_m sum_i sum_t V_m dN0_i
    std::vector<double> psi;       // per subject, dataset order
};

// The profiled cross-fitted estimating equation for fixed per-fold
// nuisances. Construction streams every subject once to build FoldSums;
// variance() streams them again to form the influence terms.
class CrossFitProblem {
public:
    CrossFitProblem(const Dataset& data, FoldAssignment folds, std::vector<NuisanceTriple> nuisances);

    const TimeGrid& grid() const { return grid_; }
    const FoldAssignment& folds() const { return folds_; }
    const std::vector<FoldSums>& fold_sums() const { return sums_; }
    const NuisanceTriple& nuisance(int m) const { return nuisances_[static_cast<std::size_t>(m)]; }

    double u_fold(int m, double beta) const;
    double u(double beta) const;
    double du(double beta) const;  // analytic derivative

    // Fold aggregates at beta: S0, S1 (means), Abar (guarded) and V.
    AggregatedScores aggregate(int m, double beta) const;
    std::size_t guard_events(double beta) const;

    // Cumulative Lambda-tilde_m at each grid point, and the fold average.
    std::vector<double> lambda_tilde(int m, double beta) const;
    std::vector<double> lambda_hat(double beta) const;

    VarianceResult variance(double beta) const;

private:
    const Dataset* data_;
    FoldAssignment folds_;
    std::vector<NuisanceTriple> nuisances_;
    TimeGrid grid_;
    std::vector<FoldSums> sums_;
};

}  // namespace msm_aipw
