#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msm_aipw/crossfit.hpp"
#include "msm_aipw/data.hpp"
#include "msm_aipw/nuisance.hpp"

namespace msm_aipw {

// Right-continuous step function, 0 before the first time.
struct StepFunction {
    std::vector<double> times;
    std::vector<double> values;

    double operator()(double t) const;
};

using Interval = std::pair<double, double>;

Interval normal_ci(double estimate, double se, double level = 0.95);

struct FoldDiagnostics {
    int fold = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t guard_events = 0;
    nlohmann::json models;
};

struct AipwFit {
    double beta_hat = 0.0;
    StepFunction lambda_hat;
    double sigma2 = 0.0;     // sigma-hat squared
    double se_model = 0.0;   // sigma-hat / sqrt(n)
    Interval ci{0.0, 0.0};
    double u_residual = 0.0;
    int solver_iterations = 0;
    int folds = 1;
    std::size_t n = 0;
    std::string nuisance_label;
    std::vector<FoldDiagnostics> diagnostics;
};

struct AipwOptions {
    int folds = 5;
    std::uint64_t seed = 1;
    NuisanceSpec nuisance = NuisanceSpec::cox_logit();
};

// Cross-fitted AIPW: out-of-fold nuisances, profiled U_cf, Brent solve,
// averaged Lambda and the model-based variance. k = 1 trains the nuisances
// on the full sample (no cross-fitting).
AipwFit fit_aipw(const Dataset& data, const AipwOptions& opt = {});
AipwFit fit_aipw_no_crossfit(const Dataset& data, const NuisanceSpec& spec);

// Solve with nuisances already attached to each fold.
AipwFit solve_aipw(const CrossFitProblem& problem);

// Fit the nuisances for each fold on its complement.
std::vector<NuisanceTriple> fit_fold_nuisances(const Dataset& data, const FoldAssignment& folds,
                                               const NuisanceSpec& spec);

struct IpwFit {
    double beta_hat = 0.0;
    StepFunction lambda_hat;  // weighted Breslow
    double u_residual = 0.0;
    std::optional<double> se_boot;
};

// Weighted partial likelihood with subject-time weights 1 / {pi~(A, z) Sc(t; A, z)}.
// `weight_scale` multiplies every weight (the estimate is invariant to it).
IpwFit fit_ipw(const Dataset& data, const NuisanceTriple& nuisance, double weight_scale = 1.0);
IpwFit fit_ipw(const Dataset& data, const NuisanceSpec& spec);

struct NaiveCoxFit {
    double beta_hat = 0.0;
    double se_model = 0.0;
    Interval ci{0.0, 0.0};
    StepFunction lambda_hat;
    int iterations = 0;
};

// Unweighted partial likelihood on treatment alone.
NaiveCoxFit fit_naive_cox(const Dataset& data);

struct PotentialOutcomes {
    double t0 = 0.0;
    double t1 = 0.0;
};

struct FullDataFit {
    double beta_hat = 0.0;
    double se_sandwich = 0.0;
    Interval ci{0.0, 0.0};
};

// Cox fit on stacked (a, T(a)) rows truncated at tau, with a cluster-robust
// sandwich over subjects.
FullDataFit fit_full_data(std::span<const PotentialOutcomes> po, double tau);

struct BootstrapResult {
    double se = 0.0;
    int requested = 0;
    int succeeded = 0;
    int failed = 0;
    std::vector<double> replicates;  // successful estimates, replicate order
};

// Estimator to rerun on each resample; receives a replicate-specific seed.
using BootstrapEstimator = std::function<double(const Dataset& sample, std::uint64_t seed)>;

// Nonparametric bootstrap over subjects. Replicates that fail (single-arm
// resample, fitter or solver failure) are dropped and counted; more than
// 20% failures is an error.
BootstrapResult bootstrap(const Dataset& data, int B, std::uint64_t seed, const BootstrapEstimator& estimator,
                          unsigned threads = 1);

struct RiskContrast {
    double t = 0.0;
    double risk1 = 0.0;
    double risk0 = 0.0;
    double rd = 0.0;
    double rr = 1.0;
};

std::vector<RiskContrast> risk_contrasts(double beta_hat, const StepFunction& lambda_hat, std::span<const double> times,
                                         double tau);

unsigned default_threads();

}  // namespace msm_aipw
