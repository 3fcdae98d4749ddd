#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace msm_aipw {

struct CoxOptions {
    int max_iter = 100;
    double score_tol = 1e-8;    // max-norm of the per-observation score
    double max_coef_norm = 30;  // monotone-likelihood guard
    // When set, skip Newton-Raphson and evaluate everything at these
    // coefficients (e.g. zero for a Nelson-Aalen baseline).
    std::optional<Eigen::VectorXd> fixed_coef;
};

// Breslow cumulative baseline hazard: jumps at distinct event times.
struct BreslowBaseline {
    std::vector<double> times;      // strictly increasing event times
    std::vector<double> increments; // dLambda_0 at each time
    std::vector<double> cumulative; // Lambda_0 at each time

    // Right-continuous evaluation: sum of increments at times <= t.
    double operator()(double t) const;
};

struct CoxFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd score;        // at coef, summed over observations
    Eigen::MatrixXd information;  // observed information at coef
    double loglik = 0.0;
    int iterations = 0;
    BreslowBaseline baseline;     // for exp(x' coef) with uncentered x
};

// Cox proportional hazards by Newton-Raphson on the Breslow partial
// likelihood. `x` is n x q (q may be 0). Throws fit_error when there are no
// events, the design is collinear, or the likelihood is monotone.
CoxFit fit_cox(std::span<const double> time, std::span<const int> status, const Eigen::MatrixXd& x,
               const CoxOptions& opt = {});

// Score residuals, one row per observation (n x q). Their column sums equal
// the score; used for the cluster-robust sandwich.
Eigen::MatrixXd cox_score_residuals(const CoxFit& fit, std::span<const double> time, std::span<const int> status,
                                    const Eigen::MatrixXd& x);

}  // namespace msm_aipw
