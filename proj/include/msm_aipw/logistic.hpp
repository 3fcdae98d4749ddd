#pragma once

#include <Eigen/Dense>

namespace msm_aipw {

struct LogisticOptions {
    int max_iter = 100;
    double grad_tol = 1e-10;    // on the per-observation gradient
    double max_coef_norm = 30;  // separation guard
};

struct LogisticResult {
    Eigen::VectorXd coef;
    int iterations = 0;
    double loglik = 0.0;
};

// Maximum likelihood for P(y = 1 | x) = expit(x' coef) by Newton-Raphson
// (IRLS) with step halving. `x` already contains any intercept column.
// Throws fit_error on rank deficiency or (quasi-)complete separation.
LogisticResult fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const LogisticOptions& opt = {});

inline double expit(double eta) {
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

}  // namespace msm_aipw
