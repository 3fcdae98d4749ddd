#include "msm_aipw/logistic.hpp"

#include <cmath>
#include <string>

#include "msm_aipw/errors.hpp"

namespace msm_aipw {

namespace {

// log(1 + exp(eta)) without overflow
double log1pexp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = x * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
    return ll;
}

[[noreturn]] void separation(const Eigen::VectorXd& b) {
    Eigen::Index j = 0;
    b.cwiseAbs().maxCoeff(&j);
    throw fit_error("logistic fit: perfect separation detected (coefficient norm > 30), "
                    "diverging along coefficient " + std::to_string(j) + " (coef = " + std::to_string(b[j]) + ")");
}

}  // namespace

LogisticResult fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LogisticOptions& opt) {
    const auto n = x.rows();
    const auto q = x.cols();
    if (n == 0) throw fit_error("logistic fit: no observations");
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
        if (qr.rank() < q) throw fit_error("logistic fit: design matrix is rank deficient");
    }

    LogisticResult res;
    res.coef = Eigen::VectorXd::Zero(q);
    double ll = loglik(x, y, res.coef);
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        const Eigen::VectorXd eta = x * res.coef;
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = expit(eta[i]);
            w[i] = mu[i] * (1.0 - mu[i]);
        }
        const Eigen::VectorXd grad = x.transpose() * (y - mu);
        res.iterations = iter - 1;
        if (grad.cwiseAbs().maxCoeff() / static_cast<double>(n) <= opt.grad_tol) {
            // a vanishing gradient with every fitted probability at 0 or 1 is separation
            if ((y - mu).cwiseAbs().maxCoeff() < 1e-6) separation(res.coef);
            res.loglik = ll;
            return res;
        }
        const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        Eigen::VectorXd step = ldlt.solve(grad);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) separation(res.coef);

        double scale = 1.0;
        Eigen::VectorXd cand = res.coef + step;
        double ll_new = loglik(x, y, cand);
        while (!(ll_new >= ll - 1e-12 * std::fabs(ll)) && scale > 1e-10) {
            scale *= 0.5;
            cand = res.coef + scale * step;
            ll_new = loglik(x, y, cand);
        }
        res.coef = cand;
        ll = ll_new;
        if (res.coef.norm() > opt.max_coef_norm) separation(res.coef);
    }
    throw fit_error("logistic fit did not converge in " + std::to_string(opt.max_iter) + " iterations");
}

}  // namespace msm_aipw
