#include "msm_aipw/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msm_aipw/errors.hpp"

namespace msm_aipw {

double BreslowBaseline::operator()(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumulative[static_cast<std::size_t>(it - times.begin()) - 1];
}

namespace {

struct Evaluation {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd info;
};

// Observations sorted by time, grouped into runs of tied times.
struct RiskOrder {
    std::vector<std::size_t> order;           // ascending time
    std::vector<std::size_t> group_start;     // start offsets into `order`, plus a sentinel
};

RiskOrder make_order(std::span<const double> time) {
    RiskOrder ro;
    ro.order.resize(time.size());
    std::iota(ro.order.begin(), ro.order.end(), std::size_t{0});
    std::stable_sort(ro.order.begin(), ro.order.end(), [&](auto a, auto b) { return time[a] < time[b]; });
    for (std::size_t k = 0; k < ro.order.size(); ++k) {
        if (k == 0 || time[ro.order[k]] != time[ro.order[k - 1]]) ro.group_start.push_back(k);
    }
    ro.group_start.push_back(ro.order.size());
    return ro;
}

Evaluation evaluate(const RiskOrder& ro, std::span<const int> status, const Eigen::MatrixXd& xc,
                    const Eigen::VectorXd& beta) {
    const auto q = xc.cols();
    Evaluation ev;
    ev.score = Eigen::VectorXd::Zero(q);
    ev.info = Eigen::MatrixXd::Zero(q, q);
    const Eigen::VectorXd eta = xc * beta;
    const double shift = eta.size() ? eta.maxCoeff() : 0.0;

    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(q, q);
    for (std::size_t g = ro.group_start.size() - 1; g-- > 0;) {
        double d = 0.0, eta_events = 0.0;
        Eigen::VectorXd x_events = Eigen::VectorXd::Zero(q);
        for (std::size_t k = ro.group_start[g]; k < ro.group_start[g + 1]; ++k) {
            const auto i = ro.order[k];
            const double r = std::exp(eta[i] - shift);
            s0 += r;
            if (q > 0) {
                s1.noalias() += r * xc.row(i).transpose();
                s2.noalias() += r * xc.row(i).transpose() * xc.row(i);
            }
            if (status[i]) {
                d += 1.0;
                eta_events += eta[i];
                if (q > 0) x_events.noalias() += xc.row(i).transpose();
            }
        }
        if (d == 0.0) continue;
        ev.loglik += eta_events - d * (std::log(s0) + shift);
        if (q > 0) {
            const Eigen::VectorXd xbar = s1 / s0;
            ev.score.noalias() += x_events - d * xbar;
            ev.info.noalias() += d * (s2 / s0 - xbar * xbar.transpose());
        }
    }
    return ev;
}

[[noreturn]] void monotone(const Eigen::VectorXd& b) {
    Eigen::Index j = 0;
    b.cwiseAbs().maxCoeff(&j);
    throw fit_error("Cox fit: monotone likelihood (coefficient norm > 30), diverging along coefficient " +
                    std::to_string(j));
}

}  // namespace

CoxFit fit_cox(std::span<const double> time, std::span<const int> status, const Eigen::MatrixXd& x,
               const CoxOptions& opt) {
    const auto n = static_cast<Eigen::Index>(time.size());
    const auto q = x.cols();
    if (x.rows() != n || status.size() != time.size()) throw std::invalid_argument("fit_cox: size mismatch");
    if (std::none_of(status.begin(), status.end(), [](int s) { return s != 0; })) {
        throw fit_error("Cox fit: no target events");
    }

    const Eigen::RowVectorXd xmean = q > 0 ? Eigen::RowVectorXd(x.colwise().mean()) : Eigen::RowVectorXd(0);
    Eigen::MatrixXd xc = x;
    if (q > 0) {
        xc.rowwise() -= xmean;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
        if (qr.rank() < q) throw fit_error("Cox fit: covariates are collinear");
    }
    const auto ro = make_order(time);

    CoxFit fit;
    fit.coef = Eigen::VectorXd::Zero(q);
    Evaluation ev;
    if (opt.fixed_coef) {
        if (opt.fixed_coef->size() != q) throw std::invalid_argument("fit_cox: fixed coefficient size mismatch");
        fit.coef = *opt.fixed_coef;
        ev = evaluate(ro, status, xc, fit.coef);
    } else {
        ev = evaluate(ro, status, xc, fit.coef);
        bool converged = q == 0;
        for (int iter = 1; iter <= opt.max_iter && !converged; ++iter) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.info);
            Eigen::VectorXd step = ldlt.solve(ev.score);
            if (ldlt.info() != Eigen::Success || !step.allFinite() || ldlt.vectorD().minCoeff() <= 0.0) {
                if (fit.coef.norm() > 5.0) monotone(fit.coef);
                throw fit_error("Cox fit: singular information matrix");
            }
            // Converged only when both the score and the Newton step vanish;
            // a monotone likelihood has a vanishing score but unit-size steps.
            if (ev.score.cwiseAbs().maxCoeff() / static_cast<double>(n) <= opt.score_tol &&
                step.cwiseAbs().maxCoeff() <= 1e-4) {
                fit.iterations = iter - 1;
                converged = true;
                break;
            }
            double scale = 1.0;
            Eigen::VectorXd cand = fit.coef + step;
            Evaluation ev_new = evaluate(ro, status, xc, cand);
            while (!(ev_new.loglik >= ev.loglik - 1e-12 * std::fabs(ev.loglik)) && scale > 1e-10) {
                scale *= 0.5;
                cand = fit.coef + scale * step;
                ev_new = evaluate(ro, status, xc, cand);
            }
            fit.coef = cand;
            ev = std::move(ev_new);
            fit.iterations = iter;
            if (fit.coef.norm() > opt.max_coef_norm) monotone(fit.coef);
        }
        if (!converged) throw fit_error("Cox fit did not converge in " + std::to_string(opt.max_iter) + " iterations");
    }
    fit.score = ev.score;
    fit.information = ev.info;
    fit.loglik = ev.loglik;

    // Breslow baseline for the uncentered linear predictor.
    const Eigen::VectorXd eta = q > 0 ? Eigen::VectorXd(x * fit.coef) : Eigen::VectorXd::Zero(n);
    const double shift = n ? eta.maxCoeff() : 0.0;
    double s0 = 0.0;
    std::vector<double> rev_t, rev_d;
    for (std::size_t g = ro.group_start.size() - 1; g-- > 0;) {
        double d = 0.0;
        for (std::size_t k = ro.group_start[g]; k < ro.group_start[g + 1]; ++k) {
            const auto i = ro.order[k];
            s0 += std::exp(eta[i] - shift);
            if (status[i]) d += 1.0;
        }
        if (d > 0.0) {
            rev_t.push_back(time[ro.order[ro.group_start[g]]]);
            rev_d.push_back(d * std::exp(-(std::log(s0) + shift)));
        }
    }
    fit.baseline.times.assign(rev_t.rbegin(), rev_t.rend());
    fit.baseline.increments.assign(rev_d.rbegin(), rev_d.rend());
    fit.baseline.cumulative.resize(fit.baseline.increments.size());
    std::partial_sum(fit.baseline.increments.begin(), fit.baseline.increments.end(), fit.baseline.cumulative.begin());
    return fit;
}

Eigen::MatrixXd cox_score_residuals(const CoxFit& fit, std::span<const double> time, std::span<const int> status,
                                    const Eigen::MatrixXd& x) {
    const auto n = static_cast<Eigen::Index>(time.size());
    const auto q = x.cols();
    const Eigen::VectorXd eta = x * fit.coef;
    const auto ro = make_order(time);

    // Risk-set mean of x at every distinct event time, then the cumulative
    // integrals C0(t) = sum dLambda0 and C1(t) = sum xbar dLambda0.
    std::vector<Eigen::VectorXd> xbar_at(ro.group_start.size() - 1);
    {
        const double shift = n ? eta.maxCoeff() : 0.0;
        double s0 = 0.0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q);
        for (std::size_t g = ro.group_start.size() - 1; g-- > 0;) {
            for (std::size_t k = ro.group_start[g]; k < ro.group_start[g + 1]; ++k) {
                const auto i = ro.order[k];
                const double r = std::exp(eta[i] - shift);
                s0 += r;
                s1.noalias() += r * x.row(i).transpose();
            }
            xbar_at[g] = s1 / s0;
        }
    }
    Eigen::MatrixXd resid = Eigen::MatrixXd::Zero(n, q);
    double c0 = 0.0;
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(q);
    std::size_t b = 0;
    for (std::size_t g = 0; g + 1 < ro.group_start.size(); ++g) {
        const double t = time[ro.order[ro.group_start[g]]];
        while (b < fit.baseline.times.size() && fit.baseline.times[b] <= t) {
            c0 += fit.baseline.increments[b];
            c1.noalias() += fit.baseline.increments[b] * xbar_at[g];
            ++b;
        }
        for (std::size_t k = ro.group_start[g]; k < ro.group_start[g + 1]; ++k) {
            const auto i = ro.order[k];
            Eigen::VectorXd r = -std::exp(eta[i]) * (x.row(i).transpose() * c0 - c1);
            if (status[i]) r += x.row(i).transpose() - xbar_at[g];
            resid.row(i) = r.transpose();
        }
    }
    return resid;
}

}  // namespace msm_aipw
