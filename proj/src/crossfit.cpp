#include "msm_aipw/crossfit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "msm_aipw/errors.hpp"

namespace msm_aipw {

CrossFitProblem::CrossFitProblem(const Dataset& data, FoldAssignment folds, std::vector<NuisanceTriple> nuisances)
    : data_(&data), folds_(std::move(folds)), nuisances_(std::move(nuisances)) {
    if (folds_.n() != data.size()) throw std::invalid_argument("fold assignment size does not match the data");
    if (nuisances_.size() != static_cast<std::size_t>(folds_.k())) {
        throw std::invalid_argument("need one nuisance triple per fold");
    }
    grid_ = build_time_grid(data, nuisances_);
    const std::size_t g = grid_.size();
    sums_.resize(nuisances_.size());
    for (auto& s : sums_) {
        s.g0.assign(g, 0.0);
        s.g1.assign(g, 0.0);
        s.d0.assign(g, 0.0);
        s.d1.assign(g, 0.0);
    }
    SubjectScores sc;
    ScoreWorkspace ws;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int m = folds_.fold_of(i);
        auto& s = sums_[static_cast<std::size_t>(m)];
        compute_subject_scores(data[i], data.tau(), nuisances_[static_cast<std::size_t>(m)], grid_, sc, ws);
        for (std::size_t j = 0; j < g; ++j) {
            s.g0[j] += sc.g0[j];
            s.g1[j] += sc.g1[j];
            s.d0[j] += sc.dn0[j];
            s.d1[j] += sc.dn1[j];
        }
        ++s.n;
    }
    for (std::size_t m = 0; m < sums_.size(); ++m) {
        if (sums_[m].n == 0) throw std::invalid_argument("fold " + std::to_string(m) + " is empty");
    }
}

AggregatedScores CrossFitProblem::aggregate(int m, double beta) const {
    const auto& s = sums_[static_cast<std::size_t>(m)];
    const std::size_t g = grid_.size();
    const double eb = std::exp(beta), n = static_cast<double>(s.n);
    AggregatedScores agg;
    agg.s0.resize(g);
    agg.s1.resize(g);
    agg.abar.resize(g);
    agg.v.resize(g);
    for (std::size_t j = 0; j < g; ++j) {
        agg.s0[j] = (s.g0[j] + eb * s.g1[j]) / n;
        agg.s1[j] = eb * s.g1[j] / n;
        if (agg.s0[j] <= kDenominatorGuard) ++agg.guard_events;
        agg.abar[j] = agg.s1[j] / std::max(agg.s0[j], kDenominatorGuard);
        agg.v[j] = agg.abar[j] - agg.abar[j] * agg.abar[j];
    }
    return agg;
}

double CrossFitProblem::u_fold(int m, double beta) const {
    const auto& s = sums_[static_cast<std::size_t>(m)];
    const double eb = std::exp(beta);
    double u = 0.0;
    for (std::size_t j = 0; j < grid_.size(); ++j) {
        const double s0 = s.g0[j] + eb * s.g1[j];
        const double abar = eb * s.g1[j] / std::max(s0, kDenominatorGuard * static_cast<double>(s.n));
        u += s.d1[j] - abar * s.d0[j];
    }
    return u / static_cast<double>(s.n);
}

double CrossFitProblem::u(double beta) const {
    double u = 0.0;
    for (int m = 0; m < folds_.k(); ++m) u += u_fold(m, beta);
    return u / folds_.k();
}

double CrossFitProblem::du(double beta) const {
    const double eb = std::exp(beta);
    double total = 0.0;
    for (const auto& s : sums_) {
        const double n = static_cast<double>(s.n);
        double acc = 0.0;
        for (std::size_t j = 0; j < grid_.size(); ++j) {
            const double s0 = s.g0[j] + eb * s.g1[j];
            const double s1 = eb * s.g1[j];
            if (s0 <= kDenominatorGuard * n) {
                acc += s1 / (kDenominatorGuard * n) * s.d0[j];  // guarded branch: Abar = s1 / const
            } else {
                const double abar = s1 / s0;
                acc += (abar - abar * abar) * s.d0[j];
            }
        }
        total -= acc / n;
    }
    return total / folds_.k();
}

std::size_t CrossFitProblem::guard_events(double beta) const {
    std::size_t c = 0;
    for (int m = 0; m < folds_.k(); ++m) c += aggregate(m, beta).guard_events;
    return c;
}

std::vector<double> CrossFitProblem::lambda_tilde(int m, double beta) const {
    const auto& s = sums_[static_cast<std::size_t>(m)];
    const auto agg = aggregate(m, beta);
    std::vector<double> out(grid_.size());
    double cum = 0.0;
    for (std::size_t j = 0; j < grid_.size(); ++j) {
        cum += s.d0[j] / static_cast<double>(s.n) / std::max(agg.s0[j], kDenominatorGuard);
        out[j] = cum;
    }
    return out;
}

std::vector<double> CrossFitProblem::lambda_hat(double beta) const {
    std::vector<double> out(grid_.size(), 0.0);
    for (int m = 0; m < folds_.k(); ++m) {
        const auto lt = lambda_tilde(m, beta);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += lt[j];
    }
    for (auto& v : out) v /= folds_.k();
    return out;
}

VarianceResult CrossFitProblem::variance(double beta) const {
    const std::size_t g = grid_.size();
    const double eb = std::exp(beta);
    std::vector<AggregatedScores> agg;
    std::vector<std::vector<double>> dlam(sums_.size());
    double denom = 0.0;
    for (int m = 0; m < folds_.k(); ++m) {
        const auto& s = sums_[static_cast<std::size_t>(m)];
        agg.push_back(aggregate(m, beta));
        auto& dl = dlam[static_cast<std::size_t>(m)];
        dl.resize(g);
        for (std::size_t j = 0; j < g; ++j) {
            dl[j] = s.d0[j] / static_cast<double>(s.n) / std::max(agg.back().s0[j], kDenominatorGuard);
            denom += agg.back().v[j] * s.d0[j];
        }
    }
    VarianceResult res;
    res.denominator = denom;
    if (!(std::fabs(denom) > 0.0) || !std::isfinite(denom)) throw fit_error("degenerate information");

    res.psi.resize(data_->size());
    SubjectScores sc;
    ScoreWorkspace ws;
    double ss = 0.0;
    for (std::size_t i = 0; i < data_->size(); ++i) {
        const auto m = static_cast<std::size_t>(folds_.fold_of(i));
        compute_subject_scores((*data_)[i], data_->tau(), nuisances_[m], grid_, sc, ws);
        const auto& ab = agg[m].abar;
        const auto& dl = dlam[m];
        double psi = 0.0;
        for (std::size_t j = 0; j < g; ++j) {
            const double gam1 = eb * sc.g1[j];
            const double gam0 = sc.g0[j] + gam1;
            psi += sc.dn1[j] - gam1 * dl[j] - ab[j] * (sc.dn0[j] - gam0 * dl[j]);
        }
        res.psi[i] = psi;
        ss += psi * psi;
    }
    const double n = static_cast<double>(data_->size());
    res.sigma2 = n * ss / (denom * denom);
    res.se = std::sqrt(res.sigma2 / n);
    return res;
}

}  // namespace msm_aipw
