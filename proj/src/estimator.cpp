#include "msm_aipw/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "msm_aipw/cox.hpp"
#include "msm_aipw/errors.hpp"
#include "msm_aipw/rng.hpp"
#include "msm_aipw/root.hpp"

namespace msm_aipw {

double StepFunction::operator()(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

Interval normal_ci(double estimate, double se, double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
    const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
    return {estimate - z * se, estimate + z * se};
}

unsigned default_threads() {
    if (const char* env = std::getenv("MSM_AIPW_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

nlohmann::json model_summary(const nlohmann::json& model) {
    nlohmann::json out = model;
    if (out.contains("baseline_jumps")) {
        out["n_jumps"] = out["baseline_jumps"].size();
        out.erase("baseline_jumps");
    }
    return out;
}

}  // namespace

std::vector<NuisanceTriple> fit_fold_nuisances(const Dataset& data, const FoldAssignment& folds,
                                               const NuisanceSpec& spec) {
    std::vector<NuisanceTriple> out;
    out.reserve(static_cast<std::size_t>(folds.k()));
    for (int m = 0; m < folds.k(); ++m) {
        const auto where = "fold " + std::to_string(m + 1) + ": ";
        try {
            if (folds.k() == 1) {
                out.push_back(fit_nuisance(spec, data));
            } else {
                const auto idx = folds.complement(m);
                Dataset train;
                try {
                    train = data.subset(idx);
                } catch (const data_error& e) {
                    throw fit_error(std::string("training complement is unusable (") + e.what() + ")");
                }
                out.push_back(fit_nuisance(spec, train));
            }
        } catch (const fit_error& e) {
            throw fit_error(where + e.what());
        }
    }
    return out;
}

AipwFit solve_aipw(const CrossFitProblem& problem) {
    // Away from the denominator guard U_cf is decreasing; where the guard is
    // active it can cross zero spuriously.
    const auto root = solve_beta_scan([&](double b) { return problem.u(b); },
                                      [&](double b) { return problem.guard_events(b) == 0 && problem.du(b) < 0.0; });
    AipwFit fit;
    fit.beta_hat = root.root;
    fit.solver_iterations = root.iterations;
    fit.u_residual = std::fabs(problem.u(root.root));
    fit.lambda_hat = {problem.grid().times, problem.lambda_hat(root.root)};
    const auto var = problem.variance(root.root);
    fit.sigma2 = var.sigma2;
    fit.se_model = var.se;
    fit.ci = normal_ci(fit.beta_hat, fit.se_model);
    fit.folds = problem.folds().k();
    fit.n = problem.folds().n();
    for (int m = 0; m < fit.folds; ++m) {
        FoldDiagnostics d;
        d.fold = m + 1;
        d.test_size = problem.fold_sums()[static_cast<std::size_t>(m)].n;
        d.train_size = fit.folds == 1 ? fit.n : fit.n - d.test_size;
        d.guard_events = problem.aggregate(m, fit.beta_hat).guard_events;
        const auto& nu = problem.nuisance(m);
        d.models = {{"propensity", nu.propensity->to_json()},
                    {"event", model_summary(nu.event->to_json())},
                    {"censoring", model_summary(nu.censoring->to_json())}};
        fit.diagnostics.push_back(std::move(d));
    }
    return fit;
}

AipwFit fit_aipw(const Dataset& data, const AipwOptions& opt) {
    auto folds = assign_folds(data.size(), opt.folds, opt.seed);
    auto nuisances = fit_fold_nuisances(data, folds, opt.nuisance);
    CrossFitProblem problem(data, std::move(folds), std::move(nuisances));
    auto fit = solve_aipw(problem);
    fit.nuisance_label = opt.nuisance.label();
    return fit;
}

AipwFit fit_aipw_no_crossfit(const Dataset& data, const NuisanceSpec& spec) {
    FoldAssignment one(std::vector<int>(data.size(), 0), 1);
    std::vector<NuisanceTriple> nu{fit_nuisance(spec, data)};
    CrossFitProblem problem(data, std::move(one), std::move(nu));
    auto fit = solve_aipw(problem);
    fit.nuisance_label = spec.label();
    return fit;
}

// ---------------------------------------------------------------------------

IpwFit fit_ipw(const Dataset& data, const NuisanceTriple& nu, double weight_scale) {
    if (!(weight_scale > 0.0)) throw std::invalid_argument("weight scale must be positive");
    std::vector<double> grid;
    for (const auto& r : data.records()) {
        if (r.event == 1) grid.push_back(r.time);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty()) throw fit_error("IPW fit: no events");
    const std::size_t g = grid.size();

    std::vector<double> r0(g, 0.0), r1(g, 0.0), ev(g, 0.0), ev1(g, 0.0), logsc(g);
    const double lo = nu.clip.surv_floor > 0.0 ? std::log(nu.clip.surv_floor) : -INFINITY;
    for (const auto& r : data.records()) {
        const double pi = nu.pi(r.z);
        const double pi_t = r.treatment == 1 ? pi : 1.0 - pi;
        const auto at_risk = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), r.time) - grid.begin());
        nu.censoring->log_survival(std::span<const double>(grid.data(), at_risk), r.treatment, r.z,
                                   std::span<double>(logsc.data(), at_risk));
        auto& rs = r.treatment == 1 ? r1 : r0;
        for (std::size_t j = 0; j < at_risk; ++j) {
            const double w = weight_scale / (pi_t * std::exp(std::max(logsc[j], lo)));
            rs[j] += w;
            if (j + 1 == at_risk && r.event == 1) {
                ev[j] += w;
                if (r.treatment == 1) ev1[j] += w;
            }
        }
    }
    auto u = [&](double beta) {
        const double eb = std::exp(beta);
        double s = 0.0;
        for (std::size_t j = 0; j < g; ++j) {
            if (ev[j] == 0.0) continue;
            s += ev1[j] - ev[j] * eb * r1[j] / (r0[j] + eb * r1[j]);
        }
        return s;
    };
    const auto root = solve_beta(u);
    IpwFit fit;
    fit.beta_hat = root.root;
    fit.u_residual = std::fabs(u(root.root));
    const double eb = std::exp(root.root);
    fit.lambda_hat.times = grid;
    fit.lambda_hat.values.resize(g);
    double cum = 0.0;
    for (std::size_t j = 0; j < g; ++j) {
        cum += ev[j] / (r0[j] + eb * r1[j]);
        fit.lambda_hat.values[j] = cum;
    }
    return fit;
}

IpwFit fit_ipw(const Dataset& data, const NuisanceSpec& spec) {
    spec.clip.validate();
    NuisanceTriple nu{spec.propensity->fit(data), std::make_shared<ConstantSurvival>(),
                      spec.censoring->fit(data, Target::censoring), spec.clip};
    return fit_ipw(data, nu);
}

NaiveCoxFit fit_naive_cox(const Dataset& data) {
    const auto n = data.size();
    std::vector<double> time(n);
    std::vector<int> status(n);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) {
        time[i] = data[i].time;
        status[i] = data[i].event;
        x(static_cast<Eigen::Index>(i), 0) = data[i].treatment;
    }
    const auto cf = fit_cox(time, status, x);
    NaiveCoxFit fit;
    fit.beta_hat = cf.coef[0];
    fit.se_model = 1.0 / std::sqrt(cf.information(0, 0));
    fit.ci = normal_ci(fit.beta_hat, fit.se_model);
    fit.lambda_hat = {cf.baseline.times, cf.baseline.cumulative};
    fit.iterations = cf.iterations;
    return fit;
}

FullDataFit fit_full_data(std::span<const PotentialOutcomes> po, double tau) {
    const std::size_t n = po.size();
    if (n == 0) throw std::invalid_argument("full-data fit: no subjects");
    std::vector<double> time(2 * n);
    std::vector<int> status(2 * n);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(2 * n), 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 2; ++a) {
            const double t = a == 1 ? po[i].t1 : po[i].t0;
            const auto row = 2 * i + static_cast<std::size_t>(a);
            time[row] = std::min(t, tau);
            status[row] = t <= tau ? 1 : 0;
            x(static_cast<Eigen::Index>(row), 0) = a;
        }
    }
    const auto cf = fit_cox(time, status, x);
    const auto resid = cox_score_residuals(cf, time, status, x);
    double meat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = resid(static_cast<Eigen::Index>(2 * i), 0) + resid(static_cast<Eigen::Index>(2 * i + 1), 0);
        meat += c * c;
    }
    const double info = cf.information(0, 0);
    FullDataFit fit;
    fit.beta_hat = cf.coef[0];
    fit.se_sandwich = std::sqrt(meat) / info;
    fit.ci = normal_ci(fit.beta_hat, fit.se_sandwich);
    return fit;
}

BootstrapResult bootstrap(const Dataset& data, int B, std::uint64_t seed, const BootstrapEstimator& estimator,
                          unsigned threads) {
    if (B < 2) throw std::invalid_argument("bootstrap needs at least 2 replicates");
    constexpr std::uint64_t kTag = 0x626f6f74ull << 32;
    std::vector<double> est(static_cast<std::size_t>(B));
    std::vector<char> ok(static_cast<std::size_t>(B), 0);
    std::atomic<int> next{0};
    auto worker = [&] {
        std::vector<std::size_t> idx(data.size());
        for (int b = next++; b < B; b = next++) {
            auto eng = make_stream(seed, kTag + static_cast<std::uint64_t>(b));
            for (auto& v : idx) v = uniform_index(eng, data.size());
            const std::uint64_t rep_seed = eng();
            try {
                const auto sample = data.subset(idx);
                est[static_cast<std::size_t>(b)] = estimator(sample, rep_seed);
                ok[static_cast<std::size_t>(b)] = std::isfinite(est[static_cast<std::size_t>(b)]);
            } catch (const data_error&) {
            } catch (const fit_error&) {
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(B)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    BootstrapResult res;
    res.requested = B;
    for (int b = 0; b < B; ++b) {
        if (ok[static_cast<std::size_t>(b)]) res.replicates.push_back(est[static_cast<std::size_t>(b)]);
    }
    res.succeeded = static_cast<int>(res.replicates.size());
    res.failed = B - res.succeeded;
    if (res.failed * 5 > B || res.succeeded < 2) {
        throw fit_error("bootstrap: " + std::to_string(res.failed) + " of " + std::to_string(B) +
                        " replicates failed (ceiling 20%)");
    }
    const double mean = std::accumulate(res.replicates.begin(), res.replicates.end(), 0.0) / res.succeeded;
    double ss = 0.0;
    for (double v : res.replicates) ss += (v - mean) * (v - mean);
    res.se = std::sqrt(ss / (res.succeeded - 1));
    return res;
}

std::vector<RiskContrast> risk_contrasts(double beta_hat, const StepFunction& lambda_hat, std::span<const double> times,
                                         double tau) {
    std::vector<RiskContrast> out;
    for (double t : times) {
        if (t > tau) throw std::invalid_argument("risk time " + std::to_string(t) + " exceeds tau");
        if (t < 0.0) throw std::invalid_argument("risk time must be nonnegative");
        RiskContrast rc;
        rc.t = t;
        const double lam = lambda_hat(t);
        rc.risk0 = -std::expm1(-lam);
        rc.risk1 = -std::expm1(-lam * std::exp(beta_hat));
        rc.rd = rc.risk1 - rc.risk0;
        rc.rr = rc.risk0 == 0.0 && rc.risk1 == 0.0 ? 1.0 : rc.risk1 / rc.risk0;
        out.push_back(rc);
    }
    return out;
}

}  // namespace msm_aipw
