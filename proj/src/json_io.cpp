#include "msm_aipw/json_io.hpp"

#include <cmath>

namespace msm_aipw {

namespace {

nlohmann::json interval(const Interval& ci) { return nlohmann::json::array({ci.first, ci.second}); }

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json step_to_json(const StepFunction& f) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < f.times.size(); ++i) out.push_back({f.times[i], f.values[i]});
    return out;
}

nlohmann::json risk_to_json(std::span<const RiskContrast> rc) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rc) {
        out.push_back({{"t", r.t}, {"risk1", r.risk1}, {"risk0", r.risk0}, {"rd", r.rd}, {"rr", finite_or_null(r.rr)}});
    }
    return out;
}

nlohmann::json fit_to_json(const AipwFit& f) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& d : f.diagnostics) {
        folds.push_back({{"fold", d.fold},
                         {"train_size", d.train_size},
                         {"test_size", d.test_size},
                         {"guard_events", d.guard_events},
                         {"models", d.models}});
    }
    return {{"estimator", "aipw"},
            {"n", f.n},
            {"beta_hat", f.beta_hat},
            {"se_model", f.se_model},
            {"se_boot", nullptr},
            {"ci", interval(f.ci)},
            {"u_residual", f.u_residual},
            {"lambda_hat", step_to_json(f.lambda_hat)},
            {"diagnostics",
             {{"folds", f.folds},
              {"nuisance", f.nuisance_label},
              {"sigma2", f.sigma2},
              {"solver_iterations", f.solver_iterations},
              {"fold_details", std::move(folds)}}}};
}

nlohmann::json fit_to_json(const IpwFit& f) {
    return {{"estimator", "ipw"},
            {"beta_hat", f.beta_hat},
            {"se_model", nullptr},
            {"se_boot", f.se_boot ? nlohmann::json(*f.se_boot) : nlohmann::json(nullptr)},
            {"ci", f.se_boot ? interval(normal_ci(f.beta_hat, *f.se_boot)) : nlohmann::json(nullptr)},
            {"u_residual", f.u_residual},
            {"lambda_hat", step_to_json(f.lambda_hat)},
            {"diagnostics", nlohmann::json::object()}};
}

nlohmann::json fit_to_json(const NaiveCoxFit& f) {
    return {{"estimator", "naive"},
            {"beta_hat", f.beta_hat},
            {"se_model", f.se_model},
            {"se_boot", nullptr},
            {"ci", interval(f.ci)},
            {"lambda_hat", step_to_json(f.lambda_hat)},
            {"diagnostics", {{"iterations", f.iterations}}}};
}

nlohmann::json fit_to_json(const FullDataFit& f) {
    return {{"estimator", "full"},
            {"beta_hat", f.beta_hat},
            {"se_model", f.se_sandwich},
            {"se_boot", nullptr},
            {"ci", interval(f.ci)},
            {"diagnostics", {{"variance", "cluster-robust sandwich"}}}};
}

nlohmann::json oracle_to_json(const EstimandOracle& oracle, const PotentialOutcomeLaw& law, int points) {
    const auto sol = oracle.solve();
    nlohmann::json bt = nlohmann::json::array(), ls = nlohmann::json::array();
    for (int k = 1; k <= points; ++k) {
        const double t = oracle.tau() * k / points;
        double b = NAN;
        try {
            b = beta_of_t(law, t);
        } catch (const std::domain_error&) {
        }
        bt.push_back({t, finite_or_null(b)});
        ls.push_back({t, oracle.lambda_star(t, sol.beta_star)});
    }
    return {{"beta_star", sol.beta_star},
            {"h_residual", sol.h_residual},
            {"tau", oracle.tau()},
            {"law", law.to_json()},
            {"beta_of_t", std::move(bt)},
            {"lambda_star", std::move(ls)}};
}

}  // namespace msm_aipw
