#include "msm_aipw/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "msm_aipw/errors.hpp"
#include "msm_aipw/logistic.hpp"
#include "msm_aipw/rng.hpp"

namespace msm_aipw {

Family parse_family(const std::string& s) {
    if (s == "main") return Family::main;
    if (s == "supplementary" || s == "supp") return Family::supplementary;
    throw std::invalid_argument("unknown family '" + s + "' (expected main or supplementary)");
}

std::string to_string(Family f) { return f == Family::main ? "main" : "supplementary"; }

std::vector<PotentialOutcomes> GeneratedSample::potential_times() const {
    std::vector<PotentialOutcomes> out;
    out.reserve(potential.size());
    for (const auto& p : potential) out.push_back({p.t0, p.t1});
    return out;
}

namespace {

void check_scenario(int scenario) {
    if (scenario < 1 || scenario > 4) throw std::invalid_argument("scenario must be 1, 2, 3 or 4");
}

int bernoulli(Engine& eng, double p) { return uniform01(eng) < p ? 1 : 0; }

GeneratedSample assemble(std::vector<PotentialRecord> pot) {
    GeneratedSample s;
    std::vector<SurvivalRecord> obs;
    obs.reserve(pot.size());
    std::size_t events = 0, cens = 0, admin = 0;
    for (const auto& p : pot) {
        const double t = p.a == 1 ? p.t1 : p.t0;
        const double c = p.a == 1 ? p.c1 : p.c0;
        SurvivalRecord r{std::min(t, c), t <= c ? 1 : 0, p.a, p.z};
        r = truncate_at(r, kSimTau);
        if (r.event == 1) {
            ++events;
        } else if (r.time < kSimTau) {
            ++cens;
        } else {
            ++admin;
        }
        obs.push_back(std::move(r));
    }
    const double n = static_cast<double>(pot.size());
    s.event_rate = events / n;
    s.censoring_rate = cens / n;
    s.admin_rate = admin / n;
    s.observed = Dataset(std::move(obs), kSimTau);
    s.potential = std::move(pot);
    return s;
}

double soft_partition_main(double z2) {
    if (z2 < -0.5) return -3.0;
    if (z2 < 0.5) return 3.0;
    return -3.0;
}

double soft_partition_supp(double z) {
    if (z < -1.0 / 3.0) return 2.0;
    if (z < 1.0 / 3.0) return -2.0;
    return 2.0;
}

}  // namespace

GeneratedSample generate_main(std::size_t n, int scenario, std::uint64_t seed) {
    check_scenario(scenario);
    auto eng = make_stream(seed, 0x6d61696e);
    std::vector<PotentialRecord> pot(n);
    for (auto& p : pot) {
        const double u1 = uniform(eng, -1.0, 1.0), u2 = uniform(eng, -1.0, 1.0), u3 = uniform(eng, -1.0, 1.0);
        const double eps = uniform_open01(eng);
        const double va = uniform01(eng);
        p.u = {u1, u2, u3};
        const double z1 = 0.5 * u1 + u3, z2 = u1 + 1.5 * u1 * u1 - 0.5, z3 = u1 + u2;
        p.z = {z1, z2, z3};
        // 0.5 U1 + 0.5 is uniform on [0, 1); an exact 0 would give T = inf
        const double base = -std::log(std::max(0.5 * u1 + 0.5, std::numeric_limits<double>::min()));
        p.t0 = base;
        p.t1 = base * std::exp(1.0);
        if (scenario <= 2) {
            p.c0 = -std::log(eps) * std::exp(0.5 - z2 + 0.5 * z3);
            p.c1 = -std::log(eps) * std::exp(1.0 - z2 + 0.5 * z3);
        } else {
            p.c0 = 1.05 * eps;
            p.c1 = -std::log(eps) * std::exp(3.3 + 3.5 * z3);
        }
        const double logit = scenario % 2 == 1 ? 0.5 * z1 - 0.5 * z2 - 0.5 * z3 : soft_partition_main(z2);
        p.a = va < expit(logit) ? 1 : 0;
    }
    return assemble(std::move(pot));
}

GeneratedSample generate_supp(std::size_t n, int scenario, std::uint64_t seed) {
    check_scenario(scenario);
    auto eng = make_stream(seed, 0x73757070);
    std::vector<PotentialRecord> pot(n);
    const bool t_mixture = scenario >= 3;
    const bool c_mixture = scenario == 2 || scenario == 4;
    const bool soft = c_mixture;
    for (auto& p : pot) {
        const double z = uniform(eng, -1.0, 1.0);
        const double vt = uniform_open01(eng), vc = uniform_open01(eng);
        p.z = {z};
        for (int a = 0; a < 2; ++a) {
            double t, c;
            if (!t_mixture) {
                t = -std::log(vt) / std::exp(2.0 - 1.12 * a - 2.0 * z);
            } else {
                t = z <= 0.0 ? -std::log(vt) / std::exp(5.0 - 3.4 * a + 2.5 * z) : 1.05 * vt;
            }
            if (!c_mixture) {
                c = -std::log(vc) / std::exp(3.5 - 2.0 * a - 2.5 * z);
            } else {
                c = z <= 0.0 ? -std::log(vc) / std::exp(3.5 - 3.0 * a - 0.5 * z) : 1.05 * vc;
            }
            (a == 1 ? p.t1 : p.t0) = t;
            (a == 1 ? p.c1 : p.c0) = c;
        }
        const double logit = soft ? soft_partition_supp(z) : 2.0 * z;
        p.a = bernoulli(eng, expit(logit));
    }
    return assemble(std::move(pot));
}

GeneratedSample generate(Family family, std::size_t n, int scenario, std::uint64_t seed) {
    return family == Family::main ? generate_main(n, scenario, seed) : generate_supp(n, scenario, seed);
}

std::shared_ptr<const PotentialOutcomeLaw> supp_law(int scenario) {
    check_scenario(scenario);
    if (scenario <= 2) return marginalize(conditional_cox(2.0, -1.12, -2.0), {-1.0, 1.0});
    return marginalize(conditional_mixture(5.0, -3.4, 2.5, 0.0, 1.05), {-1.0, 1.0});
}

std::shared_ptr<const SurvivalModel> supp_true_event_model(int scenario) {
    check_scenario(scenario);
    if (scenario <= 2) {
        return std::make_shared<AnalyticSurvival>("supp-cox", [](double t, int a, std::span<const double> z) {
            return -t * std::exp(2.0 - 1.12 * a - 2.0 * z[0]);
        });
    }
    return std::make_shared<AnalyticSurvival>("supp-mixture", [](double t, int a, std::span<const double> z) {
        if (z[0] <= 0.0) return -t * std::exp(5.0 - 3.4 * a + 2.5 * z[0]);
        return t >= 1.05 ? -INFINITY : std::log1p(-t / 1.05);
    });
}

double true_beta(Family family, int scenario) {
    check_scenario(scenario);
    if (family == Family::main) return -1.0;
    static std::once_flag once[2];
    static double cache[2];
    const int k = scenario <= 2 ? 0 : 1;
    std::call_once(once[k], [&] { cache[k] = beta_star(supp_law(scenario), kSimTau).beta_star; });
    return cache[k];
}

std::vector<EstimatorConfig> default_estimators() {
    EstimatorConfig aipw{EstimatorKind::aipw, "AIPW Cox/Cox-logit", 5, NuisanceSpec::cox_logit()};
    EstimatorConfig ipw{EstimatorKind::ipw, "IPW Cox-logit", 1, NuisanceSpec::cox_logit()};
    EstimatorConfig naive{EstimatorKind::naive, "Naive Cox", 1, {}};
    EstimatorConfig full{EstimatorKind::full, "Full Data", 1, {}};
    return {aipw, ipw, naive, full};
}

void ScenarioConfig::validate() const {
    check_scenario(scenario);
    if (n < 50) throw std::invalid_argument("n must be at least 50");
    if (replications < 1) throw std::invalid_argument("replications must be at least 1");
    if (bootstrap_B != 0 && bootstrap_B < 2) throw std::invalid_argument("bootstrap replicates must be 0 or >= 2");
    if (estimators.empty()) throw std::invalid_argument("no estimators configured");
    if (!(failure_ceiling >= 0.0 && failure_ceiling <= 1.0)) throw std::invalid_argument("failure ceiling must be in [0, 1]");
}

namespace {

struct Outcome {
    double est = NAN;
    double model_se = NAN;
    double boot_se = NAN;
};

Outcome run_one(const EstimatorConfig& ec, const GeneratedSample& s, std::uint64_t seed, int B) {
    Outcome o;
    const auto& d = s.observed;
    switch (ec.kind) {
        case EstimatorKind::aipw: {
            const auto f = fit_aipw(d, {ec.folds, seed, ec.nuisance});
            o.est = f.beta_hat;
            o.model_se = f.se_model;
            break;
        }
        case EstimatorKind::ipw: o.est = fit_ipw(d, ec.nuisance).beta_hat; break;
        case EstimatorKind::naive: {
            const auto f = fit_naive_cox(d);
            o.est = f.beta_hat;
            o.model_se = f.se_model;
            break;
        }
        case EstimatorKind::full: {
            const auto f = fit_full_data(s.potential_times(), kSimTau);
            o.est = f.beta_hat;
            o.model_se = f.se_sandwich;
            return o;
        }
    }
    if (B > 0) {
        BootstrapEstimator be = [&](const Dataset& sample, std::uint64_t rs) -> double {
            switch (ec.kind) {
                case EstimatorKind::aipw: return fit_aipw(sample, {ec.folds, rs, ec.nuisance}).beta_hat;
                case EstimatorKind::ipw: return fit_ipw(sample, ec.nuisance).beta_hat;
                default: return fit_naive_cox(sample).beta_hat;
            }
        };
        o.boot_se = bootstrap(d, B, seed ^ 0x5eedb007ull, be, 1).se;
    }
    return o;
}

}  // namespace

MonteCarloReport run_monte_carlo(const ScenarioConfig& cfg) {
    cfg.validate();
    const double truth = cfg.truth ? *cfg.truth : true_beta(cfg.family, cfg.scenario);
    const auto reps = static_cast<std::size_t>(cfg.replications);
    const std::size_t ne = cfg.estimators.size();
    std::vector<std::vector<Outcome>> out(reps, std::vector<Outcome>(ne));
    std::vector<std::array<double, 4>> rates(reps);

    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mu;
    auto worker = [&] {
        for (std::size_t r = next++; r < reps; r = next++) {
            try {
                auto eng = make_stream(cfg.seed, (0x6d63ull << 32) + r);
                const std::uint64_t sample_seed = eng();
                const auto s = generate(cfg.family, cfg.n, cfg.scenario, sample_seed);
                rates[r] = {s.event_rate, s.censoring_rate, s.admin_rate,
                            static_cast<double>(s.observed.count_treated()) / static_cast<double>(cfg.n)};
                for (std::size_t e = 0; e < ne; ++e) {
                    const std::uint64_t fit_seed = eng();
                    try {
                        out[r][e] = run_one(cfg.estimators[e], s, fit_seed, cfg.bootstrap_B);
                    } catch (const fit_error&) {
                    } catch (const data_error&) {
                    }
                }
            } catch (const data_error&) {
                // single-arm sample: every estimator fails this replicate
            } catch (...) {
                std::lock_guard lock(fatal_mu);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(reps)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    MonteCarloReport rep;
    rep.family = cfg.family;
    rep.scenario = cfg.scenario;
    rep.n = cfg.n;
    rep.replications = cfg.replications;
    rep.seed = cfg.seed;
    rep.bootstrap_B = cfg.bootstrap_B;
    rep.truth = truth;
    rep.margin_of_error = 1.96 * std::sqrt(0.95 * 0.05 / cfg.replications);
    for (const auto& r : rates) {
        rep.event_rate += r[0] / reps;
        rep.censoring_rate += r[1] / reps;
        rep.admin_rate += r[2] / reps;
        rep.treated_fraction += r[3] / reps;
    }
    const double z = 1.959963984540054;
    for (std::size_t e = 0; e < ne; ++e) {
        EstimatorSummary s;
        s.label = cfg.estimators[e].label;
        double sum = 0.0, mse = 0.0, bse = 0.0, cm = 0.0, cb = 0.0;
        int nm = 0, nb = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& o = out[r][e];
            s.estimates.push_back(o.est);
            if (!std::isfinite(o.est)) {
                ++s.failures;
                continue;
            }
            ++s.successes;
            sum += o.est;
            if (std::isfinite(o.model_se)) {
                ++nm;
                mse += o.model_se;
                cm += std::fabs(o.est - truth) <= z * o.model_se;
            }
            if (std::isfinite(o.boot_se)) {
                ++nb;
                bse += o.boot_se;
                cb += std::fabs(o.est - truth) <= z * o.boot_se;
            }
        }
        if (s.failures > cfg.failure_ceiling * cfg.replications) {
            throw replicate_failure_error(s.label + ": " + std::to_string(s.failures) + " of " +
                                          std::to_string(cfg.replications) + " replicates failed");
        }
        if (s.successes > 0) {
            s.mean = sum / s.successes;
            s.bias = s.mean - truth;
            double ss = 0.0;
            for (double v : s.estimates) {
                if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
            }
            s.sd = s.successes > 1 ? std::sqrt(ss / (s.successes - 1)) : 0.0;
        }
        if (nm > 0) {
            s.mean_model_se = mse / nm;
            s.coverage_model = cm / nm;
        }
        if (nb > 0) {
            s.mean_boot_se = bse / nb;
            s.coverage_boot = cb / nb;
        }
        rep.estimators.push_back(std::move(s));
    }
    return rep;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string fmt(const std::optional<double>& v, const char* spec = "%.3f") {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, spec, *v);
    return buf;
}

}  // namespace

nlohmann::json report_to_json(const MonteCarloReport& r, bool include_estimates) {
    nlohmann::json est = nlohmann::json::array();
    for (const auto& s : r.estimators) {
        nlohmann::json j = {{"label", s.label},
                            {"successes", s.successes},
                            {"failures", s.failures},
                            {"mean", s.mean},
                            {"bias", s.bias},
                            {"sd", s.sd},
                            {"mean_model_se", opt_json(s.mean_model_se)},
                            {"mean_boot_se", opt_json(s.mean_boot_se)},
                            {"coverage_model", opt_json(s.coverage_model)},
                            {"coverage_boot", opt_json(s.coverage_boot)}};
        if (include_estimates) {
            nlohmann::json e = nlohmann::json::array();
            for (double v : s.estimates) e.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
            j["estimates"] = std::move(e);
        }
        est.push_back(std::move(j));
    }
    return {{"family", to_string(r.family)},
            {"scenario", r.scenario},
            {"n", r.n},
            {"replications", r.replications},
            {"seed", r.seed},
            {"bootstrap_B", r.bootstrap_B},
            {"truth", r.truth},
            {"margin_of_error", r.margin_of_error},
            {"rates", {{"event", r.event_rate}, {"censoring", r.censoring_rate}, {"administrative", r.admin_rate},
                       {"treated", r.treated_fraction}}},
            {"estimators", std::move(est)}};
}

std::string format_report_table(const MonteCarloReport& r) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s scenario %d: n = %zu, %d replicates, truth = %.4f\n", to_string(r.family).c_str(),
                  r.scenario, r.n, r.replications, r.truth);
    out += buf;
    std::snprintf(buf, sizeof buf, "event %.3f  censored %.3f  administrative %.3f  treated %.3f\n", r.event_rate,
                  r.censoring_rate, r.admin_rate, r.treated_fraction);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-22s %8s %8s %15s %15s %6s\n", "Estimator", "Bias", "SD", "SE Model/Boot",
                  "Cov Model/Boot", "Fail");
    out += buf;
    for (const auto& s : r.estimators) {
        const auto se = fmt(s.mean_model_se) + "/" + fmt(s.mean_boot_se);
        const auto cov = fmt(s.coverage_model, "%.2f") + "/" + fmt(s.coverage_boot, "%.2f");
        std::snprintf(buf, sizeof buf, "%-22s %8.3f %8.3f %15s %15s %6d\n", s.label.c_str(), s.bias, s.sd, se.c_str(),
                      cov.c_str(), s.failures);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "coverage margin of error: +/-%.4f\n", r.margin_of_error);
    out += buf;
    return out;
}

}  // namespace msm_aipw
