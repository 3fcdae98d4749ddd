// msm-aipw: fit marginal structural Cox models, run simulation studies and
// query the estimand oracle.
//
// Exit codes: 0 ok, 2 usage, 3 data, 4 solver, 5 replicate failure ceiling.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msm_aipw/data.hpp"
#include "msm_aipw/errors.hpp"
#include "msm_aipw/estimator.hpp"
#include "msm_aipw/json_io.hpp"
#include "msm_aipw/nuisance.hpp"
#include "msm_aipw/oracle.hpp"
#include "msm_aipw/sim.hpp"

using namespace msm_aipw;
using nlohmann::json;

namespace {

enum Exit { ok = 0, usage = 2, data = 3, solver = 4, ceiling = 5 };

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw usage_error(std::string("invalid number in ") + what + ": '" + item + "'");
        }
    }
    return out;
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::shared_ptr<const SurvivalEstimator> survival_estimator(const std::string& kind) {
    if (kind == "cox") return std::make_shared<CoxEstimator>(CoxDesign::full);
    if (kind == "cox-treatment") return std::make_shared<CoxEstimator>(CoxDesign::treatment_only);
    if (kind == "marginal") return std::make_shared<CoxEstimator>(CoxDesign::marginal);
    if (kind == "none") return std::make_shared<ConstantSurvivalEstimator>();
    throw usage_error("unknown survival model '" + kind + "'");
}

// Potential outcomes CSV with header t0,t1 (extra columns ignored).
std::vector<PotentialOutcomes> load_potential(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error("empty file");
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) head.push_back(c);
    }
    int i0 = -1, i1 = -1;
    for (int i = 0; i < static_cast<int>(head.size()); ++i) {
        if (head[static_cast<std::size_t>(i)] == "t0") i0 = i;
        if (head[static_cast<std::size_t>(i)] == "t1") i1 = i;
    }
    if (i0 < 0) throw data_error("missing column 't0'");
    if (i1 < 0) throw data_error("missing column 't1'");
    std::vector<PotentialOutcomes> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        auto cell = [&](int i) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(cells.at(static_cast<std::size_t>(i)), &pos);
                if (pos != cells[static_cast<std::size_t>(i)].size() || !(v > 0.0)) throw std::invalid_argument("");
                return v;
            } catch (const std::exception&) {
                throw data_error("row " + std::to_string(row) + ": invalid potential time");
            }
        };
        out.push_back({cell(i0), cell(i1)});
    }
    if (out.empty()) throw data_error("empty file");
    return out;
}

// ---------------------------------------------------------------------------

struct FitArgs {
    std::string input, output, estimator = "aipw", clip_ps = "0.1,0.9", risk_times;
    std::string event_model = "cox", censoring_model = "cox", propensity_model = "logistic";
    double tau = NAN, clip_surv = 0.05, propensity_constant = 0.5;
    int folds = 5, bootstrap_b = 0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    bool identity_weights = false;
};

NuisanceSpec nuisance_spec(const FitArgs& a) {
    const auto clip = parse_list(a.clip_ps, "--clip-ps");
    if (clip.size() != 2) throw usage_error("--clip-ps expects LO,HI");
    NuisanceSpec spec;
    spec.clip = {clip[0], clip[1], a.clip_surv};
    try {
        spec.clip.validate();
    } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
    }
    if (a.propensity_model == "logistic") {
        spec.propensity = std::make_shared<LogisticEstimator>();
    } else if (a.propensity_model == "constant") {
        if (!(a.propensity_constant > 0.0 && a.propensity_constant < 1.0))
            throw usage_error("--propensity-constant must be in (0, 1)");
        spec.propensity = std::make_shared<ConstantPropensityEstimator>(a.propensity_constant);
    } else {
        throw usage_error("unknown propensity model '" + a.propensity_model + "'");
    }
    spec.event = survival_estimator(a.event_model);
    spec.censoring = survival_estimator(a.censoring_model);
    return spec;
}

int cmd_fit(const FitArgs& a) {
    if (!(a.tau > 0.0)) throw usage_error("--tau must be positive");
    if (a.folds < 1) throw usage_error("--folds must be at least 1");
    if (a.bootstrap_b < 0) throw usage_error("--bootstrap must be nonnegative");
    if (a.identity_weights && a.estimator != "ipw") throw usage_error("--identity-weights applies to --estimator ipw only");
    const auto times = a.risk_times.empty() ? std::vector<double>{} : parse_list(a.risk_times, "--risk-times");
    for (double t : times) {
        if (!(t >= 0.0 && t <= a.tau)) throw usage_error("--risk-times must lie in [0, tau]");
    }
    const unsigned threads = a.threads > 0 ? a.threads : default_threads();

    if (a.estimator == "full") {
        if (a.bootstrap_b > 0) throw usage_error("--bootstrap is not available for --estimator full");
        if (!times.empty()) throw usage_error("--risk-times is not available for --estimator full");
        const auto po = load_potential(a.input);
        emit(dump(fit_to_json(fit_full_data(po, a.tau))), a.output);
        return ok;
    }

    const auto spec = nuisance_spec(a);
    const Dataset data = load_dataset(a.input, a.tau);

    json out;
    double beta = 0.0;
    StepFunction lambda;
    BootstrapEstimator boot;
    if (a.estimator == "aipw") {
        AipwOptions opt{a.folds, a.seed, spec};
        const auto fit = fit_aipw(data, opt);
        out = fit_to_json(fit);
        beta = fit.beta_hat;
        lambda = fit.lambda_hat;
        boot = [opt](const Dataset& d, std::uint64_t s) {
            auto o = opt;
            o.seed = s;
            return fit_aipw(d, o).beta_hat;
        };
    } else if (a.estimator == "ipw") {
        const auto fit = a.identity_weights ? fit_ipw(data, identity_nuisance(0.5)) : fit_ipw(data, spec);
        out = fit_to_json(fit);
        out["diagnostics"]["weights"] = a.identity_weights ? "identity" : spec.label();
        beta = fit.beta_hat;
        lambda = fit.lambda_hat;
        if (a.identity_weights) {
            boot = [](const Dataset& d, std::uint64_t) { return fit_ipw(d, identity_nuisance(0.5)).beta_hat; };
        } else {
            boot = [spec](const Dataset& d, std::uint64_t) { return fit_ipw(d, spec).beta_hat; };
        }
    } else if (a.estimator == "naive") {
        const auto fit = fit_naive_cox(data);
        out = fit_to_json(fit);
        beta = fit.beta_hat;
        lambda = fit.lambda_hat;
        boot = [](const Dataset& d, std::uint64_t) { return fit_naive_cox(d).beta_hat; };
    } else {
        throw usage_error("unknown estimator '" + a.estimator + "'");
    }

    if (a.bootstrap_b > 0) {
        const auto b = bootstrap(data, a.bootstrap_b, a.seed, boot, threads);
        out["se_boot"] = b.se;
        out["ci_boot"] = {normal_ci(beta, b.se).first, normal_ci(beta, b.se).second};
        if (out["ci"].is_null()) out["ci"] = out["ci_boot"];
        out["bootstrap"] = {{"requested", b.requested}, {"succeeded", b.succeeded}, {"failed", b.failed}};
    }
    if (!times.empty()) {
        const auto rc = risk_contrasts(beta, lambda, times, a.tau);
        out["risk_contrasts"] = risk_to_json(rc);
    }
    out["tau"] = a.tau;
    emit(dump(out), a.output);
    return ok;
}

// ---------------------------------------------------------------------------

struct SimArgs {
    std::string family = "main", output, table;
    int scenario = 1, reps = 200, folds = 5, bootstrap_b = 0;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    double failure_ceiling = 0.10;
    bool estimates = false;
};

ScenarioConfig scenario_config(const std::string& family, int scenario, std::size_t n, std::uint64_t seed) {
    ScenarioConfig c;
    try {
        c.family = parse_family(family);
    } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
    }
    c.scenario = scenario;
    c.n = n;
    c.seed = seed;
    return c;
}

int cmd_simulate(const SimArgs& a) {
    auto c = scenario_config(a.family, a.scenario, a.n, a.seed);
    c.replications = a.reps;
    c.bootstrap_B = a.bootstrap_b;
    c.threads = a.threads > 0 ? a.threads : default_threads();
    c.failure_ceiling = a.failure_ceiling;
    if (a.folds < 1) throw usage_error("--folds must be at least 1");
    for (auto& e : c.estimators) {
        if (e.kind == EstimatorKind::aipw) e.folds = a.folds;
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
    }
    const auto report = run_monte_carlo(c);
    const auto table = format_report_table(report);
    const auto js = dump(report_to_json(report, a.estimates));
    if (!a.output.empty()) emit(js, a.output);
    if (!a.table.empty()) emit(table, a.table);
    if (a.output.empty() && a.table.empty()) std::cout << table;
    return ok;
}

// ---------------------------------------------------------------------------

struct OracleArgs {
    std::string law, family, output;
    int scenario = 1, points = 100, panels = 20000;
    double tau = 1.0;
    bool log_mesh = false;
};

json read_law(const std::string& spec) {
    std::string text = spec;
    if (!spec.empty() && spec.front() != '{') {
        std::ifstream in(spec);
        if (!in) throw usage_error("--law: not a JSON object and not a readable file: " + spec);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw usage_error(std::string("--law: malformed JSON: ") + e.what());
    }
}

int cmd_oracle(const OracleArgs& a) {
    if (a.law.empty() == a.family.empty()) throw usage_error("give exactly one of --law or --family");
    if (!(a.tau > 0.0)) throw usage_error("--tau must be positive");
    if (a.points < 1) throw usage_error("--points must be at least 1");
    if (a.panels < 10) throw usage_error("--panels must be at least 10");
    std::shared_ptr<const PotentialOutcomeLaw> law;
    try {
        if (!a.law.empty()) {
            law = parse_law(read_law(a.law));
        } else {
            if (parse_family(a.family) != Family::supplementary)
                throw std::invalid_argument("--family: only the supplementary family has a law descriptor");
            if (a.scenario < 1 || a.scenario > 4) throw std::invalid_argument("--scenario must be 1-4");
            law = supp_law(a.scenario);
        }
    } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
    }
    const EstimandOracle oracle(law, a.tau, {a.panels, a.log_mesh});
    emit(dump(oracle_to_json(oracle, *law, a.points)), a.output);
    return ok;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string family = "main", output, potential;
    int scenario = 1;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
};

int cmd_generate(const GenArgs& a) {
    auto c = scenario_config(a.family, a.scenario, a.n, a.seed);
    c.replications = 1;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
    }
    const auto g = generate(c.family, c.n, c.scenario, c.seed);
    emit(format_dataset(g.observed), a.output);
    if (!a.potential.empty()) {
        std::ostringstream os;
        os.precision(17);
        os << "t0,t1,c0,c1,treatment\n";
        for (const auto& p : g.potential) os << p.t0 << ',' << p.t1 << ',' << p.c0 << ',' << p.c1 << ',' << p.a << '\n';
        emit(os.str(), a.potential);
    }
    std::cerr << "event " << g.event_rate << "  censored " << g.censoring_rate << "  administrative " << g.admin_rate
              << '\n';
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Marginal structural Cox models under informative censoring: AIPW, IPW and naive fits, "
                 "simulation studies and the estimand oracle."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "msm-aipw 0.1.0");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit an estimator to a CSV dataset (time,event,treatment,z1,...)");
    fit->add_option("input", fa.input, "Input CSV; potential outcomes t0,t1 for --estimator full")->required();
    fit->add_option("--estimator", fa.estimator, "aipw, ipw, naive or full")
        ->check(CLI::IsMember({"aipw", "ipw", "naive", "full"}))
        ->capture_default_str();
    fit->add_option("--tau", fa.tau, "Administrative censoring time")->required();
    fit->add_option("--folds", fa.folds, "Cross-fitting folds for aipw (1 = no cross-fitting)")->capture_default_str();
    fit->add_option("--clip-ps", fa.clip_ps, "Propensity clip bounds LO,HI")->capture_default_str();
    fit->add_option("--clip-surv", fa.clip_surv, "Floor for fitted S and Sc")->capture_default_str();
    fit->add_option("--event-model", fa.event_model, "Event working model: cox, cox-treatment, marginal, none")
        ->capture_default_str();
    fit->add_option("--censoring-model", fa.censoring_model,
                    "Censoring working model: cox, cox-treatment, marginal, none")
        ->capture_default_str();
    fit->add_option("--propensity-model", fa.propensity_model, "logistic or constant")->capture_default_str();
    fit->add_option("--propensity-constant", fa.propensity_constant, "P(A = 1) for --propensity-model constant")
        ->capture_default_str();
    fit->add_flag("--identity-weights", fa.identity_weights, "ipw only: unit weights (reduces to the naive Cox fit)");
    fit->add_option("--bootstrap", fa.bootstrap_b, "Bootstrap replicates (0 = none)")->capture_default_str();
    fit->add_option("--seed", fa.seed, "Seed for folds and bootstrap")->capture_default_str();
    fit->add_option("--risk-times", fa.risk_times, "Comma-separated times for risk contrasts");
    fit->add_option("--threads", fa.threads, "Worker threads (default: MSM_AIPW_THREADS or all cores)");
    fit->add_option("--output", fa.output, "Output JSON path (default stdout)");

    SimArgs sa;
    auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo study over a simulation scenario");
    sim->add_option("--family", sa.family, "main or supplementary")->capture_default_str();
    sim->add_option("--scenario", sa.scenario, "Scenario 1-4")->capture_default_str();
    sim->add_option("--n", sa.n, "Sample size")->capture_default_str();
    sim->add_option("--reps", sa.reps, "Replicates")->capture_default_str();
    sim->add_option("--seed", sa.seed, "Seed")->capture_default_str();
    sim->add_option("--folds", sa.folds, "Cross-fitting folds for AIPW")->capture_default_str();
    sim->add_option("--bootstrap", sa.bootstrap_b, "Bootstrap replicates per fit (0 = none)")->capture_default_str();
    sim->add_option("--threads", sa.threads, "Worker threads (default: MSM_AIPW_THREADS or all cores)");
    sim->add_option("--failure-ceiling", sa.failure_ceiling, "Largest tolerated fraction of failed fits")
        ->capture_default_str();
    sim->add_flag("--estimates", sa.estimates, "Include per-replicate estimates in the JSON report");
    sim->add_option("--output", sa.output, "JSON report path");
    sim->add_option("--table", sa.table, "Text table path (printed to stdout when neither path is given)");

    OracleArgs oa;
    auto* orc = app.add_subcommand("oracle", "Solve for the estimand beta* and Lambda* of a potential-outcome law");
    orc->add_option("--law", oa.law, "Law descriptor: JSON object or path to a JSON file");
    orc->add_option("--family", oa.family, "Use a built-in scenario law instead (supplementary)");
    orc->add_option("--scenario", oa.scenario, "Scenario for --family")->capture_default_str();
    orc->add_option("--tau", oa.tau, "Upper limit of the estimand integrals")->capture_default_str();
    orc->add_option("--points", oa.points, "Number of output points for beta(t) and Lambda*(t)")->capture_default_str();
    orc->add_option("--panels", oa.panels, "Quadrature panels")->capture_default_str();
    orc->add_flag("--log-mesh", oa.log_mesh, "Geometric quadrature mesh, for long-tailed laws");
    orc->add_option("--output", oa.output, "Output JSON path (default stdout)");

    GenArgs ga;
    auto* gen = app.add_subcommand("generate", "Write one simulated dataset as CSV");
    gen->add_option("--family", ga.family, "main or supplementary")->capture_default_str();
    gen->add_option("--scenario", ga.scenario, "Scenario 1-4")->capture_default_str();
    gen->add_option("--n", ga.n, "Sample size")->capture_default_str();
    gen->add_option("--seed", ga.seed, "Seed")->capture_default_str();
    gen->add_option("--output", ga.output, "Observed data CSV path (default stdout)");
    gen->add_option("--potential", ga.potential, "Also write potential outcomes t0,t1,c0,c1,treatment here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }

    try {
        if (*fit) return cmd_fit(fa);
        if (*sim) return cmd_simulate(sa);
        if (*orc) return cmd_oracle(oa);
        if (*gen) return cmd_generate(ga);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data;
    } catch (const replicate_failure_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ceiling;
    } catch (const fit_error& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return solver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return usage;
}
