#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msm_aipw/data.hpp"
#include "msm_aipw/estimator.hpp"
#include "msm_aipw/nuisance.hpp"
#include "msm_aipw/oracle.hpp"

namespace msm_aipw {

enum class Family { main, supplementary };

Family parse_family(const std::string& s);
std::string to_string(Family f);

// Full bookkeeping for one simulated subject.
struct PotentialRecord {
    double t0 = 0.0, t1 = 0.0;  // T(0), T(1)
    double c0 = 0.0, c1 = 0.0;  // C(0), C(1)
    int a = 0;
    std::vector<double> z;
    std::array<double, 3> u{};  // latent U (main family only)
};

struct GeneratedSample {
    Dataset observed;
    std::vector<PotentialRecord> potential;
    double event_rate = 0.0;       // observed events before tau
    double censoring_rate = 0.0;   // loss to follow-up before tau
    double admin_rate = 0.0;       // still under observation at tau

    std::vector<PotentialOutcomes> potential_times() const;
};

inline constexpr double kSimTau = 1.0;

// U ~ Unif(-1, 1)^3, Z = (0.5U1 + U3, U1 + 1.5U1^2 - 0.5, U1 + U2),
// T(a) = -log(0.5U1 + 0.5) e^a; C(a) and A per scenario 1-4.
GeneratedSample generate_main(std::size_t n, int scenario, std::uint64_t seed);
// Z ~ Unif(-1, 1); Cox or mixture hazards for T(a) and C(a), logistic or
// soft-partition treatment, per scenario 1-4.
GeneratedSample generate_supp(std::size_t n, int scenario, std::uint64_t seed);
GeneratedSample generate(Family family, std::size_t n, int scenario, std::uint64_t seed);

// Marginal law of T(a) in a supplementary scenario (Cox for 1-2, mixture for 3-4).
std::shared_ptr<const PotentialOutcomeLaw> supp_law(int scenario);
// Conditional survival of T(a) given (a, z) in a supplementary scenario.
std::shared_ptr<const SurvivalModel> supp_true_event_model(int scenario);

// Target of estimation: -1 for the main family, the oracle beta* otherwise.
double true_beta(Family family, int scenario);

enum class EstimatorKind { aipw, ipw, naive, full };

struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::aipw;
    std::string label;
    int folds = 5;
    NuisanceSpec nuisance = NuisanceSpec::cox_logit();
};

std::vector<EstimatorConfig> default_estimators();

struct ScenarioConfig {
    Family family = Family::main;
    int scenario = 1;
    std::size_t n = 1000;
    int replications = 200;
    std::uint64_t seed = 1;
    std::vector<EstimatorConfig> estimators = default_estimators();
    int bootstrap_B = 0;
    unsigned threads = 1;
    double failure_ceiling = 0.10;
    std::optional<double> truth;  // overrides true_beta()

    void validate() const;
};

struct EstimatorSummary {
    std::string label;
    int successes = 0;
    int failures = 0;
    double mean = 0.0;
    double bias = 0.0;
    double sd = 0.0;
    std::optional<double> mean_model_se;
    std::optional<double> mean_boot_se;
    std::optional<double> coverage_model;
    std::optional<double> coverage_boot;
    std::vector<double> estimates;  // per replicate, NaN on failure
};

struct MonteCarloReport {
    Family family = Family::main;
    int scenario = 1;
    std::size_t n = 0;
    int replications = 0;
    std::uint64_t seed = 0;
    int bootstrap_B = 0;
    double truth = 0.0;
    double margin_of_error = 0.0;  // half-width of a 95% interval for coverage 0.95
    double event_rate = 0.0;
    double censoring_rate = 0.0;
    double admin_rate = 0.0;
    double treated_fraction = 0.0;
    std::vector<EstimatorSummary> estimators;
};

MonteCarloReport run_monte_carlo(const ScenarioConfig& config);

nlohmann::json report_to_json(const MonteCarloReport& report, bool include_estimates = false);
std::string format_report_table(const MonteCarloReport& report);

}  // namespace msm_aipw
