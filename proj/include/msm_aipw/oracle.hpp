#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace msm_aipw {

// Distribution of a single potential outcome T(a).
class ArmDistribution {
public:
    virtual ~ArmDistribution() = default;
    virtual double survival(double t) const = 0;
    virtual double density(double t) const = 0;
    virtual std::vector<double> breakpoints() const { return {}; }
    virtual nlohmann::json to_json() const = 0;
};

std::shared_ptr<const ArmDistribution> exponential_arm(double rate);
std::shared_ptr<const ArmDistribution> weibull_arm(double shape, double scale);
std::shared_ptr<const ArmDistribution> lognormal_arm(double mu, double sigma);
// log T = mu + s * eps with eps standard logistic.
std::shared_ptr<const ArmDistribution> loglogistic_arm(double mu, double s);
std::shared_ptr<const ArmDistribution> uniform_arm(double lo, double hi);
// S(t) = (1 + rho c t)^(-1/rho), exp(-c t) at rho = 0.
std::shared_ptr<const ArmDistribution> grho_arm(double rho, double c);

// Laws of the two potential outcomes T(0), T(1).
class PotentialOutcomeLaw {
public:
    virtual ~PotentialOutcomeLaw() = default;
    virtual double survival(int a, double t) const = 0;
    virtual double density(int a, double t) const = 0;
    double hazard(int a, double t) const { return density(a, t) / survival(a, t); }
    virtual std::vector<double> breakpoints() const { return {}; }
    virtual nlohmann::json to_json() const = 0;
};

std::shared_ptr<const PotentialOutcomeLaw> two_arm_law(std::shared_ptr<const ArmDistribution> arm0,
                                                       std::shared_ptr<const ArmDistribution> arm1);
// lambda_a(t) = rate * exp(log_hr * a).
std::shared_ptr<const PotentialOutcomeLaw> ph_exponential_law(double rate, double log_hr);
// g(T(a)) = gamma a + eps with eps in the G^rho family.
std::shared_ptr<const PotentialOutcomeLaw> transformation_law(double gamma, double rho);

// Conditional law of T(a) given a scalar Z: survival and density at (a, t, z).
struct ConditionalLaw {
    std::function<double(int a, double t, double z)> survival;
    std::function<double(int a, double t, double z)> density;
    std::vector<double> z_breakpoints;  // where the conditional law changes form
    std::vector<double> t_breakpoints;
    nlohmann::json descriptor;
};

struct UniformCovariate {
    double lo = -1.0;
    double hi = 1.0;
};

// S_a(t) = E_Z[S(t | a, Z)] and f_a(t) = E_Z[f(t | a, Z)] by composite
// Gauss-Legendre over Z, split at the breakpoints.
std::shared_ptr<const PotentialOutcomeLaw> marginalize(ConditionalLaw conditional, UniformCovariate z);

// lambda(t | a, z) = exp(b0 + ba a + bz z).
ConditionalLaw conditional_cox(double b0, double ba, double bz);
// z <= split: lambda(t | a, z) = exp(b0 + ba a + bz z); z > split: T(a) ~ Unif(0, uniform_hi).
ConditionalLaw conditional_mixture(double b0, double ba, double bz, double split, double uniform_hi);

// Build a law from a JSON descriptor {"family": ..., parameters}. Throws
// std::invalid_argument on an unknown family or invalid parameter.
std::shared_ptr<const PotentialOutcomeLaw> parse_law(const nlohmann::json& descriptor);

struct QuadratureOptions {
    int panels = 20000;
    bool log_mesh = false;  // geometric panels, for laws with long tails
};

struct EstimandSolution {
    double beta_star = 0.0;
    double h_residual = 0.0;
    int iterations = 0;
};

// Tabulated S_a, f_a on a midpoint mesh of [0, tau], and the estimand
// equations evaluated on it.
class EstimandOracle {
public:
    EstimandOracle(std::shared_ptr<const PotentialOutcomeLaw> law, double tau, QuadratureOptions opt = {});

    double tau() const { return tau_; }
    // h(beta) = int {E(beta(t), t) - E(beta, t)} sum_a dF_a(t).
    double h(double beta) const;
    EstimandSolution solve() const;
    // Lambda*(t) = int_0^t sum_a dF_a / sum_a S_a e^{beta a}.
    double lambda_star(double t, double beta_star) const;
    // The same estimand via E_{beta(t)}(A | T = t) built from the hazards.
    EstimandSolution solve_randomized() const;
    // Range of beta(t) over the mesh nodes where both hazards are positive.
    std::pair<double, double> beta_range() const;

private:
    std::shared_ptr<const PotentialOutcomeLaw> law_;
    double tau_;
    std::vector<double> edges_, mid_, width_, s0_, s1_, f0_, f1_;
};

double beta_of_t(const PotentialOutcomeLaw& law, double t);
EstimandSolution beta_star(std::shared_ptr<const PotentialOutcomeLaw> law, double tau, QuadratureOptions opt = {});
double lambda_star(std::shared_ptr<const PotentialOutcomeLaw> law, double tau, double t, QuadratureOptions opt = {});

// Smallest tau (by doubling, then bisection) with P(T(a) <= tau) >= mass for both arms.
double coverage_tau(const PotentialOutcomeLaw& law, double mass);

// beta* of the G^rho transformation model on [0, tau_large] (log mesh). Throws
// if tau_large covers less than 99.9% of either arm's event mass.
double transformation_model_check(double gamma, double rho, double tau_large);

}  // namespace msm_aipw
