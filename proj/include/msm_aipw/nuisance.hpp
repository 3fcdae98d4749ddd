#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "msm_aipw/cox.hpp"
#include "msm_aipw/data.hpp"

namespace msm_aipw {

struct ClipConfig {
    double ps_lo = 0.1;
    double ps_hi = 0.9;
    double surv_floor = 0.05;

    void validate() const;
};

enum class Target { event, censoring };

// ---------------------------------------------------------------------------
// Fitted models

class PropensityModel {
public:
    virtual ~PropensityModel() = default;
    // Unclipped P(A = 1 | z).
    virtual double predict(std::span<const double> z) const = 0;
    virtual nlohmann::json to_json() const = 0;
};

class SurvivalModel {
public:
    virtual ~SurvivalModel() = default;
    // log S(t; a, z) at each grid time (unclipped; grid sorted ascending).
    virtual void log_survival(std::span<const double> grid, int a, std::span<const double> z,
                              std::span<double> out) const = 0;
    // Times where the fitted survival function jumps. Empty for constant
    // models; continuous models report none and set is_step() = false.
    virtual std::vector<double> jump_times() const = 0;
    virtual bool is_step() const { return true; }
    virtual nlohmann::json to_json() const = 0;
};

class LogisticPropensity final : public PropensityModel {
public:
    explicit LogisticPropensity(Eigen::VectorXd gamma) : gamma_(std::move(gamma)) {}
    const Eigen::VectorXd& gamma() const { return gamma_; }
    double predict(std::span<const double> z) const override;
    nlohmann::json to_json() const override;

private:
    Eigen::VectorXd gamma_;  // intercept first
};

class ConstantPropensity final : public PropensityModel {
public:
    explicit ConstantPropensity(double c);
    double predict(std::span<const double>) const override { return c_; }
    nlohmann::json to_json() const override;

private:
    double c_;
};

// Which columns enter a Cox working model.
enum class CoxDesign {
    full,            // (a, z)
    treatment_only,  // a
    marginal         // none: Nelson-Aalen
};

// S(t; a, z) = exp{-Lambda0(t) exp(theta' x(a, z))}.
class CoxWorkingModel final : public SurvivalModel {
public:
    CoxWorkingModel(CoxDesign design, Eigen::VectorXd theta, BreslowBaseline baseline, Target target);

    CoxDesign design() const { return design_; }
    Target target() const { return target_; }
    const Eigen::VectorXd& theta() const { return theta_; }
    const BreslowBaseline& baseline() const { return baseline_; }
    double linear_predictor(int a, std::span<const double> z) const;

    void log_survival(std::span<const double> grid, int a, std::span<const double> z,
                      std::span<double> out) const override;
    std::vector<double> jump_times() const override { return baseline_.times; }
    nlohmann::json to_json() const override;

private:
    CoxDesign design_;
    Eigen::VectorXd theta_;
    BreslowBaseline baseline_;
    Target target_;
};

// S ≡ 1.
class ConstantSurvival final : public SurvivalModel {
public:
    void log_survival(std::span<const double>, int, std::span<const double>, std::span<double> out) const override;
    std::vector<double> jump_times() const override { return {}; }
    nlohmann::json to_json() const override;
};

// A known conditional survival function, e.g. the data-generating truth.
class AnalyticSurvival final : public SurvivalModel {
public:
    using LogSurvivalFn = std::function<double(double t, int a, std::span<const double> z)>;
    AnalyticSurvival(std::string name, LogSurvivalFn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

    void log_survival(std::span<const double> grid, int a, std::span<const double> z,
                      std::span<double> out) const override;
    std::vector<double> jump_times() const override { return {}; }
    bool is_step() const override { return false; }
    nlohmann::json to_json() const override;

private:
    std::string name_;
    LogSurvivalFn fn_;
};

// ---------------------------------------------------------------------------
// Estimators: the plug-in contract. fit() sees only training records.

class PropensityEstimator {
public:
    virtual ~PropensityEstimator() = default;
    virtual std::shared_ptr<const PropensityModel> fit(const Dataset& train) const = 0;
    virtual std::string name() const = 0;
};

class SurvivalEstimator {
public:
    virtual ~SurvivalEstimator() = default;
    virtual std::shared_ptr<const SurvivalModel> fit(const Dataset& train, Target target) const = 0;
    virtual std::string name() const = 0;
};

class LogisticEstimator final : public PropensityEstimator {
public:
    std::shared_ptr<const PropensityModel> fit(const Dataset& train) const override;
    std::string name() const override { return "logistic"; }
};

class ConstantPropensityEstimator final : public PropensityEstimator {
public:
    explicit ConstantPropensityEstimator(double c) : c_(c) {}
    std::shared_ptr<const PropensityModel> fit(const Dataset&) const override;
    std::string name() const override;

private:
    double c_;
};

class CoxEstimator final : public SurvivalEstimator {
public:
    explicit CoxEstimator(CoxDesign design = CoxDesign::full) : design_(design) {}
    std::shared_ptr<const SurvivalModel> fit(const Dataset& train, Target target) const override;
    std::string name() const override;

private:
    CoxDesign design_;
};

class ConstantSurvivalEstimator final : public SurvivalEstimator {
public:
    std::shared_ptr<const SurvivalModel> fit(const Dataset&, Target) const override;
    std::string name() const override { return "constant"; }
};

// Returns a fixed model regardless of the data.
class FixedSurvivalEstimator final : public SurvivalEstimator {
public:
    explicit FixedSurvivalEstimator(std::shared_ptr<const SurvivalModel> model) : model_(std::move(model)) {}
    std::shared_ptr<const SurvivalModel> fit(const Dataset&, Target) const override { return model_; }
    std::string name() const override { return "fixed"; }

private:
    std::shared_ptr<const SurvivalModel> model_;
};

// ---------------------------------------------------------------------------

struct NuisanceSpec {
    std::shared_ptr<const PropensityEstimator> propensity;
    std::shared_ptr<const SurvivalEstimator> event;
    std::shared_ptr<const SurvivalEstimator> censoring;
    ClipConfig clip;

    // Logistic propensity with Cox working models in (a, z).
    static NuisanceSpec cox_logit(ClipConfig clip = {});
    std::string label() const;
};

struct NuisanceTriple {
    std::shared_ptr<const PropensityModel> propensity;
    std::shared_ptr<const SurvivalModel> event;
    std::shared_ptr<const SurvivalModel> censoring;
    ClipConfig clip;

    double pi(std::span<const double> z) const;  // clipped
};

NuisanceTriple fit_nuisance(const NuisanceSpec& spec, const Dataset& train);

// pi ≡ c, S ≡ 1, Sc ≡ 1, with propensity clipping disabled.
NuisanceTriple identity_nuisance(double c);

std::shared_ptr<const LogisticPropensity> fit_logistic(const Dataset& data);
std::shared_ptr<const CoxWorkingModel> fit_cox_working(const Dataset& data, Target target,
                                                       CoxDesign design = CoxDesign::full);

double predict_propensity(const PropensityModel& model, std::span<const double> z, double lo, double hi);

// Clipped survival at each grid time.
std::vector<double> predict_conditional_survival(const SurvivalModel& model, std::span<const double> grid, int a,
                                                 std::span<const double> z, double floor);

}  // namespace msm_aipw
