#include "msm_aipw/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "msm_aipw/errors.hpp"
#include "msm_aipw/logistic.hpp"

namespace msm_aipw {

void ClipConfig::validate() const {
    if (!(ps_lo >= 0.0 && ps_lo < ps_hi && ps_hi <= 1.0)) {
        throw std::invalid_argument("propensity clip must satisfy 0 <= lo < hi <= 1");
    }
    if (!(surv_floor >= 0.0 && surv_floor < 1.0)) throw std::invalid_argument("survival floor must be in [0, 1)");
}

namespace {

const char* target_name(Target t) { return t == Target::event ? "event" : "censoring"; }

const char* design_name(CoxDesign d) {
    switch (d) {
        case CoxDesign::full: return "full";
        case CoxDesign::treatment_only: return "treatment_only";
        case CoxDesign::marginal: return "marginal";
    }
    return "?";
}

Eigen::Index design_cols(CoxDesign d, std::size_t p) {
    switch (d) {
        case CoxDesign::full: return static_cast<Eigen::Index>(p) + 1;
        case CoxDesign::treatment_only: return 1;
        case CoxDesign::marginal: return 0;
    }
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

double LogisticPropensity::predict(std::span<const double> z) const {
    if (static_cast<Eigen::Index>(z.size()) + 1 != gamma_.size()) {
        throw std::invalid_argument("propensity model: covariate dimension mismatch");
    }
    double eta = gamma_[0];
    for (std::size_t j = 0; j < z.size(); ++j) eta += gamma_[static_cast<Eigen::Index>(j) + 1] * z[j];
    return expit(eta);
}

nlohmann::json LogisticPropensity::to_json() const {
    return {{"type", "logistic"}, {"coef", std::vector<double>(gamma_.data(), gamma_.data() + gamma_.size())}};
}

ConstantPropensity::ConstantPropensity(double c) : c_(c) {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("constant propensity must be in (0, 1]");
}

nlohmann::json ConstantPropensity::to_json() const { return {{"type", "constant"}, {"value", c_}}; }

CoxWorkingModel::CoxWorkingModel(CoxDesign design, Eigen::VectorXd theta, BreslowBaseline baseline, Target target)
    : design_(design), theta_(std::move(theta)), baseline_(std::move(baseline)), target_(target) {}

double CoxWorkingModel::linear_predictor(int a, std::span<const double> z) const {
    switch (design_) {
        case CoxDesign::marginal: return 0.0;
        case CoxDesign::treatment_only: return theta_[0] * a;
        case CoxDesign::full: {
            if (static_cast<Eigen::Index>(z.size()) + 1 != theta_.size()) {
                throw std::invalid_argument("Cox working model: covariate dimension mismatch");
            }
            double eta = theta_[0] * a;
            for (std::size_t j = 0; j < z.size(); ++j) eta += theta_[static_cast<Eigen::Index>(j) + 1] * z[j];
            return eta;
        }
    }
    return 0.0;
}

void CoxWorkingModel::log_survival(std::span<const double> grid, int a, std::span<const double> z,
                                   std::span<double> out) const {
    const double r = std::exp(linear_predictor(a, z));
    const auto& bt = baseline_.times;
    std::size_t b = 0;
    double cum = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        while (b < bt.size() && bt[b] <= grid[j]) cum = baseline_.cumulative[b++];
        out[j] = -cum * r;
    }
}

nlohmann::json CoxWorkingModel::to_json() const {
    nlohmann::json jumps = nlohmann::json::array();
    for (std::size_t i = 0; i < baseline_.times.size(); ++i) {
        jumps.push_back({baseline_.times[i], baseline_.increments[i]});
    }
    return {{"type", "cox"},
            {"target", target_name(target_)},
            {"design", design_name(design_)},
            {"coef", std::vector<double>(theta_.data(), theta_.data() + theta_.size())},
            {"baseline_jumps", std::move(jumps)}};
}

void ConstantSurvival::log_survival(std::span<const double>, int, std::span<const double>,
                                    std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
}

nlohmann::json ConstantSurvival::to_json() const { return {{"type", "constant"}, {"value", 1.0}}; }

void AnalyticSurvival::log_survival(std::span<const double> grid, int a, std::span<const double> z,
                                    std::span<double> out) const {
    for (std::size_t j = 0; j < grid.size(); ++j) out[j] = fn_(grid[j], a, z);
}

nlohmann::json AnalyticSurvival::to_json() const { return {{"type", "analytic"}, {"name", name_}}; }

// ---------------------------------------------------------------------------

std::shared_ptr<const LogisticPropensity> fit_logistic(const Dataset& data) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto p = static_cast<Eigen::Index>(data.dim());
    Eigen::MatrixXd x(n, p + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = data[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) x(i, j + 1) = r.z[static_cast<std::size_t>(j)];
        y[i] = r.treatment;
    }
    auto res = fit_logistic_irls(x, y);
    return std::make_shared<LogisticPropensity>(std::move(res.coef));
}

std::shared_ptr<const CoxWorkingModel> fit_cox_working(const Dataset& data, Target target, CoxDesign design) {
    const auto n = data.size();
    const auto q = design_cols(design, data.dim());
    std::vector<double> time(n);
    std::vector<int> status(n);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), q);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = data[i];
        time[i] = r.time;
        status[i] = target == Target::event ? r.event : (data.is_censoring_event(i) ? 1 : 0);
        const auto row = static_cast<Eigen::Index>(i);
        if (q > 0) x(row, 0) = r.treatment;
        for (Eigen::Index j = 1; j < q; ++j) x(row, j) = r.z[static_cast<std::size_t>(j - 1)];
    }
    CoxFit fit;
    try {
        fit = fit_cox(time, status, x);
    } catch (const fit_error& e) {
        throw fit_error(std::string(target_name(target)) + " working model: " + e.what());
    }
    return std::make_shared<CoxWorkingModel>(design, std::move(fit.coef), std::move(fit.baseline), target);
}

std::shared_ptr<const PropensityModel> LogisticEstimator::fit(const Dataset& train) const {
    return fit_logistic(train);
}

std::shared_ptr<const PropensityModel> ConstantPropensityEstimator::fit(const Dataset&) const {
    return std::make_shared<ConstantPropensity>(c_);
}

std::string ConstantPropensityEstimator::name() const {
    std::ostringstream os;
    os << "constant(" << c_ << ")";
    return os.str();
}

std::shared_ptr<const SurvivalModel> CoxEstimator::fit(const Dataset& train, Target target) const {
    return fit_cox_working(train, target, design_);
}

std::string CoxEstimator::name() const {
    switch (design_) {
        case CoxDesign::full: return "cox";
        case CoxDesign::treatment_only: return "cox(a)";
        case CoxDesign::marginal: return "marginal";
    }
    return "cox";
}

std::shared_ptr<const SurvivalModel> ConstantSurvivalEstimator::fit(const Dataset&, Target) const {
    return std::make_shared<ConstantSurvival>();
}

NuisanceSpec NuisanceSpec::cox_logit(ClipConfig clip) {
    return {std::make_shared<LogisticEstimator>(), std::make_shared<CoxEstimator>(),
            std::make_shared<CoxEstimator>(), clip};
}

std::string NuisanceSpec::label() const {
    return event->name() + "/" + censoring->name() + "-" + propensity->name();
}

double NuisanceTriple::pi(std::span<const double> z) const {
    return predict_propensity(*propensity, z, clip.ps_lo, clip.ps_hi);
}

NuisanceTriple fit_nuisance(const NuisanceSpec& spec, const Dataset& train) {
    if (!spec.propensity || !spec.event || !spec.censoring) {
        throw std::invalid_argument("nuisance spec is missing an estimator");
    }
    spec.clip.validate();
    return {spec.propensity->fit(train), spec.event->fit(train, Target::event),
            spec.censoring->fit(train, Target::censoring), spec.clip};
}

NuisanceTriple identity_nuisance(double c) {
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("identity nuisance: c must be in (0, 1)");
    ClipConfig clip;
    clip.ps_lo = 0.0;
    clip.ps_hi = 1.0;
    return {std::make_shared<ConstantPropensity>(c), std::make_shared<ConstantSurvival>(),
            std::make_shared<ConstantSurvival>(), clip};
}

double predict_propensity(const PropensityModel& model, std::span<const double> z, double lo, double hi) {
    return std::clamp(model.predict(z), lo, hi);
}

std::vector<double> predict_conditional_survival(const SurvivalModel& model, std::span<const double> grid, int a,
                                                 std::span<const double> z, double floor) {
    std::vector<double> out(grid.size());
    model.log_survival(grid, a, z, out);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = grid[j] <= 0.0 ? 1.0 : std::max(std::exp(out[j]), floor);
    return out;
}

}  // namespace msm_aipw
