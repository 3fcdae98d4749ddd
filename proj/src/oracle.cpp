#include "msm_aipw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "msm_aipw/root.hpp"

namespace msm_aipw {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

class Exponential final : public ArmDistribution {
public:
    explicit Exponential(double rate) : rate_(rate) { require(rate > 0.0 && std::isfinite(rate), "exponential rate must be positive"); }
    double survival(double t) const override { return std::exp(-rate_ * t); }
    double density(double t) const override { return rate_ * std::exp(-rate_ * t); }
    nlohmann::json to_json() const override { return {{"dist", "exponential"}, {"rate", rate_}}; }

private:
    double rate_;
};

class Weibull final : public ArmDistribution {
public:
    Weibull(double shape, double scale) : k_(shape), s_(scale) {
        require(shape > 0.0 && scale > 0.0, "weibull shape and scale must be positive");
    }
    double survival(double t) const override { return std::exp(-std::pow(t / s_, k_)); }
    double density(double t) const override {
        if (t <= 0.0) return k_ == 1.0 ? 1.0 / s_ : (k_ < 1.0 ? INFINITY : 0.0);
        return k_ / s_ * std::pow(t / s_, k_ - 1.0) * survival(t);
    }
    nlohmann::json to_json() const override { return {{"dist", "weibull"}, {"shape", k_}, {"scale", s_}}; }

private:
    double k_, s_;
};

class LogNormal final : public ArmDistribution {
public:
    LogNormal(double mu, double sigma) : mu_(mu), sigma_(sigma) { require(sigma > 0.0, "lognormal sigma must be positive"); }
    double survival(double t) const override {
        if (t <= 0.0) return 1.0;
        return 0.5 * std::erfc((std::log(t) - mu_) / (sigma_ * std::sqrt(2.0)));
    }
    double density(double t) const override {
        if (t <= 0.0) return 0.0;
        const double z = (std::log(t) - mu_) / sigma_;
        return std::exp(-0.5 * z * z) / (sigma_ * t * std::sqrt(2.0 * M_PI));
    }
    nlohmann::json to_json() const override { return {{"dist", "lognormal"}, {"mu", mu_}, {"sigma", sigma_}}; }

private:
    double mu_, sigma_;
};

class LogLogistic final : public ArmDistribution {
public:
    LogLogistic(double mu, double s) : mu_(mu), s_(s) { require(s > 0.0, "loglogistic scale must be positive"); }
    double survival(double t) const override {
        if (t <= 0.0) return 1.0;
        const double u = (std::log(t) - mu_) / s_;
        return u > 0 ? std::exp(-u) / (1.0 + std::exp(-u)) : 1.0 / (1.0 + std::exp(u));
    }
    double density(double t) const override {
        if (t <= 0.0) return 0.0;
        const double u = (std::log(t) - mu_) / s_;
        const double e = std::exp(-std::fabs(u));
        return e / ((1.0 + e) * (1.0 + e) * s_ * t);
    }
    nlohmann::json to_json() const override { return {{"dist", "loglogistic"}, {"mu", mu_}, {"scale", s_}}; }

private:
    double mu_, s_;
};

class Uniform final : public ArmDistribution {
public:
    Uniform(double lo, double hi) : lo_(lo), hi_(hi) { require(lo >= 0.0 && hi > lo, "uniform needs 0 <= lo < hi"); }
    double survival(double t) const override {
        if (t <= lo_) return 1.0;
        if (t >= hi_) return 0.0;
        return (hi_ - t) / (hi_ - lo_);
    }
    double density(double t) const override { return t > lo_ && t < hi_ ? 1.0 / (hi_ - lo_) : 0.0; }
    std::vector<double> breakpoints() const override { return {lo_, hi_}; }
    nlohmann::json to_json() const override { return {{"dist", "uniform"}, {"lo", lo_}, {"hi", hi_}}; }

private:
    double lo_, hi_;
};

class GRho final : public ArmDistribution {
public:
    GRho(double rho, double c) : rho_(rho), c_(c) { require(rho >= 0.0 && c > 0.0, "G-rho needs rho >= 0 and c > 0"); }
    double survival(double t) const override {
        return rho_ == 0.0 ? std::exp(-c_ * t) : std::exp(-std::log1p(rho_ * c_ * t) / rho_);
    }
    double density(double t) const override {
        return rho_ == 0.0 ? c_ * std::exp(-c_ * t) : c_ * std::exp(-(1.0 / rho_ + 1.0) * std::log1p(rho_ * c_ * t));
    }
    nlohmann::json to_json() const override { return {{"dist", "grho"}, {"rho", rho_}, {"c", c_}}; }

private:
    double rho_, c_;
};

class TwoArm final : public PotentialOutcomeLaw {
public:
    TwoArm(std::shared_ptr<const ArmDistribution> a0, std::shared_ptr<const ArmDistribution> a1)
        : arm_{std::move(a0), std::move(a1)} {}
    double survival(int a, double t) const override { return arm_[a]->survival(t); }
    double density(int a, double t) const override { return arm_[a]->density(t); }
    std::vector<double> breakpoints() const override {
        auto b = arm_[0]->breakpoints();
        const auto b1 = arm_[1]->breakpoints();
        b.insert(b.end(), b1.begin(), b1.end());
        return b;
    }
    nlohmann::json to_json() const override {
        return {{"family", "arms"}, {"arm0", arm_[0]->to_json()}, {"arm1", arm_[1]->to_json()}};
    }

private:
    std::shared_ptr<const ArmDistribution> arm_[2];
};

class Marginal final : public PotentialOutcomeLaw {
public:
    Marginal(ConditionalLaw c, UniformCovariate z) : c_(std::move(c)), z_(z) {
        require(z.hi > z.lo, "covariate range must be nonempty");
        std::vector<double> cuts{z.lo};
        for (double b : c_.z_breakpoints) {
            if (b > z.lo && b < z.hi) cuts.push_back(b);
        }
        cuts.push_back(z.hi);
        std::sort(cuts.begin(), cuts.end());
        constexpr int kSub = 8;
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            const double h = (cuts[s + 1] - cuts[s]) / kSub;
            for (int k = 0; k < kSub; ++k) pieces_.emplace_back(cuts[s] + k * h, cuts[s] + (k + 1) * h);
        }
    }
    double survival(int a, double t) const override { return average([&](double z) { return c_.survival(a, t, z); }); }
    double density(int a, double t) const override { return average([&](double z) { return c_.density(a, t, z); }); }
    std::vector<double> breakpoints() const override { return c_.t_breakpoints; }
    nlohmann::json to_json() const override {
        auto j = c_.descriptor;
        j["z_lo"] = z_.lo;
        j["z_hi"] = z_.hi;
        return j;
    }

private:
    template <class F>
    double average(F&& f) const {
        double s = 0.0;
        for (const auto& [lo, hi] : pieces_) {
            s += boost::math::quadrature::gauss<double, 20>::integrate(f, lo, hi);
        }
        const double v = s / (z_.hi - z_.lo);
        if (!std::isfinite(v)) throw std::domain_error("non-finite integrand while marginalizing over Z");
        return v;
    }

    ConditionalLaw c_;
    UniformCovariate z_;
    std::vector<std::pair<double, double>> pieces_;
};

}  // namespace

std::shared_ptr<const ArmDistribution> exponential_arm(double rate) { return std::make_shared<Exponential>(rate); }
std::shared_ptr<const ArmDistribution> weibull_arm(double shape, double scale) {
    return std::make_shared<Weibull>(shape, scale);
}
std::shared_ptr<const ArmDistribution> lognormal_arm(double mu, double sigma) {
    return std::make_shared<LogNormal>(mu, sigma);
}
std::shared_ptr<const ArmDistribution> loglogistic_arm(double mu, double s) {
    return std::make_shared<LogLogistic>(mu, s);
}
std::shared_ptr<const ArmDistribution> uniform_arm(double lo, double hi) { return std::make_shared<Uniform>(lo, hi); }
std::shared_ptr<const ArmDistribution> grho_arm(double rho, double c) { return std::make_shared<GRho>(rho, c); }

std::shared_ptr<const PotentialOutcomeLaw> two_arm_law(std::shared_ptr<const ArmDistribution> arm0,
                                                       std::shared_ptr<const ArmDistribution> arm1) {
    return std::make_shared<TwoArm>(std::move(arm0), std::move(arm1));
}

std::shared_ptr<const PotentialOutcomeLaw> ph_exponential_law(double rate, double log_hr) {
    return two_arm_law(exponential_arm(rate), exponential_arm(rate * std::exp(log_hr)));
}

std::shared_ptr<const PotentialOutcomeLaw> transformation_law(double gamma, double rho) {
    return two_arm_law(grho_arm(rho, 1.0), grho_arm(rho, std::exp(-gamma)));
}

ConditionalLaw conditional_cox(double b0, double ba, double bz) {
    ConditionalLaw c;
    c.survival = [=](int a, double t, double z) { return std::exp(-t * std::exp(b0 + ba * a + bz * z)); };
    c.density = [=](int a, double t, double z) {
        const double r = std::exp(b0 + ba * a + bz * z);
        return r * std::exp(-t * r);
    };
    c.descriptor = {{"family", "cox_uniform_z"}, {"b0", b0}, {"ba", ba}, {"bz", bz}};
    return c;
}

ConditionalLaw conditional_mixture(double b0, double ba, double bz, double split, double uniform_hi) {
    require(uniform_hi > 0.0, "mixture uniform upper limit must be positive");
    ConditionalLaw c;
    c.survival = [=](int a, double t, double z) {
        if (z <= split) return std::exp(-t * std::exp(b0 + ba * a + bz * z));
        return t >= uniform_hi ? 0.0 : 1.0 - t / uniform_hi;
    };
    c.density = [=](int a, double t, double z) {
        if (z <= split) {
            const double r = std::exp(b0 + ba * a + bz * z);
            return r * std::exp(-t * r);
        }
        return t < uniform_hi ? 1.0 / uniform_hi : 0.0;
    };
    c.z_breakpoints = {split};
    c.t_breakpoints = {uniform_hi};
    c.descriptor = {{"family", "mixture"}, {"b0", b0}, {"ba", ba}, {"bz", bz}, {"split", split},
                    {"uniform_hi", uniform_hi}};
    return c;
}

std::shared_ptr<const PotentialOutcomeLaw> marginalize(ConditionalLaw conditional, UniformCovariate z) {
    return std::make_shared<Marginal>(std::move(conditional), z);
}

namespace {

double num(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("law descriptor is missing '") + key + "'");
    if (!j.at(key).is_number()) throw std::invalid_argument(std::string("law parameter '") + key + "' must be a number");
    const double v = j.at(key).get<double>();
    if (!std::isfinite(v)) throw std::invalid_argument(std::string("law parameter '") + key + "' must be finite");
    return v;
}

double num_or(const nlohmann::json& j, const char* key, double fallback) {
    return j.contains(key) ? num(j, key) : fallback;
}

std::shared_ptr<const ArmDistribution> parse_arm(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("dist") || !j["dist"].is_string()) {
        throw std::invalid_argument("arm descriptor needs a string 'dist'");
    }
    const auto d = j["dist"].get<std::string>();
    if (d == "exponential") return exponential_arm(num(j, "rate"));
    if (d == "weibull") return weibull_arm(num(j, "shape"), num(j, "scale"));
    if (d == "lognormal") return lognormal_arm(num(j, "mu"), num(j, "sigma"));
    if (d == "loglogistic") return loglogistic_arm(num(j, "mu"), num(j, "scale"));
    if (d == "uniform") return uniform_arm(num_or(j, "lo", 0.0), num(j, "hi"));
    if (d == "grho") return grho_arm(num(j, "rho"), num(j, "c"));
    throw std::invalid_argument("unknown arm distribution '" + d + "'");
}

}  // namespace

std::shared_ptr<const PotentialOutcomeLaw> parse_law(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) {
        throw std::invalid_argument("law descriptor needs a string 'family'");
    }
    const auto f = j["family"].get<std::string>();
    if (f == "ph_exponential") return ph_exponential_law(num_or(j, "rate", 1.0), num(j, "log_hr"));
    if (f == "lognormal") {
        const double s = num_or(j, "sigma", 1.0);
        return two_arm_law(lognormal_arm(num(j, "mu0"), s), lognormal_arm(num(j, "mu1"), s));
    }
    if (f == "logistic_aft") {
        const double s = num_or(j, "scale", 1.0);
        return two_arm_law(loglogistic_arm(num(j, "mu0"), s), loglogistic_arm(num(j, "mu1"), s));
    }
    if (f == "uniform") {
        return two_arm_law(uniform_arm(num_or(j, "lo0", 0.0), num(j, "hi0")), uniform_arm(num_or(j, "lo1", 0.0), num(j, "hi1")));
    }
    if (f == "transformation") return transformation_law(num(j, "gamma"), num(j, "rho"));
    if (f == "arms") {
        if (!j.contains("arm0") || !j.contains("arm1")) throw std::invalid_argument("'arms' law needs arm0 and arm1");
        return two_arm_law(parse_arm(j["arm0"]), parse_arm(j["arm1"]));
    }
    const UniformCovariate z{num_or(j, "z_lo", -1.0), num_or(j, "z_hi", 1.0)};
    if (f == "cox_uniform_z") return marginalize(conditional_cox(num(j, "b0"), num(j, "ba"), num(j, "bz")), z);
    if (f == "mixture") {
        return marginalize(conditional_mixture(num(j, "b0"), num(j, "ba"), num(j, "bz"), num_or(j, "split", 0.0),
                                               num_or(j, "uniform_hi", 1.05)),
                           z);
    }
    throw std::invalid_argument("unknown law family '" + f + "'");
}

// ---------------------------------------------------------------------------

EstimandOracle::EstimandOracle(std::shared_ptr<const PotentialOutcomeLaw> law, double tau, QuadratureOptions opt)
    : law_(std::move(law)), tau_(tau) {
    require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
    require(opt.panels >= 2, "need at least two quadrature panels");
    std::vector<double> cuts{0.0};
    for (double b : law_->breakpoints()) {
        if (b > 0.0 && b < tau) cuts.push_back(b);
    }
    cuts.push_back(tau);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    if (opt.log_mesh) {
        const double t_min = tau * 1e-12;
        edges_.push_back(0.0);
        for (int k = 0; k < opt.panels; ++k) {
            edges_.push_back(t_min * std::pow(tau / t_min, static_cast<double>(k) / (opt.panels - 1)));
        }
        edges_.back() = tau;
        edges_.insert(edges_.end(), cuts.begin(), cuts.end());
        std::sort(edges_.begin(), edges_.end());
        edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    } else {
        edges_.push_back(0.0);
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            const double len = cuts[s + 1] - cuts[s];
            const int p = std::max(1, static_cast<int>(std::lround(opt.panels * len / tau)));
            for (int k = 1; k <= p; ++k) edges_.push_back(k == p ? cuts[s + 1] : cuts[s] + len * k / p);
        }
    }
    const std::size_t n = edges_.size() - 1;
    mid_.resize(n);
    width_.resize(n);
    s0_.resize(n);
    s1_.resize(n);
    f0_.resize(n);
    f1_.resize(n);
    double mass = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mid_[k] = 0.5 * (edges_[k] + edges_[k + 1]);
        width_[k] = edges_[k + 1] - edges_[k];
        s0_[k] = law_->survival(0, mid_[k]);
        s1_[k] = law_->survival(1, mid_[k]);
        f0_[k] = law_->density(0, mid_[k]);
        f1_[k] = law_->density(1, mid_[k]);
        if (!std::isfinite(s0_[k] + s1_[k] + f0_[k] + f1_[k]) || f0_[k] < 0.0 || f1_[k] < 0.0) {
            throw std::domain_error("law gives an invalid survival or density value");
        }
        mass += width_[k] * (f0_[k] + f1_[k]);
    }
    if (!(mass > 0.0)) throw std::invalid_argument("degenerate law: no event mass on [0, tau]");
}

double EstimandOracle::h(double beta) const {
    const double eb = std::exp(beta);
    double s = 0.0;
    for (std::size_t k = 0; k < mid_.size(); ++k) {
        const double den = s0_[k] + eb * s1_[k];
        if (den <= 0.0) continue;
        s += width_[k] * (f1_[k] - eb * s1_[k] / den * (f0_[k] + f1_[k]));
    }
    return s;
}

EstimandSolution EstimandOracle::solve() const {
    const auto r = solve_beta([this](double b) { return h(b); }, {1e-14, 300});
    return {r.root, std::fabs(h(r.root)), r.iterations};
}

EstimandSolution EstimandOracle::solve_randomized() const {
    std::vector<double> e_true(mid_.size(), 0.0);
    for (std::size_t k = 0; k < mid_.size(); ++k) {
        const double l0 = law_->hazard(0, mid_[k]);
        const double l1 = law_->hazard(1, mid_[k]);
        if (l0 > 0.0 && l1 > 0.0 && std::isfinite(l0) && std::isfinite(l1)) {
            const double eb = std::exp(std::log(l1 / l0));
            e_true[k] = eb * s1_[k] / (s0_[k] + eb * s1_[k]);
        } else {
            e_true[k] = l1 > 0.0 ? 1.0 : 0.0;
        }
    }
    auto hr = [&](double beta) {
        const double eb = std::exp(beta);
        double s = 0.0;
        for (std::size_t k = 0; k < mid_.size(); ++k) {
            const double den = s0_[k] + eb * s1_[k];
            if (den <= 0.0) continue;
            s += width_[k] * (e_true[k] - eb * s1_[k] / den) * (f0_[k] + f1_[k]);
        }
        return s;
    };
    const auto r = solve_beta(hr, {1e-14, 300});
    return {r.root, std::fabs(hr(r.root)), r.iterations};
}

double EstimandOracle::lambda_star(double t, double beta_star) const {
    if (t > tau_) throw std::invalid_argument("lambda_star: t exceeds tau");
    if (t <= 0.0) return 0.0;
    const double eb = std::exp(beta_star);
    double s = 0.0;
    for (std::size_t k = 0; k < mid_.size() && edges_[k] < t; ++k) {
        if (edges_[k + 1] <= t) {
            const double den = s0_[k] + eb * s1_[k];
            if (den > 0.0) s += width_[k] * (f0_[k] + f1_[k]) / den;
        } else {
            const double m = 0.5 * (edges_[k] + t);
            const double den = law_->survival(0, m) + eb * law_->survival(1, m);
            if (den > 0.0) s += (t - edges_[k]) * (law_->density(0, m) + law_->density(1, m)) / den;
        }
    }
    return s;
}

std::pair<double, double> EstimandOracle::beta_range() const {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t k = 0; k < mid_.size(); ++k) {
        if (f0_[k] > 0.0 && f1_[k] > 0.0 && s0_[k] > 0.0 && s1_[k] > 0.0) {
            const double b = std::log(f1_[k] * s0_[k] / (f0_[k] * s1_[k]));
            lo = std::min(lo, b);
            hi = std::max(hi, b);
        }
    }
    return {lo, hi};
}

double beta_of_t(const PotentialOutcomeLaw& law, double t) {
    const double l0 = law.hazard(0, t), l1 = law.hazard(1, t);
    if (!(l0 > 0.0) || !(l1 > 0.0)) throw std::domain_error("beta(t) undefined: zero hazard");
    return std::log(l1 / l0);
}

EstimandSolution beta_star(std::shared_ptr<const PotentialOutcomeLaw> law, double tau, QuadratureOptions opt) {
    return EstimandOracle(std::move(law), tau, opt).solve();
}

double lambda_star(std::shared_ptr<const PotentialOutcomeLaw> law, double tau, double t, QuadratureOptions opt) {
    EstimandOracle o(std::move(law), tau, opt);
    return o.lambda_star(t, o.solve().beta_star);
}

double coverage_tau(const PotentialOutcomeLaw& law, double mass) {
    require(mass > 0.0 && mass < 1.0, "mass must be in (0, 1)");
    auto covered = [&](double t) { return 1.0 - law.survival(0, t) >= mass && 1.0 - law.survival(1, t) >= mass; };
    double hi = 1.0;
    while (!covered(hi)) {
        hi *= 2.0;
        if (hi > 1e15) throw std::invalid_argument("law does not reach the requested mass");
    }
    double lo = 0.0;
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (covered(mid) ? hi : lo) = mid;
    }
    return hi;
}

double transformation_model_check(double gamma, double rho, double tau_large) {
    const auto law = transformation_law(gamma, rho);
    for (int a = 0; a < 2; ++a) {
        if (1.0 - law->survival(a, tau_large) < 0.999) {
            throw std::invalid_argument("insufficient tau: less than 99.9% of the event mass is covered");
        }
    }
    return EstimandOracle(law, tau_large, {20000, true}).solve().beta_star;
}

}  // namespace msm_aipw
