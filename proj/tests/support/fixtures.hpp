#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "brute_force.hpp"
#include "msm_aipw/data.hpp"
#include "msm_aipw/nuisance.hpp"
#include "msm_aipw/rng.hpp"

namespace fixtures {

// Five subjects on tau = 1: two events, two losses to follow-up, one
// administratively censored. Grid {0.2, 0.35, 0.5, 0.6, 0.8}. Clipping is
// active for the propensity of the last subject and for S late in follow-up.
inline brute::Problem five_subjects(int k) {
    brute::Problem p;
    p.tau = 1.0;
    p.subjects = {{0.2, 1, 1, 0.3}, {0.35, 0, 0, -0.5}, {0.5, 1, 0, 0.1}, {0.8, 0, 1, -0.2}, {1.0, 0, 0, 0.7}};
    p.grid = {0.2, 0.35, 0.5, 0.6, 0.8};
    const brute::Nuisance a{0.2, 4.0, {{0.2, 0.5}, {0.9, 1.6}, -0.4, 0.8}, {{0.35, 0.6, 0.8}, {0.3, 0.2, 0.4}, 0.3, -0.5},
                            0.1, 0.9, 0.05};
    const brute::Nuisance b{-0.3, 1.0, {{0.2, 0.5}, {0.5, 0.7}, 0.6, -0.3}, {{0.35, 0.6, 0.8}, {0.2, 0.5, 0.3}, -0.2, 0.4},
                            0.1, 0.9, 0.05};
    if (k == 1) {
        p.fold = {0, 0, 0, 0, 0};
        p.nuisance = {a};
    } else {
        p.fold = {0, 1, 0, 1, 0};
        p.nuisance = {a, b};
    }
    return p;
}

inline msm_aipw::BreslowBaseline baseline(const brute::CoxStep& c) {
    msm_aipw::BreslowBaseline b;
    b.times = c.jump_t;
    b.increments = c.jump_h;
    double cum = 0.0;
    for (double h : c.jump_h) b.cumulative.push_back(cum += h);
    return b;
}

inline msm_aipw::NuisanceTriple triple(const brute::Nuisance& nu) {
    using namespace msm_aipw;
    NuisanceTriple t;
    t.propensity = std::make_shared<LogisticPropensity>(Eigen::Vector2d(nu.g0, nu.g1));
    t.event = std::make_shared<CoxWorkingModel>(CoxDesign::full, Eigen::Vector2d(nu.event.ba, nu.event.bz),
                                                baseline(nu.event), Target::event);
    t.censoring = std::make_shared<CoxWorkingModel>(CoxDesign::full, Eigen::Vector2d(nu.cens.ba, nu.cens.bz),
                                                    baseline(nu.cens), Target::censoring);
    t.clip = {nu.ps_lo, nu.ps_hi, nu.floor};
    return t;
}

inline msm_aipw::Dataset dataset(const brute::Problem& p) {
    std::vector<msm_aipw::SurvivalRecord> r;
    for (const auto& s : p.subjects) r.push_back({s.x, s.delta, s.a, {s.z}});
    return msm_aipw::Dataset(std::move(r), p.tau);
}

inline std::vector<msm_aipw::NuisanceTriple> triples(const brute::Problem& p) {
    std::vector<msm_aipw::NuisanceTriple> out;
    for (const auto& nu : p.nuisance) out.push_back(triple(nu));
    return out;
}

inline msm_aipw::FoldAssignment folds(const brute::Problem& p) { return {p.fold, p.k()}; }

// Random survival data with one covariate, censoring depending on it.
inline msm_aipw::Dataset random_dataset(std::size_t n, std::uint64_t seed, double tau = 2.0) {
    auto eng = msm_aipw::make_stream(seed, 99);
    std::vector<msm_aipw::SurvivalRecord> r;
    while (true) {
        r.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const double z = msm_aipw::uniform(eng, -1.0, 1.0);
            const int a = msm_aipw::uniform01(eng) < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
            const double t = -std::log(msm_aipw::uniform_open01(eng)) / std::exp(-0.5 * a + 0.7 * z);
            const double c = -std::log(msm_aipw::uniform_open01(eng)) / (0.4 * std::exp(0.5 * z));
            r.push_back({std::min(t, c), t <= c ? 1 : 0, a, {z}});
        }
        std::size_t treated = 0;
        for (const auto& x : r) treated += static_cast<std::size_t>(x.treatment);
        if (treated > 0 && treated < n) break;
    }
    return msm_aipw::Dataset(std::move(r), tau);
}

}  // namespace fixtures
