#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "msm_aipw/sim.hpp"

using namespace msm_aipw;

TEST_SUITE("sim") {

TEST_CASE("main family T(0) is unit exponential and T(1) = e T(0)") {
    const auto s = generate_main(100000, 1, 11);
    std::vector<double> t0;
    for (const auto& p : s.potential) {
        t0.push_back(p.t0);
        CHECK(p.t1 == doctest::Approx(std::exp(1.0) * p.t0).epsilon(1e-14));
    }
    std::sort(t0.begin(), t0.end());
    double ks = 0.0;
    const double n = static_cast<double>(t0.size());
    for (std::size_t i = 0; i < t0.size(); ++i) {
        const double f = 1.0 - std::exp(-t0[i]);
        ks = std::max({ks, std::fabs(f - i / n), std::fabs(f - (i + 1) / n)});
    }
    CHECK(ks < 0.01);
}

TEST_CASE("main family covariates follow the latent construction") {
    const auto s = generate_main(1000, 2, 12);
    for (const auto& p : s.potential) {
        REQUIRE(p.z.size() == 3);
        CHECK(p.z[0] == doctest::Approx(0.5 * p.u[0] + p.u[2]));
        CHECK(p.z[1] == doctest::Approx(p.u[0] + 1.5 * p.u[0] * p.u[0] - 0.5));
        CHECK(p.z[2] == doctest::Approx(p.u[0] + p.u[1]));
    }
}

TEST_CASE("observed data are the censored potential outcomes") {
    for (auto fam : {Family::main, Family::supplementary}) {
        const auto s = generate(fam, 2000, 3, 13);
        for (std::size_t i = 0; i < s.potential.size(); ++i) {
            const auto& p = s.potential[i];
            const auto& r = s.observed.records()[i];
            const double t = p.a ? p.t1 : p.t0, c = p.a ? p.c1 : p.c0;
            CHECK(r.treatment == p.a);
            CHECK(r.time == doctest::Approx(std::min({t, c, kSimTau})));
            CHECK(r.event == (t <= c && t <= kSimTau ? 1 : 0));
        }
        CHECK(s.event_rate + s.censoring_rate + s.admin_rate == doctest::Approx(1.0));
    }
}

TEST_CASE("main Scenario 1 treated fraction near one half") {
    const auto s = generate_main(100000, 1, 14);
    double treated = 0.0;
    for (const auto& p : s.potential) treated += p.a;
    CHECK(std::fabs(treated / 1e5 - 0.5) <= 0.05);
}

TEST_CASE("main Scenario 1 loss to follow-up near 40%" * doctest::may_fail()) {
    const auto s = generate_main(100000, 1, 15);
    CHECK(std::fabs(s.censoring_rate - 0.40) <= 0.05);
}

TEST_CASE("supplementary Scenario 1 event rate in 30-50%" * doctest::may_fail()) {
    const auto s = generate_supp(100000, 1, 16);
    CHECK(s.event_rate >= 0.30);
    CHECK(s.event_rate <= 0.50);
}

TEST_CASE("same seed gives the same sample") {
    const auto a = generate_supp(500, 4, 17), b = generate_supp(500, 4, 17), c = generate_supp(500, 4, 18);
    bool differ = false;
    for (std::size_t i = 0; i < 500; ++i) {
        CHECK(a.observed.records()[i].time == b.observed.records()[i].time);
        differ = differ || a.observed.records()[i].time != c.observed.records()[i].time;
    }
    CHECK(differ);
}

TEST_CASE("invalid configurations") {
    CHECK_THROWS_AS(generate_main(100, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(parse_family("other"), std::invalid_argument);
    ScenarioConfig cfg;
    cfg.replications = 0;
    CHECK_THROWS_AS(run_monte_carlo(cfg), std::invalid_argument);
    cfg.replications = 2;
    cfg.n = 10;
    CHECK_THROWS_AS(run_monte_carlo(cfg), std::invalid_argument);
}

TEST_CASE("Monte Carlo report is deterministic across thread counts") {
    ScenarioConfig cfg;
    cfg.n = 300;
    cfg.replications = 6;
    cfg.seed = 21;
    cfg.threads = 1;
    const auto a = report_to_json(run_monte_carlo(cfg), true);
    cfg.threads = 3;
    const auto b = report_to_json(run_monte_carlo(cfg), true);
    CHECK(a.dump() == b.dump());
    CHECK(a["margin_of_error"].get<double>() == doctest::Approx(1.96 * std::sqrt(0.95 * 0.05 / 6)));
    CHECK(a["truth"].get<double>() == -1.0);
}

TEST_CASE("true beta of the supplementary family comes from the oracle") {
    CHECK(true_beta(Family::supplementary, 2) == doctest::Approx(beta_star(supp_law(2), kSimTau).beta_star));
    CHECK(true_beta(Family::main, 3) == -1.0);
}

}  // TEST_SUITE
