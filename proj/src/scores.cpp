#include "msm_aipw/scores.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "msm_aipw/errors.hpp"

namespace msm_aipw {

std::size_t TimeGrid::count_at_or_before(double x) const {
    return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), x) - times.begin());
}

TimeGrid build_time_grid(const Dataset& data, std::span<const NuisanceTriple> nuisances) {
    const double tau = data.tau();
    std::vector<double> t;
    t.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].event == 1 || data.is_censoring_event(i)) t.push_back(data[i].time);
    }
    bool continuous = false;
    for (const auto& nu : nuisances) {
        for (const auto* model : {nu.event.get(), nu.censoring.get()}) {
            const auto jumps = model->jump_times();
            t.insert(t.end(), jumps.begin(), jumps.end());
            continuous = continuous || !model->is_step();
        }
    }
    if (continuous) t.push_back(tau);
    std::erase_if(t, [tau](double v) { return !(v > 0.0 && v <= tau); });
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    if (t.empty()) throw fit_error("empty time grid: no events, censorings or model jumps in (0, tau]");
    return TimeGrid{std::move(t)};
}

TimeGrid build_time_grid(const Dataset& data, const NuisanceTriple& nuisance) {
    return build_time_grid(data, std::span<const NuisanceTriple>(&nuisance, 1));
}

namespace {

// Clipped log survival; S itself is exp of this.
void clipped_log_survival(const SurvivalModel& model, const TimeGrid& grid, int a, std::span<const double> z,
                          double floor, std::vector<double>& out) {
    out.resize(grid.size());
    model.log_survival(grid.times, a, z, out);
    const double lo = floor > 0.0 ? std::log(floor) : -INFINITY;
    for (auto& v : out) v = std::max(v, lo);
}

// Grid index of a jump of a counting process at follow-up time x, or npos.
std::size_t jump_index(const TimeGrid& grid, double x, bool jumps) {
    if (!jumps) return static_cast<std::size_t>(-1);
    const auto k = grid.count_at_or_before(x);
    if (k == 0 || grid.times[k - 1] != x) return static_cast<std::size_t>(-1);
    return k - 1;
}

}  // namespace

std::vector<double> censoring_martingale_increments(const SurvivalRecord& r, double tau,
                                                    const NuisanceTriple& nuisance, int a, const TimeGrid& grid) {
    std::vector<double> logsc;
    clipped_log_survival(*nuisance.censoring, grid, a, r.z, nuisance.clip.surv_floor, logsc);
    const auto at_risk = grid.count_at_or_before(r.time);
    const auto jc = jump_index(grid, r.time, r.event == 0 && r.time < tau);
    std::vector<double> dm(grid.size());
    double prev = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double dlc = prev - logsc[j];
        prev = logsc[j];
        dm[j] = (j == jc ? 1.0 : 0.0) - (j < at_risk ? dlc : 0.0);
    }
    return dm;
}

void compute_subject_scores(const SurvivalRecord& r, double tau, const NuisanceTriple& nu, const TimeGrid& grid,
                            SubjectScores& out, ScoreWorkspace& ws) {
    const std::size_t g = grid.size();
    const int a_obs = r.treatment;
    const double pi = nu.pi(r.z);
    const double pi_t = a_obs == 1 ? pi : 1.0 - pi;
    assert(pi_t > 0.0);
    const double w[2] = {a_obs == 0 ? 1.0 / pi_t : 0.0, a_obs == 1 ? 1.0 / pi_t : 0.0};

    for (int a = 0; a < 2; ++a) {
        clipped_log_survival(*nu.event, grid, a, r.z, nu.clip.surv_floor, ws.s[a]);
        clipped_log_survival(*nu.censoring, grid, a, r.z, nu.clip.surv_floor, ws.logsc[a]);
        ws.sc[a].resize(g);
        for (std::size_t j = 0; j < g; ++j) {
            ws.s[a][j] = std::exp(ws.s[a][j]);
            ws.sc[a][j] = std::exp(ws.logsc[a][j]);
        }
    }
    for (auto* v : {&out.dn0, &out.dn1, &out.g0, &out.g1, &out.j0, &out.j1}) v->resize(g);

    const auto at_risk = grid.count_at_or_before(r.time);
    const auto je = jump_index(grid, r.time, r.event == 1);
    const auto jc = jump_index(grid, r.time, r.event == 0 && r.time < tau);
    const auto& s_obs = ws.s[a_obs];
    const auto& sc_obs = ws.sc[a_obs];

    double prev_s[2] = {1.0, 1.0}, prev_logsc[2] = {0.0, 0.0}, jcum[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < g; ++j) {
        const double y = j < at_risk ? 1.0 : 0.0;
        const double dn = j == je ? 1.0 : 0.0;
        const double dnc = j == jc ? 1.0 : 0.0;
        double ds[2], aug[2];
        for (int a = 0; a < 2; ++a) {
            ds[a] = ws.s[a][j] - prev_s[a];
            const double dlc = prev_logsc[a] - ws.logsc[a][j];
            jcum[a] += (dnc - y * dlc) / (ws.s[a][j] * ws.sc[a][j]);
            aug[a] = 1.0 + w[a] * jcum[a];
            prev_s[a] = ws.s[a][j];
            prev_logsc[a] = ws.logsc[a][j];
        }
        const double ipw_dn = dn / (pi_t * sc_obs[j]) + ds[a_obs] / pi_t;
        const double ipw_risk = y / (pi_t * sc_obs[j]) - s_obs[j] / pi_t;
        out.dn1[j] = a_obs * ipw_dn - aug[1] * ds[1];
        out.dn0[j] = ipw_dn - aug[0] * ds[0] - aug[1] * ds[1];
        out.g1[j] = a_obs * ipw_risk + aug[1] * ws.s[1][j];
        out.g0[j] = (1 - a_obs) * ipw_risk + aug[0] * ws.s[0][j];
        out.j0[j] = jcum[0];
        out.j1[j] = jcum[1];
    }
}

SubjectScores compute_subject_scores(const SurvivalRecord& r, double tau, const NuisanceTriple& nuisance,
                                     const TimeGrid& grid) {
    SubjectScores out;
    ScoreWorkspace ws;
    compute_subject_scores(r, tau, nuisance, grid, out, ws);
    return out;
}

AggregatedScores aggregate_scores(std::span<const SubjectScores> scores, double beta) {
    if (scores.empty()) throw std::invalid_argument("aggregate_scores: empty list");
    const std::size_t g = scores.front().g0.size();
    const double n = static_cast<double>(scores.size());
    const double eb = std::exp(beta);
    AggregatedScores agg;
    agg.s0.assign(g, 0.0);
    agg.s1.assign(g, 0.0);
    for (const auto& s : scores) {
        for (std::size_t j = 0; j < g; ++j) {
            agg.s0[j] += s.g0[j] + eb * s.g1[j];
            agg.s1[j] += eb * s.g1[j];
        }
    }
    agg.abar.resize(g);
    agg.v.resize(g);
    for (std::size_t j = 0; j < g; ++j) {
        agg.s0[j] /= n;
        agg.s1[j] /= n;
        if (agg.s0[j] <= kDenominatorGuard) ++agg.guard_events;
        agg.abar[j] = agg.s1[j] / std::max(agg.s0[j], kDenominatorGuard);
        agg.v[j] = agg.abar[j] - agg.abar[j] * agg.abar[j];
    }
    return agg;
}

}  // namespace msm_aipw
