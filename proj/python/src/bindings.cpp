#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "msm_aipw/errors.hpp"
#include "msm_aipw/estimator.hpp"
#include "msm_aipw/json_io.hpp"
#include "msm_aipw/oracle.hpp"
#include "msm_aipw/sim.hpp"

namespace py = pybind11;
using namespace msm_aipw;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

Dataset make_dataset(const Array& time, const IntArray& event, const IntArray& treatment, const Array& z, double tau) {
    const auto n = static_cast<std::size_t>(time.size());
    if (static_cast<std::size_t>(event.size()) != n || static_cast<std::size_t>(treatment.size()) != n)
        throw std::invalid_argument("time, event and treatment must have the same length");
    std::size_t q = 0;
    if (z.size() > 0) {
        if (z.ndim() != 2 || static_cast<std::size_t>(z.shape(0)) != n)
            throw std::invalid_argument("z must be an n x q array");
        q = static_cast<std::size_t>(z.shape(1));
    }
    const double* t = time.data();
    const int* d = event.data();
    const int* a = treatment.data();
    const double* zz = z.data();
    std::vector<SurvivalRecord> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i] = {t[i], d[i], a[i], std::vector<double>(zz + i * q, zz + (i + 1) * q)};
    }
    return Dataset(std::move(rows), tau);
}

NuisanceSpec spec_of(std::pair<double, double> clip_ps, double clip_surv) {
    return NuisanceSpec::cox_logit({clip_ps.first, clip_ps.second, clip_surv});
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cross-fitted AIPW estimation of marginal structural Cox models";

    py::register_exception<data_error>(m, "DataError", PyExc_ValueError);
    py::register_exception<fit_error>(m, "FitError", PyExc_RuntimeError);

    m.def(
        "fit_aipw",
        [](const Array& time, const IntArray& event, const IntArray& treatment, const Array& z, double tau, int folds,
           std::uint64_t seed, std::pair<double, double> clip_ps, double clip_surv) {
            const auto data = make_dataset(time, event, treatment, z, tau);
            py::gil_scoped_release release;
            return fit_to_json(fit_aipw(data, {folds, seed, spec_of(clip_ps, clip_surv)})).dump();
        },
        py::arg("time"), py::arg("event"), py::arg("treatment"), py::arg("z"), py::arg("tau"), py::arg("folds") = 5,
        py::arg("seed") = 1, py::arg("clip_ps") = std::pair{0.1, 0.9}, py::arg("clip_surv") = 0.05);

    m.def(
        "fit_ipw",
        [](const Array& time, const IntArray& event, const IntArray& treatment, const Array& z, double tau,
           bool identity_weights, std::pair<double, double> clip_ps, double clip_surv) {
            const auto data = make_dataset(time, event, treatment, z, tau);
            py::gil_scoped_release release;
            if (identity_weights) return fit_to_json(fit_ipw(data, identity_nuisance(0.5))).dump();
            return fit_to_json(fit_ipw(data, spec_of(clip_ps, clip_surv))).dump();
        },
        py::arg("time"), py::arg("event"), py::arg("treatment"), py::arg("z"), py::arg("tau"),
        py::arg("identity_weights") = false, py::arg("clip_ps") = std::pair{0.1, 0.9}, py::arg("clip_surv") = 0.05);

    m.def(
        "fit_naive_cox",
        [](const Array& time, const IntArray& event, const IntArray& treatment, double tau) {
            const auto data = make_dataset(time, event, treatment, Array(), tau);
            return fit_to_json(fit_naive_cox(data)).dump();
        },
        py::arg("time"), py::arg("event"), py::arg("treatment"), py::arg("tau"));

    m.def(
        "fit_full_data",
        [](const Array& t0, const Array& t1, double tau) {
            if (t0.size() != t1.size()) throw std::invalid_argument("t0 and t1 must have the same length");
            std::vector<PotentialOutcomes> po(static_cast<std::size_t>(t0.size()));
            for (std::size_t i = 0; i < po.size(); ++i) po[i] = {t0.data()[i], t1.data()[i]};
            return fit_to_json(fit_full_data(po, tau)).dump();
        },
        py::arg("t0"), py::arg("t1"), py::arg("tau"));

    m.def(
        "oracle",
        [](const std::string& law_json, double tau, int points, int panels, bool log_mesh) {
            const auto law = parse_law(nlohmann::json::parse(law_json));
            const EstimandOracle o(law, tau, {panels, log_mesh});
            return oracle_to_json(o, *law, points).dump();
        },
        py::arg("law"), py::arg("tau"), py::arg("points") = 100, py::arg("panels") = 20000,
        py::arg("log_mesh") = false);

    m.def(
        "beta_of_t",
        [](const std::string& law_json, double t) { return beta_of_t(*parse_law(nlohmann::json::parse(law_json)), t); },
        py::arg("law"), py::arg("t"));

    m.def(
        "generate",
        [](const std::string& family, int scenario, std::size_t n, std::uint64_t seed) {
            const auto s = generate(parse_family(family), n, scenario, seed);
            const auto& rec = s.observed.records();
            const std::size_t q = rec.empty() ? 0 : rec[0].z.size();
            Array time(static_cast<py::ssize_t>(n)), t0(static_cast<py::ssize_t>(n)), t1(static_cast<py::ssize_t>(n));
            IntArray event(static_cast<py::ssize_t>(n)), treatment(static_cast<py::ssize_t>(n));
            Array z({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(q)});
            for (std::size_t i = 0; i < n; ++i) {
                time.mutable_data()[i] = rec[i].time;
                event.mutable_data()[i] = rec[i].event;
                treatment.mutable_data()[i] = rec[i].treatment;
                t0.mutable_data()[i] = s.potential[i].t0;
                t1.mutable_data()[i] = s.potential[i].t1;
                for (std::size_t k = 0; k < q; ++k) z.mutable_data()[i * q + k] = rec[i].z[k];
            }
            py::dict out;
            out["time"] = time;
            out["event"] = event;
            out["treatment"] = treatment;
            out["z"] = z;
            out["t0"] = t0;
            out["t1"] = t1;
            out["event_rate"] = s.event_rate;
            out["censoring_rate"] = s.censoring_rate;
            out["admin_rate"] = s.admin_rate;
            return out;
        },
        py::arg("family"), py::arg("scenario"), py::arg("n"), py::arg("seed"));

    m.def(
        "simulate",
        [](const std::string& family, int scenario, std::size_t n, int reps, std::uint64_t seed, int folds,
           int bootstrap, unsigned threads, double failure_ceiling) {
            ScenarioConfig cfg;
            cfg.family = parse_family(family);
            cfg.scenario = scenario;
            cfg.n = n;
            cfg.replications = reps;
            cfg.seed = seed;
            cfg.bootstrap_B = bootstrap;
            cfg.threads = threads == 0 ? default_threads() : threads;
            cfg.failure_ceiling = failure_ceiling;
            for (auto& e : cfg.estimators)
                if (e.kind == EstimatorKind::aipw) e.folds = folds;
            py::gil_scoped_release release;
            return report_to_json(run_monte_carlo(cfg)).dump();
        },
        py::arg("family"), py::arg("scenario"), py::arg("n") = 1000, py::arg("reps") = 200, py::arg("seed") = 1,
        py::arg("folds") = 5, py::arg("bootstrap") = 0, py::arg("threads") = 0, py::arg("failure_ceiling") = 0.10);
}
