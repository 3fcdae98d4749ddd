"""Cross-fitted AIPW estimation of marginal structural Cox models.

Fit functions take column arrays (time, event, treatment, covariates) and
return the same report dictionaries as the ``msm-aipw`` command line tool.
"""

import json

import numpy as np

from . import _core
from ._core import DataError, FitError

__all__ = [
    "DataError",
    "FitError",
    "beta_of_t",
    "fit_aipw",
    "fit_full_data",
    "fit_ipw",
    "fit_naive_cox",
    "generate",
    "oracle",
    "simulate",
]


def _z(z, n):
    if z is None:
        return np.zeros((n, 0))
    z = np.asarray(z, dtype=float)
    return z.reshape(n, -1) if z.ndim == 1 else z


def _law(law):
    return law if isinstance(law, str) else json.dumps(law)


def fit_aipw(time, event, treatment, z=None, *, tau, folds=5, seed=1, clip_ps=(0.1, 0.9), clip_surv=0.05):
    time = np.asarray(time, dtype=float)
    return json.loads(_core.fit_aipw(time, event, treatment, _z(z, len(time)), tau, folds, seed, clip_ps, clip_surv))


def fit_ipw(time, event, treatment, z=None, *, tau, identity_weights=False, clip_ps=(0.1, 0.9), clip_surv=0.05):
    time = np.asarray(time, dtype=float)
    return json.loads(
        _core.fit_ipw(time, event, treatment, _z(z, len(time)), tau, identity_weights, clip_ps, clip_surv)
    )


def fit_naive_cox(time, event, treatment, *, tau):
    return json.loads(_core.fit_naive_cox(time, event, treatment, tau))


def fit_full_data(t0, t1, *, tau):
    return json.loads(_core.fit_full_data(t0, t1, tau))


def oracle(law, *, tau, points=100, panels=20000, log_mesh=False):
    """beta*, Lambda* and beta(t) for a law descriptor such as
    ``{"family": "ph_exponential", "log_hr": -1}``."""
    return json.loads(_core.oracle(_law(law), tau, points, panels, log_mesh))


def beta_of_t(law, t):
    return _core.beta_of_t(_law(law), t)


def generate(family, scenario, n, seed):
    return _core.generate(family, scenario, n, seed)


def simulate(family, scenario, *, n=1000, reps=200, seed=1, folds=5, bootstrap=0, threads=0, failure_ceiling=0.10):
    return json.loads(_core.simulate(family, scenario, n, reps, seed, folds, bootstrap, threads, failure_ceiling))
