"""Calibration-weighted estimation of causal mediation effect curves."""

import json

import numpy as np

from . import _core

__all__ = ["generate", "true_mu", "tune", "weights", "estimate", "run"]


def _columns(a):
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, 1) if a.ndim == 1 else a


def generate(scenario="I", n=500, seed=1):
    """Simulated sample as a dict of arrays y, t, m, x."""
    return _core.generate(scenario, n, seed)


def true_mu(scenario, t, t_prime):
    return _core.true_mu(scenario, t, t_prime)


def tune(y, t, m, x, treatment="continuous"):
    return _core.tune(np.asarray(y, float), np.asarray(t, float), _columns(m), _columns(x), treatment)


def weights(y, t, m, x, treatment="continuous", k1=0, kx=0, kmx=0):
    """Calibration weights pi_X and pi_MX at each observation; zero dims are tuned."""
    return _core.weights(np.asarray(y, float), np.asarray(t, float), _columns(m), _columns(x), treatment,
                         k1, kx, kmx)


def estimate(y, t, m, x, t_values, t_prime_values, method="cbs", treatment="continuous", k1=0, kx=0, kmx=0,
             k0=0, bandwidth_constant=0.0):
    """mu(t, t') at paired points; cbs also returns plug-in standard errors."""
    tv = np.atleast_1d(np.asarray(t_values, float))
    tp = np.broadcast_to(np.asarray(t_prime_values, float), tv.shape)
    out = _core.estimate(np.asarray(y, float), np.asarray(t, float), _columns(m), _columns(x), treatment,
                         list(tv), list(tp), method, k1, kx, kmx, k0, bandwidth_constant)
    return {k: np.asarray(v) for k, v in out.items()}


def run(config):
    """Runs a CLI subcommand from a config dict and returns its parsed artifact."""
    status, out, err = _core.run(json.dumps(config))
    if status != 0:
        raise RuntimeError(json.loads(err).get("error", err))
    if config.get("format") == "csv":
        return out
    return json.loads(out)
