"""Noise-induced corrections to the polynomial delay equation.

The fast fluctuation ``h_t`` living on the stable subspace is estimated from
the critical linear system ``H' = -H + eta_c H(t - tau) + sqrt(2 D) xi`` via

    sigma2 = (1 - 2 Re(d) cos(w_c tau))**2 * <H**2>,

and averaging the cubic nonlinearity over it gives a constant drift
``c_o = kappa * sigma2`` and a shifted control parameter
``eps_eff = eps + 3 * nu * sigma2``.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import LengthMismatch, UsageError
from .trajectory import (
    Variant,
    delay_steps,
    make_rhs,
    noise_stream,
    run,
)
from .parallel import chunked, worker_count

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 1000.0
DEFAULT_N_REAL = 200
# Stream label so sigma2 noise never coincides with ensemble noise.
SIGMA2_STREAM = 0x5169


@dataclass(frozen=True)
class Sigma2Estimate:
    D: float
    sigma2: float
    se: float
    mean_H2: float
    factor: float
    horizon: float
    n_real: int
    seed: int
    dt: float
    skewness: float = 0.0


@dataclass(frozen=True)
class NoiseCorrection:
    D: float
    sigma2: float
    c_o: float
    mu: float
    eps: float
    eps_eff: float
    meta: dict = field(default_factory=dict)

    def corrected_params(self, eta_c, kappa, nu):
        return {"eta_c": eta_c, "eps_eff": self.eps_eff, "kappa": kappa, "nu": nu, "c_o": self.c_o}


def formula_factor(hopf):
    """``(1 - 2 Re(d) cos(w_c tau))**2`` with the cosine taken as ``1 / eta_c``."""
    return (1.0 - 2.0 * hopf.d.real / hopf.eta_c) ** 2


def _h2_block(args):
    hopf, D, dt, n_steps, seed, realizations = args
    H = simulate_linear_critical(hopf, D, n_steps, dt, seed, realizations)
    tail = H[n_steps // 2 + 1 :]
    return np.mean(tail * tail, axis=0), np.mean(tail**3, axis=0)


def simulate_linear_critical(hopf, D, n_steps, dt, seed, realizations):
    """Sample paths of the critical linear system from zero history, shape ``(n_steps + 1, n)``."""
    n_lag = delay_steps(hopf.tau, dt)
    noise = np.empty((n_steps, len(realizations)))
    for i, r in enumerate(realizations):
        noise[:, i] = noise_stream(seed, SIGMA2_STREAM, r).standard_normal(n_steps)
    hist = np.zeros((n_lag + 1, len(realizations)))
    rhs = make_rhs(Variant.LINEAR_CRITICAL, {"eta_c": hopf.eta_c})
    return run(rhs, hist, n_steps, dt, math.sqrt(2.0 * D * dt), noise)


def estimate_sigma2(hopf, D, horizon=DEFAULT_HORIZON, n_real=DEFAULT_N_REAL, seed=0, dt=0.1, workers=None):
    """Estimate sigma2 from ``n_real`` runs of the critical linear system.

    ``<H**2>`` is the average of ``H**2`` over the last half of ``horizon`` and
    over realizations; the standard error is taken across realizations.
    """
    if not D >= 0:
        raise UsageError(f"D must be >= 0, got {D}")
    if horizon < 10 * hopf.tau:
        raise UsageError(f"horizon must be at least 10 tau = {10 * hopf.tau}, got {horizon}")
    if n_real < 10:
        raise UsageError(f"need at least 10 realizations, got {n_real}")
    n_steps = int(round(horizon / dt))
    factor = formula_factor(hopf)
    common = dict(D=float(D), factor=factor, horizon=float(horizon), n_real=int(n_real), seed=int(seed), dt=dt)
    if D == 0:
        return Sigma2Estimate(sigma2=0.0, se=0.0, mean_H2=0.0, **common)

    jobs = [
        (hopf, D, dt, n_steps, seed, block)
        for block in chunked(range(n_real), worker_count(workers))
    ]
    if len(jobs) == 1:
        parts = [_h2_block(jobs[0])]
    else:
        with ProcessPoolExecutor(len(jobs)) as pool:
            parts = list(pool.map(_h2_block, jobs))
    m2 = np.concatenate([p[0] for p in parts])
    m3 = np.concatenate([p[1] for p in parts])

    mean_h2 = math.fsum(m2) / n_real
    se_h2 = float(np.std(m2, ddof=1)) / math.sqrt(n_real)
    skew = math.fsum(m3) / n_real / mean_h2**1.5
    if abs(skew) >= 0.2:
        log.warning("H is visibly non-Gaussian (skewness %.3f) at D=%g", skew, D)
    else:
        log.debug("skewness of H at D=%g: %.3f", D, skew)
    return Sigma2Estimate(
        sigma2=factor * mean_h2,
        se=factor * se_h2,
        mean_H2=mean_h2,
        skewness=skew,
        **common,
    )


def project_center(H_segment, hopf, dt):
    """Center amplitude ``z_1`` of a history segment covering ``[t - tau, t]``.

    Uses ``z_1 = psi_1(0) H(t) + eta_c * int_{-tau}^0 psi_1(xi + tau) H(t + xi) dxi``
    with ``psi_1(s) = d exp(-i w_c s)``. Segments may be complex.
    """
    seg = np.asarray(H_segment)
    n_lag = delay_steps(hopf.tau, dt)
    if seg.shape[0] != n_lag + 1:
        raise LengthMismatch(f"segment must hold {n_lag + 1} samples at dt={dt}, got {seg.shape[0]}")
    return hopf.d * seg[-1] + hopf.eta_c * np.tensordot(_center_kernel(hopf, dt, n_lag), seg, axes=(0, 0))


def _center_kernel(hopf, dt, n_lag):
    # psi_1(xi + tau) on xi = -tau..0, times trapezoid weights
    s = dt * np.arange(n_lag + 1)
    w = np.full(n_lag + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return hopf.d * np.exp(-1j * hopf.w_c * s) * w


def stable_remainder(H_segment, hopf, dt):
    """``h_t(0, t) = H(t) - 2 Re z_1(t)`` for a real segment."""
    seg = np.asarray(H_segment, dtype=float)
    return seg[-1] - 2.0 * project_center(seg, hopf, dt).real


def stable_series(H, hopf, dt):
    """``h_t(0, t)`` for every ``t >= tau`` of a path (or batch of paths along axis 1)."""
    H = np.asarray(H, dtype=float)
    if H.ndim > 1:
        return np.stack([stable_series(col, hopf, dt) for col in H.T], axis=1)
    n_lag = delay_steps(hopf.tau, dt)
    windows = sliding_window_view(H, n_lag + 1)
    z1 = hopf.d * H[n_lag:] + hopf.eta_c * (windows @ _center_kernel(hopf, dt, n_lag))
    return H[n_lag:] - 2.0 * z1.real


def direct_sigma2(hopf, D, horizon=DEFAULT_HORIZON, n_real=DEFAULT_N_REAL, seed=0, dt=0.1):
    """Variance of the projected stable remainder over the last half of the horizon."""
    n_steps = int(round(horizon / dt))
    H = simulate_linear_critical(hopf, D, n_steps, dt, seed, range(n_real))
    h = stable_series(H, hopf, dt)
    tail = h[len(h) - n_steps // 2 :]
    return float(np.mean(tail * tail))


def effective_params(sigma2, kappa, nu, eps, D=None, meta=None):
    if not sigma2 >= 0:
        raise UsageError(f"sigma2 must be >= 0, got {sigma2}")
    if sigma2 == 0:
        c_o = mu = 0.0
        eps_eff = eps
    else:
        c_o = kappa * sigma2
        mu = 3.0 * nu * sigma2
        eps_eff = eps + mu
    return NoiseCorrection(D=D, sigma2=sigma2, c_o=c_o, mu=mu, eps=eps, eps_eff=eps_eff, meta=dict(meta or {}))
