"""Fixed-step Euler-Maruyama integration of scalar delay equations.

All right-hand sides have the form ``rhs(u, u_tau)`` and the noise is
additive, ``du = rhs dt + sqrt(2 D) dW``. The integrator is vectorized over
an arbitrary batch shape so that ensembles (and parameter sweeps, with
parameters given as broadcastable arrays) advance in lock-step; every batch
column evolves exactly as it would on its own.
"""

from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Any, Mapping, Optional

import numpy as np
from scipy.special import expit

from .errors import (
    Diverged,
    InvalidStep,
    MissingParameter,
    NonCommensurateDelay,
    UnknownVariant,
    UsageError,
)

DIVERGENCE_BOUND = 1.0e6
DEFAULT_U_INIT = 0.01


class Variant(str, Enum):
    ORIGINAL = "original"
    POLYNOMIAL = "polynomial"
    CORRECTED = "corrected"
    LINEAR_CRITICAL = "linear_critical"


REQUIRED_PARAMS = {
    Variant.ORIGINAL: ("gamma", "slope"),
    Variant.POLYNOMIAL: ("eta", "kappa", "nu"),
    Variant.CORRECTED: ("eta_c", "eps_eff", "kappa", "nu", "c_o"),
    Variant.LINEAR_CRITICAL: ("eta_c",),
}


def _as_variant(variant):
    if isinstance(variant, Variant):
        return variant
    try:
        return Variant(str(variant).lower())
    except ValueError:
        raise UnknownVariant(f"unknown variant {variant!r}") from None


def _cubic(u, ut, eta, kappa, nu):
    ut2 = ut * ut
    return -u + eta * ut + kappa * ut2 + nu * ut2 * ut


@dataclass(frozen=True)
class Rhs:
    """Callable right-hand side ``rhs(u, u_tau)`` for one equation variant."""

    variant: Variant
    params: Mapping[str, Any]

    def __call__(self, u, ut):
        p = self.params
        v = self.variant
        if v is Variant.POLYNOMIAL:
            return _cubic(u, ut, p["eta"], p["kappa"], p["nu"])
        if v is Variant.CORRECTED:
            # evaluated as the polynomial system at eta_c + eps_eff plus a constant
            # drift, so zero corrections reproduce the polynomial system exactly
            out = _cubic(u, ut, p["eta_c"] + p["eps_eff"], p["kappa"], p["nu"])
            c_o = p["c_o"]
            if np.any(c_o != 0):
                out = out + c_o
            return out
        if v is Variant.LINEAR_CRITICAL:
            return -u + p["eta_c"] * ut
        return -u + p["gamma"] * expit(p["slope"] * ut)


def make_rhs(variant, params):
    variant = _as_variant(variant)
    missing = [k for k in REQUIRED_PARAMS[variant] if k not in params]
    if missing:
        raise MissingParameter(f"{variant.value} variant needs {', '.join(missing)}")
    return Rhs(variant, {k: params[k] for k in REQUIRED_PARAMS[variant]})


@dataclass(frozen=True)
class SystemSpec:
    variant: Variant
    params: Mapping[str, Any]
    D: float = 0.0
    tau: float = 12.0

    def __post_init__(self):
        object.__setattr__(self, "variant", _as_variant(self.variant))
        if not (self.D >= 0 and math.isfinite(self.D)):
            raise UsageError(f"noise intensity D must be >= 0, got {self.D}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise UsageError(f"delay tau must be > 0, got {self.tau}")
        object.__setattr__(self, "params", make_rhs(self.variant, self.params).params)

    @property
    def rhs(self):
        return Rhs(self.variant, self.params)

    def with_noise(self, D):
        return SystemSpec(self.variant, self.params, D, self.tau)


def delay_steps(tau, dt):
    """Number of steps spanning the delay; ``tau`` must be a multiple of ``dt``."""
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidStep(f"dt must be positive, got {dt}")
    ratio = tau / dt
    n_lag = round(ratio)
    if n_lag < 1 or abs(ratio - n_lag) > 0.5 * math.ulp(ratio):
        raise NonCommensurateDelay(f"tau={tau} is not an integer multiple of dt={dt}")
    return n_lag


class HistoryBuffer:
    """Ring buffer holding the last ``n_lag + 1`` states.

    The newest sample is the current state; the oldest is exactly ``n_lag``
    steps behind it and is what the delayed term reads. Samples may be arrays
    (one entry per batch column).
    """

    def __init__(self, dt, n_lag, initial, t_now=0.0):
        if not dt > 0:
            raise InvalidStep(f"dt must be positive, got {dt}")
        if n_lag < 1:
            raise UsageError(f"n_lag must be >= 1, got {n_lag}")
        initial = np.array(initial, dtype=float)
        if initial.shape[0] != n_lag + 1:
            raise UsageError(f"initial history needs {n_lag + 1} samples, got {initial.shape[0]}")
        self.dt = dt
        self.n_lag = n_lag
        self.t_now = t_now
        self._ring = initial
        self._newest = n_lag

    @property
    def values(self):
        """Stored samples ordered oldest to newest."""
        return np.roll(self._ring, -(self._newest + 1), axis=0)

    @property
    def current(self):
        return self._ring[self._newest]

    @property
    def delayed(self):
        return self._ring[(self._newest + 1) % (self.n_lag + 1)]

    def push(self, x):
        self._newest = (self._newest + 1) % (self.n_lag + 1)
        self._ring[self._newest] = x
        self.t_now += self.dt


@dataclass
class Trajectory:
    t0: float
    dt: float
    samples: np.ndarray
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self.samples))

    def __len__(self):
        return len(self.samples)


def initial_history(history_init, tau, dt, batch_shape=()):
    """Sample the initial function on ``theta = -tau, ..., 0`` (oldest first).

    ``history_init`` is a constant, a vectorized callable of ``theta``, or an
    explicit array of ``n_lag + 1`` samples.
    """
    n_lag = delay_steps(tau, dt)
    if history_init is None:
        history_init = DEFAULT_U_INIT
    if callable(history_init):
        theta = -tau + dt * np.arange(n_lag + 1)
        h = np.asarray(history_init(theta), dtype=float)
    elif np.ndim(history_init) == 0:
        h = np.full(n_lag + 1, float(history_init))
    else:
        h = np.asarray(history_init, dtype=float)
        if h.shape[0] != n_lag + 1:
            raise UsageError(f"history array needs {n_lag + 1} samples, got {h.shape[0]}")
    h = h.reshape((n_lag + 1,) + (1,) * len(batch_shape) + h.shape[1:])
    return np.broadcast_to(h, (n_lag + 1,) + np.broadcast_shapes(batch_shape, h.shape[1:])).copy()


def noise_stream(seed, *keys):
    """Independent counter-based stream for ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def draw_noise(seed, trials, n_steps, stream=()):
    """Standard normals, shape ``(n_steps, len(trials))``; column ``i`` from trial ``trials[i]``."""
    out = np.empty((n_steps, len(trials)))
    for i, trial in enumerate(trials):
        out[:, i] = noise_stream(seed, *stream, trial).standard_normal(n_steps)
    return out


def trial_mean(x):
    """Mean over the last axis with a fixed reduction order."""
    x = np.ascontiguousarray(x)
    return np.sum(x, axis=-1) / x.shape[-1]


def run(rhs, history, n_steps, dt, noise_scale=0.0, noise=None, record="all", on_diverge="raise"):
    """Advance a batch of trajectories with Euler-Maruyama.

    ``history`` has shape ``(n_lag + 1, *batch)``. ``noise`` holds standard
    normals of shape ``(n_steps, *tail)`` where ``tail`` broadcasts against the
    batch, e.g. the trial axis shared by every parameter cell. With
    ``record="mean"`` only the mean over the last batch axis is kept.

    With ``on_diverge="flag"`` columns that leave the bounded region are set to
    NaN and keep going; otherwise :class:`Diverged` is raised.
    """
    if n_steps < 1:
        raise UsageError(f"n_steps must be >= 1, got {n_steps}")
    if not dt > 0:
        raise InvalidStep(f"dt must be positive, got {dt}")
    n_lag = history.shape[0] - 1
    buf = HistoryBuffer(dt, n_lag, history)
    batch = history.shape[1:]
    noisy = noise is not None and noise_scale != 0
    if noisy and noise.shape[0] < n_steps:
        raise UsageError("not enough noise samples for the requested steps")

    reduce = trial_mean if record == "mean" else (lambda x: x)
    first = reduce(buf.current)
    out = np.empty((n_steps + 1,) + np.shape(first))
    out[0] = first
    dead = np.zeros(batch, dtype=bool)
    for k in range(n_steps):
        u = buf.current
        nxt = u + dt * rhs(u, buf.delayed)
        if noisy:
            nxt = nxt + noise_scale * noise[k]
        bad = ~(np.abs(nxt) <= DIVERGENCE_BOUND)
        if bad.any():
            if on_diverge != "flag":
                idx = np.argwhere(bad)[0]
                raise Diverged(
                    f"|u| exceeded {DIVERGENCE_BOUND:g} at step {k + 1} (batch index {tuple(idx)})",
                    trial=int(idx[-1]) if idx.size else None,
                    step=k + 1,
                )
            dead |= bad
            nxt = np.where(dead, np.nan, nxt)
        buf.push(nxt)
        out[k + 1] = reduce(nxt)
    return out


def integrate(spec, history_init=DEFAULT_U_INIT, n_steps=10_000, dt=0.1, seed=None, trial=0, stream=()):
    """Integrate one realization of ``spec``.

    The noise for a given ``(seed, *stream, trial)`` is fixed, so the call is a
    pure function of its arguments. Deterministic runs (D = 0) ignore the seed.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidStep(f"dt must be positive, got {dt}")
    if n_steps < 1:
        raise UsageError(f"n_steps must be >= 1, got {n_steps}")
    hist = initial_history(history_init, spec.tau, dt)
    noise = None
    if spec.D > 0:
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % 2**63)
        noise = noise_stream(seed, *stream, trial).standard_normal(n_steps)
    else:
        seed = None
    samples = run(spec.rhs, hist, n_steps, dt, math.sqrt(2.0 * spec.D * dt), noise)
    return Trajectory(t0=0.0, dt=dt, samples=samples, seed=seed)
