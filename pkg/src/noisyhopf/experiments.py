"""Ensemble averages, amplitude readout and (eps, D) bifurcation sweeps."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
import logging
import math
from typing import Optional, Sequence

import numpy as np

from .errors import Diverged, NoOnsetInRange, WindowTooShort, UsageError
from .noise_correction import effective_params, estimate_sigma2, DEFAULT_HORIZON, DEFAULT_N_REAL
from .parallel import chunked, worker_count
from .trajectory import (
    DEFAULT_U_INIT,
    SystemSpec,
    Trajectory,
    Variant,
    draw_noise,
    initial_history,
    make_rhs,
    run,
    trial_mean,
)

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 500
DEFAULT_WINDOW = 0.25
MIN_WINDOW_PERIODS = 3


@dataclass
class EnsembleResult:
    mean_trajectory: Trajectory
    se: np.ndarray
    n_trials: int
    master_seed: int
    spec: SystemSpec
    per_trial_amplitudes: Optional[np.ndarray] = None


def _trial_block(args):
    spec, history_init, n_steps, dt, master_seed, stream, trials = args
    hist = initial_history(history_init, spec.tau, dt, (len(trials),))
    noise = draw_noise(master_seed, trials, n_steps, stream)
    try:
        return run(spec.rhs, hist, n_steps, dt, math.sqrt(2.0 * spec.D * dt), noise)
    except Diverged as exc:
        trial = trials[exc.trial] if exc.trial is not None else None
        raise Diverged(f"trial {trial}: {exc}", trial=trial, step=exc.step) from None


def run_trials(spec, n_trials, n_steps, dt, master_seed, history_init=DEFAULT_U_INIT, stream=(), workers=None):
    """All trial paths, shape ``(n_steps + 1, n_trials)``, column ``i`` from stream ``(seed, *stream, i)``."""
    blocks = chunked(range(n_trials), worker_count(workers))
    jobs = [(spec, history_init, n_steps, dt, master_seed, tuple(stream), b) for b in blocks]
    if len(jobs) == 1:
        return _trial_block(jobs[0])
    with ProcessPoolExecutor(len(jobs)) as pool:
        return np.concatenate(list(pool.map(_trial_block, jobs)), axis=1)


def ensemble_average(
    spec,
    n_trials=DEFAULT_TRIALS,
    n_steps=10_000,
    dt=0.1,
    master_seed=0,
    history_init=DEFAULT_U_INIT,
    stream=(),
    workers=None,
    window_fraction=None,
):
    """Pointwise mean over ``n_trials`` independent realizations.

    Trials are assembled in index order before averaging, so the result does
    not depend on how they were scheduled. For ``D = 0`` every trial is the
    deterministic path and that path is returned as the mean.
    """
    if n_trials < 1:
        raise UsageError(f"n_trials must be >= 1, got {n_trials}")
    if spec.D == 0:
        hist = initial_history(history_init, spec.tau, dt)
        path = run(spec.rhs, hist, n_steps, dt)
        mean, se = path, np.zeros_like(path)
        paths = path[:, None]
    else:
        paths = run_trials(spec, n_trials, n_steps, dt, master_seed, history_init, stream, workers)
        mean = trial_mean(paths)
        se = np.std(paths, axis=1, ddof=1) / math.sqrt(n_trials) if n_trials > 1 else np.zeros(n_steps + 1)
    per_trial = None
    if window_fraction is not None:
        per_trial = np.array([amplitude(col, window_fraction) for col in paths.T])
        if spec.D == 0:
            per_trial = np.repeat(per_trial, n_trials)
    traj = Trajectory(t0=0.0, dt=dt, samples=mean, seed=master_seed if spec.D > 0 else None)
    return EnsembleResult(traj, se, n_trials, master_seed, spec, per_trial)


def amplitude(traj, window_fraction=DEFAULT_WINDOW, period=None):
    """Half the peak-to-peak excursion over the final ``window_fraction`` of a run.

    ``traj`` is a :class:`Trajectory` or an array whose first axis is time. If
    ``period`` is given the window must cover at least three periods.
    """
    if not 0 < window_fraction <= 0.5:
        raise UsageError(f"window_fraction must lie in (0, 0.5], got {window_fraction}")
    samples = traj.samples if isinstance(traj, Trajectory) else np.asarray(traj)
    n_win = int(round(window_fraction * (len(samples) - 1)))
    if n_win < 2:
        raise WindowTooShort(f"window holds {n_win} samples")
    if period is not None:
        dt = traj.dt if isinstance(traj, Trajectory) else None
        if dt is None:
            raise UsageError("period check needs a Trajectory (for its time step)")
        if n_win * dt < MIN_WINDOW_PERIODS * period:
            raise WindowTooShort(
                f"window spans {n_win * dt:g} time units, less than {MIN_WINDOW_PERIODS} periods of {period:g}"
            )
    tail = samples[-n_win - 1 :]
    return 0.5 * (np.max(tail, axis=0) - np.min(tail, axis=0))


SCAN_COLUMNS = (
    "eps",
    "D",
    "amp_noise_free",
    "amp_ensemble",
    "amp_corrected",
    "sigma2",
    "c_o",
    "mu",
    "eps_eff",
    "n_trials",
    "master_seed",
    "failed",
)


@dataclass
class ScanRow:
    eps: float
    D: float
    amp_noise_free: float
    amp_ensemble: float
    amp_corrected: float
    sigma2: float
    c_o: float
    mu: float
    eps_eff: float
    n_trials: int
    master_seed: int
    failed: str = ""


@dataclass
class ScanTable:
    rows: list
    meta: dict = field(default_factory=dict)

    def at_D(self, D):
        return sorted((r for r in self.rows if r.D == D), key=lambda r: r.eps)

    def column(self, name, D=None):
        rows = self.rows if D is None else self.at_D(D)
        return np.array([getattr(r, name) for r in rows])

    def as_dicts(self):
        return [asdict(r) for r in self.rows]


@dataclass
class ScanConfig:
    n_trials: int = DEFAULT_TRIALS
    n_steps: int = 10_000
    dt: float = 0.1
    master_seed: int = 0
    u_init: float = DEFAULT_U_INIT
    window_fraction: float = DEFAULT_WINDOW
    horizon: float = DEFAULT_HORIZON
    n_real: int = DEFAULT_N_REAL
    workers: Optional[int] = None


def _polynomial_params(hopf, point, eps):
    return {"eta": hopf.eta_c + eps, "kappa": point.kappa, "nu": point.nu}


def _cells_block(args):
    """Ensemble mean paths for a block of eps cells sharing one noise draw."""
    hopf, point, eps, D, cfg, stream = args
    eps = np.asarray(eps)[:, None]
    hist = initial_history(cfg.u_init, hopf.tau, cfg.dt, (len(eps), cfg.n_trials))
    noise = draw_noise(cfg.master_seed, range(cfg.n_trials), cfg.n_steps, stream)
    rhs = make_rhs(Variant.POLYNOMIAL, _polynomial_params(hopf, point, eps))
    return run(rhs, hist, cfg.n_steps, cfg.dt, math.sqrt(2.0 * D * cfg.dt), noise, record="mean", on_diverge="flag")


def deterministic_paths(rhs, tau, n_cells, cfg):
    """Noise-free paths of ``n_cells`` parameter cells, shape ``(n_steps + 1, n_cells)``."""
    hist = initial_history(cfg.u_init, tau, cfg.dt, (n_cells, 1))
    return run(rhs, hist, cfg.n_steps, cfg.dt, on_diverge="flag")[..., 0]


def ensemble_paths(hopf, point, eps_values, D, cfg, stream=()):
    """Ensemble-mean paths for every eps in ``eps_values`` at noise ``D``.

    All cells reuse the same trial noise (common random numbers), keyed by
    ``(master_seed, *stream, trial)``.
    """
    eps_values = list(eps_values)
    blocks = chunked(eps_values, worker_count(cfg.workers))
    jobs = [(hopf, point, b, D, cfg, tuple(stream)) for b in blocks]
    if len(jobs) == 1:
        return _cells_block(jobs[0])
    with ProcessPoolExecutor(len(jobs)) as pool:
        return np.concatenate(list(pool.map(_cells_block, jobs)), axis=1)


def scan(eps_grid, D_grid, point, hopf, cfg=None, sigma2=None):
    """Amplitudes of the noise-free, ensemble-mean and corrected systems on an (eps, D) grid.

    ``point`` supplies kappa and nu (an :class:`ExpansionPoint`); the linear
    coefficient is ``eta_c + eps``. The noise for the D value with index ``j``
    in ``D_grid`` comes from streams ``(master_seed, j, trial)``.
    """
    cfg = cfg or ScanConfig()
    eps_grid = [float(e) for e in eps_grid]
    D_grid = [float(D) for D in D_grid]
    if not eps_grid or not D_grid:
        raise UsageError("eps and D grids must be non-empty")
    if len(set(eps_grid)) != len(eps_grid) or len(set(D_grid)) != len(D_grid):
        raise UsageError("grid values must be unique")
    eps_arr = np.array(eps_grid)

    poly = make_rhs(Variant.POLYNOMIAL, _polynomial_params(hopf, point, eps_arr[:, None]))
    noise_free = deterministic_paths(poly, hopf.tau, len(eps_grid), cfg)
    amp_nf = amplitude(noise_free, cfg.window_fraction)

    ref_rhs = make_rhs(Variant.POLYNOMIAL, _polynomial_params(hopf, point, np.zeros((1, 1))))
    reference_amp = float(amplitude(deterministic_paths(ref_rhs, hopf.tau, 1, cfg), cfg.window_fraction)[0])

    rows, sigma2_by_D = [], {}
    for j, D in enumerate(D_grid):
        if D == 0:
            est_sigma2, amp_ens = 0.0, amp_nf
        else:
            if sigma2 is not None and D in sigma2:
                est_sigma2 = float(sigma2[D])
            else:
                est = estimate_sigma2(hopf, D, cfg.horizon, cfg.n_real, cfg.master_seed, cfg.dt, cfg.workers)
                est_sigma2 = est.sigma2
            means = ensemble_paths(hopf, point, eps_grid, D, cfg, stream=(j,))
            amp_ens = amplitude(means, cfg.window_fraction)
        sigma2_by_D[D] = est_sigma2

        corrections = [effective_params(est_sigma2, point.kappa, point.nu, e, D) for e in eps_grid]
        if D == 0:
            amp_cor = amp_nf
        else:
            cor = make_rhs(
                Variant.CORRECTED,
                {
                    "eta_c": hopf.eta_c,
                    "eps_eff": np.array([c.eps_eff for c in corrections])[:, None],
                    "kappa": point.kappa,
                    "nu": point.nu,
                    "c_o": corrections[0].c_o,
                },
            )
            amp_cor = amplitude(deterministic_paths(cor, hopf.tau, len(eps_grid), cfg), cfg.window_fraction)

        for i, (e, c) in enumerate(zip(eps_grid, corrections)):
            amps = (float(amp_nf[i]), float(amp_ens[i]), float(amp_cor[i]))
            failed = ",".join(
                name for name, a in zip(("noise_free", "ensemble", "corrected"), amps) if not math.isfinite(a)
            )
            if failed:
                log.warning("scan cell eps=%g D=%g failed (%s diverged)", e, D, failed)
            rows.append(
                ScanRow(
                    eps=e,
                    D=D,
                    amp_noise_free=amps[0],
                    amp_ensemble=amps[1],
                    amp_corrected=amps[2],
                    sigma2=c.sigma2,
                    c_o=c.c_o,
                    mu=c.mu,
                    eps_eff=c.eps_eff,
                    n_trials=cfg.n_trials,
                    master_seed=cfg.master_seed,
                    failed=failed,
                )
            )
    meta = {"reference_amplitude": reference_amp, "sigma2": sigma2_by_D, "config": asdict(cfg)}
    return ScanTable(rows, meta)


def onset_locator(rows: Sequence[ScanRow], threshold_amp, column="amp_ensemble"):
    """Largest eps whose amplitude reaches ``threshold_amp``.

    Walks the rows downward in eps and linearly interpolates the crossing
    between the first oscillating cell and its quiescent neighbour above.
    """
    pts = sorted(
        ((r.eps, getattr(r, column)) for r in rows if not r.failed),
        key=lambda p: p[0],
        reverse=True,
    )
    if not pts:
        raise NoOnsetInRange("no usable rows")
    if pts[0][1] >= threshold_amp:
        raise NoOnsetInRange(f"already oscillating at the largest eps = {pts[0][0]:g}")
    for (e_hi, a_hi), (e_lo, a_lo) in zip(pts, pts[1:]):
        if a_lo >= threshold_amp:
            return e_hi + (threshold_amp - a_hi) * (e_lo - e_hi) / (a_lo - a_hi)
    raise NoOnsetInRange(f"amplitude never reaches {threshold_amp:g} in the swept range")
