"""Linear stability of ``u' = -u + eta * u(t - tau)``.

Substituting ``u = exp(lambda t)`` gives the characteristic equation
``lambda + 1 - eta * exp(-lambda tau) = 0``. On the principal branch the
first purely imaginary root ``i w_c`` appears at ``eta_c < -1`` where

    w_c * tau + arctan(w_c) = pi,   eta_c = -sqrt(1 + w_c**2).

The center eigenfunctions are ``phi_1(theta) = exp(i w_c theta)`` and its
conjugate; the adjoint basis ``psi_1(s) = d exp(-i w_c s)`` is normalized
against them by the bilinear form

    (psi, phi) = psi(0) phi(0) + eta_c * int_{-tau}^0 psi(xi + tau) phi(xi) dxi,

which yields ``d = 1 / (1 + tau (1 + i w_c))``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq

from .errors import NoConvergence, ResolutionTooCoarse, UsageError

MIN_QUADRATURE_POINTS = 1000
DEFAULT_QUADRATURE_INTERVALS = 10_000


@dataclass(frozen=True)
class HopfPoint:
    tau: float
    eta_c: float
    w_c: float
    d: complex

    @property
    def period(self):
        return 2.0 * math.pi / self.w_c

    def residual(self):
        return abs(char_residual(1j * self.w_c, self.eta_c, self.tau))


def char_residual(lam, eta, tau):
    if not tau > 0:
        raise UsageError(f"tau must be positive, got {tau}")
    return lam + 1.0 - eta * np.exp(-lam * tau)


def solve_hopf(tau):
    """Locate the first Hopf crossing for delay ``tau``."""
    tau = float(tau)
    if not (tau > 0 and math.isfinite(tau)):
        raise UsageError(f"tau must be positive and finite, got {tau}")

    def g(w):
        return w * tau + math.atan(w) - math.pi

    # g(0) = -pi < 0 and g(pi / tau) = atan(pi / tau) > 0
    try:
        w_c = brentq(g, 0.0, math.pi / tau, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise NoConvergence(f"Hopf frequency search failed for tau={tau}") from exc
    eta_c = -math.sqrt(1.0 + w_c * w_c)
    return HopfPoint(tau=tau, eta_c=eta_c, w_c=w_c, d=adjoint_norm(eta_c, w_c, tau))


def adjoint_norm(eta_c, w_c, tau):
    return 1.0 / (1.0 + tau * (1.0 + 1j * w_c))


def _sample(fn, grid):
    if callable(fn):
        return np.asarray(fn(grid), dtype=complex)
    return np.asarray(fn, dtype=complex)


def bilinear(psi, phi, eta_c, tau, n_intervals=DEFAULT_QUADRATURE_INTERVALS):
    """Evaluate the pairing ``(psi, phi)`` by composite trapezoid quadrature.

    ``psi`` lives on ``[0, tau]`` and ``phi`` on ``[-tau, 0]``. Either may be a
    vectorized callable or an array of samples on a uniform grid including both
    endpoints; arrays fix the resolution and ``n_intervals`` is ignored.
    """
    if callable(psi) and callable(phi):
        n = n_intervals + 1
    else:
        sizes = {len(a) for a in (psi, phi) if not callable(a)}
        if len(sizes) != 1:
            raise ResolutionTooCoarse("psi and phi sample arrays differ in length")
        n = sizes.pop()
    if n < MIN_QUADRATURE_POINTS:
        raise ResolutionTooCoarse(f"need at least {MIN_QUADRATURE_POINTS} points, got {n}")

    xi = np.linspace(-tau, 0.0, n)
    psi_v = _sample(psi, xi + tau)
    phi_v = _sample(phi, xi)
    integral = np.trapezoid(psi_v * phi_v, xi)
    # psi is sampled at xi + tau, so psi(0) sits at index 0 and phi(0) at -1
    return complex(psi_v[0] * phi_v[-1] + eta_c * integral)


def center_basis(hopf):
    """Return ``(phi_1, phi_2, psi_1, psi_2)`` as vectorized callables."""
    w, d = hopf.w_c, hopf.d

    def phi_1(theta):
        return np.exp(1j * w * np.asarray(theta))

    def phi_2(theta):
        return np.exp(-1j * w * np.asarray(theta))

    def psi_1(s):
        return d * np.exp(-1j * w * np.asarray(s))

    def psi_2(s):
        return np.conj(d) * np.exp(1j * w * np.asarray(s))

    return phi_1, phi_2, psi_1, psi_2


def pairing_matrix(hopf, n_intervals=DEFAULT_QUADRATURE_INTERVALS):
    """2x2 matrix of ``(psi_i, phi_j)``; the identity for a correct ``d``."""
    phi_1, phi_2, psi_1, psi_2 = center_basis(hopf)
    return np.array(
        [
            [bilinear(p, f, hopf.eta_c, hopf.tau, n_intervals) for f in (phi_1, phi_2)]
            for p in (psi_1, psi_2)
        ]
    )
