"""Fixed point and cubic Taylor coefficients of the sigmoidal feedback model.

The scalar model ``x' = -x + gamma * f(x(t - tau))`` with the logistic
nonlinearity ``f(x) = 1 / (1 + exp(-a x))`` is expanded around its stationary
state ``x_o = gamma * f(x_o)``. Deviations ``u = x - x_o`` then obey the
polynomial delay equation with coefficients

    eta   = gamma * f'(x_o)
    kappa = gamma * f''(x_o) / 2
    nu    = gamma * f'''(x_o) / 6
"""

from dataclasses import dataclass
import math

from scipy.special import expit

from .errors import DegenerateGain, NoConvergence, Unreachable, UsageError

DEFAULT_SLOPE = 60.0
# Left end of the gain interval searched by gamma_for_eta.
GAMMA_SEARCH_MIN = -1.0e6


@dataclass(frozen=True)
class ExpansionPoint:
    gamma: float
    slope: float
    x_o: float
    f_o: float
    eta: float
    kappa: float
    nu: float


def sigmoid(x, slope=DEFAULT_SLOPE):
    return expit(slope * x)


def sigmoid_derivs(x, slope=DEFAULT_SLOPE):
    """Return ``(f, f', f'', f''')`` of the logistic function at ``x``.

    Works on scalars and numpy arrays alike.
    """
    if not slope > 0:
        raise UsageError(f"sigmoid slope must be positive, got {slope}")
    f = expit(slope * x)
    g = f * (1.0 - f)
    d1 = slope * g
    d2 = slope**2 * g * (1.0 - 2.0 * f)
    d3 = slope**3 * g * (1.0 - 6.0 * f + 6.0 * f * f)
    return f, d1, d2, d3


def fixed_point(gamma, slope=DEFAULT_SLOPE, tol=1e-15, max_iter=200):
    """Solve ``x = gamma * f(x)``.

    The residual ``x - gamma f(x)`` is strictly increasing for ``gamma <= 0``
    and changes sign on ``[gamma, 0]``, so bisection always brackets the
    root; a few Newton steps then polish it to machine precision.
    """
    gamma = float(gamma)
    if not math.isfinite(gamma):
        raise UsageError(f"gamma must be finite, got {gamma}")
    if gamma == 0.0:
        return 0.0

    def resid(x):
        return x - gamma * float(expit(slope * x))

    lo, hi = min(gamma, 0.0), max(gamma, 0.0)
    r_lo = resid(lo)
    if r_lo == 0.0:
        return lo
    # positive gain can have several roots; bisection still returns one in the bracket
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r_mid = resid(mid)
        if r_mid == 0.0 or hi - lo < 1e-9:
            break
        if (r_mid > 0) == (r_lo > 0):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    else:
        raise NoConvergence(f"bisection for fixed point failed (gamma={gamma})")

    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f, d1, _, _ = sigmoid_derivs(x, slope)
        step = (x - gamma * f) / (1.0 - gamma * d1)
        x_new = x - step
        if not lo - 1e-9 <= x_new <= hi + 1e-9:
            break
        x = x_new
        if abs(step) <= tol * max(1.0, abs(x)):
            break
    x = float(x)
    if abs(resid(x)) >= 1e-12:
        raise NoConvergence(f"fixed point residual {resid(x):.3g} too large (gamma={gamma})")
    return x


def expand(gamma, slope=DEFAULT_SLOPE):
    if gamma == 0:
        raise DegenerateGain("gamma = 0 gives eta = kappa = nu = 0")
    x_o = fixed_point(gamma, slope)
    f, d1, d2, d3 = (float(v) for v in sigmoid_derivs(x_o, slope))
    return ExpansionPoint(
        gamma=float(gamma),
        slope=float(slope),
        x_o=x_o,
        f_o=f,
        eta=gamma * d1,
        kappa=gamma * d2 / 2.0,
        nu=gamma * d3 / 6.0,
    )


def linear_gain(gamma, slope=DEFAULT_SLOPE):
    """``gamma * f'(x_o(gamma))``, the linear coefficient as a function of gain."""
    if gamma == 0:
        return 0.0
    return gamma * float(sigmoid_derivs(fixed_point(gamma, slope), slope)[1])


def gamma_for_eta(eta_target, slope=DEFAULT_SLOPE, gamma_min=GAMMA_SEARCH_MIN, tol=1e-12):
    """Find the negative gain whose expansion has linear coefficient ``eta_target``.

    ``gamma -> eta`` is monotone decreasing on ``gamma < 0`` but only grows
    logarithmically, so targets beyond ``linear_gain(gamma_min)`` are reported
    as :class:`Unreachable`.
    """
    if not eta_target < 0:
        raise UsageError(f"eta_target must be negative, got {eta_target}")
    eta_floor = linear_gain(gamma_min, slope)
    if eta_target < eta_floor:
        raise Unreachable(
            f"eta = {eta_target} is outside the attainable range ({eta_floor:.6g}, 0) "
            f"for gamma in [{gamma_min:g}, 0) at slope {slope}"
        )

    # bisect in log|gamma|: the map spans many decades
    lo, hi = math.log(-gamma_min), math.log(1e-12)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if linear_gain(-math.exp(mid), slope) < eta_target:
            lo = mid
        else:
            hi = mid
        if lo - hi < 1e-15:
            break
    gamma = -math.exp(0.5 * (lo + hi))

    # secant polish on the raw map
    g0, g1 = gamma, gamma * (1 + 1e-7)
    e0, e1 = linear_gain(g0, slope) - eta_target, linear_gain(g1, slope) - eta_target
    for _ in range(50):
        if abs(e1) < tol or e1 == e0:
            break
        g0, g1 = g1, g1 - e1 * (g1 - g0) / (e1 - e0)
        e0, e1 = e1, linear_gain(g1, slope) - eta_target
    gamma = g1 if abs(e1) <= abs(e0) else g0
    if abs(linear_gain(gamma, slope) - eta_target) >= 1e-9:
        raise NoConvergence(f"could not match eta = {eta_target}")
    return gamma
