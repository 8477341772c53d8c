"""Independent reference computations used to freeze expected test values.

Nothing here imports the package under test. Running this file prints the
values that the tests pin.
"""

import math

import numpy as np
from scipy import integrate


def sigmoid(x, a=60.0):
    # plain formula, distinct from the package's expit path
    return 1.0 / (1.0 + math.exp(-a * x)) if a * x > -700 else 0.0


def bisect(fn, lo, hi, tol=1e-16, max_iter=400):
    f_lo = fn(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if f_mid == 0 or hi - lo < tol:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fixed_point(gamma, a=60.0):
    return bisect(lambda x: x - gamma * sigmoid(x, a), gamma, 0.0)


def central_diff(fn, x, h):
    return (fn(x + h) - fn(x - h)) / (2 * h)


def taylor_coefficients(gamma, a=60.0):
    """(eta, kappa, nu) from nested central differences at the bisection fixed point."""
    x0 = fixed_point(gamma, a)
    f = lambda x: sigmoid(x, a)
    h = 1e-4
    d1 = central_diff(f, x0, h)
    d2 = (f(x0 + h) - 2 * f(x0) + f(x0 - h)) / h**2
    d3 = (f(x0 + 2 * h) - 2 * f(x0 + h) + 2 * f(x0 - h) - f(x0 - 2 * h)) / (2 * h**3)
    return gamma * d1, gamma * d2 / 2, gamma * d3 / 6


def hopf_by_magnitude(tau):
    """Solve sqrt(m^2 - 1) tau = pi - arcsin(sqrt(m^2 - 1) / m) for m = |eta_c| by bisection."""

    def g(m):
        w = math.sqrt(m * m - 1)
        return w * tau - (math.pi - math.asin(w / m))

    m = bisect(g, 1.0 + 1e-15, math.sqrt(1 + (math.pi / tau) ** 2) + 1e-9)
    return -m, math.sqrt(m * m - 1)


def inverse_d_by_quadrature(eta_c, w_c, tau):
    """(psi, phi_1) with d = 1, evaluated by adaptive quadrature; equals 1/d."""

    def integrand(xi, part):
        v = np.exp(-1j * w_c * (xi + tau)) * np.exp(1j * w_c * xi)
        return v.real if part == 0 else v.imag

    re = integrate.quad(integrand, -tau, 0.0, args=(0,), epsabs=1e-14)[0]
    im = integrate.quad(integrand, -tau, 0.0, args=(1,), epsabs=1e-14)[0]
    return 1.0 + eta_c * (re + 1j * im)


def linear_critical_variance(eta_c, tau, D, n_real=1000, horizon=1000.0, dt=0.1, seed=20240601):
    """Brute-force Euler-Maruyama for H' = -H + eta_c H(t - tau) + sqrt(2D) xi.

    Returns the mean over realizations of the time-average of H^2 over the
    last half of the horizon, and its standard error.
    """
    rng = np.random.default_rng(seed)
    n_lag = int(round(tau / dt))
    n = int(round(horizon / dt))
    H = np.zeros((n_lag + n + 1, n_real))
    amp = math.sqrt(2 * D * dt)
    for k in range(n):
        i = n_lag + k
        H[i + 1] = H[i] + dt * (-H[i] + eta_c * H[i - n_lag]) + amp * rng.standard_normal(n_real)
    tail = H[n_lag + n // 2 + 1 :]
    per_real = np.mean(tail**2, axis=0)
    return per_real.mean(), per_real.std(ddof=1) / math.sqrt(n_real)


def euler_linear(eta, tau, history, dt, t_end):
    """Deterministic Euler for u' = -u + eta u(t - tau) with a callable history."""
    n_lag = int(round(tau / dt))
    n = int(round(t_end / dt))
    u = np.empty(n_lag + n + 1)
    u[: n_lag + 1] = history(-tau + dt * np.arange(n_lag + 1))
    for k in range(n):
        i = n_lag + k
        u[i + 1] = u[i] + dt * (-u[i] + eta * u[i - n_lag])
    return u[n_lag:]


if __name__ == "__main__":
    x0 = fixed_point(-0.05)
    print("x_o", repr(x0), "f(x_o)", repr(sigmoid(x0)))
    print("taylor", taylor_coefficients(-0.05))
    eta_c, w_c = hopf_by_magnitude(12.0)
    print("hopf", repr(eta_c), repr(w_c), "large-tau check", math.pi / 13)
    inv = inverse_d_by_quadrature(eta_c, w_c, 12.0)
    print("1/d", inv, "d", 1 / inv)
    for D in (1e-5,):
        m, se = linear_critical_variance(eta_c, 12.0, D)
        print("H2", D, repr(m), repr(se))
