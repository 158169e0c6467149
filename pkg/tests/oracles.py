"""Independent reference computations used only by the tests."""

import math

import mpmath
from scipy import integrate


def bisect(f, lo, hi, tol=1e-15, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def j_series(order, x, terms=60):
    """Truncated power series of J_order in 40-digit arithmetic."""
    with mpmath.workdps(40):
        x = mpmath.mpf(x)
        half = x / 2
        s = mpmath.mpf(0)
        for k in range(terms):
            s += (-1) ** k * half ** (2 * k + order) / (mpmath.factorial(k) * mpmath.factorial(k + order))
        return float(s)


def j_prime_series(order, x):
    """Derivative through 2 J'_m = J_{m-1} - J_{m+1} (series for both)."""
    lower = -j_series(1, x) if order == 0 else j_series(order - 1, x)
    return 0.5 * (lower - j_series(order + 1, x))


def y0_quadrature(x):
    """Y_0 from its integral representation (two real quadratures)."""
    a, _ = integrate.quad(lambda t: math.sin(x * math.sin(t)), 0.0, math.pi, epsabs=1e-13, epsrel=1e-13, limit=200)
    # the integrand is below 1e-300 once x sinh t > 700
    top = math.asinh(750.0 / x)
    b, _ = integrate.quad(lambda t: math.exp(-x * math.sinh(t)), 0.0, top, epsabs=1e-13, epsrel=1e-13, limit=200)
    return (a - 2.0 * b) / math.pi


J01 = bisect(lambda x: j_series(0, x), 2.0, 3.0)
J11 = bisect(lambda x: j_series(1, x), 3.0, 4.5)
J1P1 = bisect(lambda x: j_prime_series(1, x), 1.5, 2.2)
ROBIN_DISK_K = bisect(lambda k: k * j_series(1, k) - j_series(0, k), 0.5, 2.0)


def _first_sign_change(f, lo, hi, steps=4000):
    prev_x, prev = lo, f(lo)
    for i in range(1, steps + 1):
        x = lo + (hi - lo) * i / steps
        v = f(x)
        if (v > 0) != (prev > 0):
            return bisect(f, prev_x, x)
        prev_x, prev = x, v
    raise ValueError("no sign change")


def annulus_dirichlet_k(inner, outer):
    """Smallest root of J0(k a) Y0(k b) - J0(k b) Y0(k a), via scipy.special."""
    from scipy.special import j0, y0

    f = lambda k: j0(k * inner) * y0(k * outer) - j0(k * outer) * y0(k * inner)
    return _first_sign_change(f, 1e-3 / outer, 2.0 * math.pi / (outer - inner))


def annulus_robin_k(inner, outer, beta):
    """Smallest radial Robin root; outward normal is -d/dr inside, +d/dr outside."""
    from scipy.special import j0, j1, y0, y1

    def f(k):
        # d/dr J0(kr) = -k J1(kr)
        a0 = k * j1(k * inner) + beta * j0(k * inner)
        a1 = k * y1(k * inner) + beta * y0(k * inner)
        b0 = -k * j1(k * outer) + beta * j0(k * outer)
        b1 = -k * y1(k * outer) + beta * y0(k * outer)
        return a0 * b1 - a1 * b0

    return _first_sign_change(f, 1e-3 / outer, 2.0 * math.pi / (outer - inner))
