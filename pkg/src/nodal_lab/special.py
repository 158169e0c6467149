"""Bessel functions of integer order and bracketed root finding.

Regimes (for the argument ``x``):

* ``x <= SERIES_MAX`` (4.0): ascending power series for every order.
* ``x > SERIES_MAX``: J by Miller's downward recurrence normalised with
  ``J_0 + 2 * sum(J_2k) = 1``.  Y_0 comes from the Neumann series in the
  even-order J values while ``x < ASYMPTOTIC_MIN`` (25.0) and from the
  Hankel asymptotic expansion beyond it.

Y_1 is obtained alongside Y_0 in every regime and higher Y orders follow by
upward recurrence, which is stable for the second kind.

All public functions accept scalars or numpy arrays and return the same
shape; they hold no state and are safe to call from several threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

EULER_GAMMA = 0.57721566490153286060651209
SERIES_MAX = 4.0
ASYMPTOTIC_MIN = 25.0
MAX_ORDER = 50

_RESCALE_AT = 1e200


class BesselDomainError(ValueError):
    """Argument outside the domain of the requested Bessel function."""


class RootFindingError(RuntimeError):
    """Base class for root-finding failures."""


class NoSignChangeError(RootFindingError):
    pass


class NonConvergenceError(RootFindingError):
    pass


def _check_order(order: int) -> int:
    if int(order) != order or order < 0:
        raise ValueError(f"order must be a nonnegative integer, got {order!r}")
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds supported maximum {MAX_ORDER}")
    return int(order)


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


# ---------------------------------------------------------------------------
# first kind
# ---------------------------------------------------------------------------


def _j_series(order: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    q = half * half
    term = np.ones_like(x)
    for i in range(1, order + 1):
        term = term * half / i
    total = term.copy()
    for k in range(1, 60):
        term = -term * q / (k * (k + order))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _miller_start(top: float) -> int:
    n = int(top + 20.0 + 3.0 * math.sqrt(top) * 3.0)
    return n + (n % 2)


def _j_miller(max_order: int, x: np.ndarray) -> np.ndarray:
    """All orders ``0..start`` by downward recurrence; rows are orders."""
    start = _miller_start(max(max_order, float(np.max(x))))
    out = np.zeros((start + 2, x.size))
    nxt = np.zeros(x.size)
    cur = np.full(x.size, 1e-30)
    out[start] = cur
    for k in range(start, 0, -1):
        prev = (2.0 * k / x) * cur - nxt
        out[k - 1] = prev
        nxt, cur = cur, prev
        big = np.abs(prev) > _RESCALE_AT
        if np.any(big):
            scale = np.where(big, 1.0 / _RESCALE_AT, 1.0)
            out[k - 1:] *= scale
            nxt = nxt * scale
            cur = cur * scale
    norm = out[0] + 2.0 * out[2:start + 1:2].sum(axis=0)
    return out[: start + 1] / norm


def _j_all(max_order: int, x: np.ndarray) -> np.ndarray:
    """Rows ``J_0..J_max_order`` at the (flat, positive) points ``x``."""
    res = np.empty((max_order + 1, x.size))
    small = x <= SERIES_MAX
    if np.any(small):
        xs = x[small]
        for m in range(max_order + 1):
            res[m, small] = _j_series(m, xs)
    if np.any(~small):
        res[:, ~small] = _j_miller(max_order, x[~small])[: max_order + 1]
    return res


def bessel_j(order: int, x):
    """Bessel function of the first kind ``J_order(x)`` for ``x >= 0``."""
    order = _check_order(order)
    arr, scalar = _as_array(x)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise BesselDomainError("bessel_j requires x >= 0")
    flat = arr.ravel()
    out = np.empty(flat.size)
    zero = flat == 0.0
    out[zero] = 1.0 if order == 0 else 0.0
    if np.any(~zero):
        out[~zero] = _j_all(order, flat[~zero])[order]
    out = out.reshape(arr.shape)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# second kind
# ---------------------------------------------------------------------------


def _y01_series(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    half = 0.5 * x
    q = half * half
    lg = np.log(half)
    # Y0: (2/pi)(ln(x/2) + gamma) J0 + (2/pi) sum (-1)^(k+1) H_k q^k / (k!)^2
    j0 = _j_series(0, x)
    term = np.ones_like(x)
    h = 0.0
    s0 = np.zeros_like(x)
    for k in range(1, 60):
        term = -term * q / (k * k)
        h += 1.0 / k
        s0 -= h * term
        if np.all(np.abs(h * term) <= 1e-17 * np.abs(s0)):
            break
    y0 = (2.0 / math.pi) * ((lg + EULER_GAMMA) * j0 + s0)
    # Y1: -(2/(pi x)) + (2/pi) ln(x/2) J1
    #     - (1/pi) sum [psi(k+1) + psi(k+2)] (-q)^k (x/2) / (k! (k+1)!)
    j1 = _j_series(1, x)
    term = half.copy()
    psi_a = -EULER_GAMMA
    psi_b = 1.0 - EULER_GAMMA
    s1 = (psi_a + psi_b) * term
    for k in range(1, 60):
        term = -term * q / (k * (k + 1))
        psi_a += 1.0 / k
        psi_b += 1.0 / (k + 1)
        inc = (psi_a + psi_b) * term
        s1 += inc
        if np.all(np.abs(inc) <= 1e-17 * np.abs(s1)):
            break
    y1 = -2.0 / (math.pi * x) + (2.0 / math.pi) * lg * j1 - s1 / math.pi
    return y0, y1


def _y01_neumann(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    js = _j_miller(1, x)
    js = np.vstack([js, np.zeros((1, x.size))])
    kmax = (js.shape[0] - 2) // 2
    lg = np.log(0.5 * x) + EULER_GAMMA
    k = np.arange(1, kmax + 1)
    w = (np.where(k % 2 == 0, 1.0, -1.0) / k)[:, None]
    y0 = (2.0 / math.pi) * (lg * js[0] - 2.0 * (w * js[2 : 2 * kmax + 1 : 2]).sum(axis=0))
    # termwise derivative of the Y0 series; Y1 = -Y0'
    dj_even = 0.5 * (js[1 : 2 * kmax : 2] - js[3 : 2 * kmax + 2 : 2])
    dy0 = (2.0 / math.pi) * (js[0] / x - lg * js[1] - 2.0 * (w * dj_even).sum(axis=0))
    return y0, -dy0


def _hankel_pq(nu: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # for x >= ASYMPTOTIC_MIN the terms shrink monotonically far below 1e-18
    # before the series starts to diverge (k ~ 2x)
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 2 * int(ASYMPTOTIC_MIN)):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2:
            q += sign * term
        else:
            p += sign * term
        if np.all(np.abs(term) < 1e-18):
            break
    return p, q


def _y01_hankel(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    amp = np.sqrt(2.0 / (math.pi * x))
    c, s = np.cos(x), np.sin(x)
    r = math.sqrt(0.5)
    # chi_0 = x - pi/4, chi_1 = x - 3pi/4
    c0, s0 = r * (c + s), r * (s - c)
    c1, s1 = r * (s - c), -r * (c + s)
    p0, q0 = _hankel_pq(0, x)
    p1, q1 = _hankel_pq(1, x)
    return amp * (p0 * s0 + q0 * c0), amp * (p1 * s1 + q1 * c1)


def _y01(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y0 = np.empty(x.size)
    y1 = np.empty(x.size)
    for mask, fn in (
        (x <= SERIES_MAX, _y01_series),
        ((x > SERIES_MAX) & (x < ASYMPTOTIC_MIN), _y01_neumann),
        (x >= ASYMPTOTIC_MIN, _y01_hankel),
    ):
        if np.any(mask):
            y0[mask], y1[mask] = fn(x[mask])
    return y0, y1


def _y_all(max_order: int, x: np.ndarray) -> np.ndarray:
    res = np.empty((max(max_order, 1) + 1, x.size))
    res[0], res[1] = _y01(x)
    for m in range(1, max_order):
        res[m + 1] = (2.0 * m / x) * res[m] - res[m - 1]
    return res[: max_order + 1]


def bessel_y(order: int, x):
    """Bessel function of the second kind ``Y_order(x)`` for ``x > 0``."""
    order = _check_order(order)
    arr, scalar = _as_array(x)
    if np.any(~(arr > 0)):
        raise BesselDomainError("bessel_y requires x > 0")
    out = _y_all(order, arr.ravel())[order].reshape(arr.shape)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------


def bessel_j_deriv(order: int, x):
    """``d/dx J_order(x)`` via ``2 J'_m = J_{m-1} - J_{m+1}``."""
    order = _check_order(order)
    if order == 0:
        return -1.0 * bessel_j(1, x) if np.ndim(x) == 0 else -bessel_j(1, x)
    arr, scalar = _as_array(x)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise BesselDomainError("bessel_j_deriv requires x >= 0")
    flat = arr.ravel()
    out = np.empty(flat.size)
    zero = flat == 0.0
    out[zero] = 0.5 if order == 1 else 0.0
    if np.any(~zero):
        js = _j_all(order + 1, flat[~zero])
        out[~zero] = 0.5 * (js[order - 1] - js[order + 1])
    out = out.reshape(arr.shape)
    return float(out) if scalar else out


def bessel_y_deriv(order: int, x):
    """``d/dx Y_order(x)``; ``Y'_0 = -Y_1``."""
    order = _check_order(order)
    arr, scalar = _as_array(x)
    if np.any(~(arr > 0)):
        raise BesselDomainError("bessel_y_deriv requires x > 0")
    ys = _y_all(order + 1, arr.ravel())
    out = -ys[1] if order == 0 else 0.5 * (ys[order - 1] - ys[order + 1])
    out = out.reshape(arr.shape)
    return float(out) if scalar else out


def bessel_jy(order: int, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(J, J', Y, Y')`` of one order at positive points, sharing the work."""
    order = _check_order(order)
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise BesselDomainError("bessel_jy requires x > 0")
    flat = arr.ravel()
    js = _j_all(order + 1, flat)
    ys = _y_all(order + 1, flat)
    if order == 0:
        dj, dy = -js[1], -ys[1]
    else:
        dj = 0.5 * (js[order - 1] - js[order + 1])
        dy = 0.5 * (ys[order - 1] - ys[order + 1])
    shape = arr.shape
    return (js[order].reshape(shape), dj.reshape(shape), ys[order].reshape(shape), dy.reshape(shape))


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket requires lo < hi, got ({self.lo}, {self.hi})")


def find_root(
    f: Callable[[float], float],
    bracket: Bracket | tuple[float, float],
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Brent's method on a sign-changing bracket.

    The returned point always lies inside the initial bracket and the final
    bracket is narrower than ``tol`` (absolute) unless ``f`` hits zero exactly.
    """
    if not isinstance(bracket, Bracket):
        bracket = Bracket(*bracket)
    a, b = float(bracket.lo), float(bracket.hi)
    fa, fb = float(f(a)), float(f(b))
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if math.isnan(fa) or math.isnan(fb) or fa * fb > 0:
        raise NoSignChangeError(f"no sign change on [{a}, {b}]: f = ({fa}, {fb})")
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if fb * fc > 0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * 2.2e-16 * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p, q = 2.0 * xm * s, 1.0 - s
            else:
                q, r = fa / fc, fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = float(f(b))
    raise NonConvergenceError(f"root not converged in {max_iter} iterations; last bracket [{b}, {c}]")


def scan_sign_changes(
    f: Callable[[np.ndarray], np.ndarray], grid: np.ndarray, limit: int | None = None
) -> list[Bracket]:
    """Brackets between consecutive grid points where a vectorised ``f`` changes sign."""
    vals = np.asarray(f(grid), dtype=float)
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    out = [Bracket(float(grid[i]), float(grid[i + 1])) for i in flips]
    return out if limit is None else out[:limit]


def bessel_zeros(order: int, count: int, derivative: bool = False) -> np.ndarray:
    """First ``count`` positive zeros of ``J_order`` (or of ``J'_order``).

    For ``J'_0`` the trivial zero at the origin is skipped.
    """
    fn = (lambda t: bessel_j_deriv(order, t)) if derivative else (lambda t: bessel_j(order, t))
    found: list[float] = []
    top = order + 4.0 * count + 10.0
    grid = np.arange(0.05, top, 0.05)
    for br in scan_sign_changes(fn, grid):
        found.append(find_root(fn, br))
        if len(found) == count:
            break
    if len(found) < count:
        raise RootFindingError(f"found only {len(found)} zeros below {top}")
    return np.array(found)
