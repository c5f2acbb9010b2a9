"""Special functions and half-line quadrature against dm(t) = t/(e^t - 1) dt.

Everything here is vectorized over numpy arrays unless noted.  The Laguerre
polynomials use the order-one normalization ``L_k^1(0) = k + 1``, which is the
one under which

    J_1(2 sqrt(st)) / sqrt(st) = sum_k L_k^1(t) s^k e^{-s} / (k+1)!

holds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special as sc

from .errors import AccuracyError, DomainError

PI2_6 = math.pi**2 / 6


# --- dilogarithm ---------------------------------------------------------------

_DILOG_TERMS = 60  # 2**-60 / 60**2 is far below double precision for |z| <= 1/2


def _dilog_series(z):
    # sum_{n>=1} z^n / n^2, Horner from the top term
    acc = np.zeros_like(z)
    for n in range(_DILOG_TERMS, 0, -1):
        acc = z * (1.0 / (n * n) + acc)
    return acc


def dilog(z):
    """Real dilogarithm Li_2(z) for 0 <= z <= 1.

    Uses the defining series for z <= 1/2 and the reflection
    Li_2(z) = pi^2/6 - ln z ln(1 - z) - Li_2(1 - z) above that.
    """
    za = np.asarray(z, dtype=float)
    if np.any(~((za >= 0.0) & (za <= 1.0))):
        raise DomainError("dilog is implemented for 0 <= z <= 1")
    scalar = za.ndim == 0
    za = np.atleast_1d(za)
    out = np.empty_like(za)
    lo = za <= 0.5
    out[lo] = _dilog_series(za[lo])
    hi = ~lo
    if np.any(hi):
        zh = za[hi]
        w = 1.0 - zh
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = np.where(w > 0.0, np.log(zh) * np.log1p(-zh), 0.0)
        out[hi] = PI2_6 - cross - _dilog_series(w)
    return float(out[0]) if scalar else out


# --- Bessel-ratio kernel -------------------------------------------------------

_BESSEL_SERIES_MAX = 4.0


def bessel_kernel(u):
    """G(u) = J_1(2 sqrt(u)) / sqrt(u) = sum_k (-u)^k / (k! (k+1)!), u >= 0.

    For u <= 4 the entire series is summed directly (cancellation is at most a
    factor e^4); beyond that J_1 is evaluated by scipy, where sqrt(u) >= 2 keeps
    the division harmless.
    """
    ua = np.asarray(u, dtype=float)
    if np.any(ua < 0):
        raise DomainError("bessel_kernel needs u >= 0")
    scalar = ua.ndim == 0
    ua = np.atleast_1d(ua)
    out = np.empty_like(ua)
    small = ua <= _BESSEL_SERIES_MAX
    us = ua[small]
    # terms t_k = (-u)^k/(k!(k+1)!); 40 terms reach 4^40/(40!41!) ~ 1e-73
    term = np.ones_like(us)
    acc = np.ones_like(us)
    comp = np.zeros_like(us)
    for k in range(1, 40):
        term = term * (-us) / (k * (k + 1))
        # Kahan-compensated accumulation
        yk = term - comp
        tk = acc + yk
        comp = (tk - acc) - yk
        acc = tk
    out[small] = acc
    ub = ua[~small]
    if ub.size:
        r = np.sqrt(ub)
        out[~small] = sc.j1(2.0 * r) / r
    return float(out[0]) if scalar else out


# --- Laguerre polynomials of order one -------------------------------------------

def laguerre_l1(k: int, t, damp: float = 0.0):
    """Generalized Laguerre polynomial L_k^1(t), optionally times exp(-damp*t).

    Three-term recurrence (n+1) L_{n+1} = (2n+2-t) L_n - (n+1) L_{n-1}.  With a
    ``Fraction`` argument the result is exact.  ``damp`` scales the starting
    values so large-t evaluations stay in range.
    """
    if k < 0:
        raise DomainError("Laguerre degree must be non-negative")
    if isinstance(t, (Fraction, int)) and not isinstance(t, bool) and damp == 0.0:
        t = Fraction(t)
        prev, cur = Fraction(0), Fraction(1)
        for n in range(k):
            prev, cur = cur, ((2 * n + 2 - t) * cur - (n + 1) * prev) / (n + 1)
        return cur
    ta = np.asarray(t, dtype=float)
    prev = np.zeros_like(ta)
    cur = np.exp(-damp * ta) if damp else np.ones_like(ta)
    for n in range(k):
        prev, cur = cur, ((2 * n + 2 - ta) * cur - (n + 1) * prev) / (n + 1)
    return float(cur) if np.ndim(cur) == 0 else cur


def laguerre_l1_explicit(k: int, t):
    """Explicit sum L_k^1(t) = sum_j (-1)^j C(k+1, k-j) t^j / j!  (exact for Fractions)."""
    if isinstance(t, (Fraction, int)):
        t = Fraction(t)
        return sum(Fraction((-1) ** j * math.comb(k + 1, k - j), math.factorial(j)) * t**j for j in range(k + 1))
    return sum((-1) ** j * math.comb(k + 1, k - j) * t**j / math.factorial(j) for j in range(k + 1))


def eta(k: int, s):
    """eta_k(s) = s^k e^{-s} / (k+1)!, evaluated in log space."""
    if k < 0:
        raise DomainError("eta index must be non-negative")
    sa = np.asarray(s, dtype=float)
    if np.any(sa < 0):
        raise DomainError("eta needs s >= 0")
    lg = math.lgamma(k + 2)
    with np.errstate(divide="ignore"):
        if k == 0:
            out = np.exp(-sa - lg)
        else:
            out = np.where(sa > 0, np.exp(k * np.log(np.where(sa > 0, sa, 1.0)) - sa - lg), 0.0)
    return float(out) if out.ndim == 0 else out


def dm_weight(t):
    """Density of dm: t/(e^t - 1), continuous at t = 0 with value 1."""
    ta = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.where(ta > 0, ta / np.expm1(np.where(ta > 0, ta, 1.0)), 1.0)
    return float(out) if out.ndim == 0 else out


# --- Gauss-Legendre panels -----------------------------------------------------

@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """n-point Gauss-Legendre nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_panel(a: float, b: float, n: int = 32):
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _panel_sum(g, a, b, n):
    t, w = gl_panel(a, b, n)
    return float(np.dot(w, g(t)))


def _adaptive_panel(g, a, b, tol, n, depth, budget):
    whole = _panel_sum(g, a, b, n)
    mid = 0.5 * (a + b)
    left = _panel_sum(g, a, mid, n)
    right = _panel_sum(g, mid, b, n)
    budget[0] -= 3
    err = abs(left + right - whole)
    if err <= tol or depth <= 0 or budget[0] <= 0:
        return left + right, err
    l, el = _adaptive_panel(g, a, mid, tol / 2, n, depth - 1, budget)
    r, er = _adaptive_panel(g, mid, b, tol / 2, n, depth - 1, budget)
    return l + r, el + er


def integrate_halfline(g, tol: float = 1e-12, n: int = 32, max_panels: int = 4000, t_max: float = 4096.0,
                       t_min: float = 0.0):
    """Integral of ``g`` over (0, inf) on panels [0,1], [1,2], [2,4], ....

    ``g`` must already contain any weight.  Each geometric panel is bisected
    adaptively until two-level Gauss-Legendre estimates agree.  Panels are
    appended until two consecutive ones contribute less than tol/10 in
    absolute value and the integrand at the panel end is below tol/10; the
    last panel's magnitude is added to the error budget as the tail estimate.
    No stop is taken before ``t_min``; integrands whose mass sits far from
    the origin (s^k e^{-s} with large k) must pass their peak location here.
    """
    total = 0.0
    err = 0.0
    budget = [max_panels]
    quiet = 0
    a, b = 0.0, 1.0
    while True:
        val, e = _adaptive_panel(g, a, b, tol / 20, n, 12, budget)
        total += val
        err += e
        tail_small = abs(val) < tol / 10 and abs(float(np.asarray(g(np.array([b])))[0])) * b < tol / 10
        quiet = quiet + 1 if tail_small and b >= t_min else 0
        if quiet >= 2:
            err += abs(val)
            break
        if budget[0] <= 0 or b >= t_max:
            raise AccuracyError(f"half-line quadrature did not settle by t={b}", total, err)
        a, b = b, 2.0 * b
    if err > tol:
        raise AccuracyError(f"half-line quadrature error {err:.3g} exceeds tol {tol:.3g}", total, err)
    return total


def integrate_dm(f, tol: float = 1e-12, **kw) -> float:
    """Integral of ``f`` against dm(t) = t/(e^t - 1) dt over (0, inf)."""
    return integrate_halfline(lambda t: f(t) * dm_weight(t), tol, **kw)


@dataclass(frozen=True)
class DmQuadrature:
    """Fixed composite rule for integrals against dm, built once and shared.

    ``integrate`` evaluates ``f`` on the stored nodes; it is exact to
    ``declared_tolerance`` for integrands whose growth stays well below e^t.
    """

    nodes: np.ndarray
    weights: np.ndarray
    declared_tolerance: float

    @classmethod
    def build(cls, cutoff: float = 64.0, n: int = 32, declared_tolerance: float = 1e-13):
        ts, ws = [], []
        a, b = 0.0, 0.5
        while a < cutoff:
            t, w = gl_panel(a, b, n)
            ts.append(t)
            ws.append(w)
            a, b = b, min(2.0 * b if b >= 1.0 else b + 0.5, cutoff)
        t = np.concatenate(ts)
        w = np.concatenate(ws) * dm_weight(t)
        t.setflags(write=False)
        w.setflags(write=False)
        return cls(t, w, declared_tolerance)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def matrix(self, values):
        """Weighted sums of a (..., n_nodes) array of integrand values."""
        return values @ self.weights


@lru_cache(maxsize=1)
def default_dm_rule() -> DmQuadrature:
    return DmQuadrature.build()


# --- tails of slowly convergent series -------------------------------------------

def power_sum_tail(s: float, a: float, terms: int = 6):
    """sum_{n>=0} (n + a)^{-s} for large a by Euler-Maclaurin.

    Returns ``(value, bound)``; for the completely monotone summand the error is
    bounded by the first omitted Bernoulli term.
    """
    # B_2j / (2j)!
    b2j = [1 / 12, -1 / 720, 1 / 30240, -1 / 1209600, 1 / 47900160, -691 / 1307674368000, 1 / 74724249600]
    val = a ** (1 - s) / (s - 1) + 0.5 * a ** (-s)
    poch = s  # rising product s (s+1) ... (s + 2j - 2)
    term = 0.0
    for j in range(1, terms + 1):
        term = b2j[j - 1] * poch * a ** (-s - 2 * j + 1)
        val += term
        poch *= (s + 2 * j - 1) * (s + 2 * j)
    bound = abs(b2j[terms] * poch * a ** (-s - 2 * terms - 1))
    return val, bound


def shifted_zeta(s: float, a: float, head: int = 32):
    """Hurwitz-type sum sum_{n>=0} (n + a)^{-s}, s > 1, a > 0: ``(value, bound)``."""
    n = np.arange(head, dtype=float)
    direct = math.fsum(((n + a) ** (-s)).tolist())
    tail, bound = power_sum_tail(s, a + head)
    value = direct + tail
    # two roundings (the fsum result and the final add) on top of the truncation bound
    return value, bound + 4.5e-16 * abs(value)
