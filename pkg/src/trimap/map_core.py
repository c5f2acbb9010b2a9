"""The triangle map on the open triangle {1 > x > y > 0}.

Points come in two flavors: :class:`TrianglePoint` (doubles) and
:class:`RationalTrianglePoint` (``fractions.Fraction``).  Every operation
accepts either and returns the same flavor it was given.

The map acts on the cell ``k`` (points with ``1 - x - k*y >= 0 > 1 - x - (k+1)*y``)
by ``(x, y) -> (y/x, (1 - x - k*y)/x)``.  An image with second coordinate zero
lies on the boundary of the triangle; expansion stops there and the sequence
is marked terminated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Union

import numba
import numpy as np

from .errors import DomainError

# |1 - x - k*y| (or its distance to y) below this triggers the exact digit path.
BOUNDARY_GUARD = 1e-14


def _check_open_triangle(x, y):
    if not (1 > x > y > 0):
        raise DomainError(f"point ({x}, {y}) is not in the open triangle 1 > x > y > 0")


@dataclass(frozen=True)
class TrianglePoint:
    x: float
    y: float

    def __post_init__(self):
        x, y = float(self.x), float(self.y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DomainError(f"non-finite coordinates ({x}, {y})")
        _check_open_triangle(x, y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def as_tuple(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class RationalTrianglePoint:
    x: Fraction
    y: Fraction

    def __post_init__(self):
        x, y = Fraction(self.x), Fraction(self.y)
        _check_open_triangle(x, y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def as_tuple(self):
        return (self.x, self.y)

    def to_float(self) -> TrianglePoint:
        return TrianglePoint(float(self.x), float(self.y))


Point = Union[TrianglePoint, RationalTrianglePoint]


def make_point(x, y) -> Point:
    """Build the point flavor matching the coordinate types."""
    if isinstance(x, (Fraction, int)) and isinstance(y, (Fraction, int)):
        return RationalTrianglePoint(Fraction(x), Fraction(y))
    return TrianglePoint(x, y)


def parse_point(text: str, exact: bool = False) -> Point:
    """Parse ``"x,y"`` where each coordinate is a decimal or a fraction ``p/q``.

    With ``exact=True`` decimals are read as exact rationals (``"0.8"`` -> 4/5).
    """
    parts = text.split(",")
    if len(parts) != 2:
        raise DomainError(f"malformed point literal {text!r}; expected 'x,y'")
    try:
        coords = [Fraction(p.strip()) for p in parts]
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"malformed point literal {text!r}: {exc}") from None
    if exact:
        return RationalTrianglePoint(*coords)
    if any("/" in p for p in parts):
        return TrianglePoint(float(coords[0]), float(coords[1]))
    return TrianglePoint(float(parts[0]), float(parts[1]))


class StepResult(NamedTuple):
    digit: int
    image: Optional[Point]  # None when the image is on the boundary
    near_boundary: bool = False

    @property
    def terminated(self) -> bool:
        return self.image is None


@dataclass
class TriangleSequence:
    digits: list = field(default_factory=list)
    terminated: bool = False
    final: Optional[Point] = None
    near_boundary_steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.digits)


def _exact_digit(x: Fraction, y: Fraction) -> int:
    # floor((1-x)/y); the closed inequality 1 - x - k*y >= 0 keeps the lower k on ties
    return int((1 - x) // y)


def _float_digit(x: float, y: float):
    """Digit and remainder ``1 - x - k*y`` for a double point, plus a near-boundary flag."""
    q = (1.0 - x) / y
    if not q < 2.0**52:
        # the quotient no longer resolves integers (or overflowed): settle it exactly
        fx, fy = Fraction(x), Fraction(y)
        k = _exact_digit(fx, fy)
        return k, float(1 - fx - k * fy), False
    k = int(math.floor(q))
    r = 1.0 - x - k * y
    if r < 0.0:
        k -= 1
        r += y
    elif r >= y:
        k += 1
        r -= y
    if abs(r) < BOUNDARY_GUARD or abs(y - r) < BOUNDARY_GUARD:
        # doubles are exact rationals, so this settles the cell without rounding
        fx, fy = Fraction(x), Fraction(y)
        k = _exact_digit(fx, fy)
        r = float(1 - fx - k * fy)
        return k, r, True
    return k, r, False


def classify_digit(p: Point) -> int:
    """Index ``k`` of the cell containing ``p``; equals ``floor((1 - x)/y)``."""
    if isinstance(p, RationalTrianglePoint):
        return _exact_digit(p.x, p.y)
    return _float_digit(p.x, p.y)[0]


def step(p: Point) -> StepResult:
    """One application of the map.  Boundary images give ``image=None``."""
    if isinstance(p, RationalTrianglePoint):
        k = _exact_digit(p.x, p.y)
        r = 1 - p.x - k * p.y
        if r == 0:
            return StepResult(k, None)
        return StepResult(k, RationalTrianglePoint(p.y / p.x, r / p.x))
    k, r, near = _float_digit(p.x, p.y)
    nx, ny = p.y / p.x, r / p.x
    if not (ny > 0.0 and nx > ny and nx < 1.0):
        return StepResult(k, None, near)
    return StepResult(k, TrianglePoint(nx, ny), near)


def expand_sequence(p: Point, n_max: int) -> TriangleSequence:
    """First ``n_max`` digits of the triangle sequence of ``p``.

    The rational flavor is exact.  The double flavor is subject to the usual
    shadowing drift: its digits may part from the exact ones after a few
    dozen steps, since each step amplifies rounding error.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    seq = TriangleSequence(final=p)
    cur = p
    for i in range(n_max):
        res = step(cur)
        seq.digits.append(res.digit)
        if res.near_boundary:
            seq.near_boundary_steps.append(i)
        if res.terminated:
            seq.terminated = True
            seq.final = None
            break
        cur = res.image
        seq.final = cur
    return seq


def inverse_branch(k: int, p: Point) -> Point:
    """The ``k``-th inverse branch ``(1/(1+kx+y), x/(1+kx+y))``; lands in cell ``k``."""
    if k < 0:
        raise DomainError("branch index must be non-negative")
    d = 1 + k * p.x + p.y
    if isinstance(p, RationalTrianglePoint):
        return RationalTrianglePoint(1 / d, p.x / d)
    return TrianglePoint(1.0 / d, p.x / d)


def inverse_branch_arrays(k, x, y):
    """Vectorized inverse branch on coordinate arrays (no domain checks)."""
    d = 1.0 + k * x + y
    return 1.0 / d, x / d


def jacobian_det(p: Point):
    """Jacobian determinant of the map at ``p``: ``1/x**3`` on every branch."""
    return 1 / p.x ** 3


def jacobian_det_fd(p: TrianglePoint, h: float = 1e-5) -> float:
    """Central-difference determinant of the branch containing ``p``."""
    k = classify_digit(p)

    def branch(x, y):
        return np.array([y / x, (1.0 - x - k * y) / x])

    dfdx = (branch(p.x + h, p.y) - branch(p.x - h, p.y)) / (2 * h)
    dfdy = (branch(p.x, p.y + h) - branch(p.x, p.y - h)) / (2 * h)
    return float(dfdx[0] * dfdy[1] - dfdx[1] * dfdy[0])


def boundary_distance(p: Point) -> float:
    """Euclidean distance from ``p`` to the nearer wall of its cell (as a double)."""
    k = classify_digit(p)
    r = 1 - p.x - k * p.y
    return min(float(r) / math.hypot(1, k), float(p.y - r) / math.hypot(1, k + 1))


def float_reliable_prefix(p: RationalTrianglePoint, n_max: int, eps: float = 2.0 ** -52) -> int:
    """Number of leading steps on which a double orbit of ``p`` provably keeps the exact digits.

    Propagates a first-order error radius through the Frobenius norm of each
    branch derivative and stops at the first exact iterate whose distance to a
    cell wall does not exceed four times that radius.  A terminating orbit's
    last step (which lands on a wall) is never counted.
    """
    err = 2 * eps
    cur = p
    count = 0
    for _ in range(n_max):
        if 4 * err >= boundary_distance(cur):
            break
        k = classify_digit(cur)
        x, y = float(cur.x), float(cur.y)
        dnorm = math.sqrt((y / x**2) ** 2 + (1 / x) ** 2 + ((k * y - 1) / x**2) ** 2 + (k / x) ** 2)
        err = dnorm * err + 2 * eps * (1 + k)
        res = step(cur)
        count += 1
        if res.terminated:
            break
        cur = res.image
    return count


# --- compiled orbit kernel ---------------------------------------------------

@numba.njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@numba.njit(cache=True, inline="always")
def _split(a):
    c = 134217729.0 * a  # 2**27 + 1
    hi = c - (c - a)
    return hi, a - hi


@numba.njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@numba.njit(cache=True)
def _compensated_remainder(x, y, k):
    s, e1 = _two_sum(1.0, -x)
    p, e2 = _two_prod(float(k), y)
    d, e3 = _two_sum(s, -p)
    return d + ((e1 - e2) + e3)


@numba.njit(cache=True, nogil=True)
def orbit_tally(x, y, n, k_max):
    """Run ``n`` double-precision steps from ``(x, y)``.

    Returns ``(counts, near, steps, terminated)`` where ``counts[k]`` tallies digit
    ``k`` for ``k <= k_max`` and ``counts[k_max + 1]`` everything larger.
    """
    counts = np.zeros(k_max + 2, np.int64)
    near = 0
    for i in range(n):
        q = (1.0 - x) / y
        if q > 9.0e15:
            k = 9007199254740992
        else:
            k = int(math.floor(q))
        r = 1.0 - x - k * y
        if r < 0.0:
            k -= 1
            r += y
        elif r >= y:
            k += 1
            r -= y
        if abs(r) < 1e-14 or abs(y - r) < 1e-14:
            near += 1
            r = _compensated_remainder(x, y, k)
            if r < 0.0:
                k -= 1
                r = _compensated_remainder(x, y, k)
            elif r >= y:
                k += 1
                r = _compensated_remainder(x, y, k)
        if k > k_max:
            counts[k_max + 1] += 1
        else:
            counts[k] += 1
        nx = y / x
        ny = r / x
        if not (ny > 0.0 and nx > ny):
            return counts, near, i + 1, True
        x = nx
        y = ny
    return counts, near, n, False
