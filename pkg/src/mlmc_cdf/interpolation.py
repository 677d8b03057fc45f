"""Blockwise polynomial interpolation on equidistant knots and monotone repair.

The interpolant on ``k_n`` knots is built from non-overlapping blocks of
``r + 1`` consecutive knots, one Lagrange polynomial of degree ``r`` per
block.  Two clamps then turn it into a valid distribution function: the
knot values are forced into a nondecreasing ``[0, 1]`` sequence, and inside
each knot interval the polynomial is replaced by the mean of its capped
running maximum and floored running minimum.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

__all__ = [
    "KnotGrid",
    "PiecewisePolynomial",
    "MonotoneCdf",
    "LEBESGUE_CUBIC",
    "make_grid",
    "interpolate",
    "lebesgue_constant",
    "monotone_correct_values",
    "monotone_correct_function",
    "monotone_cdf",
    "sup_distance",
]

#: Lipschitz constant of cubic interpolation at four equidistant nodes.
LEBESGUE_CUBIC = 7.0 * (2.0 * math.sqrt(7.0) + 1.0) / 27.0

MESH_PER_INTERVAL = 64


@dataclass(frozen=True)
class KnotGrid:
    s0: float
    s1: float
    n: int
    r: int
    k: int
    knots: np.ndarray

    @property
    def spacing(self) -> float:
        return (self.s1 - self.s0) / (self.k - 1)

    @property
    def block_width(self) -> float:
        """Length of one interpolation block of ``r`` knot intervals."""
        return self.spacing * self.degree

    @property
    def degree(self) -> int:
        return max(self.r, 1)


def knot_count(n: int, r: int) -> int:
    return -(-(2**n) // r) * r + 1


def make_grid(n: int, r: int, s0: float, s1: float) -> KnotGrid:
    """Equidistant grid with ``ceil(2**n / r) * r + 1`` knots on ``[s0, s1]``."""
    if r < 1:
        raise ValueError("interpolation degree r must be at least 1")
    if n < 0 or 2 ** (n + 1) <= r:
        raise ValueError(f"need 2**(n+1) > r, got n={n}, r={r}")
    if not s0 < s1:
        raise ValueError(f"need s0 < s1, got [{s0}, {s1}]")
    k = knot_count(n, r)
    j = np.arange(k)
    knots = s0 + j * (s1 - s0) / (k - 1)
    knots[-1] = s1
    return KnotGrid(float(s0), float(s1), int(n), int(r), k, knots)


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Piecewise polynomial on ``breakpoints``.

    Row ``i`` of ``coeffs`` holds ascending-power coefficients of the piece
    on ``[breakpoints[i], breakpoints[i+1]]`` in the local variable
    ``x - breakpoints[i]``.
    """

    breakpoints: np.ndarray
    coeffs: np.ndarray

    @property
    def s0(self) -> float:
        return float(self.breakpoints[0])

    @property
    def s1(self) -> float:
        return float(self.breakpoints[-1])

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        xs = np.clip(x_arr, self.s0, self.s1)
        i = np.clip(np.searchsorted(self.breakpoints, xs, side="right") - 1, 0, len(self.coeffs) - 1)
        dx = xs - self.breakpoints[i]
        c = self.coeffs[i]
        out = c[..., -1]
        for d in range(self.coeffs.shape[1] - 2, -1, -1):
            out = out * dx + c[..., d]
        return float(out) if out.ndim == 0 else out

    def piece(self, i: int) -> np.ndarray:
        return self.coeffs[i]

    def to_csv(self, fh=None) -> str:
        """Rows ``(left, right, c0, c1, ...)`` in local ascending powers."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        deg = self.coeffs.shape[1]
        w.writerow(["left", "right"] + [f"c{d}" for d in range(deg)])
        for i, row in enumerate(self.coeffs):
            w.writerow([repr(float(self.breakpoints[i])), repr(float(self.breakpoints[i + 1]))]
                       + [repr(float(v)) for v in row])
        return buf.getvalue() if fh is None else ""


class MonotoneCdf(PiecewisePolynomial):
    """Nondecreasing, ``[0, 1]``-valued piecewise polynomial.

    Produced by :func:`monotone_correct_function`; flat stretches from the
    running max/min repair are stored as constant pieces.
    """

    knots: np.ndarray

    def __init__(self, breakpoints, coeffs, knots):
        object.__setattr__(self, "breakpoints", np.asarray(breakpoints, float))
        object.__setattr__(self, "coeffs", np.asarray(coeffs, float))
        object.__setattr__(self, "knots", np.asarray(knots, float))


def _shift(coeffs: np.ndarray, c: float) -> np.ndarray:
    """Coefficients of ``q(x + c)`` given those of ``q(x)`` (Taylor shift)."""
    out = np.array([coeffs[-1]], dtype=float)
    for a in coeffs[-2::-1]:
        out = P.polyadd(P.polymul(out, [c, 1.0]), [a])
    res = np.zeros(len(coeffs))
    res[: len(out)] = out
    return res


def interpolate(grid: KnotGrid, values) -> PiecewisePolynomial:
    """Blockwise Lagrange interpolation of ``values`` at the knots of ``grid``.

    Reproduces every polynomial of degree ``<= r`` exactly.
    """
    y = np.asarray(values, dtype=float)
    if y.shape != (grid.k,):
        raise ValueError(f"expected {grid.k} knot values, got shape {y.shape}")
    deg = grid.degree
    nseg = grid.k - 1
    coeffs = np.zeros((nseg, deg + 1))
    h = grid.spacing
    # local unit-spacing nodes make the Vandermonde solve well conditioned
    unit = np.arange(deg + 1, dtype=float)
    inv = np.linalg.inv(np.vander(unit, increasing=True))
    scale = h ** -np.arange(deg + 1)
    for b in range(nseg // deg):
        j0 = b * deg
        c_unit = inv @ y[j0 : j0 + deg + 1]
        c_block = c_unit * scale
        for q in range(deg):
            coeffs[j0 + q] = _shift(c_block, q * h)
    return PiecewisePolynomial(grid.knots.copy(), coeffs)


def lebesgue_constant(r: int, samples: int = 200001) -> float:
    """Sup-norm Lipschitz constant of degree-``r`` equidistant block interpolation."""
    deg = max(r, 1)
    if deg == 3:
        return LEBESGUE_CUBIC
    x = np.linspace(0.0, deg, samples)
    total = np.zeros_like(x)
    nodes = np.arange(deg + 1, dtype=float)
    for i in range(deg + 1):
        others = np.delete(nodes, i)
        total += np.abs(np.prod((x[:, None] - others) / (nodes[i] - others), axis=1))
    return float(total.max())


def monotone_correct_values(y) -> np.ndarray:
    """Average of the forward and backward clamps of ``y`` into ``[0, 1]``.

    The result is nondecreasing, lies in ``[0, 1]`` and leaves data that
    already has both properties unchanged.
    """
    y = np.asarray(y, dtype=float)
    u = np.minimum(np.maximum.accumulate(np.maximum(y, 0.0)), 1.0)
    v = np.maximum(np.minimum.accumulate(np.minimum(y, 1.0)[::-1])[::-1], 0.0)
    return 0.5 * (u + v)


# --- running max / min of a polynomial piece ---------------------------------

def _critical_points(c: np.ndarray, length: float) -> list[float]:
    d = np.trim_zeros(P.polyder(c), "b")
    if d.size <= 1:
        return []
    if d.size == 2:
        roots = [-d[0] / d[1]]
    elif d.size == 3:
        # quadratic derivative of a cubic piece, stable closed form
        a0, a1, a2 = d
        disc = a1 * a1 - 4 * a2 * a0
        if disc < 0:
            return []
        q = -0.5 * (a1 + math.copysign(math.sqrt(disc), a1))
        roots = [q / a2] + ([a0 / q] if q != 0 else [])
    else:
        roots = [z.real for z in np.roots(d[::-1]) if abs(z.imag) <= 1e-12 * max(1.0, abs(z))]
    return sorted({float(z) for z in roots if 0.0 < z < length})


def _crossing(c: np.ndarray, level: float, lo: float, hi: float) -> float:
    f = lambda x: P.polyval(x, c) - level
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0 or flo * fhi > 0:
        return hi if abs(fhi) <= abs(flo) else lo
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _running_max_capped(c: np.ndarray, length: float, cap: float):
    """Pieces ``(a, b, kind, value)`` of ``min(max_{[0,x]} q, cap)`` on ``[0, length]``.

    ``kind`` is ``'poly'`` (follows ``q``) or ``'const'`` (flat at ``value``).
    """
    pts = [0.0] + _critical_points(c, length) + [length]
    out = []
    run = P.polyval(0.0, c)
    for a, b in zip(pts[:-1], pts[1:]):
        qa, qb = P.polyval(a, c), P.polyval(b, c)
        if qb <= qa or qb <= run or run >= cap:
            # decreasing piece or never exceeding the running max
            out.append((a, b, "const", min(run, cap)))
            continue
        x_on = a if qa >= run else _crossing(c, run, a, b)
        if x_on > a:
            out.append((a, x_on, "const", min(run, cap)))
        if qb <= cap:
            out.append((x_on, b, "poly", None))
            run = qb
        else:
            x_cap = _crossing(c, cap, x_on, b)
            if x_cap > x_on:
                out.append((x_on, x_cap, "poly", None))
            out.append((x_cap, b, "const", cap))
            run = cap
    return out


def _running_min_floored(c: np.ndarray, length: float, floor: float):
    """Pieces of ``max(min_{[x,length]} q, floor)``, via reflection of the max case."""
    # q~(x) = -q(length - x) turns the right-anchored running min into a running max
    flipped = -_shift(c, length) * ((-1.0) ** np.arange(len(c)))
    pieces = _running_max_capped(flipped, length, -floor)
    out = []
    for a, b, kind, val in reversed(pieces):
        out.append((length - b, length - a, kind, None if val is None else -val))
    return out


def _merge_half_sum(c, f_pieces, h_pieces, length):
    """Local pieces ``(a, b, coeffs in x - a)`` of ``(f + h) / 2``."""
    cuts = sorted({0.0, length} | {x for p in f_pieces + h_pieces for x in p[:2]})

    def at(pieces, x):
        return next((p for p in pieces if p[0] <= x <= p[1]), pieces[-1])[2:]

    result = []
    tol = 1e-13 * length
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= tol:
            continue
        shifted = _shift(c, a)
        poly = np.zeros(len(c))
        for kind, val in (at(f_pieces, 0.5 * (a + b)), at(h_pieces, 0.5 * (a + b))):
            if kind == "poly":
                poly += 0.5 * shifted
            else:
                poly[0] += 0.5 * val
        result.append((a, b, poly))
    return result


def monotone_correct_function(phi: PiecewisePolynomial, grid: Optional[KnotGrid] = None) -> MonotoneCdf:
    """Replace ``phi`` on each knot interval by ``(f + h) / 2``.

    ``f`` is the running maximum from the left end capped at the right-end
    value, ``h`` the running minimum from the right end floored at the
    left-end value.  The output agrees with ``phi`` at all knots and is
    nondecreasing whenever the knot values are.
    """
    bps, coeffs = phi.breakpoints, phi.coeffs
    new_bps = [float(bps[0])]
    new_coeffs = []
    for i in range(len(coeffs)):
        c = coeffs[i]
        length = float(bps[i + 1] - bps[i])
        left, right = P.polyval(0.0, c), P.polyval(length, c)
        f_pieces = _running_max_capped(c, length, right)
        h_pieces = _running_min_floored(c, length, left)
        for a, b, poly in _merge_half_sum(c, f_pieces, h_pieces, length):
            new_coeffs.append(poly)
            new_bps.append(float(bps[i]) + b)
        new_bps[-1] = float(bps[i + 1])
    knots = grid.knots if grid is not None else bps
    return MonotoneCdf(np.array(new_bps), np.array(new_coeffs), knots)


def monotone_cdf(grid: KnotGrid, values) -> MonotoneCdf:
    """Full post-processing: value clamp, interpolation, function clamp."""
    corrected = monotone_correct_values(values)
    return monotone_correct_function(interpolate(grid, corrected), grid)


def _mesh(knots: np.ndarray, per_interval: int, extra: Iterable[float] = ()) -> np.ndarray:
    frac = np.arange(per_interval) / per_interval
    pts = (knots[:-1, None] + np.diff(knots)[:, None] * frac[None, :]).ravel()
    return np.unique(np.concatenate([pts, knots, np.asarray(list(extra), dtype=float)]))


def sup_distance(a: Callable, b: Callable, grid, extra_points: Iterable[float] = (),
                 per_interval: int = MESH_PER_INTERVAL) -> float:
    """Max of ``|a - b|`` over a mesh of ``per_interval`` points per knot interval.

    The mesh includes all knots (and ``extra_points``), so the value is a
    lower bound for the true sup-norm distance.
    """
    knots = grid.knots if hasattr(grid, "knots") else np.asarray(grid, dtype=float)
    x = _mesh(np.asarray(knots, float), per_interval, extra_points)
    return float(np.max(np.abs(np.asarray(a(x), float) - np.asarray(b(x), float))))
