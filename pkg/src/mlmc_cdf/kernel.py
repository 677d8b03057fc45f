"""Smoothed indicator functions and their fast weighted accumulation.

The smoothing function ``g`` equals 1 left of -1, 0 right of 1 and a
polynomial ``p`` in between.  ``p`` is fixed by ``p(-1) = 1``, ``p(1) = 0``
and ``r`` moment conditions, so that replacing the indicator of
``]-inf, s]`` by ``g((. - s) / delta)`` costs only ``O(delta**(r+1))`` bias
for densities that are ``r`` times differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "SmoothingPolynomial",
    "SmoothedIndicatorGrid",
    "OpCounter",
    "build_kernel",
    "eval_g",
    "eval_vector",
    "eval_matrix",
    "accumulate_weighted",
    "naive_accumulate",
]


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan elimination over the rationals."""
    n = len(b)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = next((i for i in range(col, n) if m[i][col] != 0), None)
        if pivot is None:
            raise ArithmeticError("singular moment system for the smoothing polynomial")
        m[col], m[pivot] = m[pivot], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for i in range(n):
            if i != col and m[i][col] != 0:
                f = m[i][col]
                m[i] = [vi - f * vc for vi, vc in zip(m[i], m[col])]
    return [row[n] for row in m]


@dataclass(frozen=True)
class SmoothingPolynomial:
    """The polynomial part of ``g`` on ``[-1, 1]``.

    ``exact`` holds the rational coefficients in ascending powers, ``coeffs``
    the same values as doubles.
    """

    r: int
    exact: tuple[Fraction, ...]
    coeffs: np.ndarray = field(repr=False, compare=False)

    @property
    def degree(self) -> int:
        nz = [i for i, c in enumerate(self.exact) if c != 0]
        return nz[-1] if nz else 0

    def __call__(self, s):
        return eval_g(self, s)

    def moment(self, j: int) -> Fraction:
        """Exact value of the integral of ``s**j * p(s)`` over ``[-1, 1]``."""
        return sum(
            (c * Fraction(2, i + j + 1) for i, c in enumerate(self.exact) if (i + j) % 2 == 0),
            Fraction(0),
        )


def build_kernel(r: int) -> SmoothingPolynomial:
    """Return the smoothing polynomial of order ``r``.

    Solves the ``r + 2`` linear conditions exactly, so the coefficients are
    rationals; e.g. ``r = 3`` gives ``1/2 - 9/8 s + 5/8 s**3``.  For even
    ``r`` the result coincides with the one for ``r + 1``.
    """
    if int(r) != r or r < 0:
        raise ValueError(f"smoothness order must be a nonnegative integer, got {r!r}")
    r = int(r)
    size = r + 2
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for j in range(r):
        rows.append(
            [Fraction(2, i + j + 1) if (i + j) % 2 == 0 else Fraction(0) for i in range(size)]
        )
        rhs.append(Fraction((-1) ** j, j + 1))
    rows.append([Fraction(1)] * size)
    rhs.append(Fraction(0))
    rows.append([Fraction((-1) ** i) for i in range(size)])
    rhs.append(Fraction(1))
    exact = _solve_exact(rows, rhs)
    while len(exact) > 1 and exact[-1] == 0:
        exact.pop()
    exact = tuple(exact)
    return SmoothingPolynomial(r=r, exact=exact, coeffs=np.array([float(c) for c in exact]))


def _horner(coeffs: np.ndarray, s):
    out = np.zeros_like(s, dtype=float) + coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * s + c
    return out


def eval_g(kernel: SmoothingPolynomial, s):
    """Evaluate ``g`` at scalar or array ``s``."""
    s_arr = np.asarray(s, dtype=float)
    out = _horner(kernel.coeffs, np.clip(s_arr, -1.0, 1.0))
    out = np.where(s_arr < -1.0, 1.0, np.where(s_arr > 1.0, 0.0, out))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SmoothedIndicatorGrid:
    """Equidistant knots ``s_1 < ... < s_k`` together with a width ``delta``.

    ``delta == 0`` selects the raw indicators of ``]-inf, s_j]``.
    """

    knots: np.ndarray
    delta: float

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if knots.ndim != 1 or knots.size < 1:
            raise ValueError("knots must be a nonempty 1-d array")
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if knots.size > 1 and np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")

    @classmethod
    def uniform(cls, s0: float, s1: float, k: int, delta: float) -> "SmoothedIndicatorGrid":
        if k == 1:
            return cls(np.array([float(s0)]), delta)
        j = np.arange(k)
        return cls(s0 + j * (s1 - s0) / (k - 1), delta)

    @property
    def k(self) -> int:
        return self.knots.size

    @property
    def spacing(self) -> float:
        return float(self.knots[1] - self.knots[0]) if self.k > 1 else np.inf

    def is_equidistant(self, rtol: float = 1e-12) -> bool:
        if self.k <= 2:
            return True
        d = np.diff(self.knots)
        return bool(np.all(np.abs(d - d.mean()) <= rtol * np.abs(d.mean()) + 1e-15))

    def with_delta(self, delta: float) -> "SmoothedIndicatorGrid":
        return SmoothedIndicatorGrid(self.knots, delta)


def eval_vector(grid: SmoothedIndicatorGrid, kernel: SmoothingPolynomial, t: float) -> np.ndarray:
    """The k-vector ``(g((t - s_j) / delta))_j``; indicators when ``delta == 0``."""
    return eval_matrix(grid, kernel, np.array([t], dtype=float))[0]


def eval_matrix(grid: SmoothedIndicatorGrid, kernel: SmoothingPolynomial, t) -> np.ndarray:
    """Row ``i`` is ``eval_vector`` at ``t[i]``; dense, O(N k) memory."""
    t = np.asarray(t, dtype=float)[:, None]
    if grid.delta == 0:
        return (t <= grid.knots[None, :]).astype(float)
    return eval_g(kernel, (t - grid.knots[None, :]) / grid.delta)


def naive_accumulate(grid, kernel, weights, points) -> np.ndarray:
    """Reference ``sum_i a_i * g^{k,delta}(t_i)`` by an explicit double loop."""
    out = np.zeros(grid.k)
    for a, t in zip(np.asarray(weights, float), np.asarray(points, float)):
        out += a * eval_vector(grid, kernel, t)
    return out


@dataclass
class OpCounter:
    """Tally of basic operations spent in :func:`accumulate_weighted`.

    One unit per point for locating its knot index, one per knot touched in
    the local window and one per prefix-sum step.
    """

    ops: int = 0


def _first_above(knots: np.ndarray, s0: float, h: float, x: np.ndarray, strict: bool) -> np.ndarray:
    """Index of the first knot ``> x`` (``>= x`` if not strict), in O(1) per point.

    The arithmetic guess is corrected by one step against the stored knots,
    so the result agrees with ``np.searchsorted`` exactly.
    """
    k = knots.size
    with np.errstate(invalid="ignore", over="ignore"):
        guess = np.floor((x - s0) / h) + 1
    j = np.clip(np.nan_to_num(guess, nan=0.0, posinf=k, neginf=0), 0, k).astype(np.int64)
    padded = np.concatenate(([-np.inf], knots, [np.inf]))
    # padded[j] is knot j-1 and padded[j + 1] is knot j
    if strict:
        for _ in range(2):
            down = padded[j] > x
            j = np.where(down, j - 1, j)
            up = padded[j + 1] <= x
            j = np.where(up, j + 1, j)
    else:
        for _ in range(2):
            down = padded[j] >= x
            j = np.where(down, j - 1, j)
            up = padded[j + 1] < x
            j = np.where(up, j + 1, j)
    return np.clip(j, 0, k)


def accumulate_weighted(
    grid: SmoothedIndicatorGrid,
    kernel: SmoothingPolynomial,
    weights,
    points,
    counter: Optional[OpCounter] = None,
) -> np.ndarray:
    """Compute ``sum_i a_i * g^{k,delta}(t_i)`` in ``O(k + N * max(k delta, 1))``.

    Every component ``j`` with ``s_j > t + delta`` contributes the constant 1.
    Those contributions are tallied at the first such index and recovered by
    one cumulative sum; only the knots inside ``[t - delta, t + delta]`` need
    an explicit kernel evaluation.  With ``delta == 0`` the window is empty
    and the tally index is the first knot ``>= t``.
    """
    if not grid.is_equidistant():
        raise ValueError("accumulate_weighted requires equidistant knots")
    a = np.asarray(weights, dtype=float).ravel()
    t = np.asarray(points, dtype=float).ravel()
    if a.shape != t.shape:
        raise ValueError("weights and points must have the same length")
    knots, k, delta = grid.knots, grid.k, grid.delta
    h = grid.spacing if k > 1 else 1.0
    s0 = float(knots[0])
    n = t.size

    if delta == 0:
        start = _first_above(knots, s0, h, t, strict=False)
    else:
        start = _first_above(knots, s0, h, t + delta, strict=True)
    tally = np.bincount(start, weights=a, minlength=k + 1)[:k]
    out = np.cumsum(tally)
    ops = n + k

    if delta > 0 and n:
        lo = _first_above(knots, s0, h, t - delta, strict=False)
        width = start - lo
        wmax = int(width.max()) if width.size else 0
        ops += int(width.sum())
        if wmax > 0:
            # chunk so the (points x window) scratch stays bounded
            step = max(1, (1 << 20) // wmax)
            offs = np.arange(wmax)
            for b in range(0, n, step):
                sl = slice(b, b + step)
                idx = lo[sl, None] + offs[None, :]
                valid = offs[None, :] < width[sl, None]
                idx_c = np.where(valid, idx, 0)
                vals = eval_g(kernel, (t[sl, None] - knots[idx_c]) / delta)
                contrib = np.where(valid, vals * a[sl, None], 0.0)
                out += np.bincount(idx_c.ravel(), weights=contrib.ravel(), minlength=k)[:k]
    if counter is not None:
        counter.ops += ops
    return out
