"""Geometry and singular quadrature for the repulsive-weight space.

The object of study is R^n carrying the Euclidean metric and the weight

    w_beta(x) = prod_{i<j} |x_i - x_j|^beta,      beta > 0,

the invariant density of Dyson Brownian motion with inverse temperature
beta.  The weight vanishes on the diagonal set S = union_{i<j} {x_i = x_j};
everything interesting in this package happens near S.  This module owns

* the weight, its logarithmic gradient (the Dyson drift up to a factor),
* charts adapted to S (signed distance + foot point on the nearest
  hyperplane) and the ordering sector of a configuration,
* Gauss--Jacobi rules and a graded-mesh integrator for 1-D integrals with
  an algebraic endpoint singularity |t|^alpha, the workhorse of all
  capacity and weak-Bochner computations downstream.

All functions are pure; values are immutable and safe to share across
processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "ModelParams",
    "Configuration",
    "SingularChart",
    "QuadratureRule",
    "SingularSetError",
    "QuadratureConvergenceError",
    "weight",
    "grad_log_weight",
    "singular_distance",
    "singular_chart",
    "sector_of",
    "gauss_jacobi_rule",
    "integrate_graded",
]

#: gaps below this are treated as lying on the diagonal set
GAP_GUARD = 1e-300


class SingularSetError(ValueError):
    """Raised when an operation requires a configuration off the diagonal set."""


class QuadratureConvergenceError(RuntimeError):
    """Graded integration did not reach the requested tolerance.

    Carries the best value and its error estimate in ``value`` / ``error``.
    """

    def __init__(self, msg: str, value: float, error: float):
        super().__init__(msg)
        self.value = value
        self.error = error


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: particle count, inverse temperature, dimension bound.

    ``N = math.inf`` is the distinguished infinite-dimension value; every
    formula containing 1/(N - n) maps it to 0.  ``K`` is a curvature shift
    carried along for gradient-estimate checks.
    """

    n: int
    beta: float
    N: float = math.inf
    K: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")
        if not self.beta > 0:
            raise ValueError(f"need beta > 0, got {self.beta}")
        if math.isfinite(self.N) and not self.N > self.n:
            raise ValueError(f"finite N must exceed n: N={self.N}, n={self.n}")

    @property
    def inv_excess_dim(self) -> float:
        """1/(N - n), exactly 0 for N = inf."""
        return 0.0 if math.isinf(self.N) else 1.0 / (self.N - self.n)


@dataclass(frozen=True)
class Configuration:
    """A point of R^n.  Coordinates are stored as an immutable tuple."""

    coords: tuple

    def __init__(self, coords):
        arr = np.asarray(coords, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("configuration must be a nonempty 1-D point")
        if not np.all(np.isfinite(arr)):
            raise ValueError("configuration coordinates must be finite")
        object.__setattr__(self, "coords", tuple(arr.tolist()))

    @property
    def n(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def min_gap(self) -> float:
        x = self.array()
        d = np.abs(x[:, None] - x[None, :])
        iu = np.triu_indices(self.n, k=1)
        return float(d[iu].min()) if iu[0].size else math.inf

    def on_singular_set(self, guard: float = GAP_GUARD) -> bool:
        return self.n > 1 and self.min_gap() < guard


def _as_array(x) -> np.ndarray:
    if isinstance(x, Configuration):
        return x.array()
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a 1-D configuration")
    return arr


@dataclass(frozen=True)
class SingularChart:
    """Nearest-hyperplane chart of a configuration.

    ``pair = (i, j)`` (0-based, i < j) is the closest pair, ``t`` the signed
    distance to the hyperplane {x_i = x_j} (sign of x_i - x_j), and ``h`` the
    orthogonal projection onto that hyperplane.  The point is recovered as
    ``h + (t/sqrt(2)) (e_i - e_j)``.  ``tie`` flags a non-unique nearest pair
    (broken lexicographically).
    """

    pair: tuple
    t: float
    h: tuple
    tie: bool = False

    def reconstruct(self) -> np.ndarray:
        x = np.asarray(self.h, dtype=float).copy()
        i, j = self.pair
        x[i] += self.t / math.sqrt(2.0)
        x[j] -= self.t / math.sqrt(2.0)
        return x


def weight(x, beta: float) -> float:
    """The repulsive weight prod_{i<j} |x_i - x_j|^beta.

    Total function: returns 0 exactly when two coordinates coincide.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    arr = _as_array(x)
    n = arr.size
    if n < 2:
        return 1.0
    iu = np.triu_indices(n, k=1)
    gaps = np.abs(arr[:, None] - arr[None, :])[iu]
    if np.any(gaps == 0.0):
        return 0.0
    return float(np.prod(gaps**beta))


def grad_log_weight(x, beta: float, guard: float = GAP_GUARD) -> np.ndarray:
    """Gradient of log w_beta; component i is beta * sum_{j != i} 1/(x_i - x_j).

    This is the Dyson drift at inverse temperature beta (up to the speed
    normalisation of the SDE).  Components sum to zero by antisymmetry.
    """
    arr = _as_array(x)
    n = arr.size
    if n < 2:
        return np.zeros(n)
    diff = arr[:, None] - arr[None, :]
    off = ~np.eye(n, dtype=bool)
    if np.any(np.abs(diff[off]) < guard):
        raise SingularSetError("configuration has a gap below the singular guard")
    inv = np.zeros_like(diff)
    inv[off] = 1.0 / diff[off]
    return beta * inv.sum(axis=1)


def singular_distance(x) -> float:
    """Euclidean distance to the diagonal set: min_{i<j} |x_i - x_j| / sqrt(2)."""
    arr = _as_array(x)
    if arr.size < 2:
        return math.inf
    return abs(singular_chart(arr).t)


def singular_chart(x) -> SingularChart:
    """Chart of the nearest diagonal hyperplane.

    The nearest pair minimises |x_i - x_j|; ties are broken by lexicographic
    pair order and flagged.  On the diagonal set itself the chart has t = 0.
    """
    arr = _as_array(x)
    n = arr.size
    if n < 2:
        raise ValueError("need at least two particles for a chart")
    iu, ju = np.triu_indices(n, k=1)
    gaps = np.abs(arr[iu] - arr[ju])
    k = int(np.argmin(gaps))  # argmin takes the first = lexicographic pair
    tie = bool(np.sum(gaps == gaps[k]) > 1)
    i, j = int(iu[k]), int(ju[k])
    t = (arr[i] - arr[j]) / math.sqrt(2.0)
    h = arr.copy()
    mid = 0.5 * (arr[i] + arr[j])
    h[i] = mid
    h[j] = mid
    return SingularChart(pair=(i, j), t=float(t), h=tuple(h.tolist()), tie=tie)


def sector_of(x) -> tuple:
    """Ordering sector of a configuration off the diagonal set.

    Returns the permutation (0-based argsort) sending sorted positions to
    original indices: position k holds the index of the k-th smallest
    coordinate.  Constant on each connected component of R^n minus the
    diagonals; raises on the diagonal set.
    """
    arr = _as_array(x)
    if Configuration(arr).on_singular_set():
        raise SingularSetError("on-singular-set")
    return tuple(int(i) for i in np.argsort(arr, kind="stable"))


# ---------------------------------------------------------------------------
# quadrature with algebraic endpoint singularities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights integrating f(t) |t|^alpha dt exactly for deg f <= 2m-1.

    The interval must have 0 as one endpoint (that is where |t|^alpha may be
    singular); alpha > -1 keeps the measure finite.
    """

    alpha: float
    interval: tuple
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_jacobi_rule(m: int, alpha: float, interval=(0.0, 1.0)) -> QuadratureRule:
    """Gauss rule for the measure |t|^alpha dt on [0, b] or [-b, 0].

    Exact on polynomials of degree <= 2m-1.  Built from the Jacobi weight
    (1+x)^alpha on [-1, 1] by an affine map placing the singular endpoint
    at 0.
    """
    if alpha <= -1.0:
        raise ValueError(f"non-integrable singularity: alpha={alpha} <= -1")
    if m < 1:
        raise ValueError("rule order must be >= 1")
    a, b = float(interval[0]), float(interval[1])
    if a == b:
        raise ValueError("empty interval")
    if a != 0.0 and b != 0.0:
        raise ValueError("interval must have 0 as an endpoint")
    length = abs(b - a)
    if alpha == 0.0:
        xs, ws = roots_legendre(m)
    else:
        xs, ws = roots_jacobi(m, 0.0, alpha)
    # map weight (1+x)^alpha on [-1,1] to t^alpha on [0, length]
    t = length * (xs + 1.0) / 2.0
    w = ws * (length / 2.0) ** (alpha + 1.0)
    if b == 0.0:  # measure |t|^alpha on [-length, 0]
        t = -t[::-1]
        w = w[::-1]
    return QuadratureRule(alpha=alpha, interval=(a, b), nodes=t, weights=w, order=m)


class GradedResult(NamedTuple):
    value: float
    error: float


def _graded_eval(
    f, alpha: float, lo: float, hi: float, levels: int, order: int, splits: int
) -> float:
    """One graded pass over [lo, hi], 0 <= lo < hi, singularity at 0.

    Cells halve geometrically toward lo; away from 0 each geometric cell is
    subdivided into ``splits`` equal Gauss-Legendre subcells, so successive
    passes genuinely refine everywhere (structure far from the singularity
    converges too, not only the endpoint behaviour).  The cell touching 0
    (when lo == 0) absorbs |t|^alpha into a Jacobi rule, so only the smooth
    factor f is sampled there.
    """
    edges = [hi]
    cut = hi
    for _ in range(levels):
        cut /= 2.0
        if cut <= lo * 1.0000000001:
            break
        edges.append(cut)
    edges.append(lo)
    xs_leg, ws_leg = roots_legendre(order)
    nodes = []
    wts = []
    for k in range(len(edges) - 1):
        b_, a_ = edges[k], edges[k + 1]
        if a_ == 0.0:
            rule = gauss_jacobi_rule(order, alpha, (0.0, b_))
            nodes.append(rule.nodes)
            wts.append(rule.weights)
        else:
            sub = np.linspace(a_, b_, splits + 1)
            for s_lo, s_hi in zip(sub[:-1], sub[1:]):
                mid = 0.5 * (s_lo + s_hi)
                half = 0.5 * (s_hi - s_lo)
                t = mid + half * xs_leg
                nodes.append(t)
                wts.append(ws_leg * half * t**alpha)
    tt = np.concatenate(nodes)
    ww = np.concatenate(wts)
    return float(np.dot(ww, np.asarray(f(tt), dtype=float)))


def integrate_graded(
    f: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    interval,
    tol: float = 1e-10,
    order: int = 8,
    max_levels: int = 56,
) -> GradedResult:
    """Integrate f(t) |t|^alpha over an interval, singularity allowed at t=0.

    ``f`` must be vectorised, continuous away from 0 and bounded near it.
    Geometric mesh grading (ratio 2) toward the endpoint nearest 0 makes the
    composite Gauss rule converge geometrically for any algebraic endpoint
    behaviour; the level count is doubled until two passes agree to ``tol``
    (relative when the value is of order one, absolute below that).  The
    returned error estimate is twice the last refinement difference, which
    bounds the true error once the passes are in the geometric regime.
    """
    a, b = float(interval[0]), float(interval[1])
    if a > b:
        raise ValueError("interval endpoints out of order")
    if alpha <= -1.0 and a <= 0.0 <= b:
        raise ValueError(f"non-integrable singularity: alpha={alpha} <= -1")
    if a == b:
        return GradedResult(0.0, 0.0)
    if a < 0.0 < b:
        ra = integrate_graded(lambda t: f(-t), alpha, (0.0, -a), tol / 2, order, max_levels)
        rb = integrate_graded(f, alpha, (0.0, b), tol / 2, order, max_levels)
        return GradedResult(ra.value + rb.value, ra.error + rb.error)
    if b <= 0.0:  # mirror to the positive axis
        return integrate_graded(lambda t: f(-t), alpha, (-b, -a), tol, order, max_levels)

    levels = 12
    splits = 1
    max_splits = 64
    prev = _graded_eval(f, alpha, a, b, levels, order, splits)
    while levels < max_levels or splits < max_splits:
        levels = min(max_levels, levels * 2)
        splits = min(max_splits, splits * 2)
        cur = _graded_eval(f, alpha, a, b, levels, order, splits)
        diff = abs(cur - prev)
        scale = max(1.0, abs(cur))
        if diff <= tol * scale:
            return GradedResult(cur, 2.0 * diff + 1e-300)
        prev = cur
    # one extra shot with a higher per-cell order before giving up
    cur = _graded_eval(f, alpha, a, b, max_levels, order * 2, max_splits)
    diff = abs(cur - prev)
    if diff <= tol * max(1.0, abs(cur)):
        return GradedResult(cur, 2.0 * diff + 1e-300)
    raise QuadratureConvergenceError(
        f"graded integration stalled at {max_levels} levels (diff={diff:.3e})",
        value=cur,
        error=2.0 * diff,
    )
