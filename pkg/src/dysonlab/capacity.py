"""Sobolev (1,2)-capacity machinery for the diagonal set.

Two independent witnesses of the threshold at beta = 1:

* ``capacity_upper`` evaluates the squared weighted Sobolev norm of the
  log-log cutoff family g_s (times a ball localizer) through its 1-D
  reduction in the distance coordinate.  The value decays to zero as
  s -> 0 exactly when beta >= 1; the decay is logarithmic in s, inherited
  from the 1/(t log t) slope of the cutoff.

* ``point_capacity_1d`` computes a Ritz minimum for the weighted point
  capacity on the half line: minimise int_eps^1 (u'^2 + u^2) t^beta dt over
  piecewise-linear u with u(eps) = 1, u(1) = 0.  As eps -> 0 the minimum
  tends to 0 for beta >= 1 and to a positive limit for beta < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .core import Configuration, integrate_graded, singular_distance

__all__ = [
    "CutoffFamily",
    "CapacityReport",
    "CapacityValue",
    "S_MAX",
    "cutoff_profile",
    "cutoff_profile_slope",
    "cutoff_g",
    "radial_localizer",
    "reduction_constant",
    "capacity_upper",
    "point_capacity_1d",
    "capacity_report",
    "point_capacity_report",
]

#: largest admissible cutoff parameter: s < e^-e keeps the middle branch of
#: the log-log profile inside [0, 1] without clamping.
S_MAX = math.exp(-math.e)


def _check_s(s: float) -> None:
    if not 0.0 < s < S_MAX:
        raise ValueError(f"cutoff parameter must lie in (0, e^-e); got {s}")


def cutoff_profile(s: float, d) -> np.ndarray:
    """Log-log cutoff as a function of the distance d to the diagonal set.

    1 for d <= s, then 1 + log|log d| - log|log s| until it reaches 0 at
    d = s^(1/e), and 0 beyond.  Continuous and nonincreasing in d.
    """
    _check_s(s)
    d = np.asarray(d, dtype=float)
    upper = s ** (1.0 / math.e)
    out = np.zeros(d.shape)
    out[d <= s] = 1.0
    mid = (d > s) & (d < upper)
    if np.any(mid):
        out[mid] = 1.0 + np.log(np.abs(np.log(d[mid]))) - math.log(abs(math.log(s)))
    return out


def cutoff_profile_slope(s: float, d) -> np.ndarray:
    """d/dd of the cutoff profile: 1/(d log d) on the middle branch, else 0."""
    _check_s(s)
    d = np.asarray(d, dtype=float)
    upper = s ** (1.0 / math.e)
    out = np.zeros(d.shape)
    mid = (d > s) & (d < upper)
    if np.any(mid):
        out[mid] = 1.0 / (d[mid] * np.log(d[mid]))
    return out


def cutoff_g(s: float, x) -> float:
    """Cutoff value at a configuration: the profile at d_S(x)."""
    return float(cutoff_profile(s, np.asarray([singular_distance(x)]))[0])


def radial_localizer(x, center, r_inner: float = 1.0 / 3.0, r_outer: float = 0.5):
    """C^1 radial bump: 1 inside the inner ball, 0 outside the outer one.

    Cubic smoothstep in the radius; |grad| <= 1.5/(r_outer - r_inner).
    Returns (value, gradient-norm bound at the point).
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    rho = float(np.linalg.norm(x - c))
    if rho <= r_inner:
        return 1.0, 0.0
    if rho >= r_outer:
        return 0.0, 0.0
    z = (rho - r_inner) / (r_outer - r_inner)
    val = 1.0 - (3.0 * z * z - 2.0 * z**3)
    slope = abs(-(6.0 * z - 6.0 * z * z) / (r_outer - r_inner))
    return val, slope


@dataclass(frozen=True)
class CutoffFamily:
    """Log-log cutoff g_s localised to a ball: the admissible competitor.

    The product g_s * xi is 1 on a neighbourhood of (diagonal set) cap
    (inner ball) and vanishes outside the outer ball, hence is admissible
    for the capacity of the localised diagonal set.
    """

    s: float
    center: Configuration
    r_inner: float = 1.0 / 3.0
    r_outer: float = 0.5

    def __post_init__(self):
        _check_s(self.s)

    def g(self, x) -> float:
        return cutoff_g(self.s, x)

    def localizer(self, x) -> float:
        return radial_localizer(x, self.center.array(), self.r_inner, self.r_outer)[0]

    def __call__(self, x) -> float:
        return self.g(x) * self.localizer(x)


class CapacityValue(NamedTuple):
    """Upper bound for the squared Sobolev norm of the localised cutoff."""

    value: float          # constant * integral
    integral: float       # the constant-free 1-D integral
    error: float          # quadrature error estimate on the integral
    constant: float       # transverse-ball volume * pair count * 2^(beta/2)


def reduction_constant(n: int, beta: float) -> float:
    """vol_{n-1}((1/2) ball) * n(n-1) * 2^(beta/2), the 1-D reduction factor."""
    d = n - 1
    vol = math.pi ** (d / 2.0) * 0.5**d / math.gamma(d / 2.0 + 1.0)
    return vol * n * (n - 1) * 2.0 ** (beta / 2.0)


def capacity_upper(s: float, beta: float, n: int = 2, tol: float = 1e-10) -> CapacityValue:
    """Squared-norm upper bound for the cutoff family at parameter s.

    Reduces to the distance coordinate:

        constant * int_0^{s^(1/e)} [2 g^2 + g'^2 + 2 g |g'|] t^beta dt,

    with the exact weight t^beta retained (the crude majorant t^min(beta,1)
    would only certify the beta >= 1 side).  The integrand is evaluated on
    [0, s] (where g = 1) and on the middle branch separately so the
    piecewise profile never straddles a quadrature cell.
    """
    _check_s(s)
    if not beta > 0:
        raise ValueError("beta must be positive")
    upper = s ** (1.0 / math.e)

    # g = 1, g' = 0 on [0, s]
    head = integrate_graded(lambda t: 2.0 * np.ones_like(t), beta, (0.0, s), tol=tol)

    def middle(t):
        g = cutoff_profile(s, t)
        gp = np.abs(cutoff_profile_slope(s, t))
        return 2.0 * g * g + gp * gp + 2.0 * g * gp

    body = integrate_graded(middle, beta, (s, upper), tol=tol)
    integral = head.value + body.value
    err = head.error + body.error
    const = reduction_constant(n, beta)
    return CapacityValue(value=const * integral, integral=integral, error=err, constant=const)


@dataclass(frozen=True)
class CapacityReport:
    """Sweep of capacity values with a decay verdict.

    Entries are (parameter, value, error-estimate) sorted by decreasing
    parameter; the verdict is ``decaying`` when the values strictly
    decrease, ``diverging`` when they strictly increase, else
    ``inconclusive``.
    """

    beta: float
    entries: tuple
    verdict: str

    @staticmethod
    def classify(values: Sequence[float]) -> str:
        v = list(values)
        if len(v) >= 2 and all(b < a for a, b in zip(v, v[1:])):
            return "decaying"
        if len(v) >= 2 and all(b > a for a, b in zip(v, v[1:])):
            return "diverging"
        return "inconclusive"


def capacity_report(beta: float, s_grid: Sequence[float], n: int = 2) -> CapacityReport:
    entries = []
    for s in sorted(s_grid, reverse=True):
        cv = capacity_upper(s, beta, n=n)
        entries.append((s, cv.value, max(cv.error * cv.constant, 1e-300)))
    verdict = CapacityReport.classify([e[1] for e in entries])
    return CapacityReport(beta=beta, entries=tuple(entries), verdict=verdict)


def _weighted_p1_matrices(nodes: np.ndarray, beta: float):
    """Stiffness/mass of int (u'v' + uv) t^beta dt for P1 elements, exactly.

    Per element [a, b] the moments int t^(beta+k) dt, k = 0, 1, 2 have
    closed forms, so no quadrature error enters the Ritz system.
    """
    a = nodes[:-1]
    b = nodes[1:]
    h = b - a

    def mom(k):
        p = beta + k + 1.0
        return (b**p - a**p) / p

    I0, I1, I2 = mom(0), mom(1), mom(2)
    s_off = -I0 / h**2
    s_diag_l = I0 / h**2
    m_ll = (b * b * I0 - 2.0 * b * I1 + I2) / h**2
    m_rr = (I2 - 2.0 * a * I1 + a * a * I0) / h**2
    m_lr = (-a * b * I0 + (a + b) * I1 - I2) / h**2
    return s_diag_l, s_off, m_ll, m_rr, m_lr


def point_capacity_1d(beta: float, eps: float, m: int = 512) -> float:
    """Ritz minimum of int_eps^1 (u'^2 + u^2) t^beta dt, u(eps)=1, u(1)=0.

    Piecewise-linear elements on a log-uniform mesh from eps to 1 and a
    tridiagonal solve.  The minimum is the discrete weighted capacity of the
    inner boundary point; as eps -> 0 it vanishes iff beta >= 1.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if m < 16:
        raise ValueError("need at least 16 mesh cells")
    if beta <= -1.0:
        raise ValueError("weight exponent must exceed -1")
    nodes = eps ** (1.0 - np.arange(m + 1) / m)  # geometric from eps to 1
    sdl, soff, mll, mrr, mlr = _weighted_p1_matrices(nodes, beta)

    # assemble A = S + M over interior nodes 1..m-1
    diag = np.empty(m + 1)
    diag[:-1] = sdl + mll
    diag[-1] = 0.0
    diag[1:] += sdl + mrr
    off = soff + mlr

    # boundary data u_0 = 1, u_m = 0 moved to the right-hand side
    rhs = np.zeros(m - 1)
    rhs[0] = -off[0] * 1.0
    ab = np.zeros((3, m - 1))
    ab[0, 1:] = off[1:-1]
    ab[1, :] = diag[1:-1]
    ab[2, :-1] = off[1:-1]
    try:
        interior = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - SPD for beta > -1
        raise RuntimeError("point-capacity system is singular") from exc

    u = np.concatenate(([1.0], interior, [0.0]))
    du = np.diff(u)
    energy = float(
        np.sum(sdl * (du**2))
        + np.sum(mll * u[:-1] ** 2 + mrr * u[1:] ** 2 + 2.0 * mlr * u[:-1] * u[1:])
    )
    return energy


def point_capacity_report(beta: float, eps_grid: Sequence[float], m: int = 512) -> CapacityReport:
    entries = []
    for eps in sorted(eps_grid, reverse=True):
        entries.append((eps, point_capacity_1d(beta, eps, m), 0.0))
    verdict = CapacityReport.classify([e[1] for e in entries])
    return CapacityReport(beta=beta, entries=tuple(entries), verdict=verdict)
