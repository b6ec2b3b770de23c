"""Weak-Bochner counterexample for inverse temperature beta in (0, 1).

The construction lives in a slab around the hyperplane {x_1 = x_2}, written
in box coordinates x = h + t (1, -1, 0, ..., 0), so that x_1 - x_2 = 2 t and
h = (mid, x_3, ..., x_n) collects the hyperplane foot.  Two families:

* u_r = f * eta_r, where f = prod_{i<j} sgn(x_i - x_j) |x_i - x_j|^(1-beta)
  annihilates the weighted Laplacian away from the diagonals (a telescoping
  identity over ordered triples), and eta_r = P_r(t) Q(h) is a smooth
  plateau cutoff equal to 1 on the inner slab.  Its squared gradient blows
  up like |x_1 - x_2|^(-2 beta) on the inner slab.

* phi_r = Phi_r(t) Psi(h) with the C^{1,1} cosine cap
  Phi_r(t) = 1 + cos(3 pi t / (2 r)) on |t| <= 2r/3.

For every real K the pair violates the weak Bochner inequality

    1/2 int |grad u|^2 (Lap phi) w  >=  int [<grad Lap u, grad u> + K |grad u|^2] phi w

once r is small: the left side diverges to -infinity like -r^(-1-beta)
while the right side is K * O(r^(1-beta)).  The module evaluates both sides
by singular quadrature, fits the r-scaling exponents, and validates every
closed-form Laplacian against finite differences.

All Laplacians are weighted: Lap f = Delta f + <grad log w, grad f>, the
generator of the Dirichlet form  E(f) = 1/2 int |grad f|^2 w dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import grad_log_weight, integrate_graded
from scipy.special import roots_legendre

__all__ = [
    "PlateauBump",
    "CosineCap",
    "CounterexampleParams",
    "CounterexampleBundle",
    "ScalingFit",
    "WBResult",
    "GeometryError",
    "make_params",
    "eval_counterexample",
    "fields_batch",
    "fd_laplacian_check",
    "wb_sides",
    "wb_scan",
    "fit_scaling",
    "leading_constant",
    "weak_laplacian_pairing",
    "sample_points",
]


class GeometryError(ValueError):
    """The slab geometry touched a diagonal hyperplane other than {x_1 = x_2}."""


# ---------------------------------------------------------------------------
# smooth 1-D profiles with closed-form derivatives
# ---------------------------------------------------------------------------


def _mollifier_pieces(z: np.ndarray):
    """psi(z) = exp(-1/z) on z > 0 (else 0) and its first two derivatives."""
    z = np.asarray(z, dtype=float)
    pos = z > 1e-3  # exp(-1/z) underflows well before this
    v = np.zeros_like(z)
    d1 = np.zeros_like(z)
    d2 = np.zeros_like(z)
    zp = np.where(pos, z, 1.0)
    e = np.where(pos, np.exp(-1.0 / zp), 0.0)
    v[pos] = e[pos]
    d1[pos] = (e / zp**2)[pos]
    d2[pos] = (e * (1.0 - 2.0 * zp) / zp**4)[pos]
    return v, d1, d2


def _smooth_step(z: np.ndarray):
    """C^inf step g = psi(z)/(psi(z)+psi(1-z)): 0 for z<=0, 1 for z>=1."""
    z = np.asarray(z, dtype=float)
    a, a1, a2 = _mollifier_pieces(z)
    b, b1m, b2 = _mollifier_pieces(1.0 - z)
    b1 = -b1m  # d/dz psi(1-z)
    den = a + b
    den = np.where(den == 0.0, 1.0, den)
    g = a / den
    num1 = a1 * b - a * b1
    g1 = num1 / den**2
    num1p = a2 * b - a * b2  # d/dz of (a1 b - a b1)
    g2 = (num1p * den - 2.0 * num1 * (a1 + b1)) / den**3
    # clamp the flat regions exactly
    lo = z <= 0.0
    hi = z >= 1.0
    for arr, v_lo, v_hi in ((g, 0.0, 1.0), (g1, 0.0, 0.0), (g2, 0.0, 0.0)):
        arr[lo] = v_lo
        arr[hi] = v_hi
    return g, g1, g2


@dataclass(frozen=True)
class PlateauBump:
    """C^inf bump: 1 on [lo, hi], 0 outside [lo - w, hi + w], mollifier ramps."""

    lo: float
    hi: float
    w: float

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        val = np.ones_like(x)
        d1 = np.zeros_like(x)
        d2 = np.zeros_like(x)
        right = x > self.hi
        if np.any(right):
            z = (self.hi + self.w - x[right]) / self.w
            g, g1, g2 = _smooth_step(z)
            val[right] = g
            d1[right] = -g1 / self.w
            d2[right] = g2 / self.w**2
        left = x < self.lo
        if np.any(left):
            z = (x[left] - self.lo + self.w) / self.w
            g, g1, g2 = _smooth_step(z)
            val[left] = g
            d1[left] = g1 / self.w
            d2[left] = g2 / self.w**2
        return val, d1, d2

    def val(self, x):
        return self._eval(x)[0]

    def d1(self, x):
        return self._eval(x)[1]

    def d2(self, x):
        return self._eval(x)[2]


@dataclass(frozen=True)
class CosineCap:
    """Phi(t) = 1 + cos(a t) on |t| <= pi/a, 0 outside; C^{1,1} at the edge."""

    a: float

    @property
    def half_width(self) -> float:
        return math.pi / self.a

    def _mask(self, t):
        return np.abs(t) < self.half_width

    def val(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), 1.0 + np.cos(self.a * t), 0.0)

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), -self.a * np.sin(self.a * t), 0.0)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), -self.a**2 * np.cos(self.a * t), 0.0)

    def d1_over_t(self, t):
        """Phi'(t)/t with the removable singularity at t = 0 evaluated exactly."""
        t = np.asarray(t, dtype=float)
        return np.where(
            self._mask(t), -self.a**2 * np.sinc(self.a * t / math.pi), 0.0
        )


# ---------------------------------------------------------------------------
# parameters and slab geometry
# ---------------------------------------------------------------------------


def _foot_centers(n: int) -> np.ndarray:
    """Centers of the spectator coordinates x_3 ... x_n (1-based labels)."""
    return np.array([5.0 * (k + 1) for k in range(2, n)])


@dataclass
class CounterexampleParams:
    """Geometry, profiles and curvature shift of the counterexample pair.

    The inner slab D(r, 1) is {|t| <= r} x S1 and the outer slab D(2r, 2) is
    {|t| <= 2r} x S2, where Sm = {mid in [-m, m]} x prod_k {x_k in
    [5k - m, 5k + m]}.  For r < 1 the outer slab meets a diagonal hyperplane
    only in {x_1 = x_2}; ``check_geometry`` certifies this with interval
    arithmetic on the box bounds.
    """

    r: float
    n: int = 2
    beta: float = 0.5
    K: float = 0.0
    p_t: PlateauBump = field(init=False, repr=False)
    q_mid: PlateauBump = field(init=False, repr=False)
    q_feet: tuple = field(init=False, repr=False)
    psi_mid: PlateauBump = field(init=False, repr=False)
    psi_feet: tuple = field(init=False, repr=False)
    cap: CosineCap = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ValueError("slab half-width r must lie in (0, 1)")
        if self.n < 2:
            raise ValueError("need at least two particles")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("the counterexample needs beta in (0, 1)")
        c = _foot_centers(self.n)
        self.p_t = PlateauBump(-self.r, self.r, self.r)
        self.q_mid = PlateauBump(-1.0, 1.0, 1.0)
        self.q_feet = tuple(PlateauBump(ck - 1.0, ck + 1.0, 1.0) for ck in c)
        self.psi_mid = PlateauBump(-0.5, 0.5, 0.5)
        self.psi_feet = tuple(PlateauBump(ck - 0.5, ck + 0.5, 0.5) for ck in c)
        self.cap = CosineCap(a=3.0 * math.pi / (2.0 * self.r))
        self.check_geometry()

    def check_geometry(self) -> None:
        """Interval arithmetic: the slabs meet only the {x_1 = x_2} wall."""
        c = _foot_centers(self.n)
        lo = np.concatenate(([-2.0 - 2.0 * self.r], [-2.0 - 2.0 * self.r], c - 2.0))
        hi = np.concatenate(([2.0 + 2.0 * self.r], [2.0 + 2.0 * self.r], c + 2.0))
        for i in range(self.n):
            for j in range(i + 1, self.n):
                gap_lo = lo[j] - hi[i]
                gap_hi = hi[j] - lo[i]
                touches = gap_lo <= 0.0 <= gap_hi
                if (i, j) == (0, 1):
                    if not touches:
                        raise GeometryError("inner pair does not reach its wall")
                elif touches:
                    raise GeometryError(
                        f"slab touches the diagonal of pair {(i + 1, j + 1)}"
                    )

    # box coordinates -------------------------------------------------------

    def assemble(self, t, mid, feet=None) -> np.ndarray:
        """Points x = h + t (1, -1, 0, ...) from box coordinates (broadcast)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        mid = np.broadcast_to(np.asarray(mid, dtype=float), t.shape)
        X = np.empty((t.size, self.n))
        X[:, 0] = mid + t
        X[:, 1] = mid - t
        if self.n > 2:
            feet = np.broadcast_to(
                np.asarray(feet, dtype=float), (t.size, self.n - 2)
            )
            X[:, 2:] = feet
        return X

    def psi_box(self) -> list:
        """Support box of Psi in h-coordinates: [(lo, hi)] per h-dimension."""
        box = [(-1.0, 1.0)]
        for b in self.psi_feet:
            box.append((b.lo - b.w, b.hi + b.w))
        return box

    def psi_pieces(self) -> list:
        """Per h-dimension breakpoints of Psi: support edge, plateau, edge.

        Aligning quadrature cells with the plateau ends restores fast
        Gauss-Legendre convergence (the mollifier ramps are flat to all
        orders at their endpoints).
        """
        pieces = [[-1.0, -0.5, 0.5, 1.0]]
        for b in self.psi_feet:
            pieces.append([b.lo - b.w, b.lo, b.hi, b.hi + b.w])
        return pieces

    def eta_box(self) -> list:
        """Support box of Q in h-coordinates."""
        box = [(-2.0, 2.0)]
        for b in self.q_feet:
            box.append((b.lo - b.w, b.hi + b.w))
        return box

    def in_outer_slab(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        t = 0.5 * (x[0] - x[1])
        mid = 0.5 * (x[0] + x[1])
        if abs(t) > 2.0 * self.r or abs(mid) > 2.0:
            return False
        c = _foot_centers(self.n)
        return bool(np.all(np.abs(x[2:] - c) <= 2.0))


def make_params(r: float, n: int = 2, beta: float = 0.5, K: float = 0.0) -> CounterexampleParams:
    return CounterexampleParams(r=r, n=n, beta=beta, K=K)


# ---------------------------------------------------------------------------
# field evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterexampleBundle:
    """Pointwise values of the counterexample fields at one configuration."""

    x: tuple
    u: float
    grad_u_sq: float
    lap_u: float
    phi: float
    lap_phi: float
    singular: bool = False


def _weight_batch(X: np.ndarray, beta: float, gap01=None) -> np.ndarray:
    """Vectorised weight prod |x_i - x_j|^beta over rows of X.

    ``gap01`` overrides the first-pair gap |x_0 - x_1|; quadrature in box
    coordinates passes 2|t| directly so gaps far below the coordinate
    rounding scale are not absorbed.
    """
    m, n = X.shape
    w = np.abs(X[:, 0] - X[:, 1]) ** beta if gap01 is None else np.abs(gap01) ** beta
    for i in range(n):
        for j in range(max(i + 1, 2), n):
            w = w * np.abs(X[:, i] - X[:, j]) ** beta
    return w


def _pair_sums(X: np.ndarray, t: np.ndarray):
    """s_k = sum_{p != k} 1/(x_k - x_p) plus the cancelled (0,1) pieces.

    The first-pair gap is taken as 2t from the box coordinate, exact for
    arbitrarily small t.  Returns (s, delta, sigma) with
      delta = (s_0 - s_1) - 1/t  (smooth through t = 0),
      sigma = s_0 + s_1          (the 1/t parts cancel exactly).
    Rows with t = 0 get s_0 = s_1 = inf; the callers guard those.
    """
    m, n = X.shape
    diff = X[:, :, None] - X[:, None, :]
    mask = ~np.eye(n, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(mask[None, :, :], 1.0 / diff, 0.0)
        inv[:, 0, 1] = 1.0 / (2.0 * t)
        inv[:, 1, 0] = -inv[:, 0, 1]
    s = inv.sum(axis=2)
    if n > 2:
        inv0 = inv[:, 0, 2:]
        inv1 = inv[:, 1, 2:]
        delta = (inv0 - inv1).sum(axis=1)
        sigma = (inv0 + inv1).sum(axis=1)
    else:
        delta = np.zeros(m)
        sigma = np.zeros(m)
    return s, delta, sigma


def fields_batch(X: np.ndarray, p: CounterexampleParams, t: np.ndarray | None = None) -> dict:
    """Vectorised evaluation of all counterexample fields on rows of X.

    All 1/t factors that cancel analytically are assembled in cancelled
    form, so the values stay accurate arbitrarily close to {x_1 = x_2};
    rows exactly on that wall carry limits for u, phi, lap_phi, lap_u
    and a ``singular`` flag for the genuinely divergent grad_u_sq.
    Quadrature in box coordinates passes ``t`` explicitly so that gaps far
    below the rounding scale of x survive the round trip.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    if n != p.n:
        raise ValueError(f"points have dimension {n}, params expect {p.n}")
    beta = p.beta
    t_all = 0.5 * (X[:, 0] - X[:, 1]) if t is None else np.broadcast_to(
        np.asarray(t, dtype=float), (m,)
    )
    mid_all = 0.5 * (X[:, 0] + X[:, 1])

    # support tests first: rows outside both supports are exactly zero and
    # must not touch any 1/(x_i - x_j)
    P_all = p.p_t.val(t_all)
    Q_all = p.q_mid.val(mid_all)
    F_all = p.cap.val(t_all)
    S_all = p.psi_mid.val(mid_all)
    for k in range(n - 2):
        Q_all = Q_all * p.q_feet[k].val(X[:, 2 + k])
        S_all = S_all * p.psi_feet[k].val(X[:, 2 + k])
    inside = (P_all * Q_all != 0.0) | (F_all * S_all != 0.0)

    out = {
        "u": np.zeros(m),
        "grad_u_sq": np.zeros(m),
        "lap_u": np.zeros(m),
        "phi": np.zeros(m),
        "lap_phi": np.zeros(m),
        "singular": np.zeros(m, dtype=bool),
        "grad_u": np.zeros((m, n)),
    }
    if not np.any(inside):
        return out

    idx = np.flatnonzero(inside)
    Xs = X[idx]
    t = t_all[idx]
    mid = mid_all[idx]
    on_wall = t == 0.0
    ms = idx.size

    P, Pd, Pdd = p.p_t._eval(t)
    Qm, Qmd, Qmdd = p.q_mid._eval(mid)
    F, Fd, Fdd = p.cap.val(t), p.cap.d1(t), p.cap.d2(t)
    Sm, Smd, Smdd = p.psi_mid._eval(mid)

    nf = max(n - 2, 0)
    tailq = np.ones((ms, nf))
    tailq_d1 = np.zeros_like(tailq)
    tailq_d2 = np.zeros_like(tailq)
    tails = np.ones_like(tailq)
    tails_d1 = np.zeros_like(tailq)
    tails_d2 = np.zeros_like(tailq)
    for k in range(nf):
        tailq[:, k], tailq_d1[:, k], tailq_d2[:, k] = p.q_feet[k]._eval(Xs[:, 2 + k])
        tails[:, k], tails_d1[:, k], tails_d2[:, k] = p.psi_feet[k]._eval(Xs[:, 2 + k])
    Tq = tailq.prod(axis=1) if nf else np.ones(ms)
    Ts = tails.prod(axis=1) if nf else np.ones(ms)

    Q = Qm * Tq
    eta = P * Q
    psi_h = Sm * Ts
    phi = F * psi_h

    s, delta, sigma = _pair_sums(Xs, t)

    # f = prod_{i<j} sgn(g) |g|^(1-beta)
    f = np.sign(t) * np.abs(2.0 * t) ** (1.0 - beta)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) == (0, 1):
                continue
            g = Xs[:, i] - Xs[:, j]
            f = f * np.sign(g) * np.abs(g) ** (1.0 - beta)

    # gradient and Laplacian of eta (chain rule through t, mid by halves)
    grad_eta = np.zeros((ms, n))
    grad_eta[:, 0] = 0.5 * Pd * Q + 0.5 * P * Qmd * Tq
    grad_eta[:, 1] = -0.5 * Pd * Q + 0.5 * P * Qmd * Tq
    lap_eta = 0.5 * Pdd * Q + 0.5 * P * Qmdd * Tq
    for k in range(nf):
        rest = _prod_except(tailq, k)
        grad_eta[:, 2 + k] = P * Qm * tailq_d1[:, k] * rest
        lap_eta = lap_eta + P * Qm * tailq_d2[:, k] * rest

    u = f * eta  # f vanishes on the wall since 1 - beta > 0

    # grad u_k = f [ (1-beta) s_k eta + d eta_k ]; genuinely singular on the wall
    gu = f[:, None] * ((1.0 - beta) * s * eta[:, None] + grad_eta)
    gus = np.einsum("ij,ij->i", gu, gu)
    wall_near = on_wall & (eta != 0.0)
    gus = np.where(wall_near, np.inf, gus)

    # weighted Laplacian of u in cancelled form:
    #   sum_k s_k d eta_k = (1/t + delta) (Pd Q)/2 + sigma (P Qmd Tq)/2
    #                        + sum_{k>=2} s_k d eta_k
    # the 1/t factor only multiplies Pd, which vanishes identically on the
    # inner plateau, so the product is exactly zero near the wall
    inv_t = np.zeros(ms)
    np.divide(1.0, t, out=inv_t, where=~on_wall)
    drift_eta = np.where(Pd == 0.0, 0.0, (inv_t + delta) * 0.5 * Pd * Q)
    drift_eta = drift_eta + sigma * 0.5 * P * Qmd * Tq
    if nf:
        drift_eta = drift_eta + np.einsum("ij,ij->i", s[:, 2:], grad_eta[:, 2:])
    lap_u = f * ((2.0 - beta) * drift_eta + lap_eta)

    # weighted Laplacian of phi; Phi'/t has a removable singularity
    grad_psi_mid = Smd * Ts
    lap_psi = 0.5 * Smdd * Ts
    drift_psi_tail = np.zeros(ms)
    for k in range(nf):
        rest = _prod_except(tails, k)
        lap_psi = lap_psi + Sm * tails_d2[:, k] * rest
        drift_psi_tail = drift_psi_tail + s[:, 2 + k] * Sm * tails_d1[:, k] * rest
    lap_phi = 0.5 * Fdd * psi_h + F * lap_psi
    lap_phi = lap_phi + 0.5 * beta * (p.cap.d1_over_t(t) + delta * Fd) * psi_h
    lap_phi = lap_phi + 0.5 * beta * sigma * F * grad_psi_mid
    lap_phi = lap_phi + beta * F * drift_psi_tail

    out["u"][idx] = u
    out["grad_u"][idx] = np.where(wall_near[:, None], np.nan, gu)
    out["grad_u_sq"][idx] = gus
    out["lap_u"][idx] = lap_u
    out["phi"][idx] = phi
    out["lap_phi"][idx] = lap_phi
    out["singular"][idx] = wall_near
    return out


def _prod_except(cols: np.ndarray, k: int) -> np.ndarray:
    keep = [c for c in range(cols.shape[1]) if c != k]
    return cols[:, keep].prod(axis=1) if keep else np.ones(cols.shape[0])


def eval_counterexample(x, p: CounterexampleParams) -> CounterexampleBundle:
    """All counterexample fields at one configuration.

    Off the outer slab every field is zero.  Exactly on {x_1 = x_2} the
    bundle carries the continuous limits (u = 0, lap_u = 0, phi, lap_phi)
    and flags grad_u_sq as singular instead of raising.
    """
    x = np.asarray(x, dtype=float)
    f = fields_batch(x[None, :], p)
    return CounterexampleBundle(
        x=tuple(x.tolist()),
        u=float(f["u"][0]),
        grad_u_sq=float(f["grad_u_sq"][0]),
        lap_u=float(f["lap_u"][0]),
        phi=float(f["phi"][0]),
        lap_phi=float(f["lap_phi"][0]),
        singular=bool(f["singular"][0]),
    )


# ---------------------------------------------------------------------------
# finite-difference validation of the closed forms
# ---------------------------------------------------------------------------


class FDCheck(NamedTuple):
    rel_u: float
    rel_phi: float
    step: float


def _fd_weighted_laplacian(values_fn, x: np.ndarray, beta: float, h: float) -> float:
    """O(h^2) central weighted Laplacian: Delta f + <grad log w, grad f>."""
    n = x.size
    pts = [x]
    for k in range(n):
        for sgn in (+1.0, -1.0):
            q = x.copy()
            q[k] += sgn * h
            pts.append(q)
    vals = values_fn(np.asarray(pts))
    f0 = vals[0]
    glw = grad_log_weight(x, beta)
    acc = 0.0
    for k in range(n):
        fp = vals[1 + 2 * k]
        fm = vals[2 + 2 * k]
        acc += (fp - 2.0 * f0 + fm) / h**2
        acc += glw[k] * (fp - fm) / (2.0 * h)
    return acc


def fd_laplacian_check(x, p: CounterexampleParams, h: float | None = None) -> FDCheck:
    """Richardson-extrapolated FD check of lap_u and lap_phi at a point.

    The steps (h, h/2) give an O(h^4) extrapolant; relative errors are
    measured against the closed form, floored at the natural curvature
    scales |u|/r^2 and a^2 |phi| so that regions where a field vanishes
    identically compare at absolute scale.  The point must keep a distance
    of at least 10 h from every diagonal hyperplane.
    """
    x = np.asarray(x, dtype=float)
    gaps = np.abs(x[:, None] - x[None, :])[np.triu_indices(p.n, k=1)]
    dmin = float(gaps.min()) / math.sqrt(2.0)
    if h is None:
        h = min(dmin / 16.0, p.r / 256.0)
    if dmin < 10.0 * h:
        raise ValueError("point too close to a diagonal for the requested step")

    def u_fn(pts):
        return fields_batch(pts, p)["u"]

    def phi_fn(pts):
        return fields_batch(pts, p)["phi"]

    bundle = eval_counterexample(x, p)
    rels = []
    for fn, exact, scale in (
        (u_fn, bundle.lap_u, abs(bundle.u) / p.r**2),
        (phi_fn, bundle.lap_phi, p.cap.a**2 * abs(bundle.phi)),
    ):
        d1 = _fd_weighted_laplacian(fn, x, p.beta, h)
        d2 = _fd_weighted_laplacian(fn, x, p.beta, h / 2.0)
        rich = (4.0 * d2 - d1) / 3.0
        denom = max(abs(exact), scale, 1e-300)
        rels.append(abs(rich - exact) / denom)
    return FDCheck(rel_u=rels[0], rel_phi=rels[1], step=h)


def sample_points(
    p: CounterexampleParams,
    count: int,
    rng: np.random.Generator,
    region: str = "bulk",
    t_min_frac: float = 0.0,
) -> np.ndarray:
    """Random points in the slab, by named region.

    ``bulk`` draws from the outer slab, ``inner`` from {|t| <= r} x S1 (where
    lap_u vanishes), ``transition`` from the eta-ramp r < |t| < 2r, and
    ``phi-core`` from supp(phi).  ``t_min_frac`` bounds |t| below by that
    fraction of r (useful before finite differencing).
    """
    c = _foot_centers(p.n)
    lo_t, hi_t = {
        "bulk": (0.0, 2.0 * p.r),
        "inner": (0.0, p.r),
        "transition": (p.r, 2.0 * p.r),
        "phi-core": (0.05 * p.r, 0.62 * p.r),
        "u-core": (1.15 * p.r, 1.85 * p.r),
        "q-core": (0.25 * p.r, 0.9 * p.r),
    }[region]
    lo_t = max(lo_t, t_min_frac * p.r)
    t = rng.uniform(lo_t, hi_t, size=count) * rng.choice([-1.0, 1.0], size=count)
    if region in ("inner", "phi-core"):
        mid = rng.uniform(-0.85, 0.85, size=count)
        feet = rng.uniform(-0.85, 0.85, size=(count, p.n - 2)) + c[None, :]
    elif region == "u-core":
        mid = rng.uniform(-0.85, 0.85, size=count)
        feet = rng.uniform(-0.85, 0.85, size=(count, p.n - 2)) + c[None, :]
    elif region == "q-core":
        mid = rng.uniform(1.15, 1.85, size=count) * rng.choice([-1.0, 1.0], size=count)
        feet = rng.uniform(-0.85, 0.85, size=(count, p.n - 2)) + c[None, :]
    else:
        mid = rng.uniform(-2.0, 2.0, size=count)
        feet = rng.uniform(-2.0, 2.0, size=(count, p.n - 2)) + c[None, :]
    return p.assemble(t, mid, feet)


# ---------------------------------------------------------------------------
# both sides of the weak Bochner inequality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WBQuadSpec:
    """Quadrature layout: graded/Jacobi in t, tensor Gauss-Legendre in h."""

    h_order: int = 8
    h_order_check: int = 12
    t_tol: float = 1e-9
    t_order: int = 8


class WBResult(NamedTuple):
    lhs: float
    rhs: float
    lhs_err: float
    rhs_err: float
    inconclusive: bool


def _h_grid(pieces: Sequence[Sequence[float]], order: int):
    """Tensor Gauss-Legendre grid, composite over per-dimension breakpoints.

    ``pieces`` holds, per h-dimension, an increasing breakpoint list; a
    plain (lo, hi) pair is a single cell.
    """
    xs, ws = roots_legendre(order)
    nodes_1d = []
    weights_1d = []
    for brk in pieces:
        ns = []
        wl = []
        for lo, hi in zip(brk[:-1], brk[1:]):
            mid = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            ns.append(mid + half * xs)
            wl.append(ws * half)
        nodes_1d.append(np.concatenate(ns))
        weights_1d.append(np.concatenate(wl))
    grids = np.meshgrid(*nodes_1d, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrid = np.meshgrid(*weights_1d, indexing="ij")
    wts = np.ones(pts.shape[0])
    for g in wgrid:
        wts = wts * g.ravel()
    return pts, wts


def _wb_integrals(p: CounterexampleParams, spec: WBQuadSpec, h_order: int):
    """(lhs, rhs/K, summed t-quadrature error) at a given h-order.

    Both t-integrands carry the exact singular factor |t|^(-beta); the
    remaining smooth factor is integrated on a graded mesh whose innermost
    cell is a Jacobi rule with exponent -beta.  The slab Jacobian
    dx = 2 dt dh is included, so the values are genuine R^n integrals.
    """
    beta = p.beta
    t_hi = 2.0 * p.r / 3.0
    hpts, hwts = _h_grid(p.psi_pieces(), h_order)
    lhs = 0.0
    rhs_over_k = 0.0
    err = 0.0
    for hrow, hw in zip(hpts, hwts):
        mid = hrow[0]
        feet = hrow[1:] if p.n > 2 else None

        def smooth_lhs(t):
            X = p.assemble(t, mid, feet)
            f = fields_batch(X, p, t=t)
            w = _weight_batch(X, beta, gap01=2.0 * np.atleast_1d(t))
            return f["grad_u_sq"] * f["lap_phi"] * w * np.abs(t) ** beta

        def smooth_rhs(t):
            X = p.assemble(t, mid, feet)
            f = fields_batch(X, p, t=t)
            w = _weight_batch(X, beta, gap01=2.0 * np.atleast_1d(t))
            return f["grad_u_sq"] * f["phi"] * w * np.abs(t) ** beta

        gl = integrate_graded(smooth_lhs, -beta, (-t_hi, t_hi), tol=spec.t_tol, order=spec.t_order)
        gr = integrate_graded(smooth_rhs, -beta, (-t_hi, t_hi), tol=spec.t_tol, order=spec.t_order)
        lhs += hw * gl.value
        rhs_over_k += hw * gr.value
        err += abs(hw) * (gl.error + gr.error)
    # 1/2 from the inequality, 2 from the slab Jacobian
    return 0.5 * 2.0 * lhs, 2.0 * rhs_over_k, 2.0 * err


def wb_sides(p: CounterexampleParams, spec: WBQuadSpec = WBQuadSpec()) -> WBResult:
    """Evaluate both sides of the weak Bochner inequality for (u_r, phi_r).

    On supp(phi) the inner slab has lap_u identically zero, so the
    right-hand side reduces to K * int |grad u|^2 phi w; K = 0 returns an
    exact zero.  The error estimates combine the t-quadrature estimates
    with an h-order refinement difference; the result is flagged
    inconclusive when an estimate exceeds 1% of the value.
    """
    lhs, rhs_k, terr = _wb_integrals(p, spec, spec.h_order)
    lhs2, rhs_k2, _ = _wb_integrals(p, spec, spec.h_order_check)
    lhs_err = terr + 1.5 * abs(lhs2 - lhs)
    rhs_err = (terr + 1.5 * abs(rhs_k2 - rhs_k)) * abs(p.K)
    lhs_val = lhs2
    rhs_val = p.K * rhs_k2
    bad = lhs_err > 0.01 * abs(lhs_val) if lhs_val != 0.0 else lhs_err > 1e-12
    if p.K != 0.0:
        bad = bad or (rhs_err > 0.01 * abs(rhs_val))
    return WBResult(lhs=lhs_val, rhs=rhs_val, lhs_err=lhs_err, rhs_err=rhs_err, inconclusive=bad)


def wb_scan(
    r_grid: Sequence[float],
    n: int = 2,
    beta: float = 0.5,
    K: float = 0.0,
    spec: WBQuadSpec = WBQuadSpec(),
) -> list:
    """wb_sides over an r-grid; rows of (r, WBResult)."""
    return [(r, wb_sides(make_params(r, n=n, beta=beta, K=K), spec)) for r in r_grid]


# ---------------------------------------------------------------------------
# scaling fits and the leading constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares slope of log|value| against log r."""

    exponent: float
    prefactor_sign: int
    residual: float
    r_grid: tuple


def fit_scaling(values: Sequence[tuple]) -> ScalingFit:
    """Fit value ~ C r^p from (r, value) pairs of a single sign.

    Mixed signs refuse to fit: a power law has none.
    """
    if len(values) < 4:
        raise ValueError("need at least 4 points for a scaling fit")
    r = np.array([v[0] for v in values], dtype=float)
    y = np.array([v[1] for v in values], dtype=float)
    signs = np.sign(y)
    if np.any(signs == 0.0) or not np.all(signs == signs[0]):
        raise ValueError("mixed or vanishing signs: refusing a power-law fit")
    slope, intercept = np.polyfit(np.log(r), np.log(np.abs(y)), 1)
    resid = np.log(np.abs(y)) - (slope * np.log(r) + intercept)
    return ScalingFit(
        exponent=float(slope),
        prefactor_sign=int(signs[0]),
        residual=float(np.sqrt(np.mean(resid**2))),
        r_grid=tuple(float(v) for v in r),
    )


def leading_constant(beta: float, tol: float = 1e-12) -> float:
    """Signed coefficient of the r^-(1+beta) divergence of the left side.

    Equals minus the symmetric singular integral

        - int_{-pi}^{pi} [cos s + beta sin(s)/s] |s|^(-beta) ds,

    which is negative throughout beta in (0, 1): integrating by parts turns
    the bracket into 2 beta sin(s) s^(-1-beta) > 0 on (0, pi).  Evaluated by
    symmetric splitting and graded quadrature.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("leading constant defined for beta in (0, 1)")
    res = integrate_graded(
        lambda s: np.cos(s) + beta * np.sinc(s / math.pi),
        -beta,
        (-math.pi, math.pi),
        tol=tol,
    )
    return -res.value


# ---------------------------------------------------------------------------
# weak-Laplacian self-consistency pairing
# ---------------------------------------------------------------------------


def weak_laplacian_pairing(
    p: CounterexampleParams,
    test_bumps: Sequence[PlateauBump],
    t_tol: float = 1e-7,
    h_order: int = 12,
):
    """Both sides of the defining identity of the weighted Laplacian.

    For a smooth compactly supported psi(x) = prod_k b_k(x_k) returns
    (int <grad u, grad psi> w dx, -int (lap_u) psi w dx, error estimate);
    agreement certifies that the closed-form lap_u is the weak Laplacian of
    u with respect to the weighted measure.
    """
    if len(test_bumps) != p.n:
        raise ValueError("need one 1-D factor per coordinate")
    beta = p.beta

    def psi_parts(X):
        vals = np.ones(X.shape[0])
        grads = np.zeros_like(X)
        pieces = [b._eval(X[:, k]) for k, b in enumerate(test_bumps)]
        for k, (v, d1, _) in enumerate(pieces):
            vals = vals * v
        for k in range(p.n):
            g = pieces[k][1]
            for l in range(p.n):
                if l != k:
                    g = g * pieces[l][0]
            grads[:, k] = g
        return vals, grads

    # covering box in (t, h): t range from the b_0, b_1 supports and the slab
    s0 = (test_bumps[0].lo - test_bumps[0].w, test_bumps[0].hi + test_bumps[0].w)
    s1 = (test_bumps[1].lo - test_bumps[1].w, test_bumps[1].hi + test_bumps[1].w)
    t_lo = max(0.5 * (s0[0] - s1[1]), -2.0 * p.r)
    t_hi = min(0.5 * (s0[1] - s1[0]), 2.0 * p.r)
    if t_lo >= t_hi:
        return 0.0, 0.0, 0.0
    box = [(0.5 * (s0[0] + s1[0]), 0.5 * (s0[1] + s1[1]))]
    for b in test_bumps[2:]:
        box.append((b.lo - b.w, b.hi + b.w))
    pieces = [list(np.linspace(lo, hi, 5)) for lo, hi in box]
    hpts, hwts = _h_grid(pieces, h_order)

    left = 0.0
    right = 0.0
    err = 0.0
    for hrow, hw in zip(hpts, hwts):
        mid = hrow[0]
        feet = hrow[1:] if p.n > 2 else None

        def left_f(t):
            X = p.assemble(t, mid, feet)
            f = fields_batch(X, p, t=t)
            _, g = psi_parts(X)
            w = _weight_batch(X, beta, gap01=2.0 * np.atleast_1d(t))
            return np.einsum("ij,ij->i", f["grad_u"], g) * w

        def right_f(t):
            X = p.assemble(t, mid, feet)
            f = fields_batch(X, p, t=t)
            v, _ = psi_parts(X)
            w = _weight_batch(X, beta, gap01=2.0 * np.atleast_1d(t))
            return f["lap_u"] * v * w

        gl = integrate_graded(left_f, 0.0, (t_lo, t_hi), tol=t_tol)
        gr = integrate_graded(right_f, 0.0, (t_lo, t_hi), tol=t_tol)
        left += hw * gl.value
        right += hw * gr.value
        err += abs(hw) * (gl.error + gr.error)
    return 2.0 * left, -2.0 * right, 2.0 * err
