"""Dyson SDE simulator with adaptive stepping near collisions.

The particle system

    dX_t^i = (beta/2) sum_{j != i} dt / (X_t^i - X_t^j) + dB_t^i

collides in finite time exactly when beta < 1.  Paths are integrated by
Euler-Maruyama with the step shrunk like the squared minimum gap, so the
drift increment stays a bounded fraction of the gap.  A collision is
declared when the minimum gap drops below a threshold or two particles
swap order within one step (the continuous path crossed zero either way);
true hitting is not decidable in floating point, so the acceptance checks
use threshold robustness rather than a single cutoff.

For n = 2 the gap g = X^1 - X^2 obeys dg = (beta/g) dt + sqrt(2) dW, a
Bessel-like process of dimension beta + 1 after rescaling; simulating it
directly (``bessel_hit_oracle``) gives an independent check on the
collision frequency.

Reproducibility: every path owns an RNG stream derived from the master
seed via ``SeedSequence.spawn``-style hashing, so results are bit-identical
for a fixed seed and independent of how paths are distributed over workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Configuration, SingularSetError

__all__ = [
    "PathSummary",
    "CollisionStats",
    "simulate",
    "collision_stats",
    "bessel_hit_oracle",
    "default_x0",
    "center_of_mass_samples",
]

_RES_LIMIT_DT = 1e-14


@njit(cache=True)
def _dyson_path(x0, beta, T, dt0, c_adapt, threshold, seed, use_noise):
    """Single path; returns (min_gap, collision_time, final_x, steps, min_dt, flag).

    collision_time < 0 means no collision; flag 1 marks a step-underflow
    stop recorded as a collision at the current time.
    """
    np.random.seed(seed)
    n = x0.size
    x = x0.copy()
    t = 0.0
    steps = 0
    min_dt = T if T > 0 else 0.0
    # initial minimum gap
    gmin = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            d = abs(x[i] - x[j])
            if d < gmin:
                gmin = d
    min_gap = gmin
    collision_time = -1.0
    flag = 0
    drift = np.empty(n)
    xn = np.empty(n)
    while t < T:
        dt = dt0
        cap = c_adapt * gmin * gmin / beta
        if cap < dt:
            dt = cap
        if T - t < dt:
            dt = T - t
        if dt < _RES_LIMIT_DT:
            collision_time = t
            flag = 1
            break
        for i in range(n):
            s = 0.0
            for j in range(n):
                if j != i:
                    s += 1.0 / (x[i] - x[j])
            drift[i] = 0.5 * beta * s
        if use_noise:
            sq = math.sqrt(dt)
            for i in range(n):
                xn[i] = x[i] + drift[i] * dt + sq * np.random.standard_normal()
        else:
            for i in range(n):
                xn[i] = x[i] + drift[i] * dt
        t += dt
        steps += 1
        if dt < min_dt:
            min_dt = dt
        gmin = np.inf
        crossed = False
        for i in range(n):
            for j in range(i + 1, n):
                d = abs(xn[i] - xn[j])
                if d < gmin:
                    gmin = d
                if (xn[i] - xn[j]) * (x[i] - x[j]) < 0.0:
                    crossed = True
        for i in range(n):
            x[i] = xn[i]
        if gmin < min_gap:
            min_gap = gmin
        if gmin < threshold or crossed:
            collision_time = t
            break
    return min_gap, collision_time, x, steps, min_dt, flag


@njit(cache=True)
def _bessel_gap_path(g0, beta, T, dt0, c_adapt, threshold, seed):
    """Gap SDE dg = (beta/g) dt + sqrt(2) dW; returns 1.0 on a hit before T."""
    np.random.seed(seed)
    g = g0
    t = 0.0
    while t < T:
        dt = dt0
        cap = c_adapt * g * g / beta
        if cap < dt:
            dt = cap
        if T - t < dt:
            dt = T - t
        if dt < _RES_LIMIT_DT:
            return 1.0
        g = g + (beta / g) * dt + math.sqrt(2.0 * dt) * np.random.standard_normal()
        t += dt
        if g < threshold:  # includes crossings to g <= 0
            return 1.0
    return 0.0


def _spawn_seeds(seed: int, count: int) -> np.ndarray:
    """Independent per-path 32-bit seeds derived from one master seed."""
    ss = np.random.SeedSequence(seed)
    return ss.generate_state(count, dtype=np.uint32)


@dataclass(frozen=True)
class PathSummary:
    """Outcome of one simulated path."""

    x0: tuple
    beta: float
    T: float
    min_gap: float
    collision_time: float | None
    final: tuple
    steps: int
    min_dt: float
    resolution_limit: bool
    seed: int

    @property
    def collided(self) -> bool:
        return self.collision_time is not None


def simulate(
    x0,
    beta: float,
    T: float,
    dt0: float = 1e-3,
    seed: int = 0,
    threshold: float = 1e-6,
    c_adapt: float = 0.05,
    noise: bool = True,
) -> PathSummary:
    """Euler-Maruyama path of the Dyson SDE, deterministic given the seed.

    The step is min(dt0, c_adapt * gmin^2 / beta) for the current minimum
    gap gmin; ``noise=False`` integrates the deterministic skeleton, whose
    n = 2 gap obeys g(T) = sqrt(g0^2 + 2 beta T) exactly.
    """
    cfg = Configuration(x0)
    if cfg.on_singular_set():
        raise SingularSetError("initial configuration lies on the diagonal set")
    if not dt0 > 0:
        raise ValueError("dt0 must be positive")
    if not beta > 0:
        raise ValueError("beta must be positive")
    arr = cfg.array()
    mg, ct, xf, steps, min_dt, flag = _dyson_path(
        arr, beta, T, dt0, c_adapt, threshold, int(seed) % 2**32, bool(noise)
    )
    return PathSummary(
        x0=tuple(arr.tolist()),
        beta=beta,
        T=T,
        min_gap=float(mg),
        collision_time=float(ct) if ct >= 0.0 else None,
        final=tuple(np.asarray(xf).tolist()),
        steps=int(steps),
        min_dt=float(min_dt),
        resolution_limit=bool(flag),
        seed=int(seed),
    )


def default_x0(n: int) -> np.ndarray:
    """Evenly spaced start with unit gaps centered at the origin."""
    return np.arange(n, dtype=float) - 0.5 * (n - 1)


def _wilson_ci(hits: int, total: int, z: float = 1.959963984540054):
    """95% Wilson score interval; always contains the point estimate."""
    if total == 0:
        return 0.0, 1.0
    ph = hits / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (ph + z2 / (2 * total)) / denom
    half = z * math.sqrt(ph * (1 - ph) / total + z2 / (4 * total * total)) / denom
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == total else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class CollisionStats:
    beta: float
    n: int
    T: float
    paths: int
    frequency: float
    ci_low: float
    ci_high: float
    threshold: float
    seed: int


def collision_stats(
    n: int,
    beta: float,
    T: float,
    paths: int,
    seed: int = 0,
    x0=None,
    dt0: float = 1e-3,
    threshold: float = 1e-6,
) -> CollisionStats:
    """Monte Carlo collision frequency over independent per-path streams."""
    if paths < 100:
        raise ValueError("need at least 100 paths for meaningful statistics")
    start = default_x0(n) if x0 is None else np.asarray(x0, dtype=float)
    seeds = _spawn_seeds(seed, paths)
    hits = 0
    for k in range(paths):
        _, ct, _, _, _, _ = _dyson_path(
            start.copy(), beta, T, dt0, 0.05, threshold, int(seeds[k]), True
        )
        if ct >= 0.0:
            hits += 1
    freq = hits / paths
    lo, hi = _wilson_ci(hits, paths)
    return CollisionStats(
        beta=beta,
        n=n,
        T=T,
        paths=paths,
        frequency=freq,
        ci_low=lo,
        ci_high=hi,
        threshold=threshold,
        seed=seed,
    )


def bessel_hit_oracle(
    beta: float,
    T: float,
    x0_gap: float,
    paths: int,
    seed: int = 0,
    dt0: float = 1e-3,
    threshold: float = 1e-6,
) -> float:
    """Hit frequency of the 1-D gap SDE dg = (beta/g) dt + sqrt(2) dW.

    Independent of the particle simulator; same adaptive step policy.
    """
    if paths < 100:
        raise ValueError("need at least 100 paths")
    seeds = _spawn_seeds(seed + 0x5EED, paths)
    hits = 0.0
    for k in range(paths):
        hits += _bessel_gap_path(x0_gap, beta, T, dt0, 0.05, threshold, int(seeds[k]))
    return hits / paths


def center_of_mass_samples(
    n: int,
    beta: float,
    T: float,
    paths: int,
    seed: int = 0,
    x0=None,
    dt0: float = 1e-3,
    threshold: float = 1e-6,
) -> np.ndarray:
    """Final center-of-mass displacement of collision-free paths.

    The pair drifts cancel, so over surviving paths the displacement is
    exactly Gaussian with variance T/n.
    """
    start = default_x0(n) if x0 is None else np.asarray(x0, dtype=float)
    com0 = start.mean()
    seeds = _spawn_seeds(seed, paths)
    out = []
    for k in range(paths):
        _, ct, xf, _, _, _ = _dyson_path(
            start.copy(), beta, T, dt0, 0.05, threshold, int(seeds[k]), True
        )
        if ct < 0.0:
            out.append(np.asarray(xf).mean() - com0)
    return np.asarray(out)
