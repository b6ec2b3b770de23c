"""Bakry-Emery N-Ricci form of the repulsive weight.

For the potential V = -log w_beta on R^n the N-Ricci tensor reduces to the
quadratic form

    Ric_N(v, v)_x = beta * sum_{i<j} (v_i - v_j)^2 / (x_i - x_j)^2
                    - beta^2/(N - n) * ( sum_{i<j} (v_i - v_j)/(x_i - x_j) )^2,

nonnegative exactly when N >= N_beta = n + (beta/2) n (n-1); the bound is
sharp along v = x.  This module builds the symmetric matrix of the form and
checks nonnegativity spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Configuration, ModelParams, SingularSetError, _as_array

__all__ = ["RicciForm", "n_beta", "ricci_form", "min_ricci_eig", "matrix_norm_estimate"]


def n_beta(n: int, beta: float) -> float:
    """Sharp dimension bound N_beta = n + (beta/2) n (n-1)."""
    if n < 1:
        raise ValueError("need n >= 1")
    if not beta > 0:
        raise ValueError("need beta > 0")
    return n + 0.5 * beta * n * (n - 1)


@dataclass(frozen=True)
class RicciForm:
    """Matrix representation M of the N-Ricci form at a base point.

    ``scale`` is the cancellation-free magnitude (sum of the row-sum norms
    of the two terms before subtraction); at N = N_beta the terms can cancel
    to the exact zero matrix, so tolerances relative to ||M|| alone would be
    meaningless there.
    """

    x: Configuration
    params: ModelParams
    matrix: np.ndarray
    scale: float

    def value(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ self.matrix @ v)


def ricci_form(x, params: ModelParams) -> RicciForm:
    """Assemble M with v.Mv = Ric_N(v, v)_x.

    M = beta * sum_{i<j} (e_i - e_j)(e_i - e_j)^T / (x_i - x_j)^2
        - beta^2/(N - n) * a a^T,     a = sum_{i<j} (e_i - e_j)/(x_i - x_j);

    the rank-one term is dropped for N = inf.
    """
    arr = _as_array(x)
    cfg = Configuration(arr)
    if cfg.n != params.n:
        raise ValueError(f"configuration size {cfg.n} != params.n {params.n}")
    if cfg.on_singular_set():
        raise SingularSetError("Ricci form undefined on the diagonal set")
    n = cfg.n
    beta = params.beta
    M = np.zeros((n, n))
    a = np.zeros(n)
    for i in range(n):
        for j in range(i + 1, n):
            g = arr[i] - arr[j]
            c = 1.0 / (g * g)
            M[i, i] += c
            M[j, j] += c
            M[i, j] -= c
            M[j, i] -= c
            a[i] += 1.0 / g
            a[j] -= 1.0 / g
    M *= beta
    rank_one = beta * beta * params.inv_excess_dim * np.outer(a, a)
    scale = matrix_norm_estimate(M) + matrix_norm_estimate(rank_one)
    M = M - rank_one
    return RicciForm(x=cfg, params=params, matrix=M, scale=scale)


def matrix_norm_estimate(M: np.ndarray) -> float:
    """Row-sum (infinity-norm) bound on the spectral norm of a symmetric M."""
    return float(np.max(np.sum(np.abs(M), axis=1)))


def min_ricci_eig(x, params: ModelParams) -> float:
    """Smallest eigenvalue of the N-Ricci form matrix (symmetric eigensolve)."""
    form = ricci_form(x, params)
    return float(np.linalg.eigvalsh(form.matrix)[0])
