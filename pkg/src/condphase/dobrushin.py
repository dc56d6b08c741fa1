"""Dobrushin comparison certificates for the high-noise regime.

Compares the conditional law given (initial row, observations) against the
law given observations alone on a finite window.  The interdependence matrix
C holds exact exhaustive suprema of single-site conditional differences, so
the certificate applies on a strictly larger noise range than the analytic
tanh(4*beta) bound, which is demoted to a test assertion.  The single-site
discrepancy vector b is 1 on the time-0 row (point mass vs heat bath) and 0
elsewhere (identical conditionals).

A per-realization mode (sup over spins only, observations fixed) would
coincide with the disorder-uniform entries here: the conditionals depend on
the observation signs only through products with neighbour spins that range
freely in the supremum, so no separate mode is provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import expit

from .lattice import LatticeWindow, ModelParams, Site, beta_from_p

__all__ = [
    "DobrushinData",
    "CertificateUnavailable",
    "build_dobrushin_data",
    "dobrushin_condition",
    "comparison_bound",
    "weighted_norm",
    "high_noise_threshold",
    "analytic_decay_bound",
]


class CertificateUnavailable(RuntimeError):
    """The contraction condition fails; no comparison bound can be certified."""


@dataclass(frozen=True)
class DobrushinData:
    """Sparse interdependence data over the window's sites.

    rows[j] lists (i, C_ji) for the nonzero entries of row j; sites are
    indexed by window.site_index (interior first, then boundary).
    """

    window: LatticeWindow
    rows: tuple[tuple[tuple[int, float], ...], ...]
    b: np.ndarray
    target: tuple[int, ...]

    @property
    def n_sites(self) -> int:
        return len(self.rows)

    def row_sum(self, j: int) -> float:
        return sum(c for _, c in self.rows[j])

    def entry_max(self) -> float:
        return max((c for row in self.rows for _, c in row), default=0.0)


def _conditional(beta: float, h: float) -> float:
    return float(expit(2.0 * beta * h))


def _entry(beta: float, degree: int) -> float:
    """Exact sup over neighbour configurations and disorder signs of the
    single-site conditional change when one neighbour flips."""
    rests = range(-(degree - 1), degree, 2) if degree > 1 else [0]
    return max(_conditional(beta, r + 1) - _conditional(beta, r - 1) for r in rests)


def build_dobrushin_data(
    window: LatticeWindow,
    params: ModelParams,
    target_sites: list[Site] | None = None,
) -> DobrushinData:
    """Exhaustive-supremum C matrix and discrepancy vector b for the window.

    Rows at time-0 sites vanish (the conditional there is a point mass once
    the initial row is given); all other entries are at most tanh(4*beta).
    """
    if math.isinf(params.beta):
        raise ValueError("certificates require a finite coupling")
    beta = params.beta
    nbrs: dict[int, list[int]] = {i: [] for i in range(len(window.all_sites))}
    for q, r in window.edges:
        a, b_ = window.site_index[q], window.site_index[r]
        nbrs[a].append(b_)
        nbrs[b_].append(a)
    rows = []
    for j, site in enumerate(window.all_sites):
        if site[0] == 0:
            rows.append(())
            continue
        deg = len(nbrs[j])
        c = _entry(beta, deg)
        rows.append(tuple((i, c) for i in nbrs[j]))
    b = np.array([1.0 if site[0] == 0 else 0.0 for site in window.all_sites])
    if target_sites is None:
        target_sites = [(window.k, v) for v in range(-window.m, window.m + 1)]
    target = tuple(window.site_index[q] for q in target_sites)
    return DobrushinData(window, tuple(rows), b, target)


def dobrushin_condition(data: DobrushinData) -> tuple[float, bool]:
    """Exact supremum of the row sums and whether it is < 1."""
    sup = max(data.row_sum(j) for j in range(data.n_sites))
    return sup, sup < 1.0


def comparison_bound(data: DobrushinData, tol: float = 1e-12) -> float:
    """Certified upper bound sum_{j in target} sum_i D_ji b_i, D = sum C^n.

    The Neumann series is iterated as sparse matrix-vector products (D is
    never materialized); the geometric tail with ratio sup-row-sum is added
    once the remainder bound drops below tol, so the result is an upper
    bound, not an approximation.
    """
    sup, holds = dobrushin_condition(data)
    if not holds:
        raise CertificateUnavailable(f"sup row sum {sup:.6f} >= 1")
    v = data.b.copy()
    total = float(sum(v[j] for j in data.target))
    n_target = len(data.target)
    while True:
        tail = n_target * sup * float(np.max(v)) / (1.0 - sup)
        if tail < tol or np.max(v) == 0.0:
            return total + max(tail, 0.0)
        new = np.zeros_like(v)
        for j in range(data.n_sites):
            row = data.rows[j]
            if row:
                new[j] = sum(c * v[i] for i, c in row)
        v = new
        total += float(sum(v[j] for j in data.target))


def weighted_norm(data: DobrushinData) -> float:
    """sup_j sum_i e^(dist(j,i)) C_ji; equals e times the row sums under
    nearest-neighbour sparsity."""
    sites = data.window.all_sites
    best = 0.0
    for j in range(data.n_sites):
        s = 0.0
        for i, c in data.rows[j]:
            dist = abs(sites[j][0] - sites[i][0]) + abs(sites[j][1] - sites[i][1])
            s += math.exp(dist) * c
        best = max(best, s)
    return best


def crude_norm_bound(p: float) -> float:
    """The analytic bound 4e*tanh(4*beta(p)) the crude certificate relies on."""
    return 4.0 * math.e * math.tanh(4.0 * beta_from_p(p))


def high_noise_threshold() -> float:
    """The probability p* with 4e*tanh(4*beta(p*)) = 1/2, found by bisection;
    the crude certificate applies for every p > p*."""
    return float(bisect(lambda p: crude_norm_bound(p) - 0.5, 1e-9, 0.5 - 1e-12, xtol=1e-12))


def analytic_decay_bound(k: int, m: int, f_inf: float = 1.0) -> tuple[float, bool]:
    """The closed-form decay bound (8m+4)*||f||_inf*e^(-k).

    Returns (value, vacuous); the bound is vacuous when it is not smaller
    than the trivial bound 2*||f||_inf.
    """
    if k < 1 or m < 0:
        raise ValueError("require k >= 1 and m >= 0")
    value = (8 * m + 4) * f_inf * math.exp(-k)
    return value, value >= 2.0 * f_inf
