"""Contour machinery for the low-noise instability certificate.

Contours are simply connected site sets; their boundary edges join an
incorrectly decoded site inside to a correctly decoded site outside.  The
certificate rests on three ingredients implemented here: exhaustive
enumeration of origin-containing contours grouped by boundary length
(checked against the combinatorial bound l*3^(l-1)), the two series constants
whose smallness certifies instability, and the per-contour exponential weight
bound verified against exact enumeration on small windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .dobrushin import CertificateUnavailable
from .inference import enumerate_conditional, InferenceBudget, DEFAULT_BUDGET
from .lattice import DisorderField, LatticeWindow, ModelParams, Site, SpinField

__all__ = [
    "Contour",
    "enumerate_contours",
    "contour_count_bound",
    "series_c1",
    "series_c2",
    "peierls_series",
    "sharpened_series",
    "low_noise_threshold",
    "contour_weight_check",
    "instability_probability_bound",
    "InstabilityCertificate",
]

_NEIGHBORS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class Contour:
    """An origin-containing site set on the free lattice with its boundary size."""

    sites: frozenset[Site]
    boundary_edges: int
    simply_connected: bool

    @classmethod
    def from_sites(cls, sites) -> "Contour":
        cells = set(sites)
        if (0, 0) not in cells:
            raise ValueError("a contour must contain the origin")
        if not _connected(cells):
            raise ValueError("contour sites must be connected")
        return cls(frozenset(cells), _perimeter(cells), _simply_connected(cells))


def _connected(cells: set[Site]) -> bool:
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        y, x = stack.pop()
        for dy, dx in _NEIGHBORS:
            nb = (y + dy, x + dx)
            if nb in cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(cells)


def _perimeter(cells: set[Site]) -> int:
    return sum(
        1
        for (y, x) in cells
        for dy, dx in _NEIGHBORS
        if (y + dy, x + dx) not in cells
    )


def _simply_connected(cells: set[Site]) -> bool:
    """True when the complement of the cell set has a single component
    (checked by flood-filling the exterior of the bounding box)."""
    ys = [c[0] for c in cells]
    xs = [c[1] for c in cells]
    y0, y1 = min(ys) - 1, max(ys) + 1
    x0, x1 = min(xs) - 1, max(xs) + 1
    start = (y0, x0)
    seen = {start}
    stack = [start]
    while stack:
        y, x = stack.pop()
        for dy, dx in _NEIGHBORS:
            nb = (y + dy, x + dx)
            if (
                y0 <= nb[0] <= y1
                and x0 <= nb[1] <= x1
                and nb not in cells
                and nb not in seen
            ):
                seen.add(nb)
                stack.append(nb)
    total_box = (y1 - y0 + 1) * (x1 - x0 + 1)
    return len(seen) == total_box - len(cells)


def contour_count_bound(l: int) -> float:
    """The combinatorial bound l*3^(l-1) on origin-containing contours."""
    return l * 3.0 ** (l - 1)


def enumerate_contours(max_boundary: int = 12) -> dict[int, int]:
    """Exhaustive counts of simply connected origin-containing site sets
    grouped by boundary-edge count l, for l <= max_boundary.

    Translation classes of connected cell sets are generated once
    (Redelmeier-style canonical growth) and weighted by their cell count,
    since a shape with n cells has exactly n translates containing the
    origin.  Asserts count(l) <= l*3^(l-1) for every l.
    """
    if max_boundary > 14:
        raise ValueError("exhaustive search is budgeted for boundary <= 14")
    # a set of n cells has boundary >= 2*ceil(2*sqrt(n))
    n_max = 0
    while 2 * math.ceil(2.0 * math.sqrt(n_max + 1)) <= max_boundary:
        n_max += 1
    counts: dict[int, int] = {}

    def visit(cells: set[Site], perim: int):
        if perim <= max_boundary and _simply_connected(cells):
            counts[perim] = counts.get(perim, 0) + len(cells)

    def admissible(c: Site) -> bool:
        return c[0] > 0 or (c[0] == 0 and c[1] > 0)

    def grow(untried: list[Site], cells: set[Site], seen: set[Site], perim: int):
        while untried:
            c = untried.pop()
            shared = sum(1 for dy, dx in _NEIGHBORS if (c[0] + dy, c[1] + dx) in cells)
            cells.add(c)
            new_perim = perim + 4 - 2 * shared
            visit(cells, new_perim)
            if len(cells) < n_max:
                fresh = [
                    (c[0] + dy, c[1] + dx)
                    for dy, dx in _NEIGHBORS
                    if admissible((c[0] + dy, c[1] + dx))
                    and (c[0] + dy, c[1] + dx) not in seen
                    and (c[0] + dy, c[1] + dx) not in cells
                ]
                seen.update(fresh)
                grow(untried + fresh, cells, seen, new_perim)
                seen.difference_update(fresh)
            cells.remove(c)

    grow([(0, 0)], set(), {(0, 0)}, 0)
    for l, count in counts.items():
        if count > contour_count_bound(l):
            raise AssertionError(f"count {count} at boundary {l} violates l*3^(l-1)")
    return dict(sorted(counts.items()))


def _geometric_weight_series(ratio: float, tol: float) -> tuple[float, float]:
    """sum_{l>=3} (l/3) * ratio^l with the exact derivative-series tail.

    Returns (value, tail) where tail is the closed-form remainder added after
    individual terms drop below tol.
    """
    if not 0.0 <= ratio:
        raise ValueError("ratio must be nonnegative")
    if ratio >= 1.0:
        raise ValueError(f"series diverges: geometric ratio {ratio:.4f} >= 1")
    if ratio == 0.0:
        return 0.0, 0.0
    total = 0.0
    l = 3
    power = ratio**3
    # the tail formula is exact, so capping the term loop near ratio -> 1
    # (where l*ratio^l decays only after ~1/(1-ratio) terms) loses nothing
    while l < 10000:
        term = l * power / 3.0
        if term < tol:
            break
        total += term
        power *= ratio
        l += 1
    tail = power * (l - (l - 1) * ratio) / (3.0 * (1.0 - ratio) ** 2)
    return total + tail, tail


def series_c1(p: float, tol: float = 1e-15) -> tuple[float, float]:
    """sum_{l>=3} l*3^(l-1)*(p/(1-p))^(l/2); requires 3*sqrt(p/(1-p)) < 1."""
    if not 0.0 <= p <= 0.5:
        raise ValueError("p must lie in [0, 1/2]")
    return _geometric_weight_series(3.0 * math.sqrt(p / (1.0 - p)), tol)


def series_c2(p: float, tol: float = 1e-15) -> tuple[float, float]:
    """sum_{l>=3} l*3^(l-1)*2^l*p^(l/4); requires 6*p^(1/4) < 1."""
    if not 0.0 <= p <= 0.5:
        raise ValueError("p must lie in [0, 1/2]")
    return _geometric_weight_series(6.0 * p**0.25, tol)


def peierls_series(p: float, tol: float = 1e-15) -> tuple[float, float, float, float]:
    """Both certificate constants: (c1, c2, c1_tail, c2_tail)."""
    c1, t1 = series_c1(p, tol)
    c2, t2 = series_c2(p, tol)
    return c1, c2, t1, t2


def sharpened_series(
    p: float, counts: dict[int, int], tol: float = 1e-15
) -> tuple[float, float]:
    """Sharper (c1', c2') using exact contour counts for enumerated boundary
    lengths and the combinatorial bound beyond; c1' <= c1 and c2' <= c2."""
    l_max = max(counts) if counts else 2
    a1 = math.sqrt(p / (1.0 - p))
    a2 = 2.0 * p**0.25

    def sharpen(a: float, crude: float) -> float:
        if a == 0.0:
            return 0.0
        head_exact = sum(c * a**l for l, c in counts.items())
        head_crude = sum(contour_count_bound(l) * a**l for l in range(3, l_max + 1))
        return crude - head_crude + head_exact

    c1, c2, _, _ = peierls_series(p, tol)
    return sharpen(a1, c1), sharpen(a2, c2)


def low_noise_threshold(tol: float = 1e-12) -> float:
    """Largest p with c1(p) <= 1/4 and c2(p) <= 1/2, by bisection.

    Each constraint is solved separately on its convergence domain and the
    binding (smaller) root is returned.
    """
    def root(series, cap, domain_hi):
        lo, hi = 1e-300, domain_hi * (1.0 - 1e-12)
        if series(hi, tol)[0] <= cap:
            return hi
        return float(bisect(lambda p: series(p, tol)[0] - cap, lo, hi, xtol=1e-15))

    p_c1 = root(series_c1, 0.25, 1.0 / (1.0 + 9.0))       # 3*sqrt(p/(1-p)) < 1
    p_c2 = root(series_c2, 0.50, 6.0**-4)                  # 6*p^(1/4) < 1
    return min(p_c1, p_c2)


def window_boundary_edges(window: LatticeWindow, contour_sites: set[Site]) -> list[int]:
    """Indices of the window edges with exactly one endpoint in the contour
    (the other endpoint then lies in the rest of the interior or on the
    decoded boundary)."""
    for q in contour_sites:
        if not window.is_interior(q):
            raise ValueError(f"contour site {q} is not interior")
    out = []
    for e, (q, r) in enumerate(window.edges):
        if (q in contour_sites) != (r in contour_sites):
            out.append(e)
    return out


def contour_weight_check(
    params: ModelParams,
    window: LatticeWindow,
    disorder: DisorderField,
    x: SpinField,
    contour_sites: set[Site],
    budget: InferenceBudget = DEFAULT_BUDGET,
) -> tuple[float, float]:
    """Exact probability that the contour event occurs versus its certified
    bound exp(-2*beta*sum of noise signs over the contour's boundary edges);
    the contract is lhs <= rhs.

    The contour event requires every contour site touching a boundary edge to
    be decoded incorrectly while the sites just outside (within the interior)
    are decoded correctly; decoded-boundary sites count as correct by the
    conditioning convention.
    """
    law = enumerate_conditional(params, window, disorder, x, budget)
    edge_ids = window_boundary_edges(window, contour_sites)
    rhs = math.exp(-2.0 * params.beta * sum(int(disorder.values[e]) for e in edge_ids))

    flipped: set[Site] = set()
    correct: set[Site] = set()
    for e in edge_ids:
        q, r = window.edges[e]
        inner, outer = (q, r) if q in contour_sites else (r, q)
        flipped.add(inner)
        if window.is_interior(outer):
            correct.add(outer)
    n = window.n_interior
    states = np.arange(1 << n, dtype=np.int64)
    mask = np.ones(1 << n, dtype=bool)
    for q in flipped:
        i = window.interior_index[q]
        spin = 1 - 2 * ((states >> i) & 1)
        mask &= spin == -x.value_at(q)
    for q in correct:
        i = window.interior_index[q]
        spin = 1 - 2 * ((states >> i) & 1)
        mask &= spin == x.value_at(q)
    lhs = float(law.probs[mask].sum())
    return lhs, rhs


@dataclass(frozen=True)
class InstabilityCertificate:
    p: float
    k: int
    m: int
    c1: float
    c2: float

    @property
    def mass_bound(self) -> float:
        """Lower bound on the conditional mass of the true spin at (k,0),
        holding with noise probability at least 1 - c2."""
        return 1.0 - self.c1

    @property
    def magnetization_bound(self) -> float:
        return 1.0 - 2.0 * self.c1

    @property
    def order_parameter_bound(self) -> float:
        """Certified lower bound on E|E[z at (k,0)]|, uniform in k and m."""
        return (1.0 - self.c2) * self.magnetization_bound


def instability_probability_bound(p: float, k: int, m: int) -> InstabilityCertificate:
    """Certificate that the order parameter stays >= 1/4 for every horizon
    and radius; refused whenever the series constants exceed their caps."""
    if k < 1 or m < 1:
        raise ValueError("require k, m >= 1")
    if p == 0.0:
        return InstabilityCertificate(p, k, m, 0.0, 0.0)
    try:
        c1, c2, _, _ = peierls_series(p)
    except ValueError as exc:
        raise CertificateUnavailable(f"series diverge at p={p}: {exc}") from exc
    if c1 > 0.25 or c2 > 0.5:
        raise CertificateUnavailable(
            f"constants c1={c1:.4g}, c2={c2:.4g} exceed the caps (1/4, 1/2) at p={p}"
        )
    return InstabilityCertificate(p, k, m, c1, c2)
