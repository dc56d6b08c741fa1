"""Space-time lattice windows, spin/disorder fields, and the generative sampler.

The window covers interior sites J = [1,k] x [-m,m] of the space-time plane
(time is the first coordinate) together with the decoded boundary
dJ = {0} x [-m,m]  u  [1,k] x {-m-1, m+1}.
Observations live on nearest-neighbour edges with at least one endpoint in J:
an edge value is the product of its endpoint spins times an independent noise
sign that is -1 with probability p.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

Site = tuple[int, int]  # (time, space)

__all__ = [
    "Site",
    "LatticeWindow",
    "SpinField",
    "DisorderField",
    "ModelParams",
    "SeedSpec",
    "beta_from_p",
    "p_from_beta",
    "truncation_error_bound",
    "sample_space_time_model",
    "gauge_transform",
    "all_plus",
]


def beta_from_p(p: float) -> float:
    """Coupling strength of the error probability: log sqrt((1-p)/p).

    p = 0 maps to +inf (noiseless mode); p = 1/2 maps to 0.
    """
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"error probability must lie in [0, 1/2], got {p}")
    if p == 0.0:
        return math.inf
    return 0.5 * math.log((1.0 - p) / p)


def p_from_beta(beta: float) -> float:
    """Exact inverse of beta_from_p: p = 1/(1 + e^(2*beta))."""
    if beta < 0:
        raise ValueError("coupling must be nonnegative")
    if math.isinf(beta):
        return 0.0
    return 1.0 / (1.0 + math.exp(2.0 * beta))


def truncation_error_bound(beta: float, k: int, m: int) -> tuple[float, bool]:
    """Doeblin bound 2(1 - e^(-4 beta k))^(m+1) on the spatial truncation error.

    Returns (bound, vacuous).  At beta = inf the bound degenerates to the
    trivial value 2 and is flagged vacuous.
    """
    if k < 1 or m < 0:
        raise ValueError("require k >= 1 and m >= 0")
    if beta < 0:
        raise ValueError("coupling must be nonnegative")
    if math.isinf(beta):
        return 2.0, True
    base = -math.expm1(-4.0 * beta * k)  # 1 - e^(-4 beta k), accurate near 0
    return 2.0 * base ** (m + 1), False


class LatticeWindow:
    """Finite space-time window with a fixed site and edge ordering.

    Interior sites are enumerated row-major with time major:
    (1,-m), (1,-m+1), ..., (1,m), (2,-m), ...  Boundary sites follow:
    the time-0 row, then the left column v=-m-1, then the right column v=m+1.
    Edges are enumerated time edges first (row-major by their interior
    endpoint), then space edges row by row.
    """

    def __init__(self, k: int, m: int):
        if k < 1:
            raise ValueError("horizon k must be >= 1")
        if m < 0:
            raise ValueError("radius m must be >= 0")
        self.k = k
        self.m = m
        self.interior_sites: list[Site] = [
            (t, v) for t in range(1, k + 1) for v in range(-m, m + 1)
        ]
        self.boundary_sites: list[Site] = (
            [(0, v) for v in range(-m, m + 1)]
            + [(t, -m - 1) for t in range(1, k + 1)]
            + [(t, m + 1) for t in range(1, k + 1)]
        )
        self.all_sites: list[Site] = self.interior_sites + self.boundary_sites
        self.interior_index = {q: i for i, q in enumerate(self.interior_sites)}
        self.site_index = {q: i for i, q in enumerate(self.all_sites)}

        # time edges ((t-1,v),(t,v)), then space edges ((t,v),(t,v+1))
        self.edges: list[tuple[Site, Site]] = []
        for t in range(1, k + 1):
            for v in range(-m, m + 1):
                self.edges.append(((t - 1, v), (t, v)))
        for t in range(1, k + 1):
            for v in range(-m - 1, m + 1):
                self.edges.append(((t, v), (t, v + 1)))
        self.edge_index = {e: i for i, e in enumerate(self.edges)}

    @property
    def n_interior(self) -> int:
        return len(self.interior_sites)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def origin(self) -> Site:
        """The reconstruction target site (k, 0)."""
        return (self.k, 0)

    def is_interior(self, q: Site) -> bool:
        return q in self.interior_index

    def edge_key(self, q: Site, r: Site) -> tuple[Site, Site]:
        """Canonical (sorted) form of an unordered edge."""
        return (q, r) if q <= r else (r, q)

    def __eq__(self, other) -> bool:
        return isinstance(other, LatticeWindow) and (self.k, self.m) == (other.k, other.m)

    def __hash__(self) -> int:
        return hash((self.k, self.m))

    def __repr__(self) -> str:
        return f"LatticeWindow(k={self.k}, m={self.m})"


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.asarray(values, dtype=np.int8)
    if not np.all(np.abs(out) == 1):
        raise ValueError("spin/sign values must be exactly +-1")
    out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SpinField:
    """Assignment of +-1 spins to the interior (or interior+boundary) sites."""

    window: LatticeWindow
    values: np.ndarray  # int8, aligned with interior_sites or all_sites
    coverage: str = "interior"  # "interior" | "full"

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        expected = (
            self.window.n_interior
            if self.coverage == "interior"
            else len(self.window.all_sites)
        )
        if self.coverage not in ("interior", "full"):
            raise ValueError(f"unknown coverage {self.coverage!r}")
        if len(self.values) != expected:
            raise ValueError(
                f"{self.coverage} field needs {expected} values, got {len(self.values)}"
            )

    def value_at(self, q: Site) -> int:
        idx = (
            self.window.interior_index
            if self.coverage == "interior"
            else self.window.site_index
        )
        return int(self.values[idx[q]])

    def interior_values(self) -> np.ndarray:
        return self.values[: self.window.n_interior]


@dataclass(frozen=True)
class DisorderField:
    """A +-1 value on every window edge (noise signs or realized observations)."""

    window: LatticeWindow
    values: np.ndarray  # int8, aligned with window.edges
    kind: str = "noise"  # "noise" | "observation"

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        if len(self.values) != self.window.n_edges:
            raise ValueError(
                f"edge field needs {self.window.n_edges} values, got {len(self.values)}"
            )

    def value_at(self, q: Site, r: Site) -> int:
        return int(self.values[self.window.edge_index[self.window.edge_key(q, r)]])


@dataclass(frozen=True)
class ModelParams:
    """Error probability p in [0, 1/2] and the derived coupling beta."""

    p: float

    def __post_init__(self):
        beta_from_p(self.p)  # validates the range

    @property
    def beta(self) -> float:
        return beta_from_p(self.p)

    @property
    def noiseless(self) -> bool:
        return self.p == 0.0


@dataclass(frozen=True)
class SeedSpec:
    """Keyed stream coordinates of the counter-based generator.

    Streams are Philox counters keyed by (master, experiment, sweep,
    replicate), so identical coordinates reproduce identical samples and
    distinct coordinates give independent streams.
    """

    master: int
    experiment: str = ""
    sweep: int = 0
    replicate: int = 0

    def spawn_key(self) -> tuple[int, int, int]:
        return (zlib.crc32(self.experiment.encode()), self.sweep, self.replicate)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master, spawn_key=self.spawn_key())
        return np.random.Generator(np.random.Philox(seq))

    def replicate_spec(self, replicate: int) -> "SeedSpec":
        return SeedSpec(self.master, self.experiment, self.sweep, replicate)


def sample_space_time_model(
    params: ModelParams, window: LatticeWindow, seed: SeedSpec
) -> tuple[SpinField, DisorderField, DisorderField]:
    """Draw (signal, noise, observations) for the space-time product model.

    The signal is i.i.d. uniform +-1 on interior+boundary sites, noise signs
    are i.i.d. with P[-1] = p on edges, and each observation is the product
    signal_q * signal_r * noise_qr of its edge.
    """
    rng = seed.generator()
    n_sites = len(window.all_sites)
    signal = (1 - 2 * rng.integers(0, 2, size=n_sites)).astype(np.int8)
    if params.noiseless:
        xi = np.ones(window.n_edges, dtype=np.int8)
    else:
        xi = np.where(rng.random(window.n_edges) < params.p, -1, 1).astype(np.int8)
    qi = np.array([window.site_index[q] for q, _ in window.edges])
    ri = np.array([window.site_index[r] for _, r in window.edges])
    obs = (signal[qi] * signal[ri] * xi).astype(np.int8)
    return (
        SpinField(window, signal, coverage="full"),
        DisorderField(window, xi, kind="noise"),
        DisorderField(window, obs, kind="observation"),
    )


def gauge_transform(x: SpinField, z: SpinField) -> SpinField:
    """Sitewise product field sigma_q = x_q * z_q (an involution in z)."""
    if x.window != z.window or x.coverage != z.coverage:
        raise ValueError("gauge transform requires matching window and coverage")
    return SpinField(x.window, x.values * z.values, coverage=x.coverage)


def all_plus(window: LatticeWindow, coverage: str = "full") -> SpinField:
    n = window.n_interior if coverage == "interior" else len(window.all_sites)
    return SpinField(window, np.ones(n, dtype=np.int8), coverage=coverage)
