"""Nearest-neighbour specifications on finite boxes, observation channels,
conditional specifications, monotonicity checking, and the plus/minus
uniqueness and conditional-mixing experiments.

Finite boxes with explicit boundary spins stand in for infinite-volume Gibbs
measures throughout: the all-plus and all-minus boundary conditions realize
the extremal measures of a monotone specification at finite volume.
Conditioning on observations folds into the potentials (vertex observations
shift the single-site terms, edge observations shift the pair couplings), so
a conditional specification is again a nearest-neighbour specification and
all exact machinery applies to it unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .inference import BudgetExceeded
from .lattice import SeedSpec, beta_from_p
from .mcmc import ChainSchedule, SandwichResult, sandwich_coupling

__all__ = [
    "Box",
    "NNSpecification",
    "ising_spec",
    "iid_spec",
    "VertexChannel",
    "EdgeChannel",
    "ConditionalSpecification",
    "conditioned",
    "finite_volume_law",
    "gamma_dense",
    "local_conditional",
    "MonotonicityReport",
    "monotonicity_check",
    "CRFGibbsContext",
    "plus_minus_experiment",
    "conditional_mixing_metric",
    "follmer_check",
    "sample_gibbs",
    "edge_couplings_as_spec",
]

BSite = tuple[int, int]

MAX_BOX_SITES = 20


class Box:
    """Finite rectangle in Z^2 with canonical site, edge and rim orderings."""

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise ValueError("box must be at least 1x1")
        self.rows, self.cols = rows, cols
        self.sites: list[BSite] = [(i, j) for i in range(rows) for j in range(cols)]
        self.index = {s: i for i, s in enumerate(self.sites)}
        self.edges: list[tuple[int, int]] = []  # (site_idx, site_idx), right then down
        for i in range(rows):
            for j in range(cols - 1):
                self.edges.append((self.index[(i, j)], self.index[(i, j + 1)]))
        for i in range(rows - 1):
            for j in range(cols):
                self.edges.append((self.index[(i, j)], self.index[(i + 1, j)]))
        # rim edges join an inner site to a boundary position outside the box
        self.rim: list[tuple[int, BSite]] = []
        for i in range(rows):
            self.rim.append((self.index[(i, 0)], (i, -1)))
            self.rim.append((self.index[(i, cols - 1)], (i, cols)))
        for j in range(cols):
            self.rim.append((self.index[(0, j)], (-1, j)))
            self.rim.append((self.index[(rows - 1, j)], (rows, j)))

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def __repr__(self):
        return f"Box({self.rows}x{self.cols})"


def _resolve_bc(box: Box, bc) -> dict[BSite, int] | None:
    if bc is None:
        return None
    if bc == "plus":
        return {s: 1 for _, s in box.rim}
    if bc == "minus":
        return {s: -1 for _, s in box.rim}
    return dict(bc)


@dataclass(frozen=True)
class NNSpecification:
    """Single-site and pair potentials over a box (index 0 means spin +1).

    psi has shape (n_sites, 2); phi_int has one 2x2 table per internal edge
    and phi_rim one per rim edge, oriented (inner spin, boundary spin).
    """

    box: Box
    psi: np.ndarray
    phi_int: np.ndarray
    phi_rim: np.ndarray

    def __post_init__(self):
        n, ne, nr = self.box.n_sites, len(self.box.edges), len(self.box.rim)
        if self.psi.shape != (n, 2):
            raise ValueError("psi must have shape (n_sites, 2)")
        if self.phi_int.shape != (ne, 2, 2) or self.phi_rim.shape != (nr, 2, 2):
            raise ValueError("pair potential shapes do not match the box")


def ising_spec(box: Box, beta: float, coupling: float = 1.0, field: float = 0.0) -> NNSpecification:
    """Ising potentials: pair term beta*J*s*s', site term beta*mu*s."""
    pair = beta * coupling * np.array([[1.0, -1.0], [-1.0, 1.0]])
    psi = np.tile(beta * field * np.array([1.0, -1.0]), (box.n_sites, 1))
    return NNSpecification(
        box,
        psi,
        np.tile(pair, (len(box.edges), 1, 1)),
        np.tile(pair, (len(box.rim), 1, 1)),
    )


def iid_spec(box: Box) -> NNSpecification:
    """Zero potentials: sites independent uniform (the edge-observation toy model's prior)."""
    return ising_spec(box, 0.0)


@dataclass(frozen=True)
class VertexChannel:
    """Per-site sign flips: the observation at v equals the spin at v times an
    independent sign that is -1 with probability p_v; p_v = 1/2 means the
    site is effectively unobserved."""

    p: np.ndarray  # per-site flip probabilities in (0, 1/2] (or 0 for noiseless)

    @classmethod
    def uniform(cls, box: Box, p: float) -> "VertexChannel":
        return cls(np.full(box.n_sites, float(p)))

    def betas(self) -> np.ndarray:
        return np.array([beta_from_p(pv) for pv in self.p])

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        flips = np.where(rng.random(len(x)) < self.p, -1, 1)
        return (x * flips).astype(np.int8)


@dataclass(frozen=True)
class EdgeChannel:
    """Per-edge sign flips of the product of the endpoint spins (gradient
    observations); only internal box edges are observed."""

    p: float

    def beta(self) -> float:
        return beta_from_p(self.p)

    def sample(self, box: Box, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        prods = np.array([x[a] * x[b] for a, b in box.edges], dtype=np.int8)
        if self.p == 0.0:
            return prods
        flips = np.where(rng.random(len(prods)) < self.p, -1, 1)
        return (prods * flips).astype(np.int8)


def conditioned(spec: NNSpecification, channel, y: np.ndarray) -> NNSpecification:
    """Fold realized observations into the potentials.

    Vertex observations add beta_v*y_v to the site terms, edge observations
    add beta*y_e to the pair couplings; either way the conditional
    specification is again nearest-neighbour (the gauge reduction of the
    edge-observation model to explicit random-bond couplings).
    """
    if isinstance(channel, VertexChannel):
        betas = channel.betas()
        if np.any(np.isinf(betas)):
            raise ValueError("noiseless vertex channels are handled by direct enumeration")
        shift = (betas * y)[:, None] * np.array([1.0, -1.0])
        return NNSpecification(spec.box, spec.psi + shift, spec.phi_int, spec.phi_rim)
    if isinstance(channel, EdgeChannel):
        beta = channel.beta()
        if math.isinf(beta):
            raise ValueError("noiseless edge channels are handled by direct enumeration")
        pair = np.array([[1.0, -1.0], [-1.0, 1.0]])
        phi = spec.phi_int + beta * y[:, None, None] * pair
        return NNSpecification(spec.box, spec.psi, phi, spec.phi_rim)
    raise TypeError(f"unknown channel {channel!r}")


@dataclass(frozen=True)
class ConditionalSpecification:
    """Provenance wrapper: base specification, channel, realized observations."""

    base: NNSpecification
    channel: object
    y: np.ndarray

    @property
    def folded(self) -> NNSpecification:
        return conditioned(self.base, self.channel, self.y)


def edge_couplings_as_spec(box: Box, beta: float, y: np.ndarray) -> NNSpecification:
    """Random-bond couplings beta*y_e built directly (not via folding); used
    to cross-check the conditional law of the product-observation model."""
    pair = np.array([[1.0, -1.0], [-1.0, 1.0]])
    phi = beta * y[:, None, None] * pair
    spec = iid_spec(box)
    return NNSpecification(box, spec.psi, phi, spec.phi_rim)


def _state_bits(n: int) -> np.ndarray:
    states = np.arange(1 << n, dtype=np.int64)
    return ((states[:, None] >> np.arange(n)) & 1).astype(np.int64)


def _full_energies(spec: NNSpecification, bc: dict[BSite, int] | None) -> np.ndarray:
    box = spec.box
    n = box.n_sites
    if n > MAX_BOX_SITES:
        raise BudgetExceeded(f"{n} sites exceed the enumeration budget")
    bits = _state_bits(n)
    e = spec.psi[np.arange(n), bits].sum(axis=1)
    for idx, (a, b) in enumerate(box.edges):
        e = e + spec.phi_int[idx][bits[:, a], bits[:, b]]
    if bc is not None:
        for idx, (inner, bsite) in enumerate(box.rim):
            bbit = (1 - bc[bsite]) // 2
            e = e + spec.phi_rim[idx][bits[:, inner], bbit]
    return e


def finite_volume_law(spec: NNSpecification, bc="plus") -> np.ndarray:
    """Dense Gibbs law over all box configurations for the given boundary
    condition (None for free); state bit i is 0 when site i is +1."""
    e = _full_energies(spec, _resolve_bc(spec.box, bc))
    logz = logsumexp(e)
    return np.exp(e - logz)


def gamma_dense(
    spec: NNSpecification,
    volume: list[int],
    base_bits: np.ndarray,
    bc="plus",
) -> np.ndarray:
    """Dense kernel gamma_V(x, .) over the 2^|V| configurations of `volume`,
    with off-volume spins taken from base_bits and rim edges from bc."""
    box = spec.box
    bcd = _resolve_bc(box, bc)
    nv = len(volume)
    pos = {s: i for i, s in enumerate(volume)}
    bits = _state_bits(nv)
    e = np.zeros(1 << nv)
    for i, s in enumerate(volume):
        e += spec.psi[s][bits[:, i]]
    for idx, (a, b) in enumerate(box.edges):
        ina, inb = a in pos, b in pos
        if ina and inb:
            e += spec.phi_int[idx][bits[:, pos[a]], bits[:, pos[b]]]
        elif ina:
            e += spec.phi_int[idx][bits[:, pos[a]], base_bits[b]]
        elif inb:
            e += spec.phi_int[idx][base_bits[a], bits[:, pos[b]]]
    if bcd is not None:
        for idx, (inner, bsite) in enumerate(box.rim):
            if inner in pos:
                e += spec.phi_rim[idx][bits[:, pos[inner]], (1 - bcd[bsite]) // 2]
    return np.exp(e - logsumexp(e))


def local_conditional(
    spec: NNSpecification,
    config_bits: np.ndarray,
    site: int,
    bc="plus",
) -> float:
    """Probability that `site` is +1 given the rest of the configuration."""
    dist = gamma_dense(spec, [site], config_bits, bc)
    return float(dist[0])


@dataclass(frozen=True)
class MonotonicityReport:
    passes: bool
    witness: tuple | None = None


def _comparable_pairs(nbits: int):
    for lo in range(1 << nbits):
        for hi in range(1 << nbits):
            # bit 0 is spin +1: hi dominates lo iff hi's bits are a subset
            if (hi & lo) == hi:
                yield lo, hi


def monotonicity_check(
    spec: NNSpecification,
    channel: VertexChannel | None = None,
    bc="plus",
) -> MonotonicityReport:
    """Exhaustively verify that every single-site conditional is increasing
    in the surrounding configuration (and, given a vertex channel, that it is
    increasing in the observation at the site).  Returns a witness on failure.

    Sitewise monotone single-site kernels are exactly what the sandwich
    coupling requires.
    """
    box = spec.box
    bcd = _resolve_bc(box, bc)
    for site in range(box.n_sites):
        nbrs = sorted(
            {b for a, b in box.edges if a == site} | {a for a, b in box.edges if b == site}
        )
        rim_ids = [idx for idx, (inner, _) in enumerate(box.rim) if inner == site]

        def prob(nbr_bits: dict[int, int], y_val: int | None) -> float:
            e = np.array([spec.psi[site][0], spec.psi[site][1]])
            for idx, (a, b) in enumerate(box.edges):
                if a == site and b in nbr_bits:
                    e += spec.phi_int[idx][:, nbr_bits[b]]
                elif b == site and a in nbr_bits:
                    e += spec.phi_int[idx][nbr_bits[a], :]
            if bcd is not None:
                for idx in rim_ids:
                    bbit = (1 - bcd[box.rim[idx][1]]) // 2
                    e += spec.phi_rim[idx][:, bbit]
            if y_val is not None:
                bv = beta_from_p(channel.p[site])
                e += bv * y_val * np.array([1.0, -1.0])
            return float(expit(e[0] - e[1]))

        d = len(nbrs)
        y_values = [None] if channel is None else [-1, 1]
        for lo, hi in _comparable_pairs(d):
            lo_bits = {s: (lo >> i) & 1 for i, s in enumerate(nbrs)}
            hi_bits = {s: (hi >> i) & 1 for i, s in enumerate(nbrs)}
            for y_lo in y_values:
                for y_hi in y_values:
                    if y_lo is not None and y_lo > y_hi:
                        continue
                    p_lo = prob(lo_bits, y_lo)
                    p_hi = prob(hi_bits, y_hi)
                    if p_lo > p_hi + 1e-12:
                        return MonotonicityReport(
                            False, (box.sites[site], lo_bits, hi_bits, y_lo, y_hi, p_lo, p_hi)
                        )
    return MonotonicityReport(True)


class CRFGibbsContext:
    """Single-site heat-bath conditionals for a folded specification under a
    fixed boundary condition; feeds run_chain and sandwich_coupling."""

    def __init__(self, spec: NNSpecification, bc="plus"):
        box = spec.box
        bcd = _resolve_bc(box, bc)
        self.n_sites = box.n_sites
        self.box = box
        const = spec.psi.copy()  # (n, 2) accumulated fixed terms
        if bcd is not None:
            for idx, (inner, bsite) in enumerate(box.rim):
                const[inner] += spec.phi_rim[idx][:, (1 - bcd[bsite]) // 2]
        self.const = const
        nbrs: list[list[tuple[int, np.ndarray]]] = [[] for _ in range(box.n_sites)]
        for idx, (a, b) in enumerate(box.edges):
            nbrs[a].append((b, spec.phi_int[idx]))
            nbrs[b].append((a, spec.phi_int[idx].T))
        self.nbrs = nbrs

    def prob_plus(self, values: np.ndarray, i: int) -> float:
        e_plus, e_minus = self.const[i]
        for j, table in self.nbrs[i]:
            bj = (1 - values[j]) // 2
            e_plus += table[0, bj]
            e_minus += table[1, bj]
        return float(expit(e_plus - e_minus))


def plus_minus_experiment(
    cond: ConditionalSpecification | NNSpecification,
    schedule: ChainSchedule,
    seed: SeedSpec,
    check_monotone: bool = True,
) -> SandwichResult:
    """Sandwich coupling of the (conditional) specification between the
    plus-boundary and minus-boundary chains; a near-zero gap indicates
    finite-volume uniqueness of the conditional field."""
    spec = cond.folded if isinstance(cond, ConditionalSpecification) else cond
    if check_monotone:
        report = monotonicity_check(spec)
        if not report.passes:
            raise ValueError(f"specification is not monotone: witness {report.witness}")
    upper = CRFGibbsContext(spec, "plus")
    lower = CRFGibbsContext(spec, "minus")
    return sandwich_coupling(upper, lower, schedule, seed)


def sample_gibbs(spec: NNSpecification, bc, seed: SeedSpec) -> np.ndarray:
    """Exact sample from the finite-volume law by dense inversion sampling."""
    probs = finite_volume_law(spec, bc)
    rng = seed.generator()
    state = int(rng.choice(len(probs), p=probs))
    bits = (state >> np.arange(spec.box.n_sites)) & 1
    return (1 - 2 * bits).astype(np.int8)


def _channel_log_factors(channel, box: Box, y: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """log of prod g(x, y) over all states (up to a constant); -inf marks
    states inconsistent with noiseless observations."""
    n_states = bits.shape[0]
    out = np.zeros(n_states)
    if isinstance(channel, VertexChannel):
        spins = 1 - 2 * bits
        for v in range(box.n_sites):
            bv = beta_from_p(channel.p[v])
            if math.isinf(bv):
                out = np.where(spins[:, v] == y[v], out, -np.inf)
            else:
                out = out + bv * y[v] * spins[:, v]
        return out
    if isinstance(channel, EdgeChannel):
        beta = channel.beta()
        for e, (a, b) in enumerate(box.edges):
            prod = (1 - 2 * bits[:, a]) * (1 - 2 * bits[:, b])
            if math.isinf(beta):
                out = np.where(prod == y[e], out, -np.inf)
            else:
                out = out + beta * y[e] * prod
        return out
    raise TypeError(f"unknown channel {channel!r}")


def conditional_law_direct(
    spec: NNSpecification, channel, y: np.ndarray, bc
) -> np.ndarray:
    """P[X = . | Y = y] by direct Bayes reweighting of the prior law (the
    independent cross-check path against potential folding)."""
    e = _full_energies(spec, _resolve_bc(spec.box, bc))
    logw = e + _channel_log_factors(channel, spec.box, y, _state_bits(spec.box.n_sites))
    return np.exp(logw - logsumexp(logw))


def conditional_mixing_metric(
    spec: NNSpecification,
    channel,
    inner_sites: list[BSite],
    outer_sites: list[BSite],
    replicates: int,
    seed: SeedSpec,
    bc=None,
) -> tuple[float, float]:
    """Monte Carlo estimate of max_a E |P[X_V = a | X outside W, Y] -
    P[X_V = a | Y]| on the finite box, inner conditionals exact.

    V = inner_sites, W = outer_sites (the spins revealed are those outside W
    but inside the box); bc applies to the prior field.
    """
    box = spec.box
    n = box.n_sites
    if n > MAX_BOX_SITES:
        raise BudgetExceeded(f"{n} sites exceed the exact-mode budget")
    v_idx = [box.index[s] for s in inner_sites]
    w_idx = {box.index[s] for s in outer_sites}
    for i in v_idx:
        if i not in w_idx:
            raise ValueError("inner sites must lie inside the revealed-complement set W")
    revealed = [i for i in range(n) if i not in w_idx]
    bits = _state_bits(n)
    base_e = _full_energies(spec, _resolve_bc(box, bc))
    n_a = 1 << len(v_idx)
    a_bits_all = _state_bits(len(v_idx))
    diffs = np.zeros((replicates, n_a))
    for rep in range(replicates):
        rep_seed = seed.replicate_spec(rep)
        rng = rep_seed.generator()
        probs0 = np.exp(base_e - logsumexp(base_e))
        x_state = int(rng.choice(len(probs0), p=probs0))
        x_bits = (x_state >> np.arange(n)) & 1
        x_spins = (1 - 2 * x_bits).astype(np.int8)
        if isinstance(channel, VertexChannel):
            y = channel.sample(x_spins, rng)
        else:
            y = channel.sample(box, x_spins, rng)
        logw = base_e + _channel_log_factors(channel, box, y, bits)
        w = np.exp(logw - np.max(logw[np.isfinite(logw)]))
        mask_rev = np.ones(len(w), dtype=bool)
        for i in revealed:
            mask_rev &= bits[:, i] == x_bits[i]
        for a in range(n_a):
            mask_a = np.ones(len(w), dtype=bool)
            for pos, i in enumerate(v_idx):
                mask_a &= bits[:, i] == a_bits_all[a, pos]
            p_all = w[mask_a].sum() / w.sum()
            denom = w[mask_rev].sum()
            p_cond = w[mask_a & mask_rev].sum() / denom
            diffs[rep, a] = abs(p_cond - p_all)
    means = diffs.mean(axis=0)
    best = int(np.argmax(means))
    se = float(diffs[:, best].std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return float(means[best]), se


def follmer_check(
    spec: NNSpecification,
    channel: VertexChannel,
    observations: list[np.ndarray] | None = None,
) -> float:
    """Max discrepancy between (a) the conditional law of X given Y under the
    plus-boundary Gibbs measure and (b) the plus-boundary finite-volume law
    of the conditional specification; the two coincide for monotone
    specifications (checked), and the finite-volume identity is exact.

    With observations=None every observation outcome is enumerated.
    """
    box = spec.box
    report = monotonicity_check(spec)
    if not report.passes:
        raise ValueError(f"specification is not monotone: witness {report.witness}")
    if not isinstance(channel, VertexChannel):
        raise TypeError("the consistency check is formulated for vertex channels")
    if observations is None:
        n = box.n_sites
        observations = [
            (1 - 2 * ((yy >> np.arange(n)) & 1)).astype(np.int8) for yy in range(1 << n)
        ]
    worst = 0.0
    for y in observations:
        bayes = conditional_law_direct(spec, channel, y, "plus")
        folded = finite_volume_law(conditioned(spec, channel, y), "plus")
        worst = max(worst, float(np.abs(bayes - folded).max()))
    return worst
