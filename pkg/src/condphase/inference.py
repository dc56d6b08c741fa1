"""Exact conditional laws on small windows: enumeration oracle and transfer matrix.

Conditioning the space-time model on the time-0 row, the side columns and all
edge observations yields a random-bond Ising law over the interior spins,

    weight(z)  propto  exp(beta * [ sum_int xi*x_q*x_r*z_q*z_r
                                    + sum_bdy xi*x_q*z_q ]),

with interior edges quadratic in z and boundary edges acting as local fields.
Everything here evaluates that law exactly; the MCMC sampler lives in mcmc.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .lattice import (
    DisorderField,
    LatticeWindow,
    ModelParams,
    SeedSpec,
    Site,
    SpinField,
    sample_space_time_model,
)

__all__ = [
    "InferenceBudget",
    "ConditionalLaw",
    "InconsistentObservations",
    "BudgetExceeded",
    "interaction_terms",
    "sigma_log_weight",
    "enumerate_conditional",
    "transfer_matrix_magnetization",
    "p0_exact_conditional",
    "stability_metric",
    "unconditional_filter_symmetry_check",
]


class BudgetExceeded(RuntimeError):
    """Requested exact computation exceeds the configured state-space budget."""


class InconsistentObservations(ValueError):
    """Noiseless observations violate an edge parity (corrupted input)."""


@dataclass(frozen=True)
class InferenceBudget:
    max_enum_sites: int = 24          # dense tables up to 2^24 states
    max_column_height: int = 15       # transfer matrix columns, 2m+1 <= 15


DEFAULT_BUDGET = InferenceBudget()


@dataclass(frozen=True)
class ConditionalLaw:
    """Exactly represented law over interior spin configurations.

    Dense representation: probs[s] with state s encoding interior site i in
    bit i, bit 0 meaning spin +1 (so state 0 is the all-plus configuration).
    Point representation (noiseless mode): a single configuration.
    """

    window: LatticeWindow
    representation: str                     # "dense" | "point"
    probs: np.ndarray | None = None
    config: np.ndarray | None = None        # int8 interior spins, point mass
    log_z: float | None = None

    def state_spins(self, site: Site) -> np.ndarray:
        i = self.window.interior_index[site]
        states = np.arange(len(self.probs), dtype=np.int64)
        return (1 - 2 * ((states >> i) & 1)).astype(np.int8)

    def magnetization(self, site: Site) -> float:
        if self.representation == "point":
            return float(self.config[self.window.interior_index[site]])
        return float(np.dot(self.probs, self.state_spins(site)))

    def prob_of(self, z: SpinField) -> float:
        if z.coverage != "interior":
            raise ValueError("need an interior configuration")
        if self.representation == "point":
            return 1.0 if np.array_equal(z.values, self.config) else 0.0
        return float(self.probs[_state_of(z.values)])


def _state_of(interior_values: np.ndarray) -> int:
    bits = (1 - interior_values.astype(np.int64)) // 2
    return int(np.dot(bits, 1 << np.arange(len(bits), dtype=np.int64)))


def interaction_terms(
    params: ModelParams,
    window: LatticeWindow,
    disorder: DisorderField,
    x: SpinField,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coupling arrays of the conditional law, gauge-folded by the signal x.

    Returns (pair_a, pair_b, pair_coeff, linear) where interior edge e joins
    interior indices pair_a[e], pair_b[e] with energy pair_coeff[e]*z_a*z_b,
    and linear[i]*z_i collects the boundary edges at interior site i.
    """
    if x.coverage != "full":
        raise ValueError("signal must cover interior and boundary")
    n = window.n_interior
    pair_a, pair_b, pair_coeff = [], [], []
    linear = np.zeros(n, dtype=np.float64)
    for e, (q, r) in enumerate(window.edges):
        xi = int(disorder.values[e])
        if window.is_interior(q) and window.is_interior(r):
            pair_a.append(window.interior_index[q])
            pair_b.append(window.interior_index[r])
            pair_coeff.append(xi * x.value_at(q) * x.value_at(r))
        else:
            inner = q if window.is_interior(q) else r
            linear[window.interior_index[inner]] += xi * x.value_at(inner)
    return (
        np.array(pair_a, dtype=np.int64),
        np.array(pair_b, dtype=np.int64),
        np.array(pair_coeff, dtype=np.float64),
        linear,
    )


def sigma_log_weight(
    params: ModelParams,
    window: LatticeWindow,
    disorder: DisorderField,
    x: SpinField,
    z: SpinField,
) -> float:
    """Unnormalized log-weight of the interior configuration z given (x, xi)."""
    if math.isinf(params.beta):
        raise ValueError("noiseless mode has no finite log-weight; use p0_exact_conditional")
    if z.coverage != "interior" or z.window != window:
        raise ValueError("z must cover the interior of the window")
    pa, pb, pc, lin = interaction_terms(params, window, disorder, x)
    zv = z.values.astype(np.float64)
    energy = float(np.dot(pc, zv[pa] * zv[pb]) + np.dot(lin, zv))
    return params.beta * energy


def _state_bits(n_states: int, n_bits: int) -> np.ndarray:
    states = np.arange(n_states, dtype=np.int64)
    return ((states[:, None] >> np.arange(n_bits)) & 1).astype(np.int8)


def _energies(pa, pb, pc, lin, n: int) -> np.ndarray:
    """Energy of every interior state, chunked to bound peak memory."""
    total = 1 << n
    out = np.empty(total, dtype=np.float64)
    chunk = 1 << min(n, 20)
    for start in range(0, total, chunk):
        states = np.arange(start, start + chunk, dtype=np.int64)
        spins = 1.0 - 2.0 * ((states[:, None] >> np.arange(n)) & 1)
        e = spins @ lin
        if len(pa):
            e += (spins[:, pa] * spins[:, pb]) @ pc
        out[start : start + chunk] = e
    return out


def enumerate_conditional(
    params: ModelParams,
    window: LatticeWindow,
    disorder: DisorderField,
    x: SpinField,
    budget: InferenceBudget = DEFAULT_BUDGET,
) -> ConditionalLaw:
    """Dense conditional law by full enumeration (the oracle path)."""
    if math.isinf(params.beta):
        raise ValueError("noiseless mode: use p0_exact_conditional")
    n = window.n_interior
    if n > budget.max_enum_sites:
        raise BudgetExceeded(f"{n} interior sites exceed enumeration budget {budget.max_enum_sites}")
    pa, pb, pc, lin = interaction_terms(params, window, disorder, x)
    logw = params.beta * _energies(pa, pb, pc, lin, n)
    log_z = float(logsumexp(logw))
    probs = np.exp(logw - log_z)
    return ConditionalLaw(window, "dense", probs=probs, log_z=log_z)


def _column_spins(n: int) -> np.ndarray:
    return (1 - 2 * _state_bits(1 << n, n)).astype(np.float64)


def transfer_matrix_magnetization(
    params: ModelParams,
    window: LatticeWindow,
    disorder: DisorderField,
    x: SpinField,
    site: Site,
    budget: InferenceBudget = DEFAULT_BUDGET,
) -> float:
    """E[z_site] under the conditional law, eliminating time columns in order.

    Columns have height 2m+1; the inter-column interaction factorizes per
    site, so one elimination step is a sequence of 2x2 contractions rather
    than a dense 2^n x 2^n matrix product.  Agrees with enumeration wherever
    both are affordable.
    """
    if math.isinf(params.beta):
        raise ValueError("noiseless mode: use p0_exact_conditional")
    k, m = window.k, window.m
    n = 2 * m + 1
    if n > budget.max_column_height:
        raise BudgetExceeded(f"column height {n} exceeds budget {budget.max_column_height}")
    if site not in window.interior_index:
        raise ValueError(f"{site} is not an interior site")
    beta = params.beta
    pa, pb, pc, lin = interaction_terms(params, window, disorder, x)
    spins = _column_spins(n)  # (2^n, n)

    def col_index(q: Site) -> tuple[int, int]:
        return q[0], q[1] + m  # (time, bit position)

    # per-column potentials: space couplings + boundary/linear terms
    col_pair = {t: [] for t in range(1, k + 1)}      # (j, j+1, coeff)
    col_lin = {t: np.zeros(n) for t in range(1, k + 1)}
    time_coeff = {t: np.zeros(n) for t in range(2, k + 1)}  # couples column t-1 to t
    for a, b, c in zip(pa, pb, pc):
        qa, qb = window.interior_sites[a], window.interior_sites[b]
        (ta, ja), (tb, jb) = col_index(qa), col_index(qb)
        if ta == tb:
            col_pair[ta].append((min(ja, jb), max(ja, jb), c))
        else:
            t_hi = max(ta, tb)
            time_coeff[t_hi][ja] += c
    for i, c in enumerate(lin):
        t, j = col_index(window.interior_sites[i])
        col_lin[t][j] += c

    def col_potential(t: int) -> np.ndarray:
        e = spins @ col_lin[t]
        for j1, j2, c in col_pair[t]:
            e = e + c * spins[:, j1] * spins[:, j2]
        return np.exp(beta * e)

    def apply_time_step(vec: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        # contract one 2x2 factor per site; axis n-1-j carries bit j
        arr = vec.reshape([2] * n)
        for j in range(n):
            w = math.exp(beta * coeffs[j])
            mat = np.array([[w, 1.0 / w], [1.0 / w, w]])
            axis = n - 1 - j
            arr = np.moveaxis(np.tensordot(mat, arr, axes=(1, axis)), 0, axis)
        return arr.reshape(-1)

    t_star, j_star = col_index(site)
    alpha = col_potential(1)
    for t in range(2, t_star + 1):
        alpha = apply_time_step(alpha, time_coeff[t]) * col_potential(t)
        alpha /= alpha.max()
    gamma = np.ones(1 << n)
    for t in range(k, t_star, -1):
        gamma = apply_time_step(gamma * col_potential(t), time_coeff[t])
        gamma /= gamma.max()
    weights = alpha * gamma
    return float(np.dot(weights, spins[:, j_star]) / weights.sum())


def p0_exact_conditional(
    window: LatticeWindow,
    observations: DisorderField,
    x: SpinField,
) -> ConditionalLaw:
    """Noiseless conditional: the unique interior configuration consistent
    with every observation parity and the boundary values, found by
    propagating constraints along edges from the boundary inward."""
    if x.coverage != "full":
        raise ValueError("signal must cover interior and boundary")
    known: dict[Site, int] = {q: x.value_at(q) for q in window.boundary_sites}
    adj: dict[Site, list[tuple[Site, int]]] = {}
    for e, (q, r) in enumerate(window.edges):
        y = int(observations.values[e])
        adj.setdefault(q, []).append((r, y))
        adj.setdefault(r, []).append((q, y))
    frontier = list(window.boundary_sites)
    while frontier:
        q = frontier.pop()
        for r, y in adj.get(q, ()):
            val = y * known[q]  # z_q * z_r = y  =>  z_r = y * z_q
            if r in known:
                if known[r] != val:
                    raise InconsistentObservations(f"parity violated at edge {(q, r)}")
            else:
                known[r] = val
                frontier.append(r)
    missing = [q for q in window.interior_sites if q not in known]
    if missing:
        raise InconsistentObservations(f"observations do not determine sites {missing}")
    config = np.array([known[q] for q in window.interior_sites], dtype=np.int8)
    return ConditionalLaw(window, "point", config=config)


def _origin_magnetization(
    params: ModelParams,
    window: LatticeWindow,
    disorder: DisorderField,
    observations: DisorderField,
    x: SpinField,
    method: str,
    budget: InferenceBudget,
    seed: SeedSpec | None = None,
) -> float:
    if params.noiseless:
        law = p0_exact_conditional(window, observations, x)
        return law.magnetization(window.origin)
    if method == "enumeration":
        law = enumerate_conditional(params, window, disorder, x, budget)
        return law.magnetization(window.origin)
    if method == "transfer":
        return transfer_matrix_magnetization(params, window, disorder, x, window.origin, budget)
    if method == "mcmc":
        from . import mcmc  # local import to avoid a cycle

        ctx = mcmc.SpaceTimeGibbsContext(params, window, disorder, x)
        schedule = mcmc.ChainSchedule(burn_in=1000, measure=4000, thinning=1)
        samples = mcmc.run_chain(ctx, mcmc.all_plus_state(window), schedule, seed)
        return float(np.mean(samples.site_samples))
    raise ValueError(f"unknown method {method!r}")


def stability_metric(
    params: ModelParams,
    k: int,
    m: int,
    replicates: int,
    seed: SeedSpec,
    method: str = "transfer",
    budget: InferenceBudget = DEFAULT_BUDGET,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of |E[z at (k,0)]| over sampled
    (signal, disorder), the order parameter of the reconstruction problem.

    The inner conditional expectation is exact for methods "enumeration" and
    "transfer"; "mcmc" is a flagged approximation whose chain noise biases
    the absolute value upward.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    window = LatticeWindow(k, m)
    if params.beta == 0.0:
        # uniform conditional law: the magnetization vanishes identically
        return 0.0, 0.0
    vals = np.empty(replicates)
    for rep in range(replicates):
        rep_seed = seed.replicate_spec(rep)
        x, xi, obs = sample_space_time_model(params, window, rep_seed)
        chain_seed = SeedSpec(rep_seed.master, rep_seed.experiment + "/chain", rep_seed.sweep, rep)
        mag = _origin_magnetization(params, window, xi, obs, x, method, budget, chain_seed)
        vals[rep] = abs(mag)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return est, se


def unconditional_filter_symmetry_check(
    params: ModelParams,
    window: LatticeWindow,
    replicates: int = 0,
    seed: SeedSpec | None = None,
    budget: InferenceBudget = DEFAULT_BUDGET,
) -> float:
    """Largest |E[z at (k,0)] given observations only| found; contract: 0.

    Without conditioning on the boundary signal the law is symmetric under a
    global spin flip, so the expectation vanishes for every observation
    realization.  With replicates=0 all observation outcomes are enumerated;
    otherwise outcomes are sampled from the model.
    """
    n_all = len(window.all_sites)
    n_edges = window.n_edges
    if n_all > budget.max_enum_sites:
        raise BudgetExceeded(f"{n_all} sites exceed enumeration budget")
    qi = np.array([window.site_index[q] for q, _ in window.edges])
    ri = np.array([window.site_index[r] for _, r in window.edges])
    spins = (1 - 2 * _state_bits(1 << n_all, n_all)).astype(np.float64)
    origin_col = spins[:, window.site_index[window.origin]]
    edge_prod = spins[:, qi] * spins[:, ri]  # (states, edges)

    def conditional_mean(y: np.ndarray) -> float:
        if params.noiseless:
            w = np.all(edge_prod == y, axis=1).astype(np.float64)
        else:
            w = np.exp(params.beta * (edge_prod @ y.astype(np.float64)))
        total = w.sum()
        if total == 0.0:
            raise InconsistentObservations("no signal configuration matches y")
        return float(np.dot(w, origin_col) / total)

    worst = 0.0
    if replicates == 0:
        if n_edges > 22:
            raise BudgetExceeded(f"{n_edges} edges: too many outcomes to enumerate")
        for ybits in range(1 << n_edges):
            y = 1 - 2 * ((ybits >> np.arange(n_edges)) & 1)
            worst = max(worst, abs(conditional_mean(y)))
    else:
        for rep in range(replicates):
            _, _, obs = sample_space_time_model(params, window, seed.replicate_spec(rep))
            worst = max(worst, abs(conditional_mean(obs.values)))
    return worst
