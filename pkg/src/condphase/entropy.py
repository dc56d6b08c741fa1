"""Exact entropy computations for small finite hidden Markov models.

Joint laws are built as dense tables by the chain rule, so every conditional
entropy, prediction gap and filter gap below is exact up to float rounding.
All entropies are in bits; zero-probability atoms contribute nothing.  The
classical unstable fixture (product observations of consecutive spins with no
noise) is provided as a constructor since it exercises every stability
quantity at its extreme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .inference import BudgetExceeded

__all__ = [
    "FiniteHMM",
    "JointTable",
    "flip_channel_hmm",
    "iid_uniform_hmm",
    "spin_flip_chain",
    "blackwell_fixture",
    "random_hmm",
    "build_joint",
    "entropy_bits",
    "conditional_entropy",
    "information_identity_check",
    "prediction_gap",
    "filter_stability_gap",
    "function_table",
    "t_operator_apply",
    "t_operator_invert",
    "intermediate_entropy_gap",
]

MAX_TABLE_BITS = 24

Var = tuple[str, int]  # ("x", k) or ("y", k)


@dataclass(frozen=True)
class FiniteHMM:
    """Hidden Markov model on {-1,1}^r with a finite observation alphabet.

    States and observations are encoded as integers; bit v of a state is 0
    when coordinate v equals +1.  The observation kernel obs[x_prev, x_cur, y]
    may depend on the transition, which covers both per-coordinate flip
    channels and product observations of consecutive states.
    """

    r: int
    s: int
    transition: np.ndarray   # (2^r, 2^r)
    initial: np.ndarray      # (2^r,)
    obs: np.ndarray          # (2^r, 2^r, 2^s)

    def __post_init__(self):
        nx, ny = 1 << self.r, 1 << self.s
        if self.transition.shape != (nx, nx) or self.obs.shape != (nx, nx, ny):
            raise ValueError("kernel shapes do not match r, s")
        if not np.allclose(self.transition.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1")
        if abs(self.initial.sum() - 1.0) > 1e-12:
            raise ValueError("initial law must sum to 1")
        if not np.allclose(self.obs.sum(axis=2), 1.0, atol=1e-12):
            raise ValueError("observation kernel rows must sum to 1")


def _spins_of(index: int, bits: int) -> np.ndarray:
    return 1 - 2 * ((index >> np.arange(bits)) & 1)


def _flip_channel(r: int, p: float) -> np.ndarray:
    """obs[x_prev, x_cur, y] for coordinatewise flips of the current state."""
    nx = 1 << r
    out = np.empty((nx, nx, nx))
    for xc in range(nx):
        for y in range(nx):
            agree = r - bin(xc ^ y).count("1")
            out[:, xc, y] = (1 - p) ** agree * p ** (r - agree)
    return out


def flip_channel_hmm(transition: np.ndarray, initial: np.ndarray, p: float) -> FiniteHMM:
    r = int(round(math.log2(len(initial))))
    return FiniteHMM(r, r, np.asarray(transition, float), np.asarray(initial, float),
                     _flip_channel(r, p))


def iid_uniform_hmm(r: int, p: float) -> FiniteHMM:
    nx = 1 << r
    return flip_channel_hmm(np.full((nx, nx), 1.0 / nx), np.full(nx, 1.0 / nx), p)


def spin_flip_chain(flip_rate: float, p: float) -> FiniteHMM:
    """Single spin flipping with the given rate, observed through a flip-p channel."""
    q = flip_rate
    return flip_channel_hmm(np.array([[1 - q, q], [q, 1 - q]]), np.array([0.5, 0.5]), p)


def blackwell_fixture() -> FiniteHMM:
    """i.i.d. uniform spin observed through the noiseless product of the
    current and previous spin: the textbook unstable filter."""
    obs = np.zeros((2, 2, 2))
    for xp in range(2):
        for xc in range(2):
            obs[xp, xc, xp ^ xc] = 1.0
    return FiniteHMM(1, 1, np.full((2, 2), 0.5), np.array([0.5, 0.5]), obs)


def random_hmm(r: int, p: float, rng: np.random.Generator) -> FiniteHMM:
    nx = 1 << r
    trans = rng.random((nx, nx)) + 0.1
    trans /= trans.sum(axis=1, keepdims=True)
    init = rng.random(nx) + 0.1
    init /= init.sum()
    return flip_channel_hmm(trans, init, p)


@dataclass(frozen=True)
class JointTable:
    """Dense joint law of (X_0..X_n, Y_1..Y_n) with named axes."""

    hmm: FiniteHMM
    n: int
    axes: tuple[Var, ...]
    table: np.ndarray

    def axis_of(self, var: Var) -> int:
        return self.axes.index(var)

    def marginal(self, keep: list[Var]) -> np.ndarray:
        drop = tuple(i for i, v in enumerate(self.axes) if v not in keep)
        marg = self.table.sum(axis=drop) if drop else self.table
        order = [
            [v for v in self.axes if v in keep].index(v) for v in keep
        ]
        return np.transpose(marg, order)


def build_joint(hmm: FiniteHMM, n: int) -> JointTable:
    """Exact joint table via chain-rule products; guarded by table size."""
    bits = hmm.r * (n + 1) + hmm.s * n
    if bits > MAX_TABLE_BITS:
        raise BudgetExceeded(f"joint table needs 2^{bits} entries")
    arr = hmm.initial.copy()
    axes: list[Var] = [("x", 0)]
    for k in range(1, n + 1):
        # keep the newest state on the last axis so the next step contracts it
        arr = np.einsum("...i,ij,ijy->...iyj", arr, hmm.transition, hmm.obs)
        axes += [("y", k), ("x", k)]
    return JointTable(hmm, n, tuple(axes), arr)


def entropy_bits(probs: np.ndarray) -> float:
    p = np.asarray(probs, float).ravel()
    nz = p > 0
    return float(-(p[nz] * np.log2(p[nz])).sum())


def conditional_entropy(joint: JointTable, targets: list[Var], given: list[Var]) -> float:
    """Shannon conditional entropy H(targets | given) in bits."""
    if set(targets) & set(given):
        raise ValueError("target and conditioning variables must be disjoint")
    h_joint = entropy_bits(joint.marginal(targets + given))
    h_given = entropy_bits(joint.marginal(given)) if given else 0.0
    return h_joint - h_given


def information_identity_check(hmm: FiniteHMM, n: int) -> tuple[float, float]:
    """Chain-rule identity: the summed per-step prediction entropy gaps equal
    the information the observations carry about the initial state,
    H(X_0) - H(X_0 | Y_1..Y_n); both are at most H(X_0)."""
    joint = build_joint(hmm, n)
    lhs = 0.0
    for k in range(1, n + 1):
        past = [("y", j) for j in range(1, k)]
        lhs += conditional_entropy(joint, [("y", k)], past) - conditional_entropy(
            joint, [("y", k)], [("x", 0)] + past
        )
    ys = [("y", j) for j in range(1, n + 1)]
    rhs = conditional_entropy(joint, [("x", 0)], []) - conditional_entropy(
        joint, [("x", 0)], ys
    )
    return lhs, rhs


def prediction_gap(hmm: FiniteHMM, k: int) -> tuple[float, float]:
    """Exact E || P[Y_k | X_0, Y_<k] - P[Y_k | Y_<k] ||_TV and the
    entropy-based bound sqrt(ln2/2 * per-step gap); gap <= bound always."""
    joint = build_joint(hmm, k)
    keep = [("x", 0)] + [("y", j) for j in range(1, k + 1)]
    m = joint.marginal(keep)  # (x0, y1, ..., yk)
    flat = m.reshape(1 << hmm.r, -1, 1 << hmm.s)  # (x0, y_<k, y_k)
    with_x0 = flat / np.maximum(flat.sum(axis=2, keepdims=True), 1e-300)
    pooled = flat.sum(axis=0, keepdims=True)
    without_x0 = pooled / np.maximum(pooled.sum(axis=2, keepdims=True), 1e-300)
    weights = flat.sum(axis=2)
    tv = 0.5 * np.abs(with_x0 - without_x0).sum(axis=2)
    gap = float((weights * tv).sum())
    past = [("y", j) for j in range(1, k)]
    dk = conditional_entropy(joint, [("y", k)], past) - conditional_entropy(
        joint, [("y", k)], [("x", 0)] + past
    )
    bound = math.sqrt(max(dk, 0.0) * math.log(2.0) / 2.0)
    return gap, bound


def filter_stability_gap(hmm: FiniteHMM, n: int) -> list[float]:
    """Per-horizon exact values of
    max_a E | P[X_k = a | X_0, Y_1..k] - P[X_k = a | Y_1..k] |."""
    out = []
    for k in range(1, n + 1):
        joint = build_joint(hmm, k)
        keep = [("x", 0)] + [("y", j) for j in range(1, k + 1)] + [("x", k)]
        m = joint.marginal(keep).reshape(1 << hmm.r, -1, 1 << hmm.r)  # (x0, y, xk)
        with_x0 = m / np.maximum(m.sum(axis=2, keepdims=True), 1e-300)
        pooled = m.sum(axis=0, keepdims=True)
        without = pooled / np.maximum(pooled.sum(axis=2, keepdims=True), 1e-300)
        weights = m.sum(axis=2)
        diffs = np.abs(with_x0 - without)  # (x0, y, a)
        per_a = (weights[:, :, None] * diffs).sum(axis=(0, 1))
        out.append(float(per_a.max()))
    return out


def blackwell_conditionals(hmm: FiniteHMM, k: int) -> tuple[float, float]:
    """Deviations of the two displayed filter conditionals from their exact
    values on the unstable fixture: P[X_k=1|Y] from 1/2, and P[X_k=1|X_0,Y]
    from the indicator of X_k=1 (reported as the largest non-point-mass)."""
    joint = build_joint(hmm, k)
    keep = [("x", 0)] + [("y", j) for j in range(1, k + 1)] + [("x", k)]
    m = joint.marginal(keep).reshape(1 << hmm.r, -1, 1 << hmm.r)
    pooled = m.sum(axis=0)
    pooled_dev = 0.0
    cond_dev = 0.0
    for yfix in range(pooled.shape[0]):
        tot = pooled[yfix].sum()
        if tot > 0:
            pooled_dev = max(pooled_dev, abs(pooled[yfix, 0] / tot - 0.5))
        for x0 in range(1 << hmm.r):
            tot0 = m[x0, yfix].sum()
            if tot0 > 0:
                probs = np.sort(m[x0, yfix] / tot0)
                cond_dev = max(cond_dev, float(probs[:-1].sum()))
    return pooled_dev, cond_dev


# --- noise-operator algebra -------------------------------------------------

def function_table(fn, r: int) -> np.ndarray:
    """Tabulate fn over {-1,1}^r as an array of shape (2,)*r, axis v being
    coordinate v with index 0 for +1."""
    out = np.empty((2,) * r)
    for idx in np.ndindex(*out.shape):
        x = tuple(1 - 2 * b for b in idx)
        out[idx] = fn(x)
    return out


def t_operator_apply(g: np.ndarray, i: int, p: float) -> np.ndarray:
    """(T_i g)(x) = (1-p) g(x) + p g(x with coordinate i flipped)."""
    g = np.asarray(g, float)
    return (1.0 - p) * g + p * np.flip(g, axis=i)


def t_operator_invert(f: np.ndarray, i: int, p: float) -> np.ndarray:
    """Exact inverse of T_i: the even part in coordinate i is untouched and
    the odd part is scaled by 1/(1-2p); undefined at p = 1/2."""
    if p == 0.5:
        raise ValueError("T_i is not invertible at p = 1/2 (odd parts are killed)")
    f = np.asarray(f, float)
    flipped = np.flip(f, axis=i)
    even = 0.5 * (f + flipped)
    odd = 0.5 * (f - flipped)
    return even + odd / (1.0 - 2.0 * p)


# --- intermediate filter gap on the truncated space-time model --------------

def _column_kernel(n: int, p: float) -> np.ndarray:
    """K[prev, y_slice, cur]: probability of one time slice's observations.

    A slice carries n product observations against the previous column and
    n-1 products within the current column; slice bit j < n is the
    time-product at spatial offset j, bit n+j the space product at offset j.
    """
    slice_bits = 2 * n - 1
    K = np.empty((1 << n, 1 << slice_bits, 1 << n))
    ys = np.arange(1 << slice_bits)
    y_spins = 1 - 2 * ((ys[:, None] >> np.arange(slice_bits)) & 1)  # (Y, bits)
    for prev in range(1 << n):
        sp = _spins_of(prev, n)
        for cur in range(1 << n):
            sc = _spins_of(cur, n)
            signs = np.concatenate([sp * sc, sc[:-1] * sc[1:]])
            match = y_spins * signs  # +1 where the noise sign is +1
            K[prev, :, cur] = np.prod(np.where(match == 1, 1.0 - p, p), axis=1)
    return K


def intermediate_entropy_gap(k: int, m: int, v: int, p: float) -> float:
    """Exact H(Y_k^v | Y_1..k-1, Y_k^<v) - H(Y_k^v | X_0, Y_1..k-1, Y_k^<v)
    on the hard-windowed space-time model (a finite-volume surrogate: the
    value carries its (k, m) truncation and is not an infinite-volume limit).

    Y_t^w bundles the time-product observation at (t, w) with the space
    product between (t, w) and (t, w+1) when the latter lies in the window.
    """
    n = 2 * m + 1
    if k * n > 12:
        raise BudgetExceeded("window too large for the exact joint")
    if not -m <= v <= m:
        raise ValueError("site v must lie inside the window")
    slice_bits = 2 * n - 1
    total_bits = n + k * slice_bits
    if total_bits > MAX_TABLE_BITS:
        raise BudgetExceeded(f"joint table needs 2^{total_bits} entries")
    # each step introduces one fresh uniform column alongside its observations
    K = _column_kernel(n, p) * 2.0 ** (-n)
    # forward over time columns: M[x0, y_1..t, cur]
    M = np.zeros((1 << n, 1, 1 << n))
    M[np.arange(1 << n), 0, np.arange(1 << n)] = 2.0 ** (-n)
    for t in range(1, k + 1):
        if t < k:
            M = np.einsum("aYp,pyc->aYyc", M, K)
            M = M.reshape(1 << n, -1, 1 << n)
        else:
            M = np.einsum("aYp,py->aYy", M, K.sum(axis=2))
    joint = M.reshape((1 << n,) + (2,) * (k * slice_bits))
    # axis for slice-t bit j (LSB first): 1 + (k - t) * slice_bits + (slice_bits - 1 - j)
    def bit_axis(t: int, j: int) -> int:
        return 1 + (k - t) * slice_bits + (slice_bits - 1 - j)

    target = [bit_axis(k, v + m)]
    if v < m:
        target.append(bit_axis(k, n + v + m))
    cond = [bit_axis(t, j) for t in range(1, k) for j in range(slice_bits)]
    cond += [bit_axis(k, w + m) for w in range(-m, v)]
    cond += [bit_axis(k, n + w + m) for w in range(-m, min(v, m))]

    def h(axes: list[int]) -> float:
        drop = tuple(a for a in range(joint.ndim) if a not in axes)
        return entropy_bits(joint.sum(axis=drop))

    x0_axis = [0]
    gap = (h(target + cond) - h(cond)) - (
        h(x0_axis + target + cond) - h(x0_axis + cond)
    )
    return float(gap)
