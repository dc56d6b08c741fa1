import math

import numpy as np
import pytest

from condphase.entropy import (
    blackwell_conditionals,
    blackwell_fixture,
    build_joint,
    conditional_entropy,
    filter_stability_gap,
    flip_channel_hmm,
    function_table,
    iid_uniform_hmm,
    information_identity_check,
    intermediate_entropy_gap,
    prediction_gap,
    random_hmm,
    spin_flip_chain,
    t_operator_apply,
    t_operator_invert,
)
from condphase.inference import BudgetExceeded


def h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def test_joint_product_form_iid():
    hmm = iid_uniform_hmm(1, 0.2)
    joint = build_joint(hmm, 1)
    # every atom is (1/4) * channel(y | x1)
    for x0 in range(2):
        for y1 in range(2):
            for x1 in range(2):
                expect = 0.25 * (0.8 if y1 == x1 else 0.2)
                assert joint.table[x0, y1, x1] == pytest.approx(expect, abs=1e-15)
    m0 = joint.marginal([("x", 0)])
    assert np.allclose(m0, hmm.initial)
    assert np.allclose(joint.marginal([("y", 1)]), [0.5, 0.5], atol=1e-15)


def test_conditional_entropy_values():
    hmm = iid_uniform_hmm(1, 0.3)
    joint = build_joint(hmm, 1)
    assert conditional_entropy(joint, [("x", 0)], []) == pytest.approx(1.0, abs=1e-12)
    assert conditional_entropy(joint, [("y", 1)], [("x", 1)]) == pytest.approx(
        h2(0.3), abs=1e-12
    )
    with pytest.raises(ValueError):
        conditional_entropy(joint, [("x", 0)], [("x", 0)])


def test_identity_iid_is_zero():
    lhs, rhs = information_identity_check(iid_uniform_hmm(1, 0.3), 3)
    assert abs(lhs) < 1e-12 and abs(rhs) < 1e-12


def test_identity_random_hmms():
    rng = np.random.default_rng(19)
    for _ in range(10):
        hmm = random_hmm(int(rng.integers(1, 3)), float(rng.uniform(0.05, 0.45)), rng)
        lhs, rhs = information_identity_check(hmm, 3)
        assert lhs == pytest.approx(rhs, abs=1e-10)
        assert lhs <= conditional_entropy(build_joint(hmm, 1), [("x", 0)], []) + 1e-10


def test_data_processing_monotone_in_horizon():
    hmm = spin_flip_chain(0.2, 0.3)
    joint = build_joint(hmm, 4)
    values = []
    for n in range(1, 5):
        ys = [("y", j) for j in range(1, n + 1)]
        values.append(conditional_entropy(joint, [("x", 0)], ys))
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_blackwell_fixture_exact():
    hmm = blackwell_fixture()
    for k in (1, 2, 3):
        pooled_dev, cond_dev = blackwell_conditionals(hmm, k)
        assert pooled_dev == 0.0
        assert cond_dev == 0.0
    assert filter_stability_gap(hmm, 3) == [0.5, 0.5, 0.5]
    gap, bound = prediction_gap(hmm, 2)
    assert gap == pytest.approx(0.0, abs=1e-12)
    lhs, rhs = information_identity_check(hmm, 3)
    assert abs(lhs) < 1e-12 and abs(rhs) < 1e-12


def test_noiseless_direct_observation_gap_zero():
    hmm = iid_uniform_hmm(1, 0.0)
    gaps = filter_stability_gap(hmm, 3)
    assert all(abs(g) < 1e-12 for g in gaps)


def test_flip_chain_regression():
    hmm = spin_flip_chain(0.2, 0.3)
    gaps = filter_stability_gap(hmm, 3)
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps == pytest.approx(
        [0.252, 0.1281893934500355, 0.06525650896913054], rel=1e-9
    )
    lhs, rhs = information_identity_check(hmm, 3)
    assert lhs == pytest.approx(0.05627549603877391, rel=1e-9)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_prediction_gap_bounded_by_pinsker():
    rng = np.random.default_rng(23)
    for _ in range(8):
        hmm = random_hmm(int(rng.integers(1, 3)), float(rng.uniform(0.05, 0.45)), rng)
        for k in (1, 2):
            gap, bound = prediction_gap(hmm, k)
            assert gap <= bound + 1e-12


def test_table_size_guard():
    with pytest.raises(BudgetExceeded):
        build_joint(iid_uniform_hmm(3, 0.2), 4)


def test_t_operator_identity_and_scaling():
    g = function_table(lambda x: x[1], 3)
    assert np.allclose(t_operator_apply(g, 1, 0.0), g)
    assert np.allclose(t_operator_apply(g, 1, 0.3), 0.4 * g)
    assert np.allclose(t_operator_invert(t_operator_apply(g, 1, 0.3), 1, 0.3), g)


@pytest.mark.parametrize("p", [0.1, 0.3, 0.49])
def test_t_operator_invert_roundtrip(p):
    rng = np.random.default_rng(29)
    for r in (1, 2, 3):
        f = rng.standard_normal((2,) * r)
        for i in range(r):
            assert np.allclose(
                t_operator_invert(t_operator_apply(f, i, p), i, p), f, atol=1e-12
            )


def test_t_operators_commute():
    rng = np.random.default_rng(31)
    f = rng.standard_normal((2, 2, 2))
    a = t_operator_apply(t_operator_apply(f, 0, 0.2), 2, 0.35)
    b = t_operator_apply(t_operator_apply(f, 2, 0.35), 0, 0.2)
    assert np.allclose(a, b, atol=1e-14)


def test_t_operator_not_invertible_at_half():
    f = function_table(lambda x: x[0], 1)
    with pytest.raises(ValueError):
        t_operator_invert(f, 0, 0.5)


def _direct_gap_k1(m, v, p):
    """Independent oracle for the one-step intermediate gap: brute-force
    enumeration of both spin columns and the product measure over the
    observation outcomes."""
    n = 2 * m + 1
    slice_bits = 2 * n - 1
    joint = np.zeros((1 << n, 1 << slice_bits))
    for x0 in range(1 << n):
        s0 = 1 - 2 * ((x0 >> np.arange(n)) & 1)
        for x1 in range(1 << n):
            s1 = 1 - 2 * ((x1 >> np.arange(n)) & 1)
            signs = np.concatenate([s0 * s1, s1[:-1] * s1[1:]])
            vec = np.ones(1)
            for j in reversed(range(slice_bits)):
                probs = np.array(
                    [1 - p if signs[j] == 1 else p, p if signs[j] == 1 else 1 - p]
                )
                vec = (vec[:, None] * probs[None, :]).ravel()
            # after the loop bit j of the index is observation j
            joint[x0] += 2.0 ** (-2 * n) * vec
    def ent(p_arr):
        nz = p_arr[p_arr > 0]
        return float(-(nz * np.log2(nz)).sum())

    target_bits = [v + m] + ([n + v + m] if v < m else [])
    cond_bits = [w + m for w in range(-m, v)] + [n + w + m for w in range(-m, min(v, m))]

    def marg(bits_list, with_x0):
        arr = joint.reshape((1 << n,) + (2,) * slice_bits)
        keep_axes = ([0] if with_x0 else []) + [
            1 + (slice_bits - 1 - b) for b in bits_list
        ]
        drop = tuple(a for a in range(arr.ndim) if a not in keep_axes)
        return arr.sum(axis=drop)

    gap = (ent(marg(target_bits + cond_bits, False)) - ent(marg(cond_bits, False))) - (
        ent(marg(target_bits + cond_bits, True)) - ent(marg(cond_bits, True))
    )
    return gap


def test_intermediate_gap_oracle_k1():
    for m, v, p in [(1, 0, 0.3), (1, -1, 0.2), (1, 1, 0.4)]:
        direct = _direct_gap_k1(m, v, p)
        fast = intermediate_entropy_gap(1, m, v, p)
        assert fast == pytest.approx(direct, abs=1e-10)


def test_intermediate_gap_properties():
    assert intermediate_entropy_gap(2, 1, 0, 0.5) == pytest.approx(0.0, abs=1e-12)
    for k, m, v, p in [(1, 1, 0, 0.3), (2, 1, 0, 0.3), (3, 1, 1, 0.25)]:
        assert intermediate_entropy_gap(k, m, v, p) >= -1e-12
    assert intermediate_entropy_gap(2, 1, 0, 0.3) == pytest.approx(
        0.0030112572469880305, rel=1e-9
    )
    with pytest.raises(BudgetExceeded):
        intermediate_entropy_gap(5, 2, 0, 0.3)
    with pytest.raises(ValueError):
        intermediate_entropy_gap(2, 1, 5, 0.3)


def test_flip_channel_rows_stochastic():
    hmm = flip_channel_hmm(np.array([[0.7, 0.3], [0.4, 0.6]]), np.array([0.5, 0.5]), 0.25)
    assert np.allclose(hmm.obs.sum(axis=2), 1.0)
