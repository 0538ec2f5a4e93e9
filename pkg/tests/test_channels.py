import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdf.channels import (
    Channel,
    apply_channel,
    channel_distance_1to1,
    choi_to_kraus,
    extremality_test,
    kraus_rank,
    product_stack,
)
from qdf.ensembles import (
    amplitude_damping,
    bit_flip,
    depolarizing,
    identity_channel,
    random_channel,
    random_unitary,
    unitary_channel,
)
from qdf.errors import DimensionError, InvariantError
from qdf.linalg import ket, projector, tv_distance

seeds = st.integers(0, 2**32 - 1)


def choi_oracle(ch):
    """Apply the channel to every |i><j| block of the maximally entangled projector."""
    d = ch.d
    c = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            eij = np.outer(ket(i, d), ket(j, d))
            c += np.kron(ch(eij), eij)
    return c / d


def remix(ops, rng, extra=0):
    """Random unitary mixing of a Kraus set, optionally padded with zeros."""
    ops = list(ops) + [np.zeros_like(ops[0])] * extra
    u = random_unitary(len(ops), rng)
    return [sum(u[i, k] * ops[k] for k in range(len(ops))) for i in range(len(ops))]


def test_completely_depolarizing_choi():
    assert np.abs(depolarizing(1.0).choi - np.eye(4) / 4).max() < 1e-15


@given(seeds, st.sampled_from([2, 3]))
def test_choi_matches_blockwise_oracle(seed, d):
    ch = random_channel(d, rng=np.random.default_rng(seed))
    c = ch.choi
    assert np.abs(c - choi_oracle(ch)).max() < 1e-12
    assert abs(np.trace(c) - 1) < 1e-12


@given(seeds, st.sampled_from([2, 3]))
def test_choi_kraus_round_trip(seed, d):
    ch = random_channel(d, rng=np.random.default_rng(seed))
    back = Channel.from_kraus(choi_to_kraus(ch.choi))
    assert np.abs(back.choi - ch.choi).max() < 1e-12
    assert len(back.kraus) == ch.rank


def test_completely_depolarizing_kraus_set():
    ops = choi_to_kraus(np.eye(4) / 4)
    assert len(ops) == 4
    gram = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
    assert np.abs(gram - np.diag(np.diag(gram))).max() < 1e-12
    rho = projector(ket(0, 2))
    out = sum(k @ rho @ k.conj().T for k in ops)
    assert np.abs(out - np.eye(2) / 2).max() < 1e-12


def test_amplitude_damping_kraus_from_choi():
    ad = amplitude_damping(0.36)
    m0 = np.diag([1, 0.8])
    m1 = 0.6 * np.outer(ket(0, 2), ket(1, 2))
    assert np.abs(ad.kraus[0] - m0).max() < 1e-15 and np.abs(ad.kraus[1] - m1).max() < 1e-15
    back = Channel.from_choi(ad.choi)
    assert len(back.kraus) == 2
    assert np.abs(back.choi - ad.choi).max() < 1e-12


@pytest.mark.parametrize(
    "ch, rank",
    [(depolarizing(0.5), 4), (amplitude_damping(0.3), 2), (amplitude_damping(0.9), 2),
     (identity_channel(3), 1), (bit_flip(0.5), 2)],
)
def test_kraus_rank(ch, rank):
    assert kraus_rank(ch) == rank == ch.rank


def test_depolarizing_action():
    p = 0.3
    out = depolarizing(p)(projector(ket(0, 2)))
    assert np.abs(out - np.diag([1 - p / 2, p / 2])).max() < 1e-15


@given(seeds)
def test_superop_and_call_agree(seed):
    rng = np.random.default_rng(seed)
    ch = random_channel(3, 5, rng)
    rho = projector(rng.normal(size=3) + 1j * rng.normal(size=3))
    rho /= np.trace(rho)
    direct = sum(k @ rho @ k.conj().T for k in ch.kraus)
    assert np.abs(ch(rho) - direct).max() < 1e-12
    via_choi = Channel.from_choi(ch.choi)
    assert np.abs(via_choi(rho) - direct).max() < 1e-12
    assert np.abs(Channel.from_superop(ch.superop).choi - ch.choi).max() < 1e-12
    out = apply_channel(ch, rho)
    assert abs(np.trace(out.mat) - 1) < 1e-12


@pytest.mark.parametrize(
    "kwargs, err",
    [
        ({"kraus": [np.eye(2) * 0.9]}, InvariantError),
        ({"kraus": [np.eye(2), np.eye(3)]}, DimensionError),
        ({"choi": np.eye(4) / 4 * 0.98}, InvariantError),
        ({"choi": np.diag([1.0, 0, 0, 0])}, InvariantError),
        ({"choi": np.eye(3) / 3}, DimensionError),
        ({"choi": np.diag([0.75, -0.25, 0.25, 0.25])}, InvariantError),
    ],
)
def test_channel_validation(kwargs, err):
    with pytest.raises(err):
        Channel(**kwargs)


def test_extremality_named_channels():
    assert not extremality_test(depolarizing(0.5)).is_extreme
    v = extremality_test(amplitude_damping(0.5))
    assert v.is_extreme and v.gram_rank == 4
    assert extremality_test(identity_channel(2)).is_extreme


def test_extremality_rank_above_dimension_skips_gram():
    v = extremality_test(depolarizing(0.2))
    assert (v.is_extreme, v.gram_rank, v.m, v.min_singular_value) == (False, 4, 4, 0.0)


@given(seeds, st.integers(0, 2))
def test_extremality_invariant_under_remixing(seed, extra):
    rng = np.random.default_rng(seed)
    for ch in (random_channel(2, 2, rng), depolarizing(0.4), bit_flip(0.3), unitary_channel(random_unitary(3, rng))):
        remixed = Channel.from_kraus(remix(ch.kraus, rng, extra))
        assert extremality_test(remixed).is_extreme == extremality_test(ch).is_extreme


def test_product_stack_shape(rng):
    ops = random_channel(2, 2, rng).kraus
    s = product_stack(ops)
    assert s.shape == (4, 4)
    assert np.abs(s[:, 1].reshape(2, 2) - ops[0].conj().T @ ops[1]).max() == 0


def test_distance_bit_flip_vs_identity():
    res = channel_distance_1to1(identity_channel(2), bit_flip(0.5))
    assert res.lower_bound >= 0.5 - 1e-9
    assert res.lower_bound <= 0.5 + 1e-9  # X-flip moves no state further than TV 1/2


@given(seeds)
def test_distance_is_a_valid_lower_bound(seed):
    rng = np.random.default_rng(seed)
    a, b = random_channel(2, 2, rng), random_channel(2, 3, rng)
    res = channel_distance_1to1(a, b, restarts=2, seed=seed)
    rho = res.argmax_state.mat
    assert abs(tv_distance(a(rho), b(rho)) - res.lower_bound) < 1e-12
    for _ in range(10):
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        sigma = projector(psi / np.linalg.norm(psi))
        assert tv_distance(a(sigma), b(sigma)) <= res.lower_bound + 1e-6


def test_distance_zero_for_equal_channels(rng):
    ch = random_channel(3, 4, rng)
    same = Channel.from_choi(ch.choi)
    assert channel_distance_1to1(ch, same).lower_bound < 1e-12


def test_distance_is_deterministic(rng):
    a, b = random_channel(3, 2, rng), random_channel(3, 3, rng)
    r1 = channel_distance_1to1(a, b, seed=7)
    r2 = channel_distance_1to1(a, b, seed=7)
    assert r1.lower_bound == r2.lower_bound


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        channel_distance_1to1(identity_channel(2), identity_channel(3))


def test_distance_independent_of_thread_count(rng, monkeypatch):
    a, b = random_channel(3, 2, rng), random_channel(3, 4, rng)
    out = []
    for n in ("1", "4"):
        monkeypatch.setenv("QDF_THREADS", n)
        out.append(channel_distance_1to1(a, b, restarts=6, seed=3).lower_bound)
    assert out[0] == out[1]
