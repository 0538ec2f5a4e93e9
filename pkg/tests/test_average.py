import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import choi, joint_output, kraus_apply, random_pure, tv
from qdf.average import AverageRealization, extreme_decompose, realize_on_average, sample_indices, sample_realization
from qdf.channels import Channel, extremality_test
from qdf.dilation import SubsystemDecomposition, initialize_on
from qdf.ensembles import amplitude_damping, depolarizing, random_channel, random_mixed_unitary
from qdf.errors import DecompositionError, DimensionError
from qdf.linalg import ket, projector
from qdf.majorization import ProbabilityVector

seeds = st.integers(0, 2**32 - 1)


def check_leaves(ch, leaves, tol=1e-8):
    weights = np.array([w for w, _ in leaves])
    assert abs(weights.sum() - 1) < 1e-10 and weights.min() > 0
    recon = sum(w * choi(list(c.kraus)) for w, c in leaves)
    assert np.abs(recon - ch.choi).max() < tol
    for _, c in leaves:
        assert extremality_test(c).is_extreme or c.rank == 1


def test_extreme_input_is_returned_whole():
    ad = amplitude_damping(0.4)
    leaves = extreme_decompose(ad)
    assert len(leaves) == 1 and leaves[0][0] == 1.0
    assert np.abs(leaves[0][1].choi - ad.choi).max() < 1e-12


def test_mixed_unitary_qubit(rng):
    _, ch = random_mixed_unitary(2, [0.6, 0.4], rng)
    check_leaves(ch, extreme_decompose(ch))


def test_depolarizing_half():
    ch = depolarizing(0.5)
    leaves = extreme_decompose(ch)
    assert len(leaves) <= 16
    check_leaves(ch, leaves)


@given(seeds, st.sampled_from([2, 3]), st.integers(2, 4))
def test_reconstitution_random(seed, d, m):
    ch = random_channel(d, m, np.random.default_rng(seed))
    leaves = extreme_decompose(ch)
    assert len(leaves) <= d**4
    check_leaves(ch, leaves)


def test_qutrit_full_rank_within_budget(rng):
    ch = random_channel(3, 9, rng)
    leaves = extreme_decompose(ch)
    assert len(leaves) <= 81
    check_leaves(ch, leaves)


def test_budget_exceeded():
    with pytest.raises(DecompositionError, match="budget exceeded"):
        extreme_decompose(depolarizing(0.5), max_components=1)


def test_realize_depolarizing_pure_qubit_ancilla(rng):
    target = depolarizing(0.5)
    init = initialize_on(projector(ket(0, 2)), SubsystemDecomposition.canonical(2, 2, 1))
    ar = realize_on_average(target, init)
    assert ar.eps_certified == 0
    assert ar.reconstitution_error < 1e-8
    assert all(r.d_E == 2 for r in ar.dilations)
    for _ in range(10):
        rho = random_pure(2, rng)
        avg = sum(p * joint_output(r.W, r.env_state, rho) for p, r in zip(ar.distribution.weights, ar.dilations))
        assert tv(avg, kraus_apply(target.kraus, rho)) < 1e-8


def test_realize_with_impure_ancilla(rng):
    target = depolarizing(0.5)
    rho_e = np.diag([0.98, 0.02]).astype(complex)
    init = initialize_on(rho_e, SubsystemDecomposition.canonical(2, 2, 1))
    ar = realize_on_average(target, init)
    assert ar.eps_certified == pytest.approx(0.02, abs=1e-14)
    assert ar.eps_measured(target) <= 0.02 + 1e-8
    for _ in range(10):
        rho = random_pure(2, rng)
        avg = sum(p * joint_output(r.W, rho_e, rho) for p, r in zip(ar.distribution.weights, ar.dilations))
        assert tv(avg, kraus_apply(target.kraus, rho)) <= 0.02 + 1e-8


def test_realize_requires_system_sized_subsystem():
    init = initialize_on(projector(ket(0, 4)), SubsystemDecomposition.canonical(4, 4, 1))
    with pytest.raises(DimensionError):
        realize_on_average(depolarizing(0.5), init)


def fake_realization(weights):
    n = len(weights)
    return AverageRealization(ProbabilityVector(weights), tuple(range(n)), (), 0.0, 0.0)


def test_sample_point_mass():
    ar = fake_realization([1.0])
    assert set(sample_indices(ar, 1000, seed=3)) == {0}
    assert sample_realization(ar, 3) == (0, 0)


@pytest.mark.parametrize("weights", [[0.5, 0.5], [0.6, 0.4], [0.2, 0.3, 0.5]])
def test_sample_frequencies(weights):
    n = 100_000
    ar = fake_realization(weights)
    freq = np.bincount(sample_indices(ar, n, seed=2024), minlength=len(weights)) / n
    w = np.array(weights)
    assert np.all(np.abs(freq - w) <= 5 * np.sqrt(w * (1 - w) / n))
    if weights == [0.5, 0.5]:
        assert np.all((0.49 <= freq) & (freq <= 0.51))


def test_sampling_is_seeded():
    ar = fake_realization([0.3, 0.7])
    assert np.array_equal(sample_indices(ar, 50, 9), sample_indices(ar, 50, 9))


def test_degenerate_channel_built_from_choi():
    ch = Channel.from_choi(np.eye(4) / 4)
    check_leaves(ch, extreme_decompose(ch))
