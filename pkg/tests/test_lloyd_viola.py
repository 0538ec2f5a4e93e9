import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import joint_output, kraus_apply, random_pure, tv
from qdf.ensembles import PAULI_I, PAULI_X, PAULI_Z, amplitude_damping, random_isometry
from qdf.errors import InvariantError
from qdf.linalg import cosm, ket, projector, sinm
from qdf.protocols.lloyd_viola import (
    AveragingSchedule,
    RankTwoTarget,
    ancilla_state,
    entangler_averaged,
    entangler_ideal,
    lv_nested_rank3,
    lv_noisy_ancilla,
    lv_polar_extract,
    lv_simulate,
    spectral_schedule,
    two_term_schedule,
)

seeds = st.integers(0, 2**32 - 1)
P_TWO = (projector(ket(0, 2)) + projector(np.array([1, 1]) / np.sqrt(2))) / 2


def test_polar_amplitude_damping():
    ad = amplitude_damping(0.36)
    t = lv_polar_extract(*ad.kraus)
    assert np.abs(cosm(t.theta * t.P) - np.diag([1, 0.8])).max() < 1e-12
    assert np.abs(t.theta * t.P - np.diag([0, np.arccos(0.8)])).max() < 1e-12
    assert abs(np.trace(t.P) - 1) < 1e-12
    assert np.abs(t.U1 @ sinm(t.theta * t.P) - ad.kraus[1]).max() < 1e-12


@given(seeds, st.sampled_from([2, 3]))
def test_polar_random_pair(seed, d):
    v = random_isometry(2 * d, d, np.random.default_rng(seed))
    t = lv_polar_extract(v[:d], v[d:])
    assert t.residual() <= 1e-9


def test_polar_psd_pair_needs_no_unitary():
    a, b = 0.3, 1.1
    t = lv_polar_extract(np.diag([np.cos(a), np.cos(b)]), np.diag([np.sin(a), np.sin(b)]))
    assert np.abs(t.U0 - np.eye(2)).max() < 1e-12 and np.abs(t.U1 - np.eye(2)).max() < 1e-12


def test_polar_rejects_non_tp():
    with pytest.raises(InvariantError):
        lv_polar_extract(np.eye(2), np.eye(2))


def test_polar_unitary_channel_flag():
    t = lv_polar_extract(PAULI_X, np.zeros((2, 2)))
    assert t.flags and t.residual() < 1e-12


def test_schedules_average_to_p(rng):
    assert np.abs(two_term_schedule(8).averaged() - P_TWO).max() < 1e-15
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    p = g @ g.conj().T
    p /= np.trace(p)
    assert np.abs(spectral_schedule(p, 4).averaged() - p).max() < 1e-12


def test_schedule_validation():
    with pytest.raises(InvariantError):
        AveragingSchedule(4, [1.0], [np.eye(2)], np.eye(2))
    with pytest.raises(InvariantError):
        AveragingSchedule(0, [1.0], [np.eye(2)], projector(ket(0, 2)))


def test_commuting_schedule_is_exact():
    t = lv_polar_extract(*amplitude_damping(0.36).kraus)
    u = entangler_averaged(t.theta, spectral_schedule(t.P, 3))
    assert np.abs(u - entangler_ideal(t.theta, t.P)).max() < 1e-12


def test_trotter_error_decreases_with_cycles():
    target = RankTwoTarget.from_polar(P_TWO, 1.3)
    errs = [lv_simulate(target, two_term_schedule(n), restarts=2).trotter_error for n in (8, 16, 64, 256)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[0] / errs[2] >= 4


def test_amplitude_damping_target_at_256_cycles(rng):
    ad = amplitude_damping(0.36)
    res = lv_simulate(lv_polar_extract(*ad.kraus), N=256)
    assert res.target_error <= 1e-2
    for _ in range(5):
        rho = random_pure(2, rng)
        assert tv(joint_output(res.joint, projector(ket(0, 2)), rho), kraus_apply(ad.kraus, rho)) <= 1e-2


def test_nested_rank_three():
    ops = [np.sqrt(0.5) * PAULI_I, np.sqrt(0.3) * PAULI_X, np.sqrt(0.2) * PAULI_Z]
    res = lv_nested_rank3(*ops, N=256)
    assert res.ancillas == 2
    assert np.abs(res.achieved.choi - res.target.choi).max() <= 2e-2
    assert res.error <= 2e-2


@pytest.mark.parametrize("w1", [0.0, 0.05, 0.1, 0.2])
def test_conditional_maps_formula(w1):
    t = lv_polar_extract(*amplitude_damping(0.36).kraus)
    res = lv_noisy_ancilla(t, 1 - w1, w1)
    c, s = cosm(t.theta * t.P), sinm(t.theta * t.P)
    s0 = (1 - w1) * np.kron(c, c.conj()) + w1 * np.kron(s, s.conj())
    s1 = (1 - w1) * np.kron(s, s.conj()) + w1 * np.kron(c, c.conj())
    assert np.abs(res.conditional_maps[0] - s0).max() < 1e-10
    assert np.abs(res.conditional_maps[1] - s1).max() < 1e-10


def test_noisy_ancilla_error_sweep():
    t = lv_polar_extract(*amplitude_damping(0.36).kraus)
    errs = [lv_noisy_ancilla(t, 1 - w, w).error_lower_bound for w in (0.0, 0.05, 0.1, 0.15, 0.2)]
    assert errs[0] <= 1e-10
    assert all(b >= a - 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[2] > 0


def test_psd_pair_conditional_maps_with_noise():
    a, b = 0.4, 0.9
    t = lv_polar_extract(np.diag([np.cos(a), np.cos(b)]), np.diag([np.sin(a), np.sin(b)]))
    res = lv_noisy_ancilla(t, 0.9, 0.1)
    m0, m1 = np.diag([np.cos(a), np.cos(b)]), np.diag([np.sin(a), np.sin(b)])
    expect = 0.9 * np.kron(m0, m0) + 0.1 * np.kron(m1, m1)
    assert np.abs(res.conditional_maps[0] - expect).max() < 1e-10


@pytest.mark.parametrize("w0, w1, q", [(0.6, 0.6, 0), (1.2, -0.2, 0), (0.5, 0.5, 0.6)])
def test_invalid_ancilla_state(w0, w1, q):
    with pytest.raises(InvariantError):
        ancilla_state(w0, w1, q)
