import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdf.errors import DimensionError, InvariantError
from qdf.ensembles import PAULI_X, random_density, random_isometry, random_unitary
from qdf.linalg import (
    DensityOperator,
    Isometry,
    UnitaryOperator,
    arccosm,
    complete_to_unitary,
    cosm,
    expm_hermitian,
    expm_hermitian_batch,
    householder_to_first,
    ket,
    partial_trace,
    pinv_psd,
    projector,
    sinm,
    sqrtm_psd,
    tensor,
    tv_distance,
)

seeds = st.integers(0, 2**32 - 1)


def test_tensor_matches_factorwise_action(rng):
    a, b = random_unitary(2, rng), rng.normal(size=(2, 2))
    x, y = rng.normal(size=2), rng.normal(size=2)
    assert np.abs(tensor(a, b) @ np.kron(x, y) - np.kron(a @ x, b @ y)).max() < 1e-12


def test_partial_trace_of_bell_projector():
    phi = (ket(0, 4) + ket(3, 4)) / np.sqrt(2)
    p = projector(phi)
    for keep in (0, 1):
        assert np.abs(partial_trace(p, (2, 2), keep) - np.eye(2) / 2).max() < 1e-12


@given(seeds)
def test_partial_trace_product_states(seed):
    rng = np.random.default_rng(seed)
    a, b, c = random_density(2, rng), random_density(3, rng), random_density(2, rng)
    joint = tensor(a, b, c)
    assert np.abs(partial_trace(joint, (2, 3, 2), 1) - b).max() < 1e-12
    assert np.abs(partial_trace(joint, (2, 3, 2), [0, 2]) - np.kron(a, c)).max() < 1e-12


def test_partial_trace_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), (2, 3), 0)
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), (2, 2), 2)


def test_tv_distance_pure_vs_mixed():
    assert abs(tv_distance(projector(ket(0, 2)), np.eye(2) / 2) - 0.5) < 1e-15


@given(seeds)
def test_tv_distance_is_a_metric_on_states(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(3, rng) for _ in range(3))
    dab, dbc, dac = tv_distance(a, b), tv_distance(b, c), tv_distance(a, c)
    assert 0 <= dab <= 1 + 1e-12
    assert abs(dab - tv_distance(b, a)) < 1e-14
    assert dac <= dab + dbc + 1e-12


def test_expm_pauli_x():
    assert np.abs(expm_hermitian(PAULI_X, np.pi / 2) + 1j * PAULI_X).max() < 1e-12


def test_expm_batch_agrees_with_scipy(rng):
    from scipy.linalg import expm

    g = rng.normal(size=(5, 3, 3)) + 1j * rng.normal(size=(5, 3, 3))
    hs = g + np.conj(np.swapaxes(g, 1, 2))
    out = expm_hermitian_batch(hs, 0.7)
    for h, u in zip(hs, out):
        assert np.abs(u - expm(-0.7j * h)).max() < 1e-10


def test_spectral_functions(rng):
    rho = random_density(3, rng)
    s = sqrtm_psd(rho)
    assert np.abs(s @ s - rho).max() < 1e-12
    h = rho - np.trace(rho) * np.eye(3) / 3
    c, sn = cosm(h), sinm(h)
    assert np.abs(c @ c + sn @ sn - np.eye(3)).max() < 1e-12
    assert np.abs(cosm(arccosm(rho)) - rho).max() < 1e-12
    p = pinv_psd(random_density(3, rng, rank=2))
    assert np.linalg.matrix_rank(p, 1e-8) == 2


def test_spectral_domain_errors():
    with pytest.raises(InvariantError):
        sqrtm_psd(np.diag([1.0, -0.1]))
    with pytest.raises(InvariantError):
        arccosm(np.diag([1.5, 0.0]))
    with pytest.raises(InvariantError):
        cosm(np.array([[0, 1], [0, 0]]))


@given(seeds, st.integers(1, 5), st.integers(0, 3))
def test_complete_to_unitary_keeps_columns(seed, k, extra):
    rng = np.random.default_rng(seed)
    n = k + extra
    v = random_isometry(n, k, rng)
    u = complete_to_unitary(v)
    assert np.abs(u[:, :k] - v).max() == 0
    assert np.abs(u.conj().T @ u - np.eye(n)).max() < 1e-12


def test_complete_to_unitary_rejects_non_isometry():
    with pytest.raises(InvariantError):
        complete_to_unitary(np.array([[1.0], [1.0]]))
    with pytest.raises(DimensionError):
        complete_to_unitary(np.ones((2, 3)))


@given(seeds, st.integers(1, 6))
def test_householder_to_first(seed, n):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=n) + 1j * rng.normal(size=n)
    phi /= np.linalg.norm(phi)
    u = householder_to_first(phi)
    assert np.abs(u @ phi - ket(0, n)).max() < 1e-12
    assert np.abs(u.conj().T @ u - np.eye(n)).max() < 1e-12


@pytest.mark.parametrize(
    "mat, err",
    [
        (np.diag([0.5, 0.6]), InvariantError),
        (np.diag([1.2, -0.2]), InvariantError),
        (np.array([[0.5, 0.5], [0.0, 0.5]]), InvariantError),
        (np.ones((2, 3)) / 2, DimensionError),
    ],
)
def test_density_operator_validation(mat, err):
    with pytest.raises(err):
        DensityOperator(mat)


def test_operator_wrappers(rng):
    rho = DensityOperator.pure(ket(1, 3))
    assert rho.is_pure() and rho.dim == 3
    assert not DensityOperator.maximally_mixed(2).is_pure()
    u = UnitaryOperator(random_unitary(3, rng))
    assert u.dim == 3
    with pytest.raises(InvariantError):
        UnitaryOperator(2 * np.eye(2))
    v = Isometry(random_isometry(4, 2, rng))
    assert (v.dim_out, v.dim_in) == (4, 2)
