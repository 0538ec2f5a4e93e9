"""Coherent feedback decoupling of a system from a bath at a fixed time.

System-bath operators use the bath-major layout ``B (x) S`` so that the
``d_S x d_S`` blocks of ``U_SB`` are contiguous. The full simulation runs on
``A (x) B (x) S`` with the ancilla qubit first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ensembles import HADAMARD
from ..errors import InfeasibleError, InvariantError
from ..linalg import (
    DensityOperator,
    UnitaryOperator,
    as_matrix,
    dagger,
    expm_hermitian,
    is_hermitian,
    partial_trace,
    projector,
)

BLOCK_TOL = 1e-8
MIX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FbddConfig:
    d_S: int
    d_B: int
    H_S: np.ndarray
    H_B: np.ndarray
    S0: np.ndarray
    B0: np.ndarray
    T: float
    psi: np.ndarray
    U_S: np.ndarray | None = None

    def __post_init__(self):
        for name, dim in (("H_S", self.d_S), ("H_B", self.d_B), ("S0", self.d_S), ("B0", self.d_B)):
            m = as_matrix(getattr(self, name), name)
            if m.shape != (dim, dim):
                raise InvariantError(f"{name} has shape {m.shape}, expected {dim}x{dim}")
            if not is_hermitian(m):
                raise InvariantError(f"{name} is not Hermitian")
            object.__setattr__(self, name, m)
        psi = np.asarray(self.psi, dtype=np.complex128).reshape(-1)
        if psi.size != self.d_S:
            raise InvariantError("psi has the wrong dimension")
        object.__setattr__(self, "psi", psi / np.linalg.norm(psi))
        if self.U_S is not None:
            object.__setattr__(self, "U_S", UnitaryOperator(self.U_S).mat)

    def hamiltonian(self) -> np.ndarray:
        ib, is_ = np.eye(self.d_B), np.eye(self.d_S)
        return np.kron(ib, self.H_S) + np.kron(self.H_B, is_) + np.kron(self.B0, self.S0)

    def propagator(self) -> np.ndarray:
        return expm_hermitian(self.hamiltonian(), self.T)


@dataclass(frozen=True, eq=False)
class FbddCheck:
    block_form_ok: bool
    mixing_ok: bool
    X: np.ndarray
    U_fb: np.ndarray | None
    block_residual: float
    eigenvalues: np.ndarray

    @property
    def ok(self) -> bool:
        return self.block_form_ok and self.mixing_ok


def blocks(u, d_S: int) -> np.ndarray:
    """``(i, j, :, :)`` holds the ``d_S x d_S`` block of a bath-major operator."""
    n = u.shape[0] // d_S
    return np.asarray(u).reshape(n, d_S, n, d_S).transpose(0, 2, 1, 3)


def fit_blocks(u, basis, d_S: int):
    """Least-squares coefficients of every block in ``span(basis)`` and worst residual."""
    b = blocks(u, d_S)
    a = np.stack([np.asarray(m).reshape(-1) for m in basis], axis=1)
    flat = b.reshape(b.shape[0], b.shape[1], -1)
    coef = np.einsum("kl,ijl->ijk", np.linalg.pinv(a), flat)
    resid = np.abs(flat - np.einsum("lk,ijk->ijl", a, coef)).max()
    return coef, float(resid)


def mixing_condition(x: np.ndarray, tol: float = MIX_TOL) -> bool:
    x = np.sort(np.real(x))[::-1]
    return bool(np.all(np.abs(x + x[::-1]) <= tol))


def fbdd_check(config: FbddConfig) -> FbddCheck:
    X = config.S0
    d = config.d_S
    _, resid = fit_blocks(config.propagator(), [np.eye(d), X], d)
    x = np.linalg.eigvalsh(X)
    mags = np.abs(x)
    if mags.max() < 1e-12:
        u_fb = np.eye(d, dtype=np.complex128)
    elif mags.max() - mags.min() <= MIX_TOL:
        u_fb = dagger(X / mags.max())
    else:
        u_fb = None
    return FbddCheck(resid <= BLOCK_TOL, mixing_condition(x), X, u_fb, resid, np.sort(x)[::-1])


def swap_unitary(X) -> np.ndarray:
    """Maps the eigenvector of ``x_k`` onto that of ``x_{d+1-k}`` (sorted descending)."""
    x, v = np.linalg.eigh(as_matrix(X))
    v = v[:, np.argsort(-x, kind="stable")]
    return v[:, ::-1] @ dagger(v)


@dataclass(frozen=True, eq=False)
class FbddResult:
    rho_S_final: np.ndarray
    fidelity: float
    A_plus: np.ndarray
    A_minus: np.ndarray
    check: FbddCheck


def averaged_propagators(u_sb, u_s, d_B: int):
    """Closed-form ``A+-`` = ``(U_SB +- (U_S^dag (x) I) U_SB (U_S (x) I)) / 2``."""
    lift = np.kron(np.eye(d_B), u_s)
    conj = dagger(lift) @ u_sb @ lift
    return (u_sb + conj) / 2, (u_sb - conj) / 2


def fbdd_run(config: FbddConfig, rho_B, override: bool = False) -> FbddResult:
    """Steps I-V on ``A (x) B (x) S`` with the ancilla prepared in ``|+>``."""
    chk = fbdd_check(config)
    if not override:
        if not chk.block_form_ok:
            raise InfeasibleError("block form violated", f"residual {chk.block_residual:.3g}")
        if not chk.mixing_ok:
            raise InfeasibleError("mixing condition violated", f"eigenvalues {np.round(chk.eigenvalues, 12).tolist()}")
        if chk.U_fb is None:
            raise InfeasibleError("coupling not proportional to a unitary")
    rho_B = DensityOperator(rho_B).mat
    d, n = config.d_S, config.d_B
    u_s = swap_unitary(chk.X) if config.U_S is None else config.U_S
    u_fb = np.eye(d) if chk.U_fb is None else chk.U_fb
    u_sb = config.propagator()
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    ib = np.eye(n)

    def cond(u):
        return np.kron(p0, np.eye(n * d)) + np.kron(p1, np.kron(ib, u))

    total = (
        cond(u_fb)
        @ np.kron(HADAMARD, np.eye(n * d))
        @ cond(dagger(u_s))
        @ np.kron(np.eye(2), u_sb)
        @ cond(u_s)
    )
    phi = np.array([1, 1], dtype=np.complex128) / np.sqrt(2)
    t4 = total.reshape(2, n * d, 2, n * d)
    a_plus = np.einsum("xay,a->xy", t4[0], phi)
    a_minus_fb = np.einsum("xay,a->xy", t4[1], phi)
    a_minus = np.kron(ib, dagger(u_fb)) @ a_minus_fb
    rho0 = np.kron(projector(phi), np.kron(rho_B, projector(config.psi)))
    final = total @ rho0 @ dagger(total)
    rho_S = partial_trace(final, (2, n, d), keep=2)
    fid = float(np.real(config.psi.conj() @ rho_S @ config.psi))
    return FbddResult(rho_S, fid, a_plus, a_minus, chk)


def block_proportional_to_identity(op, d_S: int) -> float:
    _, resid = fit_blocks(op, [np.eye(d_S)], d_S)
    return resid
