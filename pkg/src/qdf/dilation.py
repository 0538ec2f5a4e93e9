"""Stinespring completion and dilations through virtual subsystems.

The environment space is split as ``H_E = (H_M (x) H_F) (+) H_R``. The
decomposition is stored as a unitary ``Q`` taking canonical coordinates to
adapted ones: the first ``m*f`` adapted coordinates are ``H_M (x) H_F`` in
M-major order and the last ``r`` span ``H_R``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .channels import Channel, channel_distance_1to1, _as_channel
from .errors import DimensionError, InfeasibleError, InvariantError
from .ensembles import random_pure_state
from .linalg import (
    DensityOperator,
    UnitaryOperator,
    as_matrix,
    complete_to_unitary,
    dagger,
    hermitize,
    householder_to_first,
    ket,
    max_abs,
    partial_trace,
    projector,
    tv_distance,
)


class Method(str, enum.Enum):
    STINESPRING_PURE = "stinespring_pure"
    SUBSYSTEM = "subsystem"
    STOCHASTIC_UNITARY = "stochastic_unitary"
    BLOCK_CONVEX = "block_convex"
    AVERAGE = "average"


@dataclass(frozen=True, eq=False)
class SubsystemDecomposition:
    d_E: int
    m: int
    f: int
    r: int
    Q: np.ndarray

    def __post_init__(self):
        if min(self.m, self.f) < 1 or self.r < 0:
            raise InvariantError(f"invalid subsystem dimensions m={self.m} f={self.f} r={self.r}")
        if self.m * self.f + self.r != self.d_E:
            raise InvariantError(f"m*f + r = {self.m * self.f + self.r} != d_E = {self.d_E}")
        q = UnitaryOperator(self.Q).mat
        if q.shape != (self.d_E, self.d_E):
            raise DimensionError(f"Q has shape {q.shape}, expected {self.d_E}x{self.d_E}")
        object.__setattr__(self, "Q", q)

    @classmethod
    def canonical(cls, d_E: int, m: int, f: int) -> "SubsystemDecomposition":
        """Decomposition read off the canonical basis (``Q = I``)."""
        return cls(d_E, m, f, d_E - m * f, np.eye(d_E, dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class Initialization:
    """Environment state ``rho_E`` together with the pure-subsystem state it is
    closest to on ``decomp``: ``|phi><phi| (x) rho_F (+) 0_R``."""

    decomp: SubsystemDecomposition
    phi: np.ndarray
    rho_F: np.ndarray
    epsilon: float
    rho_E: np.ndarray

    def reconstructed(self) -> np.ndarray:
        dc = self.decomp
        block = np.kron(projector(self.phi), self.rho_F)
        ad = np.zeros((dc.d_E, dc.d_E), dtype=np.complex128)
        ad[: dc.m * dc.f, : dc.m * dc.f] = block
        return dagger(dc.Q) @ ad @ dc.Q


@dataclass(frozen=True, eq=False)
class DilationReport:
    W: np.ndarray
    env_state: np.ndarray
    d_S: int
    eps_certified: float
    eps_measured: float
    method: Method
    diagnostics: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def d_E(self) -> int:
        return self.env_state.shape[0]

    def achieved(self) -> Channel:
        return channel_of_dilation(self.W, self.env_state, self.d_S)


# -- Stinespring completion -------------------------------------------------


def stinespring_complete(ks) -> UnitaryOperator:
    """Unitary on ``H_A (x) H_S`` (ancilla first) whose first block column is
    the stacked Kraus operators, so ``U (|1> (x) psi) = sum_k |k> (x) M_k psi``.
    """
    ops = list(ks.kraus) if isinstance(ks, Channel) else [as_matrix(k) for k in ks]
    v = np.vstack(ops)
    d = ops[0].shape[1]
    resid = max_abs(dagger(v) @ v - np.eye(d))
    if resid > 1e-9:
        raise InvariantError(f"not trace-preserving: residual {resid:.3g}")
    return UnitaryOperator(complete_to_unitary(v))


# -- virtual-subsystem initialisation ---------------------------------------


def _sorted_eigh(rho):
    lam, vec = np.linalg.eigh(hermitize(rho))
    order = np.argsort(-lam, kind="stable")
    return lam[order], vec[:, order]


def initialize_on(rho_E, decomp: SubsystemDecomposition, phi=None) -> Initialization:
    """Project ``rho_E`` onto ``span{phi} (x) H_F`` and renormalise."""
    rho = as_matrix(rho_E, "environment state")
    DensityOperator(rho)
    dc = decomp
    if rho.shape != (dc.d_E, dc.d_E):
        raise DimensionError(f"state has shape {rho.shape}, decomposition expects d_E={dc.d_E}")
    phi = ket(0, dc.m) if phi is None else np.asarray(phi, dtype=np.complex128).reshape(-1)
    phi = phi / np.linalg.norm(phi)
    ad = dc.Q @ rho @ dagger(dc.Q)
    mf = dc.m * dc.f
    block = ad[:mf, :mf].reshape(dc.m, dc.f, dc.m, dc.f)
    sigma = np.einsum("a,albk,b->lk", phi.conj(), block, phi)
    p = np.trace(sigma).real
    if p <= 1e-15:
        raise InvariantError("invalid initialization: no weight on the chosen pure subsystem state")
    rho_F = hermitize(sigma / p)
    init = Initialization(dc, phi, rho_F, 0.0, rho)
    eps = tv_distance(rho, init.reconstructed())
    return Initialization(dc, phi, rho_F, eps, rho)


def find_eps_pure_subsystem(rho_E, m: int, f: int | None = None) -> Initialization:
    """Adapted basis from the eigenvectors of ``rho_E`` in descending order.

    The top ``f`` eigenvectors span ``|phi = e_1> (x) H_F``; the next ``m-1``
    groups of ``f`` complete ``H_M``; leftovers form ``H_R``. ``epsilon``
    equals the eigenvalue mass outside the top ``f``.
    """
    rho = as_matrix(rho_E, "environment state")
    d_E = rho.shape[0]
    if m > d_E or m < 1:
        raise InfeasibleError("m-rank infeasible", f"subsystem dimension {m} vs d_E={d_E}")
    f = d_E // m if f is None else f
    if f < 1 or m * f > d_E:
        raise DimensionError(f"m*f = {m * f} exceeds d_E = {d_E}")
    _, vec = _sorted_eigh(rho)
    decomp = SubsystemDecomposition(d_E, m, f, d_E - m * f, dagger(vec))
    return initialize_on(rho, decomp)


# -- assembling joint unitaries ---------------------------------------------


def embed_subsystem_unitary(u_ms, m: int, f: int, r: int, d_S: int) -> np.ndarray:
    """``(U (x) I_F) (+) I_{r*d_S}`` on adapted ``E (x) S`` coordinates.

    ``u_ms`` acts on ``H_M (x) H_S``; the result is laid out as
    ``((M, F) (+) R) (x) S`` with the system factor last.
    """
    u4 = np.asarray(u_ms).reshape(m, d_S, m, d_S)
    core = np.einsum("asbt,lk->alsbkt", u4, np.eye(f)).reshape(m * f * d_S, m * f * d_S)
    n = (m * f + r) * d_S
    w = np.eye(n, dtype=np.complex128)
    w[: core.shape[0], : core.shape[0]] = core
    return w


def to_canonical(w_adapted, Q, d_S: int) -> np.ndarray:
    qd = np.kron(Q, np.eye(d_S))
    return dagger(qd) @ w_adapted @ qd


def channel_of_dilation(W, env_state, d_S: int) -> Channel:
    """Kraus operators ``sqrt(p_a) (<b| (x) I) W (|e_a> (x) I)`` of the reduced map."""
    W = np.asarray(W)
    env = hermitize(np.asarray(env_state, dtype=np.complex128))
    d_E = env.shape[0]
    lam, vec = np.linalg.eigh(env)
    w4 = W.reshape(d_E, d_S, d_E, d_S)
    ops = []
    for p, e in zip(lam, vec.T):
        if p <= 1e-15:
            continue
        col = np.einsum("bsat,a->bst", w4, e) * np.sqrt(p)
        ops.extend(col[b] for b in range(d_E))
    return Channel.from_kraus(ops, tol=1e-8)


def reduced_output(W, env_state, rho) -> np.ndarray:
    """``Tr_E[W (rho_E (x) rho) W^dag]`` by explicit partial trace."""
    env = np.asarray(env_state)
    rho = np.asarray(rho)
    joint = W @ np.kron(env, rho) @ dagger(W)
    return partial_trace(joint, (env.shape[0], rho.shape[0]), keep=1)


def _report(W, rho_E, target, eps_cert, method, diagnostics, restarts, seed, **extra):
    d_S = target.d
    achieved = channel_of_dilation(W, rho_E, d_S)
    meas = channel_distance_1to1(achieved, target, restarts=restarts, seed=seed).lower_bound
    return DilationReport(
        W=UnitaryOperator(W).mat,
        env_state=np.asarray(rho_E),
        d_S=d_S,
        eps_certified=float(eps_cert),
        eps_measured=float(meas),
        method=Method(method),
        diagnostics=diagnostics,
        extra=extra,
    )


def subsystem_unitary(target: Channel, m: int, phi=None) -> np.ndarray:
    """Stinespring unitary on ``H_M (x) H_S`` with reference state ``phi``."""
    ops = list(target.canonical_kraus)
    d = target.d
    ops += [np.zeros((d, d), dtype=np.complex128)] * (m - len(ops))
    u = stinespring_complete(ops).mat
    if phi is not None:
        u = u @ np.kron(householder_to_first(phi), np.eye(d))
    return u


def dilate_via_subsystem(target, init: Initialization, restarts: int = 8, seed: int = 0,
                         method: Method | str = Method.SUBSYSTEM) -> DilationReport:
    """Generalised Stinespring dilation ``W = (U_T (x) I_F) (+) I_{S R}``.

    The target's canonical Kraus set (zero padded to ``m``) is completed to a
    unitary on ``H_M (x) H_S`` whose reference input is ``init.phi``. The
    a-priori error bound is ``init.epsilon`` (trace-norm contraction).
    """
    target = _as_channel(target)
    dc = init.decomp
    rank = target.rank
    if rank > dc.m:
        raise InfeasibleError("m-rank infeasible", f"Kraus rank {rank} exceeds subsystem dimension {dc.m}")
    d = target.d
    u_t = subsystem_unitary(target, dc.m, init.phi)
    W = to_canonical(embed_subsystem_unitary(u_t, dc.m, dc.f, dc.r, d), dc.Q, d)
    diag = f"m={dc.m} f={dc.f} r={dc.r} target_rank={rank}"
    return _report(W, init.rho_E, target, init.epsilon, method, diag, restarts, seed)


def dilate(target, rho_E, m: int | None = None, mode: str = "auto", restarts: int = 8,
           seed: int = 0) -> DilationReport:
    """Pick a dilation route for ``target`` given the environment state.

    ``stinespring`` requires a pure environment; ``subsystem`` searches for an
    epsilon-pure subsystem of dimension ``m`` (default: the Kraus rank);
    ``auto`` uses the former when the environment is pure.
    """
    target = _as_channel(target)
    rho = DensityOperator(rho_E)
    m = target.rank if m is None else m
    pure = rho.is_pure(1e-12)
    if mode == "auto":
        mode = "stinespring" if pure else "subsystem"
    if mode == "stinespring":
        if not pure:
            raise InfeasibleError("environment not pure", "stinespring mode needs a pure environment state")
        init = find_eps_pure_subsystem(rho.mat, m)
        return dilate_via_subsystem(target, init, restarts, seed, Method.STINESPRING_PURE)
    if mode == "subsystem":
        init = find_eps_pure_subsystem(rho.mat, m)
        return dilate_via_subsystem(target, init, restarts, seed, Method.SUBSYSTEM)
    raise ValueError(f"unknown mode {mode!r}")


def verify_dilation(report: DilationReport, target, trials: int = 20, seed: int = 0) -> float:
    """Worst total-variation error of the dilation over random pure inputs.

    Each output is computed by brute-force partial trace of the joint state.
    The argmax of the induced-norm search is added to the random inputs.
    """
    target = _as_channel(target)
    if target.d != report.d_S:
        raise DimensionError(f"target dimension {target.d} vs dilation system dimension {report.d_S}")
    W = np.asarray(report.W)
    if W.shape[0] != report.d_E * report.d_S:
        raise DimensionError("joint unitary does not match environment and system dimensions")
    rng = np.random.default_rng(seed)
    inputs = [projector(random_pure_state(target.d, rng)) for _ in range(trials)]
    inputs.append(channel_distance_1to1(report.achieved(), target, seed=seed).argmax_state.mat)
    worst = 0.0
    for rho in inputs:
        worst = max(worst, tv_distance(reduced_output(W, report.env_state, rho), target(rho)))
    return worst
