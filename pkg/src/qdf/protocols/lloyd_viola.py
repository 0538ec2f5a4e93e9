"""Coherent rank-two channel construction by Hamiltonian averaging.

Layout is ancilla first: joint operators act on ``E (x) S`` with a single
ancilla qubit ``E`` (two ancillas ``A2 (x) A1 (x) S`` for the nested scheme).
The coupling is ``gamma * X_E (x) Pi_S`` and the averaged generator is
``gamma * X_E (x) P`` with ``P = sum_k lam_k V_k Pi_S V_k^dag``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..channels import Channel, channel_distance_1to1
from ..dilation import channel_of_dilation
from ..ensembles import HADAMARD, PAULI_X
from ..errors import DimensionError, InvariantError
from ..linalg import (
    DensityOperator,
    UnitaryOperator,
    arccosm,
    as_matrix,
    cosm,
    dagger,
    expm_hermitian,
    hermitize,
    householder_to_first,
    ket,
    max_abs,
    pinv_psd,
    projector,
    sinm,
    sqrtm_psd,
)
from ..majorization import ProbabilityVector

_P0 = np.diag([1.0, 0.0]).astype(np.complex128)
_P1 = np.diag([0.0, 1.0]).astype(np.complex128)


@dataclass(frozen=True, eq=False)
class RankTwoTarget:
    M0: np.ndarray
    M1: np.ndarray
    U0: np.ndarray
    U1: np.ndarray
    P: np.ndarray
    theta: float
    flags: tuple = ()

    @property
    def d(self) -> int:
        return self.M0.shape[0]

    def channel(self) -> Channel:
        return Channel.from_kraus([self.M0, self.M1])

    def residual(self) -> float:
        return max(max_abs(self.M0 - self.U0 @ cosm(self.theta * self.P)),
                   max_abs(self.M1 - self.U1 @ sinm(self.theta * self.P)))

    @classmethod
    def from_polar(cls, P, theta, U0=None, U1=None) -> "RankTwoTarget":
        P = as_matrix(P, "P")
        d = P.shape[0]
        U0 = np.eye(d, dtype=np.complex128) if U0 is None else UnitaryOperator(U0).mat
        U1 = np.eye(d, dtype=np.complex128) if U1 is None else UnitaryOperator(U1).mat
        return cls(U0 @ cosm(theta * P), U1 @ sinm(theta * P), U0, U1, P, float(theta))


def lv_polar_extract(M0, M1) -> RankTwoTarget:
    """Polar data ``M0 = U0 cos(theta P)``, ``M1 = U1 sin(theta P)`` with ``Tr P = 1``."""
    M0, M1 = as_matrix(M0, "M0"), as_matrix(M1, "M1")
    if M0.shape != M1.shape or M0.shape[0] != M0.shape[1]:
        raise DimensionError("M0 and M1 must be square of the same size")
    d = M0.shape[0]
    resid = max_abs(dagger(M0) @ M0 + dagger(M1) @ M1 - np.eye(d))
    if resid > 1e-9:
        raise InvariantError(f"not trace-preserving: residual {resid:.3g}")
    c = sqrtm_psd(dagger(M0) @ M0)
    angle = arccosm(c, tol=1e-8)
    theta = float(np.trace(angle).real)
    flags = []
    P = angle / theta if theta > 1e-14 else np.eye(d, dtype=np.complex128) / d
    U0 = sla.polar(M0)[0]
    if max_abs(M1) < 1e-12:
        U1 = np.eye(d, dtype=np.complex128)
        flags.append("M1 = 0: U1 set to identity")
    else:
        U1 = sla.polar(M1)[0]
    tgt = RankTwoTarget(M0, M1, U0, U1, hermitize(P), theta, tuple(flags))
    if tgt.residual() > 1e-9:
        raise InvariantError(f"polar reconstruction residual {tgt.residual():.3g}")
    return tgt


@dataclass(frozen=True, eq=False)
class AveragingSchedule:
    N: int
    sub_weights: ProbabilityVector
    rotations: tuple
    pi_S: np.ndarray

    def __post_init__(self):
        w = self.sub_weights if isinstance(self.sub_weights, ProbabilityVector) else ProbabilityVector(self.sub_weights)
        rots = tuple(UnitaryOperator(v).mat for v in self.rotations)
        if len(rots) != len(w):
            raise DimensionError(f"{len(rots)} rotations but {len(w)} weights")
        pi = as_matrix(self.pi_S, "Pi_S")
        if max_abs(pi @ pi - pi) > 1e-10 or abs(np.trace(pi).real - 1) > 1e-10:
            raise InvariantError("Pi_S must be a rank-1 projector")
        if self.N < 1:
            raise InvariantError("number of cycles must be positive")
        object.__setattr__(self, "sub_weights", w)
        object.__setattr__(self, "rotations", rots)
        object.__setattr__(self, "pi_S", pi)

    def averaged(self) -> np.ndarray:
        return sum(l * v @ self.pi_S @ dagger(v) for l, v in zip(self.sub_weights.weights, self.rotations))

    def with_cycles(self, N: int) -> "AveragingSchedule":
        return AveragingSchedule(N, self.sub_weights, self.rotations, self.pi_S)


def spectral_schedule(P, N: int) -> AveragingSchedule:
    """Schedule from the eigendecomposition of ``P``; ``Pi_S = |0><0|``."""
    P = hermitize(as_matrix(P, "P"))
    d = P.shape[0]
    lam, vec = np.linalg.eigh(P)
    keep = lam > 1e-14
    if not keep.any():
        return AveragingSchedule(N, [1.0], [np.eye(d)], projector(ket(0, d)))
    rots = [dagger(householder_to_first(v)) for v in vec.T[keep]]
    w = np.clip(lam[keep], 0, None)
    return AveragingSchedule(N, w / w.sum(), rots, projector(ket(0, d)))


def two_term_schedule(N: int) -> AveragingSchedule:
    """Qubit schedule ``P = (|0><0| + |+><+|) / 2`` from non-commuting terms."""
    return AveragingSchedule(N, [0.5, 0.5], [np.eye(2), HADAMARD], projector(ket(0, 2)))


def _cond(u0, u1):
    return np.kron(_P0, u0) + np.kron(_P1, u1)


def entangler_averaged(theta: float, schedule: AveragingSchedule) -> np.ndarray:
    """``N`` cycles of piecewise-constant evolution with interleaved rotations."""
    dt = 1.0 / schedule.N
    d = schedule.pi_S.shape[0]
    cycle = np.eye(2 * d, dtype=np.complex128)
    for lam, v in zip(schedule.sub_weights.weights, schedule.rotations):
        frame = np.kron(np.eye(2), v)
        h = np.kron(PAULI_X, schedule.pi_S)
        cycle = frame @ expm_hermitian(h, theta * lam * dt) @ dagger(frame) @ cycle
    return np.linalg.matrix_power(cycle, schedule.N)


def entangler_ideal(theta: float, P) -> np.ndarray:
    """``exp(-i theta X (x) P) = I (x) cos(theta P) - i X (x) sin(theta P)``."""
    P = as_matrix(P)
    return np.kron(np.eye(2), cosm(theta * P)) - 1j * np.kron(PAULI_X, sinm(theta * P))


@dataclass(frozen=True, eq=False)
class LVResult:
    achieved: Channel
    ideal: Channel
    trotter_error: float
    target_error: float
    joint: np.ndarray = field(repr=False)


def lv_simulate(target: RankTwoTarget, schedule: AveragingSchedule | None = None, ancilla=None,
                N: int = 64, restarts: int = 8, seed: int = 0) -> LVResult:
    schedule = spectral_schedule(target.P, N) if schedule is None else schedule
    d = target.d
    if schedule.pi_S.shape[0] != d:
        raise DimensionError("schedule and target act on different dimensions")
    gap = max_abs(schedule.averaged() - target.P)
    if gap > 1e-10:
        raise InvariantError(f"schedule does not average to P: residual {gap:.3g}")
    anc = projector(ket(0, 2)) if ancilla is None else DensityOperator(ancilla).mat
    cond = _cond(target.U0, target.U1)
    joint = cond @ entangler_averaged(target.theta, schedule)
    ideal_joint = cond @ entangler_ideal(target.theta, target.P)
    achieved = channel_of_dilation(joint, anc, d)
    ideal = channel_of_dilation(ideal_joint, anc, d)
    terr = channel_distance_1to1(achieved, ideal, restarts, seed).lower_bound
    targ = channel_distance_1to1(achieved, target.channel(), restarts, seed).lower_bound
    return LVResult(achieved, ideal, terr, targ, joint)


# -- nested rank three -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NestedResult:
    achieved: Channel
    target: Channel
    stage1: RankTwoTarget
    stage2: RankTwoTarget
    error: float
    ancillas: int
    flags: tuple


def _second_stage_pair(M1, M2, mt):
    """``(M1 mt^+, M2 mt^+)`` made trace preserving on ``ker mt`` if needed."""
    inv = pinv_psd(mt)
    a, b = M1 @ inv, M2 @ inv
    d = mt.shape[0]
    lam, vec = np.linalg.eigh(mt)
    ker = vec[:, lam <= 1e-12]
    if ker.shape[1] == 0:
        return a, b, False
    stack = np.vstack([a, b])
    comp = sla.null_space(dagger(stack))[:, : ker.shape[1]]
    stack = stack + comp @ dagger(ker)
    return stack[:d], stack[d:], True


def lv_nested_rank3(M0, M1, M2, schedules=(None, None), N: int = 256, restarts: int = 8,
                    seed: int = 0) -> NestedResult:
    """Two LV stages on ``A2 (x) A1 (x) S``; stage two runs when ``A1 = |1>``."""
    M0, M1, M2 = (as_matrix(m) for m in (M0, M1, M2))
    d = M0.shape[0]
    target = Channel.from_kraus([M0, M1, M2])
    mt = sqrtm_psd(dagger(M1) @ M1 + dagger(M2) @ M2)
    s1 = lv_polar_extract(M0, mt)
    a, b, patched = _second_stage_pair(M1, M2, mt)
    s2 = lv_polar_extract(a, b)
    flags = ("pseudo-inverse on support of the intermediate operator",) if patched else ()

    def stage_unitary(tgt, sch):
        sch = spectral_schedule(tgt.P, N) if sch is None else sch
        return _cond(tgt.U0, tgt.U1) @ entangler_averaged(tgt.theta, sch)

    u1 = np.kron(np.eye(2), stage_unitary(s1, schedules[0]))  # acts on A1 (x) S
    u2 = stage_unitary(s2, schedules[1]).reshape(2, d, 2, d)  # acts on A2 (x) S
    ctrl = np.zeros((2, 2, d, 2, 2, d), dtype=np.complex128)  # (a2, a1, s) x (a2', a1', s')
    eye = np.eye(2 * d).reshape(2, d, 2, d)
    ctrl[:, 0, :, :, 0, :] = eye
    ctrl[:, 1, :, :, 1, :] = u2
    joint = ctrl.reshape(4 * d, 4 * d) @ u1
    anc = projector(ket(0, 4))
    achieved = channel_of_dilation(joint, anc, d)
    err = channel_distance_1to1(achieved, target, restarts, seed).lower_bound
    return NestedResult(achieved, target, s1, s2, err, 2, flags)


# -- mixed ancilla -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NoisyResult:
    achieved: Channel
    conditional_maps: tuple  # superoperators for ancilla outcomes |0>, |1>
    error_lower_bound: float


def ancilla_state(w0: float, w1: float, q: complex = 0.0) -> np.ndarray:
    if abs(w0 + w1 - 1) > 1e-12 or min(w0, w1) < 0 or abs(q) ** 2 > w0 * w1 + 1e-15:
        raise InvariantError(f"invalid ancilla state w0={w0} w1={w1} q={q}")
    return np.array([[w0, q], [np.conj(q), w1]], dtype=np.complex128)


def conditional_superop(joint, rho_E, d: int, outcome: int) -> np.ndarray:
    """Superoperator of ``rho -> <b| joint (rho_E (x) rho) joint^dag |b>``."""
    rho_E = np.asarray(rho_E)
    w4 = np.asarray(joint).reshape(2, d, 2, d)
    lam, vec = np.linalg.eigh(hermitize(rho_E))
    s = np.zeros((d * d, d * d), dtype=np.complex128)
    for p, e in zip(lam, vec.T):
        if p > 1e-15:
            k = np.einsum("sat,a->st", w4[outcome], e)
            s += p * np.kron(k, k.conj())
    return s


def lv_noisy_ancilla(target: RankTwoTarget, w0: float, w1: float, q: complex = 0.0,
                     restarts: int = 8, seed: int = 0) -> NoisyResult:
    """Ideal entangler and pure-case conditional unitary on a mixed ancilla."""
    rho_E = ancilla_state(w0, w1, q)
    d = target.d
    ent = entangler_ideal(target.theta, target.P)
    conds = tuple(conditional_superop(ent, rho_E, d, b) for b in (0, 1))
    achieved = channel_of_dilation(_cond(target.U0, target.U1) @ ent, rho_E, d)
    err = channel_distance_1to1(achieved, target.channel(), restarts, seed).lower_bound
    return NoisyResult(achieved, conds, err)
