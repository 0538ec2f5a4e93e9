"""Majorization, unistochastic matrices and majorization-based channel design."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import Channel, _as_channel, extremality_test
from .dilation import (
    DilationReport,
    Method,
    SubsystemDecomposition,
    _report,
    _sorted_eigh,
    embed_subsystem_unitary,
    stinespring_complete,
    to_canonical,
)
from .errors import DimensionError, InfeasibleError, InvariantError
from .linalg import DensityOperator, UnitaryOperator, dagger, hermitize, tv_distance

SLACK = 1e-12


class ProbabilityVector:
    """Non-negative weights summing to one; tiny negatives are clamped to zero."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise InvariantError("empty probability vector")
        if np.any(w < -SLACK):
            raise InvariantError(f"negative weight {w.min():.3g}")
        w = np.clip(w, 0.0, None)
        if abs(w.sum() - 1.0) > 1e-10:
            raise InvariantError(f"weights sum to {w.sum():.12g}, not 1")
        w.flags.writeable = False
        self.weights = w

    def __len__(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def __repr__(self):
        return f"ProbabilityVector({self.weights.tolist()})"


def _weights(p) -> np.ndarray:
    return p.weights if isinstance(p, ProbabilityVector) else ProbabilityVector(p).weights


def _pad(p, q):
    n = max(p.size, q.size)
    return np.pad(p, (0, n - p.size)), np.pad(q, (0, n - q.size))


def majorizes(p, q) -> bool:
    """True iff sorted prefix sums of ``p`` dominate those of ``q``."""
    p, q = _pad(_weights(p), _weights(q))
    gap = np.cumsum(np.sort(p)[::-1]) - np.cumsum(np.sort(q)[::-1])
    return bool(np.all(gap >= -SLACK))


def unistochastic_connect(p, q) -> UnitaryOperator:
    """Real orthogonal ``V`` with ``q_i = sum_j |V_ij|^2 p_j``.

    Works on ``A = diag(p)``: targets are fixed largest first, each by one
    Givens rotation between two remaining diagonal entries ``a >= t >= b``
    that are adjacent in sorted order. The remaining diagonal stays majorizing
    the remaining targets, so at most ``n - 1`` rotations are needed. A final
    permutation moves every fixed value to its target index.
    """
    p, q = _pad(_weights(p), _weights(q))
    if not majorizes(p, q):
        raise InfeasibleError("majorization violation", f"{p.tolist()} does not majorize {q.tolist()}")
    n = p.size
    v = np.eye(n)
    diag = p.copy()
    free = list(range(n))
    placed = {}  # position -> target index
    for t_idx in np.argsort(-q, kind="stable")[:-1]:
        t = q[t_idx]
        free.sort(key=lambda i: -diag[i])
        vals = diag[free]
        k = next((k for k in range(len(free) - 1) if vals[k] >= t - SLACK and vals[k + 1] <= t + SLACK), None)
        if k is None:  # pragma: no cover - excluded by majorization
            raise InfeasibleError("majorization violation", "no bracketing pair")
        i, j = free[k], free[k + 1]
        a, b = diag[i], diag[j]
        c2 = 1.0 if a - b <= SLACK else float(np.clip((t - b) / (a - b), 0.0, 1.0))
        c, s = np.sqrt(c2), np.sqrt(1.0 - c2)
        g = np.eye(n)
        g[i, i], g[i, j], g[j, i], g[j, j] = c, -s, s, c
        v = g @ v
        diag[i], diag[j] = t, a + b - t
        placed[i] = t_idx
        free.remove(i)
    placed[free[0]] = int(np.argsort(-q, kind="stable")[-1])
    perm = np.zeros((n, n))
    for pos, t_idx in placed.items():
        perm[t_idx, pos] = 1.0
    return UnitaryOperator((perm @ v).astype(np.complex128))


def unistochastic_residual(v, p, q) -> float:
    p, q = _pad(_weights(p), _weights(q))
    return float(np.max(np.abs(q - (np.abs(np.asarray(v)) ** 2) @ p)))


# -- specs --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StochasticUnitarySpec:
    unitaries: tuple
    weights: ProbabilityVector

    def __post_init__(self):
        us = tuple(UnitaryOperator(u).mat for u in self.unitaries)
        w = self.weights if isinstance(self.weights, ProbabilityVector) else ProbabilityVector(self.weights)
        if len(us) != len(w):
            raise DimensionError(f"{len(us)} unitaries but {len(w)} weights")
        if np.any(w.weights <= 0):
            raise InvariantError("stochastic-unitary weights must be strictly positive")
        if len({u.shape for u in us}) != 1:
            raise DimensionError("unitaries act on different dimensions")
        object.__setattr__(self, "unitaries", us)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.unitaries[0].shape[0]

    def channel(self) -> Channel:
        return Channel.from_kraus([np.sqrt(q) * u for q, u in zip(self.weights.weights, self.unitaries)])


@dataclass(frozen=True, eq=False)
class ConvexCombinationSpec:
    components: tuple  # of (weight, Channel)

    def __post_init__(self):
        comps = tuple((float(w), _as_channel(ch)) for w, ch in self.components)
        if not comps:
            raise InvariantError("empty convex combination")
        ProbabilityVector([w for w, _ in comps])
        if any(w <= 0 for w, _ in comps):
            raise InvariantError("convex weights must be strictly positive")
        if len({ch.d for _, ch in comps}) != 1:
            raise DimensionError("components act on different dimensions")
        for k, (_, ch) in enumerate(comps):
            if not extremality_test(ch).is_extreme:
                raise InvariantError(f"component {k} is not extreme")
        object.__setattr__(self, "components", comps)

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0][1].d

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    def channel(self) -> Channel:
        return Channel.from_choi(sum(w * ch.choi for w, ch in self.components))


@dataclass(frozen=True, eq=False)
class MajorizedInitialization:
    """Environment close to ``diag(p) (x) rho_F (+) 0_R`` on ``decomp``."""

    decomp: SubsystemDecomposition
    p: np.ndarray
    rho_F: np.ndarray
    epsilon: float
    rho_E: np.ndarray

    def reconstructed(self) -> np.ndarray:
        dc = self.decomp
        ad = np.zeros((dc.d_E, dc.d_E), dtype=np.complex128)
        ad[: dc.m * dc.f, : dc.m * dc.f] = np.kron(np.diag(self.p), self.rho_F)
        return dagger(dc.Q) @ ad @ dc.Q


def majorized_initialization(rho_E, m: int, f: int | None = None,
                             decomp: SubsystemDecomposition | None = None) -> MajorizedInitialization:
    """Diagonal ``rho_M`` from the blocks of ``rho_E`` on a decomposition.

    Without ``decomp`` the adapted basis is the eigenbasis in descending order
    with ``H_M`` blocks of ``f`` consecutive eigenvectors. ``p_j`` is the
    weight of block ``j`` and ``rho_F`` the normalised average of the blocks.
    """
    rho = DensityOperator(rho_E).mat
    d_E = rho.shape[0]
    if decomp is None:
        if m > d_E:
            raise InfeasibleError("m-rank infeasible", f"m={m} exceeds d_E={d_E}")
        f = d_E // m if f is None else f
        if f < 1 or m * f > d_E:
            raise DimensionError(f"m*f = {m * f} exceeds d_E = {d_E}")
        _, vec = _sorted_eigh(rho)
        decomp = SubsystemDecomposition(d_E, m, f, d_E - m * f, dagger(vec))
    dc = decomp
    ad = dc.Q @ rho @ dagger(dc.Q)
    mf = dc.m * dc.f
    blocks = np.einsum("jajb->jab", ad[:mf, :mf].reshape(dc.m, dc.f, dc.m, dc.f))
    p = np.trace(blocks, axis1=1, axis2=2).real
    tot = p.sum()
    if tot <= 1e-15:
        raise InvariantError("invalid initialization: no weight on the subsystem block")
    rho_F = hermitize(blocks.sum(axis=0) / tot)
    p = np.clip(p / tot, 0.0, None)
    init = MajorizedInitialization(dc, p, rho_F, 0.0, rho)
    return MajorizedInitialization(dc, p, rho_F, tv_distance(rho, init.reconstructed()), rho)


# -- designs --------------------------------------------------------------------


def _block_diag(blocks, total):
    out = np.eye(total, dtype=np.complex128)
    at = 0
    for b in blocks:
        n = b.shape[0]
        out[at:at + n, at:at + n] = b
        at += n
    return out


def design_stochastic_unitary(spec: StochasticUnitarySpec, init: MajorizedInitialization,
                              restarts: int = 8, seed: int = 0) -> DilationReport:
    """``W = C_U (V_E (x) I_S)`` with ``C_U`` applying ``U_j`` on block ``j`` of ``H_M``."""
    dc = init.decomp
    d = spec.d
    q = spec.weights.weights
    if dc.m != len(q):
        raise DimensionError(f"subsystem dimension {dc.m} vs {len(q)} unitaries")
    if not majorizes(init.p, q):
        raise InfeasibleError("majorization violation",
                              f"rho_M spectrum {np.round(init.p, 12).tolist()} does not majorize {q.tolist()}")
    v = unistochastic_connect(init.p, q).mat
    mf = dc.m * dc.f
    v_e = np.eye(dc.d_E, dtype=np.complex128)
    v_e[:mf, :mf] = np.kron(v, np.eye(dc.f))
    # env-first: block (j, a) of E carries U_j on S
    c_u = _block_diag([u for u in spec.unitaries for _ in range(dc.f)], dc.d_E * d)
    W_ad = c_u @ np.kron(v_e, np.eye(d))
    W = to_canonical(W_ad, dc.Q, d)
    diag = f"m={dc.m} f={dc.f} r={dc.r} p={np.round(init.p, 12).tolist()}"
    return _report(W, init.rho_E, spec.channel(), init.epsilon, Method.STOCHASTIC_UNITARY, diag, restarts, seed)


@dataclass(frozen=True)
class BlockPlan:
    f: int
    q_tilde: np.ndarray
    kernel_dim: int
    Q: np.ndarray


def block_convex_plan(spec: ConvexCombinationSpec, rho_E) -> BlockPlan:
    """Steps I-III: ordering, choice of ``f``, cumulative test, kernel count."""
    rho = DensityOperator(rho_E).mat
    d_E = rho.shape[0]
    d, K = spec.d, spec.K
    lam, vec = _sorted_eigh(rho)
    q_sorted = np.sort(spec.weights)[::-1]
    cum_lam = np.cumsum(lam)
    f = int(np.argmax(cum_lam >= q_sorted[0] - SLACK)) + 1
    cum_q = np.cumsum(q_sorted)
    for k in range(1, K + 1):
        if k * f > d_E or cum_lam[k * f - 1] < cum_q[k - 1] - SLACK:
            raise InfeasibleError(
                "method not viable",
                f"cumulative test fails at k={k} with f={f} (d_E={d_E})",
            )
    Kf = K * f
    kernel = [i for i in range(Kf, d_E) if lam[i] < SLACK]
    need = (d - 1) * Kf
    if len(kernel) < need:
        raise InfeasibleError("insufficient kernel", f"kernel dimension {len(kernel)} < {need}")
    # adapted basis: block l = (|0_l> (x) H_F from eigvecs, |j_l> (x) H_F from kernel), then the rest
    cols, ker = [], iter(kernel[:need])
    for ell in range(K):
        for j in range(d):
            for a in range(f):
                cols.append(ell * f + a if j == 0 else next(ker))
    used = set(cols)
    cols += [i for i in range(d_E) if i not in used]
    basis = vec[:, cols]
    q_tilde = np.array([lam[ell * f:(ell + 1) * f].sum() for ell in range(K)])
    return BlockPlan(f, np.clip(q_tilde, 0.0, None), len(kernel), dagger(basis))


def block_convex_design(spec: ConvexCombinationSpec, rho_E, restarts: int = 8, seed: int = 0) -> DilationReport:
    """Exact dilation of ``sum_k q_k T_k`` on disjoint environment blocks.

    Every block ``H_{M,k} (x) H_{F,k}`` has ``dim H_M = d_S``. Reference
    populations ``q~`` are redistributed to the target weights by ``V (x) I_F``
    before the block-diagonal ``(+)_k U_{T_k} (x) I_F`` acts.
    """
    rho = DensityOperator(rho_E).mat
    d, K = spec.d, spec.K
    for k, (_, ch) in enumerate(spec.components):
        if ch.rank > d:
            raise InfeasibleError("m-rank infeasible", f"component {k} has Kraus rank {ch.rank} > {d}")
    plan = block_convex_plan(spec, rho)
    f, d_E = plan.f, rho.shape[0]
    q = spec.weights
    qt = plan.q_tilde / plan.q_tilde.sum()
    v = unistochastic_connect(qt, q).mat
    blk = d * f  # env dimension of one block
    v_e = np.eye(d_E, dtype=np.complex128)
    for k in range(K):
        for ell in range(K):
            for a in range(f):
                v_e[k * blk + a, ell * blk + a] = v[k, ell]
    units = []
    for _, ch in spec.components:
        ops = list(ch.canonical_kraus)
        ops += [np.zeros((d, d), dtype=np.complex128)] * (d - len(ops))
        units.append(embed_subsystem_unitary(stinespring_complete(ops).mat, d, f, 0, d))
    c = _block_diag(units, d_E * d)
    W = to_canonical(c @ np.kron(v_e, np.eye(d)), plan.Q, d)
    diag = f"K={K} f={f} q_tilde={np.round(plan.q_tilde, 12).tolist()} kernel={plan.kernel_dim} d_E={d_E}"
    return _report(W, rho, spec.channel(), 0.0, Method.BLOCK_CONVEX, diag, restarts, seed,
                   f=f, q_tilde=plan.q_tilde)
