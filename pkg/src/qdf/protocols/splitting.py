"""One-shot subspace stabilization with a ``K``-level ancilla.

Joint operators act on ``A (x) S`` with the ancilla first; the ancilla
reference state is ``|1>``, i.e. index 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, InvariantError
from ..linalg import (
    DensityOperator,
    UnitaryOperator,
    as_matrix,
    complete_to_unitary,
    dagger,
    max_abs,
    partial_trace,
    projector,
    ket,
)


@dataclass(frozen=True, eq=False)
class SplitConfig:
    d_S: int
    d_T: int
    Pi_T: np.ndarray
    K: int
    blocks: tuple
    lifts: tuple
    loaders: tuple

    def __post_init__(self):
        blocks = tuple(as_matrix(b, "block projector") for b in self.blocks)
        lifts = tuple(UnitaryOperator(v).mat for v in self.lifts)
        loaders = tuple(UnitaryOperator(u).mat for u in self.loaders)
        if not (len(blocks) == len(lifts) == len(loaders) == self.K):
            raise DimensionError("blocks, lifts and loaders must all have K entries")
        if max_abs(sum(blocks) - np.eye(self.d_S)) > 1e-10:
            raise InvariantError("block projectors do not resolve the identity")
        for i, a in enumerate(blocks):
            for b in blocks[i + 1:]:
                if max_abs(a @ b) > 1e-10:
                    raise InvariantError("block projectors are not orthogonal")
        if max_abs(blocks[0] - self.Pi_T) > 1e-10:
            raise InvariantError("first block must be the target projector")
        for k, (b, v, u) in enumerate(zip(blocks, lifts, loaders)):
            moved = v @ b @ dagger(v)
            if max_abs(self.Pi_T @ moved @ self.Pi_T - moved) > 1e-10:
                raise InvariantError(f"lift {k} does not map its block into the target")
            if max_abs(u[:, 0] - ket(k, self.K)) > 1e-10:
                raise InvariantError(f"loader {k} does not send |1> to |{k + 1}>")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "lifts", lifts)
        object.__setattr__(self, "loaders", loaders)


def _projector_basis(pi, tol=1e-10):
    pi = as_matrix(pi, "projector")
    if max_abs(pi - dagger(pi)) > tol or max_abs(pi @ pi - pi) > tol:
        raise InvariantError("not an orthogonal projector")
    lam, vec = np.linalg.eigh(pi)
    return vec[:, lam > 0.5], vec[:, lam <= 0.5]


def _swap_reflector(k: int, K: int) -> np.ndarray:
    """Householder reflector exchanging ``|1>`` and ``|k+1>`` (identity for k = 0)."""
    u = np.eye(K, dtype=np.complex128)
    if k:
        w = (ket(0, K) - ket(k, K)) / np.sqrt(2)
        u -= 2 * np.outer(w, w.conj())
    return u


def split_build(d_S: int, Pi_T) -> SplitConfig:
    """Blocks of rank ``d_T`` from the complement of the target, remainder last."""
    target, rest = _projector_basis(Pi_T)
    d_T = target.shape[1]
    if d_T == 0 or target.shape[0] != d_S:
        raise InvariantError("invalid target projector")
    K = math.ceil(d_S / d_T)
    blocks, lifts = [projector_from(target)], [np.eye(d_S, dtype=np.complex128)]
    u_t = complete_to_unitary(target)
    for k in range(1, K):
        cols = rest[:, (k - 1) * d_T: k * d_T]
        blocks.append(projector_from(cols))
        lifts.append(u_t @ dagger(complete_to_unitary(cols)))
    loaders = [_swap_reflector(k, K) for k in range(K)]
    return SplitConfig(d_S, d_T, projector_from(target), K, tuple(blocks), tuple(lifts), tuple(loaders))


def projector_from(cols) -> np.ndarray:
    return cols @ dagger(cols)


def split_unitaries(cfg: SplitConfig):
    ucs = sum(np.kron(u, p) for u, p in zip(cfg.loaders, cfg.blocks))
    uca = sum(np.kron(projector(ket(k, cfg.K)), v) for k, v in enumerate(cfg.lifts))
    return ucs, uca


def split_run(cfg: SplitConfig, rho_S, ancilla=None) -> np.ndarray:
    """``U_CA U_CS`` on ``ancilla (x) rho_S`` and trace out the ancilla."""
    rho = DensityOperator(rho_S).mat
    if rho.shape[0] != cfg.d_S:
        raise DimensionError(f"state dimension {rho.shape[0]} vs d_S = {cfg.d_S}")
    anc = projector(ket(0, cfg.K)) if ancilla is None else DensityOperator(ancilla).mat
    ucs, uca = split_unitaries(cfg)
    w = uca @ ucs
    out = w @ np.kron(anc, rho) @ dagger(w)
    return partial_trace(out, (cfg.K, cfg.d_S), keep=1)


def split_closed_form(cfg: SplitConfig, rho_S) -> np.ndarray:
    rho = as_matrix(rho_S)
    return sum(v @ p @ rho @ p @ dagger(v) for v, p in zip(cfg.lifts, cfg.blocks))


def split_measure_feedback(cfg: SplitConfig, rho_S) -> np.ndarray:
    """Average over outcomes of a projective measurement followed by ``V_k``."""
    rho = as_matrix(rho_S)
    out = np.zeros_like(rho, dtype=np.complex128)
    for v, p in zip(cfg.lifts, cfg.blocks):
        prob = np.trace(p @ rho).real
        if prob <= 1e-15:
            continue
        post = p @ rho @ p / prob
        out += prob * v @ post @ dagger(v)
    return out
