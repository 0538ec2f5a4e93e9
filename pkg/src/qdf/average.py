"""Extreme-point decomposition of channels and randomized small dilations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import Channel, _as_channel, channel_distance_1to1, extremality_test, product_stack
from .dilation import DilationReport, Initialization, Method, dilate_via_subsystem
from .errors import DecompositionError, DimensionError
from .linalg import dagger, hermitize
from .majorization import ProbabilityVector

MIN_STEP = 1e-12


def _dependence(ops) -> np.ndarray:
    """Hermitian ``Y`` with ``sum_jk Y_jk M_k^dag M_j = 0``."""
    m = len(ops)
    _, _, vh = np.linalg.svd(product_stack(ops), full_matrices=True)
    c = vh[-1].conj().reshape(m, m)  # c[k, j] multiplies M_k^dag M_j
    h = (c + dagger(c)) / 2
    if np.linalg.norm(h) < 1e-8 * np.linalg.norm(c):
        h = 1j * (c - dagger(c)) / 2
    return h.T


def _split(ops, y):
    """Move to the PSD boundary along ``+-Y``; returns ``(lam, ops_plus, ops_minus)``."""
    lam_y = np.linalg.eigvalsh(y)
    t_plus = 1.0 / max(-lam_y.min(), 1e-300)
    t_minus = 1.0 / max(lam_y.max(), 1e-300)
    if min(t_plus, t_minus) < MIN_STEP or not np.isfinite(t_plus + t_minus):
        raise DecompositionError("numerical degeneracy", f"boundary steps {t_plus:.3g}, {t_minus:.3g}")

    def boundary(t):
        mu, w = np.linalg.eigh(np.eye(len(ops)) + t * y)
        mu[np.argmin(mu)] = 0.0
        mu = np.clip(mu, 0.0, None)
        stack = np.array(ops)
        new = np.einsum("jab,ji->iab", stack, w * np.sqrt(mu))
        return [k for k, s in zip(new, mu) if s > 0]

    lam = t_minus / (t_plus + t_minus)
    return lam, boundary(t_plus), boundary(-t_minus)


def extreme_decompose(ch, tol: float = 1e-8, max_components: int | None = None,
                      diagnostics: list | None = None) -> list:
    """Write ``ch`` as ``sum_j w_j T_j`` with every ``T_j`` extreme.

    Non-extreme nodes are split along a Hermitian dependence of
    ``{M_k^dag M_j}``. Each half sits on the boundary of the PSD cone, so
    the Kraus rank drops by at least one and the recursion terminates.
    """
    ch = _as_channel(ch)
    d = ch.d
    budget = d**4 if max_components is None else max_components
    notes = [] if diagnostics is None else diagnostics
    leaves = []
    stack = [(1.0, list(ch.canonical_kraus))]
    while stack:
        w, ops = stack.pop()
        node = Channel.from_kraus(ops, tol=1e-8)
        verdict = extremality_test(node, tol)
        if verdict.is_extreme or node.rank == 1:
            if verdict.m <= d and tol < verdict.min_singular_value < 10 * tol:
                notes.append(f"quasi-extreme leaf: min singular value {verdict.min_singular_value:.3g}")
            leaves.append((w, node))
            if len(leaves) > budget:
                raise DecompositionError("decomposition budget exceeded", f"more than {budget} components")
            continue
        ops = list(node.canonical_kraus)
        lam, plus, minus = _split(ops, _dependence(ops))
        stack.append((w * (1 - lam), minus))
        stack.append((w * lam, plus))
    total = sum(w for w, _ in leaves)
    if abs(total - 1.0) > 1e-10:
        raise DecompositionError("reconstitution error", f"weights sum to {total:.12g}")
    err = np.abs(sum(w * c.choi for w, c in leaves) - ch.choi).max()
    if err > tol:
        raise DecompositionError("reconstitution error", f"Choi residual {err:.3g} exceeds {tol:.3g}")
    return leaves


@dataclass(frozen=True, eq=False)
class AverageRealization:
    distribution: ProbabilityVector
    dilations: tuple
    component_channels: tuple
    reconstitution_error: float
    eps_certified: float
    diagnostics: list = field(default_factory=list)

    def average_choi(self) -> np.ndarray:
        return sum(p * r.achieved().choi for p, r in zip(self.distribution.weights, self.dilations))

    def average_channel(self) -> Channel:
        return Channel.from_choi(hermitize(self.average_choi()), tol=1e-8)

    def eps_measured(self, target, restarts: int = 8, seed: int = 0) -> float:
        return channel_distance_1to1(self.average_channel(), target, restarts, seed).lower_bound


def realize_on_average(ch, init: Initialization, tol: float = 1e-8, restarts: int = 8,
                       seed: int = 0) -> AverageRealization:
    """Dilate each extreme component on the same ``d_S``-dimensional subsystem."""
    ch = _as_channel(ch)
    if init.decomp.m != ch.d:
        raise DimensionError(f"subsystem dimension {init.decomp.m} must equal d_S = {ch.d}")
    notes: list = []
    comps = extreme_decompose(ch, tol=tol, diagnostics=notes)
    weights = np.array([w for w, _ in comps])
    dil = tuple(dilate_via_subsystem(c, init, restarts, seed, Method.AVERAGE) for _, c in comps)
    err = float(np.abs(sum(w * c.choi for w, c in comps) - ch.choi).max())
    return AverageRealization(
        distribution=ProbabilityVector(weights / weights.sum()),
        dilations=dil,
        component_channels=tuple(c for _, c in comps),
        reconstitution_error=err,
        eps_certified=init.epsilon,
        diagnostics=notes,
    )


def sample_indices(ar: AverageRealization, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.choice(len(ar.distribution), size=n, p=ar.distribution.weights)


def sample_realization(ar: AverageRealization, seed: int) -> tuple[int, DilationReport]:
    idx = int(sample_indices(ar, 1, seed)[0])
    return idx, ar.dilations[idx]
