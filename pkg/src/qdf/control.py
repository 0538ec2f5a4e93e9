"""Channel synthesis as a Choi-state transfer problem.

The joint system is ``E (x) S`` (environment first). The reference copy
``S'`` is only used implicitly through the Choi matrix, whose index is
``out * d_S + ref``. Controls are piecewise constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import _as_channel
from .errors import DimensionError, InvariantError
from .linalg import (
    DensityOperator,
    as_matrix,
    expm_hermitian_batch,
    is_hermitian,
    max_abs,
)


def gell_mann_basis(n: int) -> np.ndarray:
    """Trace-orthonormal Hermitian basis: ``I/sqrt(n)`` then generalized Gell-Mann."""
    out = [np.eye(n, dtype=np.complex128) / np.sqrt(n)]
    for j in range(n):
        for k in range(j + 1, n):
            s = np.zeros((n, n), dtype=np.complex128)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            a = np.zeros((n, n), dtype=np.complex128)
            a[j, k], a[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            out += [s, a]
    for l in range(1, n):
        dg = np.zeros(n)
        dg[:l] = 1.0
        dg[l] = -l
        out.append(np.diag(dg / np.sqrt(l * (l + 1))).astype(np.complex128))
    return np.array(out)


def check_basis(basis, tol: float = 1e-10) -> None:
    b = np.asarray(basis)
    n = b.shape[1]
    if b.shape[0] != n * n:
        raise InvariantError(f"basis incomplete: {b.shape[0]} elements for dimension {n}")
    flat = b.reshape(b.shape[0], -1)
    gram = flat.conj() @ flat.T
    if max_abs(gram - np.eye(b.shape[0])) > tol:
        raise InvariantError("basis is not trace-orthonormal")
    if any(not is_hermitian(m, tol) for m in b):
        raise InvariantError("basis element not Hermitian")


@dataclass(frozen=True, eq=False)
class ControlProblem:
    d_S: int
    d_E: int
    H0: np.ndarray
    controls: tuple
    T: float
    n_steps: int
    rho_E: np.ndarray
    basis: np.ndarray = None
    u_max: float | None = None

    def __post_init__(self):
        n = self.d_S * self.d_E
        h0 = as_matrix(self.H0, "H0")
        gens = tuple(as_matrix(h, "control generator") for h in self.controls)
        for h in (h0,) + gens:
            if h.shape != (n, n):
                raise DimensionError(f"generator has shape {h.shape}, expected {n}x{n}")
            if not is_hermitian(h):
                raise InvariantError("generator not Hermitian")
        rho = DensityOperator(self.rho_E).mat
        if rho.shape[0] != self.d_E:
            raise DimensionError("environment state has the wrong dimension")
        basis = gell_mann_basis(self.d_S**2) if self.basis is None else np.asarray(self.basis, dtype=np.complex128)
        check_basis(basis)
        if self.n_steps < 1 or self.T <= 0:
            raise InvariantError("need a positive horizon and at least one step")
        object.__setattr__(self, "H0", h0)
        object.__setattr__(self, "controls", gens)
        object.__setattr__(self, "rho_E", rho)
        object.__setattr__(self, "basis", basis)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    def _env_kets(self):
        lam, vec = np.linalg.eigh(self.rho_E)
        keep = lam > 1e-15
        return vec[:, keep] * np.sqrt(lam[keep])


@dataclass(frozen=True, eq=False)
class ControlPulse:
    values: np.ndarray
    T: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or not np.all(np.isfinite(v)):
            raise InvariantError("pulse values must be a finite 2-d array")
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        return self.T / self.values.shape[0]


def full_control_problem(d_S: int, d_E: int, rho_E, T: float = 1.0, n_steps: int = 16) -> ControlProblem:
    """No drift and the traceless Gell-Mann generators of ``su(d_E d_S)``."""
    n = d_S * d_E
    gens = gell_mann_basis(n)[1:]
    return ControlProblem(d_S, d_E, np.zeros((n, n)), tuple(gens), T, n_steps, rho_E)


def target_components(t, basis) -> np.ndarray:
    """``c_i = Tr[sigma_i C_T]`` with ``C_T`` the normalised Choi matrix."""
    c = _as_channel(t).choi
    b = np.asarray(basis)
    if b.shape[1] != c.shape[0]:
        raise DimensionError(f"basis acts on {b.shape[1]} dims, Choi matrix on {c.shape[0]}")
    check_basis(b)
    return np.real(np.einsum("kij,ji->k", b, c))


def _step_hamiltonians(prob: ControlProblem, values) -> np.ndarray:
    return prob.H0[None] + np.einsum("kl,lij->kij", values, np.array(prob.controls))


def step_unitaries(prob: ControlProblem, pulse: ControlPulse) -> np.ndarray:
    if pulse.values.shape != (prob.n_steps, prob.n_controls):
        raise DimensionError(f"pulse shape {pulse.values.shape} vs ({prob.n_steps}, {prob.n_controls})")
    return expm_hermitian_batch(_step_hamiltonians(prob, pulse.values), prob.dt)


def _chain(us) -> np.ndarray:
    out = np.eye(us.shape[1], dtype=np.complex128)
    for u in us:
        out = u @ out
    return out


def propagate(prob: ControlProblem, pulse: ControlPulse) -> np.ndarray:
    """Time-ordered product of exact step exponentials (later steps on the left)."""
    return _chain(step_unitaries(prob, pulse))


def achieved_choi(prob: ControlProblem, u) -> np.ndarray:
    """Choi matrix of ``rho -> Tr_E[U (rho_E (x) rho) U^dag]``; ``u`` may be batched."""
    d, de = prob.d_S, prob.d_E
    kets = prob._env_kets()
    u = np.asarray(u)
    w = u.reshape(u.shape[:-2] + (de, d, de, d))
    k = np.einsum("...bset,ea->...bast", w, kets)
    vecs = k.reshape(k.shape[:-4] + (-1, d * d)) / np.sqrt(d)
    return np.einsum("...ki,...kj->...ij", vecs, vecs.conj())


def components(prob: ControlProblem, choi) -> np.ndarray:
    return np.real(np.einsum("kij,...ji->...k", prob.basis, choi))


def cost_of_unitary(prob: ControlProblem, u, c_target) -> np.ndarray:
    diff = components(prob, achieved_choi(prob, u)) - np.asarray(c_target)
    return np.sum(diff**2, axis=-1)


def cost(prob: ControlProblem, pulse: ControlPulse, c_target) -> float:
    return float(cost_of_unitary(prob, propagate(prob, pulse), c_target))


def gradient(prob: ControlProblem, values, c_target, grad_eps: float = 1e-6) -> np.ndarray:
    """Central finite differences for every ``(step, control)`` coordinate.

    Each perturbed propagator is ``suffix_k E_k(u +- h) prefix_k`` so only one
    step exponential is recomputed per coordinate.
    """
    n, L = values.shape
    us = expm_hermitian_batch(_step_hamiltonians(prob, values), prob.dt)
    dim = us.shape[1]
    prefix = np.empty((n + 1, dim, dim), dtype=np.complex128)
    suffix = np.empty((n + 1, dim, dim), dtype=np.complex128)
    prefix[0] = suffix[n] = np.eye(dim)
    for k in range(n):
        prefix[k + 1] = us[k] @ prefix[k]
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] @ us[k]
    base = _step_hamiltonians(prob, values)
    gens = np.array(prob.controls)
    grad = np.zeros((n, L))
    for sign in (+1, -1):
        hs = base[:, None] + sign * grad_eps * gens[None]
        es = expm_hermitian_batch(hs.reshape(-1, dim, dim), prob.dt).reshape(n, L, dim, dim)
        full = np.einsum("kab,klbc,kcd->klad", suffix[1:], es, prefix[:-1])
        c = cost_of_unitary(prob, full, c_target)
        grad += sign * c.real
    return grad / (2 * grad_eps)


@dataclass
class OptimizeResult:
    pulse: ControlPulse
    cost_trace: list
    final_cost: float
    restarts_used: int = 1
    history: list = field(default_factory=list)


def _descend(prob, c_target, values, max_iters, grad_eps, stop_cost):
    """Steepest descent with Armijo backtracking and an adaptive step."""
    f = float(cost_of_unitary(prob, _chain(expm_hermitian_batch(_step_hamiltonians(prob, values), prob.dt)), c_target))
    trace = [f]
    step = 1.0
    for _ in range(max_iters):
        if f <= stop_cost:
            break
        g = gradient(prob, values, c_target, grad_eps)
        gg = float(np.sum(g * g))
        if gg < 1e-30:
            break
        accepted = False
        while step > 1e-12:
            trial = values - step * g
            if prob.u_max is not None:
                trial = np.clip(trial, -prob.u_max, prob.u_max)
            ft = cost(prob, ControlPulse(trial, prob.T), c_target)
            if ft <= f - 1e-4 * step * gg:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        values, f = trial, ft
        trace.append(f)
        step *= 2.0
    return values, trace


def optimize(prob: ControlProblem, c_target, max_iters: int = 500, seed: int = 0, restarts: int = 10,
             grad_eps: float = 1e-6, stop_cost: float = 1e-10, init_scale: float = 1.0,
             initial: np.ndarray | None = None) -> OptimizeResult:
    """Multi-start descent; restart ``r`` draws its initial pulse from ``seed + r``.

    Restarts run in order and stop once one of them reaches ``stop_cost``, so
    the result does not depend on scheduling.
    """
    c_target = np.asarray(c_target, dtype=float)
    shape = (prob.n_steps, prob.n_controls)

    def start(r):
        if r == 0 and initial is not None:
            return np.asarray(initial, dtype=float).reshape(shape)
        return np.random.default_rng(seed + r).normal(scale=init_scale, size=shape)

    def run(r):
        return _descend(prob, c_target, start(r), max_iters, grad_eps, stop_cost)

    best = None
    history = []
    for r in range(restarts):
        vals, trace = run(r)
        history.append(trace[-1])
        if best is None or trace[-1] < best[1][-1]:
            best = (vals, trace)
        if best[1][-1] <= stop_cost:
            break
    vals, trace = best
    return OptimizeResult(ControlPulse(vals, prob.T), trace, trace[-1], len(history), history)
