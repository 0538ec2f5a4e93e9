"""Dense complex linear algebra used by every other module.

Operators are plain ``numpy`` complex arrays. The wrapper classes below exist
only to validate invariants at construction time (density operators,
unitaries, isometries) and are accepted anywhere an array is.

Composite spaces follow one convention throughout the package: environment
factors come first and the system factor comes last, so a joint operator on
E (x) S has the block layout ``W[e*d_S + s, e'*d_S + s']``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, InvariantError

TOL_H = 1e-10  # Hermiticity / unitarity, max-abs elementwise
TOL_PSD = 1e-10  # smallest admissible eigenvalue is -TOL_PSD
TOL_EQ = 1e-9  # operator equality
TOL_TRACE = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-d complex128 array."""
    if hasattr(a, "mat"):
        a = a.mat
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvariantError(f"{name} has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(a, tol: float = TOL_H) -> bool:
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and max_abs(a - dagger(a)) <= tol


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=np.complex128).reshape(-1)
    return np.outer(v, v.conj())


# -- validated wrappers -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Trace-one positive semidefinite matrix."""

    mat: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.mat, "density operator")
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"density operator must be square, got {m.shape}")
        herm_err = max_abs(m - dagger(m))
        if herm_err > TOL_H:
            raise InvariantError(f"not Hermitian: residual {herm_err:.3g}")
        tr = np.trace(m)
        if abs(tr - 1.0) > TOL_TRACE:
            raise InvariantError(f"trace is {tr.real:.12g}, expected 1")
        lam = np.linalg.eigvalsh(hermitize(m))
        if lam[0] < -TOL_PSD:
            raise InvariantError(f"not positive semidefinite: eigenvalue {lam[0]:.3g}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mat, dtype=dtype)

    @classmethod
    def pure(cls, vec) -> "DensityOperator":
        v = np.asarray(vec, dtype=np.complex128).reshape(-1)
        v = v / np.linalg.norm(v)
        return cls(projector(v))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    def is_pure(self, tol: float = 1e-10) -> bool:
        lam = np.linalg.eigvalsh(self.mat)
        return bool(lam[-1] >= 1.0 - tol)


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    mat: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.mat, "unitary")
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"unitary must be square, got {m.shape}")
        err = max_abs(dagger(m) @ m - np.eye(m.shape[0]))
        if err > TOL_H:
            raise InvariantError(f"not unitary: residual {err:.3g}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mat, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Isometry:
    """``dim_out x dim_in`` matrix with orthonormal columns."""

    mat: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.mat, "isometry")
        if m.shape[0] < m.shape[1]:
            raise DimensionError(f"isometry needs dim_out >= dim_in, got {m.shape}")
        err = max_abs(dagger(m) @ m - np.eye(m.shape[1]))
        if err > TOL_H:
            raise InvariantError(f"not an isometry: residual {err:.3g}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def dim_in(self) -> int:
        return self.mat.shape[1]

    @property
    def dim_out(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mat, dtype=dtype)


@dataclass(frozen=True)
class CompositeSpace:
    """Ordered tensor factors, environment-like factors first, system last."""

    factors: tuple

    def __post_init__(self):
        f = tuple(int(x) for x in self.factors)
        if not f or any(x < 1 for x in f):
            raise DimensionError(f"factor dimensions must be positive, got {self.factors}")
        object.__setattr__(self, "factors", f)

    @property
    def dim(self) -> int:
        return int(np.prod(self.factors))

    def __len__(self):
        return len(self.factors)


def as_density(rho) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        return rho.mat
    return DensityOperator(rho).mat


# -- tensor structure -------------------------------------------------------


def tensor(*ops) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor most significant."""
    mats = [np.asarray(a, dtype=np.complex128) for a in ops]
    return reduce(np.kron, mats)


def partial_trace(op, space: CompositeSpace | Sequence[int], keep) -> np.ndarray:
    """Trace out every factor of ``space`` except those listed in ``keep``.

    ``keep`` may be a single factor index or a sequence of them; kept factors
    stay in their original relative order.
    """
    if not isinstance(space, CompositeSpace):
        space = CompositeSpace(tuple(space))
    m = as_matrix(op, "operator")
    dims = space.factors
    n = space.dim
    if m.shape != (n, n):
        raise DimensionError(f"operator shape {m.shape} does not match space {dims}")
    keep = [keep] if np.isscalar(keep) else list(keep)
    nf = len(dims)
    for k in keep:
        if not 0 <= k < nf:
            raise DimensionError(f"factor index {k} out of range for {nf} factors")
    keep = sorted(set(keep))
    t = m.reshape(dims + dims)
    traced = [i for i in range(nf) if i not in keep]
    # contract traced factors pairwise, highest axis first so indices stay valid
    for i in sorted(traced, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + cur)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


# -- distances --------------------------------------------------------------


def trace_norm_hermitian(a) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(np.asarray(a))))))


def tv_distance(a, b) -> float:
    """Total-variation distance ``0.5 * ||a - b||_1`` between density operators."""
    ma = as_matrix(a, "a")
    mb = as_matrix(b, "b")
    if ma.shape != mb.shape:
        raise DimensionError(f"shape mismatch {ma.shape} vs {mb.shape}")
    return 0.5 * trace_norm_hermitian(ma - mb)


# -- spectral calculus on Hermitian matrices --------------------------------


def hermitian_function(h, fn: Callable[[np.ndarray], np.ndarray], tol: float = TOL_H) -> np.ndarray:
    """Apply ``fn`` to the eigenvalues of the Hermitian matrix ``h``."""
    m = as_matrix(h, "operator")
    if not is_hermitian(m, tol):
        raise InvariantError(f"not Hermitian: residual {max_abs(m - dagger(m)):.3g}")
    lam, vec = np.linalg.eigh(hermitize(m))
    return (vec * fn(lam)) @ dagger(vec)


def _clamp_psd(lam, tol):
    if lam.min() < -tol:
        raise InvariantError(f"not positive semidefinite: eigenvalue {lam.min():.3g}")
    return np.clip(lam, 0.0, None)


def sqrtm_psd(p, tol: float = TOL_PSD) -> np.ndarray:
    return hermitian_function(p, lambda lam: np.sqrt(_clamp_psd(lam, tol)))


def cosm(h) -> np.ndarray:
    return hermitian_function(h, np.cos)


def sinm(h) -> np.ndarray:
    return hermitian_function(h, np.sin)


def arccosm(h, tol: float = TOL_H) -> np.ndarray:
    """Principal-branch arccos; eigenvalues must lie in [0, 1] up to ``tol``."""

    def f(lam):
        if lam.min() < -tol or lam.max() > 1.0 + tol:
            raise InvariantError(
                f"arccos domain violation: eigenvalues in [{lam.min():.3g}, {lam.max():.3g}]"
            )
        return np.arccos(np.clip(lam, 0.0, 1.0))

    return hermitian_function(h, f)


def expm_hermitian(h, t: float = 1.0) -> np.ndarray:
    """``exp(-i t h)`` for Hermitian ``h``."""
    return hermitian_function(h, lambda lam: np.exp(-1j * t * lam))


def expm_hermitian_batch(hs: np.ndarray, t: float) -> np.ndarray:
    """Batched ``exp(-i t h)`` over the leading axis; no validation."""
    lam, vec = np.linalg.eigh(hs)
    phase = np.exp(-1j * t * lam)
    return np.einsum("...ij,...j,...kj->...ik", vec, phase, vec.conj())


def pinv_psd(p, tol: float = 1e-12) -> np.ndarray:
    """Pseudo-inverse of a PSD matrix on its support (eigenvalues above ``tol``)."""

    def f(lam):
        out = np.zeros_like(lam)
        sel = lam > tol
        out[sel] = 1.0 / lam[sel]
        return out

    return hermitian_function(p, f)


# -- isometry completion ----------------------------------------------------


def complete_to_unitary(v) -> np.ndarray:
    """Extend an ``n x k`` isometry to an ``n x n`` unitary whose first ``k``
    columns are exactly ``v``.

    The remaining columns come from a Householder QR factorisation of
    ``[v | I_n]``, so the completion is a fixed function of ``v``: canonical
    basis vectors are absorbed in index order.
    """
    v = as_matrix(v, "isometry")
    n, k = v.shape
    if k > n:
        raise DimensionError(f"cannot complete {v.shape} to a square unitary")
    err = max_abs(dagger(v) @ v - np.eye(k))
    if err > 1e-9:
        raise InvariantError(f"columns not orthonormal: residual {err:.3g}")
    if k == n:
        return v.copy()
    q, _ = np.linalg.qr(np.hstack([v, np.eye(n, dtype=np.complex128)]))
    u = q[:, :n].copy()
    u[:, :k] = v
    return u


def householder_to_first(phi) -> np.ndarray:
    """Unitary sending the unit vector ``phi`` to ``e_0`` and fixing every vector
    orthogonal to both.

    A Householder reflector maps ``phi`` onto ``e^{i a} e_0``; a diagonal phase
    on ``e_0`` then removes ``e^{i a}``.
    """
    phi = np.asarray(phi, dtype=np.complex128).reshape(-1)
    phi = phi / np.linalg.norm(phi)
    n = phi.size
    ph = phi[0] / abs(phi[0]) if abs(phi[0]) > 1e-15 else 1.0 + 0j
    w = phi - ph * ket(0, n)
    nw = np.linalg.norm(w)
    refl = np.eye(n, dtype=np.complex128)
    if nw > 1e-15:
        w = w / nw
        refl -= 2.0 * np.outer(w, w.conj())
    refl[0, :] /= ph
    return refl
