"""Random states, unitaries and channels, plus a few named channels.

Random unitaries are Haar distributed (QR of a complex Gaussian matrix with the
usual phase correction). Random channels come from random Stinespring
isometries.
"""
from __future__ import annotations

import numpy as np

from .channels import Channel

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def ginibre(rows, cols, rng=None):
    rng = _rng(rng)
    return (rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))) / np.sqrt(2)


def random_isometry(dim_out, dim_in, rng=None):
    q, r = np.linalg.qr(ginibre(dim_out, dim_in, rng))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_unitary(dim, rng=None):
    return random_isometry(dim, dim, rng)


def random_pure_state(dim, rng=None):
    v = ginibre(dim, 1, rng).reshape(-1)
    return v / np.linalg.norm(v)


def random_density(dim, rng=None, rank=None):
    rank = dim if rank is None else rank
    g = ginibre(dim, rank, rng)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_channel(d, m=None, rng=None) -> Channel:
    """Channel with ``m`` Kraus operators cut from a random ``(m*d) x d`` isometry."""
    rng = _rng(rng)
    if m is None:
        m = int(rng.integers(1, d * d + 1))
    v = random_isometry(m * d, d, rng)
    return Channel.from_kraus([v[k * d:(k + 1) * d, :] for k in range(m)])


def random_mixed_unitary(d, weights, rng=None):
    rng = _rng(rng)
    us = [random_unitary(d, rng) for _ in weights]
    return us, Channel.from_kraus([np.sqrt(w) * u for w, u in zip(weights, us)])


# -- named channels ---------------------------------------------------------


def identity_channel(d) -> Channel:
    return Channel.from_kraus([np.eye(d, dtype=np.complex128)])


def unitary_channel(u) -> Channel:
    return Channel.from_kraus([np.asarray(u, dtype=np.complex128)])


def amplitude_damping(gamma) -> Channel:
    m0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=np.complex128)
    m1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=np.complex128)
    return Channel.from_kraus([m0, m1])


def depolarizing(p, d=2) -> Channel:
    """``rho -> (1 - p) rho + p Tr(rho) I/d``."""
    if d == 2:
        ops = [np.sqrt(1 - 3 * p / 4) * PAULI_I] + [np.sqrt(p / 4) * s for s in (PAULI_X, PAULI_Y, PAULI_Z)]
        return Channel.from_kraus(ops)
    phi = np.eye(d).reshape(-1) / np.sqrt(d)
    choi = (1 - p) * np.outer(phi, phi) + p * np.eye(d * d) / d**2
    return Channel.from_choi(choi)


def bit_flip(p) -> Channel:
    return Channel.from_kraus([np.sqrt(1 - p) * PAULI_I, np.sqrt(p) * PAULI_X])


def dephasing(p) -> Channel:
    return Channel.from_kraus([np.sqrt(1 - p) * PAULI_I, np.sqrt(p) * PAULI_Z])


def replacement(psi) -> Channel:
    """All-to-one channel ``rho -> |psi><psi|``."""
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    d = psi.size
    return Channel.from_kraus([np.outer(psi, np.eye(d)[j]) for j in range(d)])
