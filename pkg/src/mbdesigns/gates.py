"""Single- and two-qubit gate matrices.

Rotations follow ``R_P(theta) = exp(-i P theta / 2)`` for a Pauli ``P``.
"""

from __future__ import annotations

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


ROTATIONS = {"Z": rz, "X": rx, "Y": ry}


def rz_batch(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(-0.5j * theta)
    out[..., 1, 1] = np.exp(0.5j * theta)
    return out


def rx_batch(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 1, 1] = c
    out[..., 0, 1] = -1j * s
    out[..., 1, 0] = -1j * s
    return out


def ry_batch(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 1, 1] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    return out


ROTATIONS_BATCH = {"Z": rz_batch, "X": rx_batch, "Y": ry_batch}


def bloch_vector(ket: np.ndarray) -> np.ndarray:
    """Bloch vector ``(<X>, <Y>, <Z>)`` of a single-qubit pure state."""
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return np.real([np.vdot(ket, P @ ket) for P in (X, Y, Z)])


def zxz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """Angles ``(a, b, c)`` with ``u ~ Z(a) X(b) Z(c)`` up to global phase."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    # u = [[cos(b/2) e^{-i(a+c)/2}, -i sin(b/2) e^{-i(a-c)/2}], ...]
    b = 2 * np.arctan2(abs(u[0, 1]), abs(u[0, 0]))
    if abs(u[0, 0]) > 1e-12 and abs(u[0, 1]) > 1e-12:
        s = -2 * np.angle(u[0, 0])
        d = -2 * np.angle(1j * u[0, 1])
    elif abs(u[0, 1]) <= 1e-12:
        s, d = -2 * np.angle(u[0, 0]), 0.0
    else:
        s, d = 0.0, -2 * np.angle(1j * u[0, 1])
    a = (s + d) / 2
    c = (s - d) / 2
    return float(a), float(b), float(c)


def kron_all(mats) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out
