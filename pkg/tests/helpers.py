"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from mbdesigns.graphstate import XY, ZY, OpenGraph


def random_unitary(rng, d=2):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_spec(rng):
    angle = float(rng.uniform(0, 2 * math.pi))
    return XY(angle) if rng.random() < 0.5 else ZY(angle)


def random_graph(rng, n, p=0.5, inputs=(), outputs=()):
    """Erdos-Renyi graph on vertices 1..n with random XY/ZY measurements off the outputs."""
    edges = {(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1) if rng.random() < p}
    meas = {v: random_spec(rng) for v in range(1, n + 1) if v not in outputs}
    return OpenGraph(tuple(range(1, n + 1)), frozenset(edges), tuple(inputs), tuple(outputs), meas)


def line(n, specs=None, inputs=(), outputs=()):
    specs = specs or {}
    meas = {v: specs.get(v, XY(0.3 * v)) for v in range(1, n + 1) if v not in outputs}
    return OpenGraph(tuple(range(1, n + 1)), frozenset((k, k + 1) for k in range(1, n)),
                     tuple(inputs), tuple(outputs), meas)


def two_qubit_layout_family():
    """Two-qubit layered family with sixteen free bits ``M1``..``M16``.

    Written as an operator, left to right: ``Z Z``, the ``CZ`` block, Paulis,
    ``Z(pi/4)`` pair, Paulis, ``X(pi/4)`` pair, ``Z Z``.
    """
    from mbdesigns.symbolic import OutcomeBitExpr, SymbolicUnitary, cz, pauli, rot

    def v(k):
        return OutcomeBitExpr.var(f"M{k}")

    q, h = math.pi / 4, math.pi / 2
    written = [
        pauli("Z", 0, v(1)), pauli("Z", 1, v(1)),
        rot("Z", h, 0, v(2)), rot("Z", h, 1, v(2)), cz(0, 1, v(2)),
        pauli("X", 0, v(3)), pauli("X", 1, v(4)), pauli("Z", 0, v(5)), pauli("Z", 1, v(6)),
        rot("Z", q, 0, v(7)), rot("Z", q, 1, v(8)),
        pauli("X", 0, v(9)), pauli("X", 1, v(10)), pauli("Z", 0, v(11)), pauli("Z", 1, v(12)),
        rot("X", q, 0, v(13)), rot("X", q, 1, v(14)),
        pauli("Z", 0, v(15)), pauli("Z", 1, v(16)),
    ]
    return SymbolicUnitary.from_written(2, written)


def layout_branches():
    """All 2^16 branch unitaries of :func:`two_qubit_layout_family`, bit ``k-1`` is ``Mk``."""
    idx = np.arange(2**16)
    cols = {f"M{k}": ((idx >> (k - 1)) & 1).astype(np.uint8) for k in range(1, 17)}
    return two_qubit_layout_family().evaluate_batch(cols, 2**16)


ROTATION_BITS_MASK = sum(1 << (k - 1) for k in (7, 8, 13, 14))


def closure_hits(branches, strings):
    """Number of strings whose branch has an inverse inside the family."""
    hits = 0
    for m in strings:
        inv = branches[int(m)].conj().T
        ov = np.abs(np.einsum("nij,ij->n", branches.conj(), inv))
        hits += bool((ov > 4 - 1e-9).any())
    return hits
