"""Unitary ensembles induced by measuring open graph states.

Outcome strings are indexed by integers whose bit ``k`` is the outcome of the
``k``-th measured vertex in ascending id order, so the smallest measured id is
the least significant bit. Branch operators map the input qubits (in the
graph's ``inputs`` order, first input most significant) to the output qubits
(``outputs`` order).
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from mbdesigns import gates
from mbdesigns._parallel import chunk_bounds, ordered_map, tree_reduce
from mbdesigns.errors import BadGraphIO, NonUnitaryBranch, TooLarge
from mbdesigns.graphstate import OpenGraph, Plane

MAX_ENUMERATED = 24
STREAMING_THRESHOLD = 20
CHUNK = 1 << 14


@dataclass(frozen=True, eq=False)
class UnitaryEnsemble:
    """Weighted list of ``d x d`` unitaries."""

    probabilities: np.ndarray
    unitaries: np.ndarray
    uniform: bool = False
    outcomes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float).reshape(-1)
        u = np.asarray(self.unitaries, dtype=complex)
        if u.ndim != 3 or u.shape[1] != u.shape[2] or u.shape[0] != p.size:
            raise ValueError("unitaries must have shape (n, d, d) matching the probabilities")
        if p.size and abs(p.sum() - 1) > 1e-10:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        if np.any(p < 0):
            raise ValueError("negative probability")
        if p.size:
            dev = unitarity_deviation(u)
            if dev.max() > 1e-9:
                raise ValueError(f"element {int(dev.argmax())} is not unitary (deviation {dev.max():.3g})")
        if self.uniform and p.size and np.ptp(p) > 1e-12:
            raise ValueError("uniform ensemble with unequal probabilities")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "unitaries", u)

    @property
    def d(self) -> int:
        return int(self.unitaries.shape[1])

    def __len__(self) -> int:
        return int(self.probabilities.size)

    @property
    def elements(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.probabilities.tolist(), self.unitaries))

    @classmethod
    def uniform_from(cls, unitaries) -> UnitaryEnsemble:
        u = np.asarray(unitaries, dtype=complex)
        return cls(np.full(len(u), 1.0 / len(u)), u, uniform=True)

    def transformed(self, left: np.ndarray, right: np.ndarray) -> UnitaryEnsemble:
        """The ensemble ``{p_i, left U_i right}``."""
        return UnitaryEnsemble(self.probabilities, left @ self.unitaries @ right, self.uniform)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "uniform": bool(self.uniform),
            "elements": [
                {"p": float(p), "re": u.real.tolist(), "im": u.imag.tolist()}
                for p, u in zip(self.probabilities, self.unitaries)
            ],
        }

    @classmethod
    def from_dict(cls, data) -> UnitaryEnsemble:
        elems = data["elements"]
        p = np.array([e["p"] for e in elems], dtype=float)
        u = np.array([np.array(e["re"]) + 1j * np.array(e["im"]) for e in elems], dtype=complex)
        if not elems:
            u = np.zeros((0, data["d"], data["d"]), dtype=complex)
        return cls(p, u, bool(data["uniform"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class OutcomeBranch:
    outcome: int
    bits: tuple[int, ...]
    operator: np.ndarray
    probability: float


def unitarity_deviation(u: np.ndarray) -> np.ndarray:
    """Max entry of ``|U^dag U - I|`` for each matrix in a stack."""
    u = np.asarray(u, dtype=complex)
    eye = np.eye(u.shape[-1])
    return np.abs(np.conj(np.swapaxes(u, -1, -2)) @ u - eye).max(axis=(-1, -2))


def single_qubit_branch_unitary(m: int, phi: float) -> np.ndarray:
    """``H Z^m Z(phi)``, the map induced by measuring the input of a single edge."""
    return gates.H @ np.linalg.matrix_power(gates.Z, int(m) & 1) @ gates.rz(phi)


def linear_cluster_unitaries(angles: Sequence[float]) -> np.ndarray:
    """All ``2^L`` products ``U_{m_L}(phi_L) ... U_{m_1}(phi_1)``, indexed with ``m_1`` as LSB."""
    angles = [float(a) for a in angles]
    if not angles:
        return np.eye(2, dtype=complex)[None]
    if len(angles) > 26:
        raise TooLarge(f"{len(angles)} angles would materialize 2^{len(angles)} matrices")
    out = np.stack([single_qubit_branch_unitary(m, angles[0]) for m in (0, 1)])
    for phi in angles[1:]:
        step = np.stack([single_qubit_branch_unitary(m, phi) for m in (0, 1)])
        out = np.concatenate([step[0] @ out, step[1] @ out])
    return out


def linear_cluster_ensemble(angles: Sequence[float]) -> UnitaryEnsemble:
    u = linear_cluster_unitaries(angles)
    n = len(u)
    return UnitaryEnsemble(np.full(n, 1.0 / n), u, uniform=True, outcomes=np.arange(n))


def outcome_bits(indices: np.ndarray, n_bits: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    return ((indices[:, None] >> np.arange(n_bits)) & 1).astype(np.int8)


# -- branch simulation ---------------------------------------------------------


def contraction_plan(graph: OpenGraph) -> list[tuple]:
    """Order of qubit additions, CZs and measurements that keeps few qubits live.

    Each measured vertex is contracted as soon as it and all its neighbours
    have been added, which is when every CZ touching it has been applied.
    """
    plan: list[tuple] = []
    active: set[int] = set(graph.inputs)
    applied: set[tuple[int, int]] = set()

    def activate(v: int) -> None:
        if v in active:
            return
        plan.append(("add", v))
        active.add(v)
        for u in sorted(graph.neighbors(v)):
            e = (min(u, v), max(u, v))
            if u in active and e not in applied:
                plan.append(("cz", e[0], e[1]))
                applied.add(e)

    for u, v in sorted(graph.edges):
        if u in active and v in active:
            plan.append(("cz", u, v))
            applied.add((u, v))

    pending = list(graph.measured)
    while pending:
        best = min(pending, key=lambda v: (len(({v} | graph.neighbors(v)) - active), v))
        for w in [best, *sorted(graph.neighbors(best))]:
            activate(w)
        plan.append(("measure", best))
        pending.remove(best)
    for v in graph.outputs:
        activate(v)
    for u, v in sorted(graph.edges):
        if (u, v) not in applied:  # pragma: no cover - every edge is reached above
            plan.append(("cz", u, v))
    return plan


def _measure_bras(graph: OpenGraph, v: int, bits: np.ndarray) -> np.ndarray:
    spec = graph.measurements[v]
    theta = spec.angle + np.pi * bits.astype(float)
    bra = np.empty((bits.size, 2), dtype=complex)
    if spec.plane is Plane.XY:
        bra[:, 0] = 1 / np.sqrt(2)
        bra[:, 1] = np.exp(1j * theta) / np.sqrt(2)
    else:
        bra[:, 0] = np.cos(theta / 2)
        bra[:, 1] = -1j * np.sin(theta / 2)
    return bra


def branch_operators(graph: OpenGraph, bits: np.ndarray, plan: list[tuple] | None = None) -> np.ndarray:
    """Unnormalized branch operators for a batch of outcome strings.

    ``bits`` has shape ``(N, n_measured)`` with columns in ascending measured-vertex
    order. Returns ``(N, 2^|outputs|, 2^|inputs|)``.
    """
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int8))
    measured = graph.measured
    if bits.shape[1] != len(measured):
        raise ValueError(f"expected {len(measured)} outcome bits per branch, got {bits.shape[1]}")
    col = {v: k for k, v in enumerate(measured)}
    n = bits.shape[0]
    n_in = len(graph.inputs)
    d_in = 2**n_in
    plan = contraction_plan(graph) if plan is None else plan
    state = np.broadcast_to(np.eye(d_in, dtype=complex).reshape((1,) + (2,) * n_in + (d_in,)),
                            (n,) + (2,) * n_in + (d_in,)).copy()
    axes = list(graph.inputs)
    for op in plan:
        kind = op[0]
        if kind == "add":
            state = np.stack([state, state], axis=-2) * (1 / np.sqrt(2))
            axes.append(op[1])
        elif kind == "cz":
            i, j = axes.index(op[1]) + 1, axes.index(op[2]) + 1
            idx = [slice(None)] * state.ndim
            idx[i] = 1
            idx[j] = 1
            state[tuple(idx)] *= -1
        else:
            v = op[1]
            i = axes.index(v) + 1
            bra = _measure_bras(graph, v, bits[:, col[v]])
            s = np.moveaxis(state, i, 1)
            shape = (n,) + (1,) * (s.ndim - 2)
            state = bra[:, 0].reshape(shape) * s[:, 0] + bra[:, 1].reshape(shape) * s[:, 1]
            axes.pop(i - 1)
    order = [axes.index(v) + 1 for v in graph.outputs]
    state = np.transpose(state, [0, *order, state.ndim - 1])
    return state.reshape(n, 2 ** len(graph.outputs), d_in)


def iter_branch_chunks(
    graph: OpenGraph, chunk: int = CHUNK, threads: int | None = None
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(outcome_indices, operators)`` over all outcome strings in fixed chunks."""
    n_meas = len(graph.measured)
    plan = contraction_plan(graph)
    bounds = chunk_bounds(2**n_meas, chunk)
    threads_batch = max(1, threads or 1)
    for k in range(0, len(bounds), threads_batch):
        group = bounds[k : k + threads_batch]

        def work(b):
            idx = np.arange(b[0], b[1], dtype=np.int64)
            return idx, branch_operators(graph, outcome_bits(idx, n_meas), plan)

        yield from ordered_map(work, group, threads)


def branches(graph: OpenGraph) -> list[OutcomeBranch]:
    """Every outcome branch of a small graph (unnormalized operators)."""
    n_meas = len(graph.measured)
    if n_meas > MAX_ENUMERATED:
        raise TooLarge(f"{n_meas} measured vertices exceed the enumeration limit")
    out = []
    d_in = 2 ** len(graph.inputs)
    for idx, ops in iter_branch_chunks(graph):
        bits = outcome_bits(idx, n_meas)
        for k, b, op in zip(idx.tolist(), bits, ops):
            p = float(np.vdot(op, op).real) / d_in
            out.append(OutcomeBranch(k, tuple(int(x) for x in b), op, p))
    return out


def _check_io(graph: OpenGraph) -> None:
    if len(graph.inputs) != len(graph.outputs):
        raise BadGraphIO(
            f"{len(graph.inputs)} inputs cannot map unitarily onto {len(graph.outputs)} outputs"
        )
    if len(graph.vertices) > MAX_ENUMERATED or len(graph.measured) > MAX_ENUMERATED:
        raise TooLarge("graph exceeds the enumeration limit")


def _normalize_branches(idx: np.ndarray, ops: np.ndarray, d: int, tol: float):
    norms = np.einsum("nij,nij->n", ops.conj(), ops).real / d
    keep = norms > 1e-14
    u = ops[keep] / np.sqrt(norms[keep])[:, None, None]
    dev = unitarity_deviation(u)
    bad = np.flatnonzero(dev > tol)
    if bad.size:
        k = bad[0]
        raise NonUnitaryBranch(int(idx[keep][k]), float(dev[k]))
    return idx[keep], norms[keep], u


def graph_ensemble(graph: OpenGraph, tol: float = 1e-9, threads: int | None = None) -> UnitaryEnsemble:
    """Enumerate every outcome branch and return the induced ensemble."""
    _check_io(graph)
    d = 2 ** len(graph.inputs)
    parts = []
    for idx, ops in iter_branch_chunks(graph, threads=threads):
        parts.append(_normalize_branches(idx, ops, d, tol))
    idx = np.concatenate([p[0] for p in parts])
    probs = np.concatenate([p[1] for p in parts])
    u = np.concatenate([p[2] for p in parts])
    total = tree_reduce(list(probs), lambda a, b: a + b) if probs.size else 0.0
    probs = probs / total
    uniform = bool(probs.size) and float(np.ptp(probs)) <= 1e-12
    if uniform:
        probs = np.full(probs.size, 1.0 / probs.size)
    return UnitaryEnsemble(probs, u, uniform=uniform, outcomes=idx)


def graph_frame_potential(
    graph: OpenGraph, t: int, tol: float = 1e-9, threads: int | None = None
) -> float:
    """Frame potential of a graph's ensemble without storing the branch matrices.

    Accumulates the moment matrix ``sum_i p_i U_i^{(t)} (x) conj(U_i)^{(t)}``
    chunk by chunk; the frame potential is its squared Frobenius norm.
    """
    _check_io(graph)
    d = 2 ** len(graph.inputs)
    partial = []
    total_p = []
    for idx, ops in iter_branch_chunks(graph, threads=threads):
        _, p, u = _normalize_branches(idx, ops, d, tol)
        partial.append(_weighted_moment(u, p, t))
        total_p.append(float(p.sum()))
    m = tree_reduce(partial, lambda a, b: a + b)
    norm = math.fsum(total_p)
    return float(np.vdot(m, m).real) / norm**2


# -- comparison ----------------------------------------------------------------


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> bool:
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    d = u.shape[0]
    return abs(abs(np.vdot(u, v)) - d) <= tol


def match_operators(a: np.ndarray, b: np.ndarray, pa=None, pb=None, tol: float = 1e-9):
    """Bijection between two operator lists, each pair equal up to phase.

    Operators are compared after Frobenius normalization, so this also works
    for non-square branch maps. Returns ``(assignment, unmatched_rows)`` where
    ``assignment[i]`` is the index in ``b`` paired with ``a[i]``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if len(a) != len(b):
        return None, list(range(len(a)))
    fa = a.reshape(len(a), -1)
    fb = b.reshape(len(b), -1)
    fa = fa / np.linalg.norm(fa, axis=1, keepdims=True)
    fb = fb / np.linalg.norm(fb, axis=1, keepdims=True)
    cost = 1 - np.abs(fa.conj() @ fb.T)
    if pa is not None and pb is not None:
        cost = cost + np.abs(np.asarray(pa)[:, None] - np.asarray(pb)[None, :])
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(len(a), dtype=int)
    assignment[rows] = cols
    d = a.shape[1] if a.ndim == 3 and a.shape[1] == a.shape[2] else 1
    unmatched = [int(r) for r, c in zip(rows, cols) if cost[r, c] * d > tol]
    return assignment, unmatched


def ensembles_match(e1: UnitaryEnsemble, e2: UnitaryEnsemble, tol: float = 1e-9) -> bool:
    if len(e1) != len(e2) or e1.d != e2.d:
        return False
    _, unmatched = match_operators(e1.unitaries, e2.unitaries, e1.probabilities, e2.probabilities, tol)
    return not unmatched


# -- moment operators ---------------------------------------------------------


def tensor_power(u: np.ndarray, t: int) -> np.ndarray:
    """Batched ``U^{(x) t}`` for a stack of matrices of shape ``(N, d, d)``."""
    u = np.asarray(u, dtype=complex)
    out = u
    n, d = u.shape[0], u.shape[1]
    for _ in range(t - 1):
        k = out.shape[1]
        out = np.einsum("nij,nkl->nikjl", out, u).reshape(n, k * d, k * d)
    return out


def _weighted_moment(u: np.ndarray, p: np.ndarray, t: int, block: int = 256) -> np.ndarray:
    dt = u.shape[1] ** t
    acc = np.zeros((dt * dt, dt * dt), dtype=complex)
    for lo in range(0, len(u), block):
        v = tensor_power(u[lo : lo + block], t)
        n = v.shape[0]
        # row-major vec(V rho V^dag) = (V (x) conj(V)) vec(rho)
        kr = np.einsum("nij,nkl->nikjl", v, v.conj()).reshape(n, dt * dt, dt * dt)
        acc += np.einsum("n,nab->ab", p[lo : lo + block], kr)
    return acc


MAX_MOMENT_BYTES = 2 * 1024**3


def moment_operator(ensemble: UnitaryEnsemble, t: int) -> np.ndarray:
    """``rho -> sum_i p_i U_i^{(x)t} rho (U_i^{(x)t})^dag`` as a ``d^{2t} x d^{2t}`` matrix.

    The operator basis is the matrix units ordered row-major.
    """
    if t < 1:
        raise ValueError("t must be positive")
    dt = ensemble.d**t
    if 16 * dt**4 * 3 > MAX_MOMENT_BYTES:
        raise TooLarge(f"moment operator of size {dt * dt} exceeds the memory budget")
    return _weighted_moment(ensemble.unitaries, ensemble.probabilities, t, block=max(1, 4096 // dt**2))


def permutation_operator(perm: Sequence[int], d: int = 2) -> np.ndarray:
    """Operator permuting ``t`` tensor factors: factor ``k`` moves to slot ``perm[k]``."""
    t = len(perm)
    dim = d**t
    idx = np.arange(dim)
    digits = [(idx // d ** (t - 1 - k)) % d for k in range(t)]
    target = np.zeros(dim, dtype=np.int64)
    for k in range(t):
        target += digits[k] * d ** (t - 1 - perm[k])
    out = np.zeros((dim, dim), dtype=complex)
    out[target, idx] = 1
    return out


def haar_moment_operator(t: int, d: int = 2) -> np.ndarray:
    """Haar twirl as the Hilbert-Schmidt projector onto permutation operators."""
    if t < 1:
        raise ValueError("t must be positive")
    if t > 5:
        raise TooLarge("haar_moment_operator supports t <= 5")
    perms = [permutation_operator(p, d) for p in permutations(range(t))]
    vecs = np.array([p.reshape(-1) for p in perms])
    gram = vecs.conj() @ vecs.T
    ginv = np.linalg.pinv(gram, rcond=1e-10, hermitian=True)
    return vecs.T @ ginv @ vecs.conj()


def apply_superoperator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return (op @ rho.reshape(-1)).reshape(rho.shape)
