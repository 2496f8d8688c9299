"""Pauli-basis fusion projections as graph rewrites.

A fusion on a set ``A`` of measured vertices forces every vertex in ``A`` to
give the same outcome in a chosen Pauli basis. For the Z basis this is the
rewrite ``F_Z^A``: a new vertex ``alpha`` joined to the odd neighbourhood of
``A`` replaces ``A``. X and Y fusions first move to the Z basis by local
complementations; the local Cliffords ``T_v`` realizing them are tracked per
vertex and either folded into neighbouring measurement specs or reported as
explicit byproducts on outputs.

The guarantee checked by :func:`postselection_check`: for every outcome
string, the branch of the original graph with equal fusion-basis outcomes on
``A`` equals, up to a global phase, the corresponding branch of the fused
graph followed by the output byproducts.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from mbdesigns import gates
from mbdesigns.ensemble import branch_operators, iter_branch_chunks, match_operators, outcome_bits
from mbdesigns.errors import (
    BadNeighborChoice,
    GraphError,
    InputInFusionSet,
    NoValidNeighbor,
    Unsupported,
    UnsupportedPlane,
)
from mbdesigns.graphstate import XY, ZY, MeasurementSpec, OpenGraph, Plane, local_complement

PLANE_TOL = 1e-9

# kets |P_0>, |P_1> of each fusion basis
_BASIS_KETS = {
    "Z": (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    "X": (np.array([1, 1], dtype=complex) / math.sqrt(2), np.array([1, -1], dtype=complex) / math.sqrt(2)),
    "Y": (np.array([1, 1j], dtype=complex) / math.sqrt(2), np.array([1, -1j], dtype=complex) / math.sqrt(2)),
}

# measurement specs whose outcome-m kets are the fusion-basis kets
BASIS_SPECS = {"Z": ZY(0.0), "X": XY(0.0), "Y": XY(3 * math.pi / 2)}


@dataclass(frozen=True)
class LocalUnitary:
    """One single-qubit gate; lists of these compose right-to-left by ``order``."""

    vertex: int
    gate: str
    angle: float | None
    order: int = 0

    def __post_init__(self) -> None:
        if self.angle is not None and not math.isfinite(self.angle):
            raise ValueError("byproduct angle must be finite")

    def matrix(self) -> np.ndarray:
        if self.angle is None:
            return gates.PAULIS[self.gate]
        return gates.ROTATIONS[self.gate](self.angle)

    def to_dict(self) -> dict:
        return {"vertex": self.vertex, "gate": self.gate, "angle": self.angle}


def decompose_local(vertex: int, u: np.ndarray, start: int = 0) -> list[LocalUnitary]:
    """Write ``u`` (up to phase) as ``Z(a) X(b) Z(c)`` gate records, dropping identities."""
    out = []
    a, b, c = gates.zxz_angles(u)
    for gate, angle in (("Z", c), ("X", b), ("Z", a)):
        ang = math.remainder(angle, 4 * math.pi)
        if abs(math.remainder(ang, 2 * math.pi)) < 1e-12:
            continue
        if abs(abs(math.remainder(ang, 2 * math.pi)) - math.pi) < 1e-12:
            out.append(LocalUnitary(vertex, gate, None, start + len(out)))
        else:
            out.append(LocalUnitary(vertex, gate, ang, start + len(out)))
    return out


def compose_locals(ops: Iterable[LocalUnitary]) -> dict[int, np.ndarray]:
    """Per-vertex matrices of a byproduct list (lower ``order`` acts first)."""
    out: dict[int, np.ndarray] = {}
    for op in sorted(ops, key=lambda o: o.order):
        out[op.vertex] = op.matrix() @ out.get(op.vertex, gates.I2)
    return out


@dataclass(frozen=True, eq=False)
class FusionResult:
    graph: OpenGraph
    alpha: int
    fused: tuple[int, ...]
    basis: str
    byproducts: list[LocalUnitary]
    updated_specs: dict[int, MeasurementSpec] = field(default_factory=dict)
    output_corrections: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    alpha_map: np.ndarray | None = field(default=None, repr=False)
    complemented: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "alpha": self.alpha,
            "fused": list(self.fused),
            "basis": self.basis,
            "complemented": list(self.complemented),
            "byproducts": [b.to_dict() for b in self.byproducts],
            "updated_specs": {
                str(v): {"plane": s.plane.value, "angle": s.angle} for v, s in self.updated_specs.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _tv_factors(graph: OpenGraph, v: int) -> dict[int, np.ndarray]:
    """Per-vertex factors of ``T_v = prod_{b in N(v)} Z_b sqrt(K_v)``."""
    out = {v: gates.rx(math.pi / 2)}
    zb = gates.Z @ gates.rz(math.pi / 2)
    for b in graph.neighbors(v):
        out[b] = zb
    return out


def realize_local_complement(graph: OpenGraph, v: int) -> dict[int, np.ndarray]:
    """Local unitaries ``T_v`` mapping ``|G>`` to ``|tau_v(G)>`` up to phase."""
    return _tv_factors(graph, v)


def fuse_z(graph: OpenGraph, fused: Iterable[int], strict_inputs: bool = False) -> FusionResult:
    """Z-basis fusion: ``alpha`` joins the odd neighbourhood of ``A``; no byproducts.

    Fused vertices may never be inputs. Neighbouring inputs are accepted
    unless ``strict_inputs`` is set.
    """
    return _fuse(graph, _validate_set(graph, fused, strict_inputs), "Z", {})


def fuse_y(graph: OpenGraph, fused: Iterable[int], strict_inputs: bool = False) -> FusionResult:
    """Y-basis fusion via local complementation at each fused vertex."""
    return _fuse(graph, _validate_set(graph, fused, strict_inputs), "Y", {})


def fuse_x(
    graph: OpenGraph,
    fused: Iterable[int],
    neighbor_map: Mapping[int, int] | None = None,
    strict_inputs: bool = False,
) -> FusionResult:
    """X-basis fusion via local complementation at ``b^a`` and then ``a``.

    ``neighbor_map`` defaults to :func:`choose_fusion_neighbors`. A vertex whose
    basis was already turned to Y by an earlier complementation (possible
    only when fused vertices are adjacent) needs no neighbour step.
    """
    a_set = _validate_set(graph, fused, strict_inputs)
    if neighbor_map is None:
        neighbor_map = choose_fusion_neighbors(graph, a_set)
    for a in a_set:
        if a not in neighbor_map:
            raise BadNeighborChoice(f"no neighbour given for vertex {a}")
        reason = _neighbor_problem(graph, a_set, a, neighbor_map[a])
        if reason:
            raise BadNeighborChoice(f"b={neighbor_map[a]} for a={a}: {reason}")
    return _fuse(graph, a_set, "X", dict(neighbor_map))


def fuse(graph: OpenGraph, fused: Iterable[int], basis: str, neighbor_map=None, strict_inputs: bool = False) -> FusionResult:
    basis = basis.upper()
    if basis == "Z":
        return fuse_z(graph, fused, strict_inputs)
    if basis == "Y":
        return fuse_y(graph, fused, strict_inputs)
    if basis == "X":
        return fuse_x(graph, fused, neighbor_map, strict_inputs)
    raise Unsupported(f"unknown fusion basis {basis!r}")


def _neighbor_problem(graph: OpenGraph, a_set: tuple[int, ...], a: int, b: int) -> str | None:
    if b not in graph.vertices:
        return "not a vertex"
    if b not in graph.neighbors(a):
        return "not adjacent"
    if b in a_set:
        return "inside the fused set"
    if b in graph.inputs:
        return "is an input"
    if graph.neighbors(b) & set(a_set) != {a}:
        return "adjacent to another fused vertex"
    return None


def choose_fusion_neighbors(graph: OpenGraph, fused: Iterable[int]) -> dict[int, int]:
    """Pick ``b^a`` for each ``a``, keeping local complementations inside the gadget.

    Among valid neighbours, non-outputs are preferred, then those with fewest
    output neighbours, then the largest id.
    """
    a_set = _validate_set(graph, fused)
    outs = set(graph.outputs)
    choice = {}
    for a in a_set:
        valid = [b for b in graph.neighbors(a) if _neighbor_problem(graph, a_set, a, b) is None]
        if not valid:
            raise NoValidNeighbor(f"vertex {a} has no neighbour satisfying the X-fusion condition")
        choice[a] = min(valid, key=lambda b: (b in outs, len(graph.neighbors(b) & outs), -b))
    return choice


def _validate_set(graph: OpenGraph, fused: Iterable[int], strict_inputs: bool = False) -> tuple[int, ...]:
    a_set = tuple(sorted({int(a) for a in fused}))
    if not a_set:
        raise GraphError("fusion set must be non-empty")
    for a in a_set:
        graph.neighbors(a)  # raises NoSuchVertex
        if a in graph.outputs:
            raise GraphError(f"vertex {a} is an output and cannot be fused")
    ins = set(graph.inputs)
    if ins & set(a_set):
        raise InputInFusionSet(f"fusion set contains inputs {sorted(ins & set(a_set))}")
    touched = set().union(*(graph.neighbors(a) for a in a_set)) & ins
    if strict_inputs and touched:
        raise InputInFusionSet(f"fusion set neighbours inputs {sorted(touched)}")
    return a_set


def _is_scalar(u: np.ndarray) -> bool:
    return abs(u[0, 1]) < 1e-12 and abs(u[1, 0]) < 1e-12 and abs(u[0, 0] - u[1, 1]) < 1e-12


def _classify(ket: np.ndarray, vertex: int) -> MeasurementSpec:
    x, y, z = gates.bloch_vector(ket)
    if abs(z) <= PLANE_TOL:
        return XY(math.atan2(-y, x))
    if abs(x) <= PLANE_TOL:
        return ZY(math.atan2(y, z))
    raise UnsupportedPlane(f"vertex {vertex} would be measured along ({x:.3g}, {y:.3g}, {z:.3g})")


def _effective_axis(d: dict[int, np.ndarray], a: int, basis: str) -> str:
    """Pauli axis that the fusion-basis ket of ``a`` has in the current frame."""
    ket = d.get(a, gates.I2).conj().T @ _BASIS_KETS[basis][0]
    bloch = gates.bloch_vector(ket)
    k = int(np.argmax(np.abs(bloch)))
    if abs(abs(bloch[k]) - 1) > 1e-9:
        raise Unsupported(f"vertex {a} is not in a Pauli basis")
    return "XYZ"[k]


def _fuse(graph: OpenGraph, a_set: tuple[int, ...], basis: str, neighbor_map: Mapping[int, int]) -> FusionResult:
    ins = set(graph.inputs)
    outs = set(graph.outputs)
    # |G> = (prod_v D_v) |G_k>, D accumulated from T^dag of each step
    d: dict[int, np.ndarray] = {}
    g = graph
    sequence: list[int] = []

    def complement(v: int) -> None:
        nonlocal g
        if v in ins:
            raise InputInFusionSet(f"local complementation at input vertex {v}")
        for u, f in _tv_factors(g, v).items():
            d[u] = d.get(u, gates.I2) @ f.conj().T
        g = local_complement(g, v)
        sequence.append(v)

    # Each local complementation turns Y into Z on its centre and swaps X and Y on
    # its neighbours, so a vertex already in the Z frame stays there.
    for i, a in enumerate(a_set):
        axis = _effective_axis(d, a, basis)
        if axis == "X":
            b = neighbor_map.get(a)
            if b is None or b not in g.neighbors(a):
                pending = set(a_set[i:])
                cands = [c for c in g.neighbors(a) if c not in a_set and c not in ins]
                if not cands:
                    raise NoValidNeighbor(f"vertex {a} has no usable neighbour for a basis change")
                b = min(cands, key=lambda c: (g.neighbors(c) & pending != {a}, c in outs,
                                              len(g.neighbors(c) & outs), -c))
            complement(b)
            axis = _effective_axis(d, a, basis)
        if axis == "Y":
            complement(a)
            axis = _effective_axis(d, a, basis)
        if axis != "Z":
            exc = BadNeighborChoice if basis == "X" else Unsupported
            raise exc(f"vertex {a} does not reach the Z basis under local complementation")

    # fused vertices: D_a^dag |P_m> must be a computational basis state
    flips: dict[int, int] = {}
    coeff = np.ones(2, dtype=complex)
    for a in a_set:
        da = d.get(a, gates.I2)
        f_a = None
        for m in (0, 1):
            ket = da.conj().T @ _BASIS_KETS[basis][m]
            k = int(np.argmax(np.abs(ket)))
            if abs(abs(ket[k]) - 1) > 1e-9:
                exc = BadNeighborChoice if basis == "X" else Unsupported
                raise exc(f"vertex {a} does not reach the Z basis under the local complementations")
            flip = k ^ m
            if f_a is not None and flip != f_a:
                raise Unsupported(f"inconsistent basis flip on vertex {a}")
            f_a = flip
            coeff[m] *= np.conj(ket[k])
        flips[a] = f_a

    # X_a |G_k> = Z_{N_k(a)} |G_k>: route each flip onto the neighbourhood
    zcount: dict[int, int] = {}
    for a, f_a in flips.items():
        if f_a:
            for u in g.neighbors(a):
                zcount[u] = zcount.get(u, 0) ^ 1
    sign_bits = sum(zcount.get(a, 0) for a in a_set) & 1
    if sign_bits:
        coeff[1] *= -1

    alpha = max(graph.vertices) + 1
    odd: set[int] = set()
    for a in a_set:
        odd ^= set(g.neighbors(a))
    odd -= set(a_set)
    keep = [v for v in g.vertices if v not in a_set]
    edges = {e for e in g.edges if e[0] not in a_set and e[1] not in a_set}
    edges |= {(u, alpha) for u in odd}

    measurements: dict[int, MeasurementSpec] = {}
    updated: dict[int, MeasurementSpec] = {}
    corrections: dict[int, np.ndarray] = {}
    for v in keep:
        local = d.get(v, gates.I2) @ np.linalg.matrix_power(gates.Z, zcount.get(v, 0))
        if v in graph.measurements:
            spec = graph.measurements[v]
            if _is_scalar(local):
                measurements[v] = spec
                continue
            new = _classify(local.conj().T @ spec.ket(0), v)
            measurements[v] = new
            if new != spec:
                updated[v] = new
        elif not _is_scalar(local):
            corrections[v] = local
    measurements[alpha] = ZY(0.0)

    new_graph = OpenGraph(
        vertices=tuple(keep) + (alpha,),
        edges=frozenset(edges),
        inputs=graph.inputs,
        outputs=graph.outputs,
        measurements=measurements,
    )
    basis_map = np.stack(_BASIS_KETS[basis], axis=1)
    alpha_map = basis_map @ np.diag(coeff)
    byproducts: list[LocalUnitary] = []
    for v in sorted(corrections):
        byproducts += decompose_local(v, corrections[v], start=len(byproducts))
    for v in sorted(updated):
        local = d.get(v, gates.I2) @ np.linalg.matrix_power(gates.Z, zcount.get(v, 0))
        byproducts += decompose_local(v, local, start=len(byproducts))
    if basis != "Z":
        byproducts += decompose_local(alpha, alpha_map, start=len(byproducts))
    return FusionResult(new_graph, alpha, a_set, basis, byproducts, updated, corrections, alpha_map,
                        tuple(sequence))


# -- post-selection oracle ------------------------------------------------------


def postselected_branches(graph: OpenGraph, fused: Iterable[int], basis: str):
    """Branches of ``graph`` with ``A`` measured in the fusion basis and equal outcomes.

    Returns ``(operators, probabilities)`` over the remaining outcome strings,
    with probabilities renormalized over the post-selected set.
    """
    a_set = tuple(sorted(set(fused)))
    specs = dict(graph.measurements)
    for a in a_set:
        specs[a] = BASIS_SPECS[basis.upper()]
    g = graph.replace(measurements=specs)
    measured = g.measured
    cols = [measured.index(a) for a in a_set]
    free = [k for k in range(len(measured)) if k not in cols]
    ops = []
    for m in (0, 1):
        rest = outcome_bits(np.arange(2 ** len(free)), len(free))
        bits = np.zeros((len(rest), len(measured)), dtype=np.int8)
        bits[:, free] = rest
        bits[:, cols] = m
        ops.append(branch_operators(g, bits))
    ops = np.concatenate(ops)
    return _normalized(ops)


def fused_branches(result: FusionResult):
    """Branches of the fused graph with output byproducts applied."""
    g = result.graph
    parts = [ops for _, ops in iter_branch_chunks(g)]
    ops = np.concatenate(parts)
    left = gates.kron_all([result.output_corrections.get(o, gates.I2) for o in g.outputs])
    return _normalized(left @ ops)


def _normalized(ops: np.ndarray):
    w = np.einsum("nij,nij->n", ops.conj(), ops).real
    keep = w > 1e-14 * max(w.max(), 1e-300)
    ops, w = ops[keep], w[keep]
    return ops, w / w.sum()


def postselection_check(graph: OpenGraph, result: FusionResult, tol: float = 1e-9) -> tuple[bool, list[int]]:
    """Multiset equality, up to per-branch phase, of post-selected and fused branches."""
    a_ops, a_p = postselected_branches(graph, result.fused, result.basis)
    b_ops, b_p = fused_branches(result)
    if len(a_ops) != len(b_ops):
        return False, list(range(len(a_ops)))
    _, unmatched = match_operators(a_ops, b_ops, a_p, b_p, tol=tol)
    return not unmatched, unmatched
