"""Open graph states.

An :class:`OpenGraph` is a graph with ordered input and output vertices and a
measurement assignment on every non-output vertex. Statevectors built from
it use ascending vertex id as the tensor order (lowest id is the most
significant qubit).

Measurement conventions
-----------------------
Outcome ``m`` of an ``XY`` measurement at angle ``phi`` projects onto the ket
``(|0> + (-1)^m e^{-i phi} |1>) / sqrt(2)``; a ``ZY`` measurement at angle
``phi`` measures ``cos(phi) Z + sin(phi) Y`` with the ``+1`` eigenvector as
``m = 0``. In both planes outcome ``m`` equals outcome 0 at ``phi + m pi``.
"""

from __future__ import annotations

import enum
import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from mbdesigns.errors import (
    BadInputDimension,
    DegenerateLength,
    GraphError,
    InputVertex,
    NoSuchVertex,
    TooLarge,
)

MAX_STATEVECTOR_QUBITS = 24
TWO_PI = 2 * math.pi


class Plane(str, enum.Enum):
    XY = "XY"
    ZY = "ZY"


@dataclass(frozen=True)
class MeasurementSpec:
    plane: Plane
    angle: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "plane", Plane(self.plane))
        if not math.isfinite(self.angle):
            raise GraphError(f"measurement angle must be finite, got {self.angle}")
        object.__setattr__(self, "angle", float(self.angle) % TWO_PI)

    def ket(self, outcome: int = 0) -> np.ndarray:
        """Projection ket for ``outcome``."""
        theta = self.angle + math.pi * outcome
        if self.plane is Plane.XY:
            return np.array([1.0, np.exp(-1j * theta)], dtype=complex) / math.sqrt(2)
        return np.array([math.cos(theta / 2), 1j * math.sin(theta / 2)], dtype=complex)

    def bra(self, outcome: int = 0) -> np.ndarray:
        return self.ket(outcome).conj()


def XY(angle: float) -> MeasurementSpec:
    return MeasurementSpec(Plane.XY, angle)


def ZY(angle: float) -> MeasurementSpec:
    return MeasurementSpec(Plane.ZY, angle)


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, eq=False)
class OpenGraph:
    """Graph with ordered inputs/outputs and per-vertex measurements.

    Vertices are stored sorted. Edges are unordered pairs stored with the
    smaller id first.
    """

    vertices: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    inputs: tuple[int, ...] = ()
    outputs: tuple[int, ...] = ()
    measurements: Mapping[int, MeasurementSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        verts = [int(v) for v in self.vertices]
        if len(set(verts)) != len(verts):
            raise GraphError("vertex ids must be unique")
        object.__setattr__(self, "vertices", tuple(sorted(verts)))
        vset = set(verts)
        edges = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop on vertex {u}")
            if u not in vset or v not in vset:
                raise GraphError(f"edge ({u}, {v}) has an endpoint outside the vertex set")
            edges.add(_edge(u, v))
        object.__setattr__(self, "edges", frozenset(edges))
        inputs = tuple(int(v) for v in self.inputs)
        outputs = tuple(int(v) for v in self.outputs)
        for name, seq in (("inputs", inputs), ("outputs", outputs)):
            if len(set(seq)) != len(seq):
                raise GraphError(f"{name} contain duplicates")
            if not set(seq) <= vset:
                raise GraphError(f"{name} must be vertices")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        meas = {int(k): v for k, v in dict(self.measurements).items()}
        out_set = set(outputs)
        for v in verts:
            if v in out_set and v in meas:
                raise GraphError(f"output vertex {v} must not carry a measurement")
            if v not in out_set and v not in meas:
                raise GraphError(f"non-output vertex {v} needs a measurement")
        if not set(meas) <= vset:
            raise GraphError("measurement on unknown vertex")
        object.__setattr__(self, "measurements", {v: meas[v] for v in sorted(meas)})
        adj: dict[int, set[int]] = {v: set() for v in verts}
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "_adj", {v: frozenset(n) for v, n in adj.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OpenGraph):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and self.edges == other.edges
            and self.inputs == other.inputs
            and self.outputs == other.outputs
            and dict(self.measurements) == dict(other.measurements)
        )

    def __repr__(self) -> str:
        return (
            f"OpenGraph(vertices={list(self.vertices)}, edges={sorted(self.edges)}, "
            f"inputs={list(self.inputs)}, outputs={list(self.outputs)})"
        )

    def neighbors(self, v: int) -> frozenset[int]:
        try:
            return self._adj[v]  # type: ignore[attr-defined]
        except KeyError:
            raise NoSuchVertex(v) from None

    def has_edge(self, u: int, v: int) -> bool:
        return _edge(u, v) in self.edges

    @property
    def measured(self) -> tuple[int, ...]:
        """Measured vertices in ascending id order (the outcome-bit order)."""
        return tuple(self.measurements)

    def replace(self, **changes) -> OpenGraph:
        kwargs = dict(
            vertices=self.vertices,
            edges=self.edges,
            inputs=self.inputs,
            outputs=self.outputs,
            measurements=self.measurements,
        )
        kwargs.update(changes)
        return OpenGraph(**kwargs)

    def relabel(self, mapping: Mapping[int, int]) -> OpenGraph:
        f = lambda v: mapping.get(v, v)  # noqa: E731
        return OpenGraph(
            vertices=tuple(f(v) for v in self.vertices),
            edges=frozenset((f(u), f(v)) for u, v in self.edges),
            inputs=tuple(f(v) for v in self.inputs),
            outputs=tuple(f(v) for v in self.outputs),
            measurements={f(v): s for v, s in self.measurements.items()},
        )

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [list(e) for e in sorted(self.edges)],
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "measurements": {
                str(v): {"plane": s.plane.value, "angle": s.angle} for v, s in self.measurements.items()
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> OpenGraph:
        try:
            return cls(
                vertices=tuple(data["vertices"]),
                edges=frozenset(tuple(e) for e in data["edges"]),
                inputs=tuple(data.get("inputs", ())),
                outputs=tuple(data.get("outputs", ())),
                measurements={
                    int(k): MeasurementSpec(Plane(v["plane"]), float(v["angle"]))
                    for k, v in data.get("measurements", {}).items()
                },
            )
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> OpenGraph:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PauliString:
    letters: Mapping[int, str]
    phase: complex = 1

    def __post_init__(self) -> None:
        letters = {int(v): p for v, p in dict(self.letters).items() if p != "I"}
        if any(p not in "XYZ" for p in letters.values()):
            raise ValueError(f"invalid Pauli letters {letters}")
        if self.phase not in (1, -1, 1j, -1j):
            raise ValueError(f"phase must be one of +-1, +-i, got {self.phase}")
        object.__setattr__(self, "letters", dict(sorted(letters.items())))

    def __str__(self) -> str:
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[self.phase]
        return sign + "".join(f"{p}{v}" for v, p in self.letters.items())


def make_linear_cluster(length: int, angles: Iterable[float]) -> OpenGraph:
    """Path on ``length + 1`` vertices; vertex 1 is the input, ``length + 1`` the output."""
    angles = list(angles)
    if length < 1:
        raise DegenerateLength(f"cluster length must be positive, got {length}")
    if len(angles) != length:
        raise ValueError(f"expected {length} angles, got {len(angles)}")
    n = length + 1
    return OpenGraph(
        vertices=tuple(range(1, n + 1)),
        edges=frozenset((k, k + 1) for k in range(1, n)),
        inputs=(1,),
        outputs=(n,),
        measurements={k: XY(a) for k, a in enumerate(angles, start=1)},
    )


def local_complement(graph: OpenGraph, a: int) -> OpenGraph:
    """Complement the edges among the neighbours of ``a``."""
    nbrs = sorted(graph.neighbors(a))
    edges = set(graph.edges)
    for i, u in enumerate(nbrs):
        for v in nbrs[i + 1 :]:
            edges ^= {(u, v)}
    return graph.replace(edges=frozenset(edges))


def stabilizer_generator(graph: OpenGraph, a: int) -> PauliString:
    """``X`` on ``a`` and ``Z`` on each of its neighbours."""
    nbrs = graph.neighbors(a)
    if a in graph.inputs:
        raise InputVertex(f"vertex {a} is an input; stabilizer relations need a non-input vertex")
    letters = {b: "Z" for b in nbrs}
    letters[a] = "X"
    return PauliString(letters)


def _qubit_index(graph: OpenGraph) -> dict[int, int]:
    return {v: i for i, v in enumerate(graph.vertices)}


def open_graph_state(graph: OpenGraph, input_state: np.ndarray | None = None) -> np.ndarray:
    """Statevector ``prod CZ |psi>_I |+...+>`` in ascending-vertex-id order."""
    n = len(graph.vertices)
    if n > MAX_STATEVECTOR_QUBITS:
        raise TooLarge(f"{n} vertices exceed the statevector limit of {MAX_STATEVECTOR_QUBITS}")
    n_in = len(graph.inputs)
    if input_state is None:
        if n_in:
            raise BadInputDimension("an input state is required for graphs with inputs")
        input_state = np.ones(1, dtype=complex)
    psi = np.asarray(input_state, dtype=complex).reshape(-1)
    if psi.size != 2**n_in:
        raise BadInputDimension(f"input state has dimension {psi.size}, expected {2 ** n_in}")
    if abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise BadInputDimension("input state must be normalized")
    others = [v for v in graph.vertices if v not in set(graph.inputs)]
    plus = np.full(2 ** len(others), 2 ** (-len(others) / 2), dtype=complex)
    state = np.kron(psi, plus).reshape((2,) * n)
    current = list(graph.inputs) + others
    state = np.transpose(state, [current.index(v) for v in graph.vertices]).reshape(-1)
    return _apply_cz_phases(graph, state)


def _apply_cz_phases(graph: OpenGraph, state: np.ndarray) -> np.ndarray:
    n = len(graph.vertices)
    pos = _qubit_index(graph)
    idx = np.arange(2**n)
    parity = np.zeros(2**n, dtype=np.int64)
    for u, v in graph.edges:
        bu = (idx >> (n - 1 - pos[u])) & 1
        bv = (idx >> (n - 1 - pos[v])) & 1
        parity ^= bu & bv
    return state * (1 - 2 * parity)


def apply_local(graph: OpenGraph, ops: Mapping[int, np.ndarray], state: np.ndarray) -> np.ndarray:
    """Apply single-qubit matrices ``ops[v]`` to a statevector over ``graph``'s vertices."""
    n = len(graph.vertices)
    pos = _qubit_index(graph)
    psi = np.asarray(state, dtype=complex).reshape((2,) * n)
    for v, op in ops.items():
        psi = np.moveaxis(np.tensordot(op, psi, axes=([1], [pos[v]])), 0, pos[v])
    return psi.reshape(-1)


def apply_pauli(graph: OpenGraph, pauli: PauliString, state: np.ndarray) -> np.ndarray:
    from mbdesigns.gates import PAULIS

    for v in pauli.letters:
        if v not in graph._adj:  # type: ignore[attr-defined]
            raise NoSuchVertex(v)
    out = apply_local(graph, {v: PAULIS[p] for v, p in pauli.letters.items()}, state)
    return pauli.phase * out
