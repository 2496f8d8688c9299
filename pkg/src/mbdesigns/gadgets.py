"""Measurement gadgets, their induced-unitary claims, and brute-force checks.

A :class:`Gadget` pairs an open graph with a :class:`SymbolicUnitary` claim.
Claim variables are measured-vertex ids; string variables (``"M"``) are
derived bits whose affine form is fitted from branch data by
:func:`verify_gadget`. Qubit ``k`` of a claim enters at ``graph.inputs[k]``
and leaves at ``graph.outputs[k]``.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import gates
from ._parallel import chunk_bounds, default_threads, ordered_map
from .ensemble import branch_operators, contraction_plan, outcome_bits, unitarity_deviation
from .errors import BadArity, BadWiring, TooLarge
from .graphstate import XY, ZY, MeasurementSpec, OpenGraph, make_linear_cluster
from .symbolic import (
    Factor,
    OutcomeBitExpr,
    RankReport,
    SymbolicUnitary,
    _var_key,
    _var_name,
    cz,
    fit_affine,
    fit_polynomial,
    hadamard,
    layered,
    layered_form,
    merge_paulis,
    outcome_bit_rank,
    pauli,
    pauli_pushthrough,
    rot,
)

__all__ = [
    "Factor",
    "Gadget",
    "GadgetReport",
    "OutcomeBitExpr",
    "RankReport",
    "ShiftDecomposition",
    "SymbolicUnitary",
    "assemble_shift",
    "bhh_repetitions",
    "compose_gadgets",
    "two_qubit_layout_forms",
    "gadget_catalog",
    "outcome_bit_rank",
    "pauli_pushthrough",
    "shift_decomposition",
    "tensor_gadgets",
    "verify_gadget",
]

MAX_EXHAUSTIVE_BITS = 25
VERIFY_CHUNK = 1 << 13
MAX_REPORTED_FAILURES = 100
UNITARY_TOL = 1e-6
PI = math.pi

E = OutcomeBitExpr


def _m(*bits: int, const: int = 0) -> OutcomeBitExpr:
    return E.affine(bits, const)


# -- gadget type ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Gadget:
    """Open graph plus the claimed branch unitary.

    ``unknowns`` maps each derived-bit name in the claim to the vertices its
    affine form may depend on.
    """

    name: str
    graph: OpenGraph
    claim: SymbolicUnitary
    correlation_sets: tuple[frozenset[int], ...] = ()
    unknowns: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n_in, n_out = len(self.graph.inputs), len(self.graph.outputs)
        if n_in != n_out or n_in != self.claim.n_qubits:
            raise BadArity(
                f"gadget {self.name!r}: {n_in} inputs, {n_out} outputs, claim on {self.claim.n_qubits} qubits"
            )
        object.__setattr__(self, "correlation_sets", tuple(frozenset(s) for s in self.correlation_sets))
        object.__setattr__(self, "unknowns", {k: tuple(v) for k, v in dict(self.unknowns).items()})
        measured = set(self.graph.measured)
        for v in self.claim.variables:
            if isinstance(v, str):
                if v not in self.unknowns:
                    raise BadArity(f"claim variable {v!r} has no declared support")
            elif v not in measured:
                raise BadArity(f"claim variable m{v} is not a measured vertex")

    @property
    def n_qubits(self) -> int:
        return self.claim.n_qubits

    def relabel(self, mapping: Mapping[int, int], suffix: str = "") -> Gadget:
        """Rename vertices (ids missing from ``mapping`` are kept) and derived bits."""
        full = {v: mapping.get(v, v) for v in self.graph.vertices}
        names = {u: f"{u}{suffix}" for u in self.unknowns}
        claim = self.claim.rename({**full, **names})
        return Gadget(
            self.name,
            self.graph.relabel(full),
            claim,
            tuple(frozenset(full.get(v, v) for v in s) for s in self.correlation_sets),
            {names[u]: tuple(full[v] for v in sup) for u, sup in self.unknowns.items()},
        )

    def permute_qubits(self, order: Sequence[int]) -> Gadget:
        """New gadget whose qubit ``k`` is this gadget's qubit ``order[k]``."""
        order = list(order)
        if sorted(order) != list(range(self.n_qubits)):
            raise BadWiring(f"{order} is not a permutation of the qubits")
        inv = {old: new for new, old in enumerate(order)}
        g = self.graph.replace(inputs=tuple(self.graph.inputs[k] for k in order),
                               outputs=tuple(self.graph.outputs[k] for k in order))
        return Gadget(self.name, g, self.claim.remap_qubits(inv), self.correlation_sets, self.unknowns)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "graph": self.graph.to_dict(),
            "claim": self.claim.to_dict(),
            "claim_text": str(self.claim),
            "correlation_sets": [sorted(s) for s in self.correlation_sets],
            "unknowns": {k: list(v) for k, v in self.unknowns.items()},
        }


# -- catalog -------------------------------------------------------------------


def wire_gadget(phi: float) -> Gadget:
    """Single measured node: ``H Z^m Z(phi)``."""
    claim = SymbolicUnitary.from_written(1, [hadamard(0), pauli("Z", 0, _m(1)), rot("Z", phi, 0)])
    return Gadget("wire", make_linear_cluster(1, [phi]), claim)


def zrot_gadget(theta: float) -> Gadget:
    """Four-node path measured at ``(theta/2, 0, theta/2, 0)``."""
    claim = SymbolicUnitary.from_written(1, [
        pauli("Z", 0, _m(1, 3)),
        pauli("X", 0, _m(2, 4)),
        rot("Z", theta, 0, _m(2, const=1)),
    ])
    return Gadget("zrot", make_linear_cluster(4, [theta / 2, 0.0, theta / 2, 0.0]), claim)


def xrot_gadget(theta: float) -> Gadget:
    """Four-node path measured at ``(0, theta/2, 0, theta/2)``."""
    claim = SymbolicUnitary.from_written(1, [
        pauli("Z", 0, _m(3)),
        pauli("X", 0, _m(2, 4)),
        rot("X", theta, 0, _m(3, const=1)),
        pauli("Z", 0, _m(1)),
    ])
    return Gadget("xrot", make_linear_cluster(4, [0.0, theta / 2, 0.0, theta / 2]), claim)


TWO_QUBIT_ARMS = {
    # angles at vertices 5, 7, 9 of the measured arm
    "nominal": (PI / 4, PI / 4, PI / 2),
    "clifford": (PI / 2, PI / 2, PI / 2),
}


def two_qubit_gadget(arm: str = "nominal") -> Gadget:
    """Two wires joined through a measured arm; qubit 0 enters at 3, qubit 1 at 1.

    ``arm="nominal"`` uses the quarter-turn arm and its nominal claim, whose ``CZ``
    block carries the exponent ``m6 + 1``. Those angles leave half the
    branches non-unitary (see :func:`verify_gadget`). ``arm="clifford"``
    doubles the two quarter-turn angles; every branch is then unitary and
    the ``CZ`` block is always applied.
    """
    if arm not in TWO_QUBIT_ARMS:
        raise ValueError(f"unknown arm {arm!r}; choose from {sorted(TWO_QUBIT_ARMS)}")
    a5, a7, a9 = TWO_QUBIT_ARMS[arm]
    graph = OpenGraph(
        vertices=tuple(range(1, 12)),
        edges=frozenset({(1, 2), (2, 10), (3, 4), (4, 11), (5, 10), (5, 11),
                         (5, 6), (6, 7), (7, 8), (8, 9)}),
        inputs=(3, 1),
        outputs=(11, 10),
        measurements={1: XY(0), 2: XY(0), 3: XY(0), 4: XY(0), 5: XY(a5),
                      6: XY(0), 7: XY(a7), 8: XY(0), 9: XY(a9)},
    )
    e6 = _m(6, const=1) if arm == "nominal" else E.one()
    claim = SymbolicUnitary.from_written(2, [
        pauli("Z", 0, E.var("M")),
        pauli("Z", 1, E.var("M")),
        rot("Z", PI / 2, 0, e6),
        rot("Z", PI / 2, 1, e6),
        cz(0, 1, e6),
        pauli("X", 0, _m(4)),
        pauli("X", 1, _m(2)),
        pauli("Z", 0, _m(3)),
        pauli("Z", 1, _m(1)),
    ])
    name = "two_qubit" if arm == "nominal" else "two_qubit_clifford"
    return Gadget(name, graph, claim, unknowns={"M": (5, 7, 8, 9)})


# vertex ids of the combined two-qubit graph for each component gadget
_PAIR_ZROT_I = {1: 1, 2: 2, 3: 3, 4: 4, 5: 5}
_PAIR_XROT_I = {1: 5, 2: 6, 3: 7, 4: 8, 5: 9}
_PAIR_ZROT_J = {1: 23, 2: 22, 3: 21, 4: 20, 5: 19}
_PAIR_XROT_J = {1: 19, 2: 18, 3: 17, 4: 16, 5: 15}
_PAIR_TWO = {3: 9, 4: 10, 11: 11, 1: 15, 2: 14, 10: 13, 5: 12, 6: 24, 7: 25, 8: 26, 9: 27}


def universal_pair_gadget(arm: str = "nominal") -> Gadget:
    """Rotation gadgets on both wires feeding the two-qubit gadget (27 vertices).

    The claim is the layered product of the component claims, so its derived
    bits are explicit affine forms of the outcomes apart from the fitted
    ``M`` of the two-qubit arm. ``arm`` is passed to :func:`two_qubit_gadget`.
    """
    theta = PI / 4
    stage1 = tensor_gadgets(zrot_gadget(theta).relabel(_PAIR_ZROT_I), zrot_gadget(theta).relabel(_PAIR_ZROT_J))
    stage2 = tensor_gadgets(xrot_gadget(theta).relabel(_PAIR_XROT_I), xrot_gadget(theta).relabel(_PAIR_XROT_J))
    stage3 = two_qubit_gadget(arm).relabel(_PAIR_TWO)
    name = "universal_pair" if arm == "nominal" else "universal_pair_clifford"
    combined = compose_gadgets([stage1, stage2, stage3], name=name)
    return Gadget(combined.name, combined.graph, layered_form(combined.claim),
                  combined.correlation_sets, combined.unknowns)


def hadamard_naive_gadget() -> Gadget:
    """``Z(pi/2)``, ``X(pi/2)``, ``Z(pi/2)`` gadgets in series (13 vertices)."""
    g = compose_gadgets([zrot_gadget(PI / 2), xrot_gadget(PI / 2), zrot_gadget(PI / 2)], name="hadamard_naive")
    return g


HADAMARD_FUSED_SET = frozenset({2, 7, 10})
HADAMARD_FUSED_VERTEX = 14


def hadamard_fused_gadget() -> Gadget:
    """The naive Hadamard after X-fusing vertices 2, 7 and 10 into vertex 14.

    Edges and planes are those produced by :func:`mbdesigns.fusion.fuse_x`;
    the fused vertex is measured at ``ZY(pi)`` so the Hadamard exponent is
    its own outcome bit.
    """
    q = PI / 4
    graph = OpenGraph(
        vertices=(1, 3, 4, 5, 6, 8, 9, 11, 12, 13, 14),
        edges=frozenset({(1, 3), (1, 4), (4, 5), (5, 6), (6, 8), (6, 9), (9, 11), (9, 12), (12, 13)}
                        | {(v, 14) for v in (1, 3, 4, 6, 8, 11, 12)}),
        inputs=(1,),
        outputs=(13,),
        measurements={1: XY(7 * q), 3: ZY(3 * q), 4: XY(0), 5: XY(0), 6: XY(7 * q), 8: ZY(3 * q),
                      9: XY(7 * q), 11: ZY(3 * q), 12: XY(0), 14: ZY(PI)},
    )
    claim = SymbolicUnitary.from_written(1, [
        pauli("X", 0, E.var("M")),
        pauli("Z", 0, E.var("M'")),
        hadamard(0, _m(HADAMARD_FUSED_VERTEX)),
    ])
    support = graph.measured
    return Gadget("hadamard_fused", graph, claim, (HADAMARD_FUSED_SET,), {"M": support, "M'": support})


def hadamard_fused_nominal_graph() -> OpenGraph:
    """The fused Hadamard graph with its nominal hand-derived angles.

    Kept for comparison only; under this package's conventions these angles
    do not give a Pauli times Hadamard on every branch.
    """
    q = PI / 4
    return hadamard_fused_gadget().graph.replace(measurements={
        1: XY(3 * q), 3: ZY(3 * q), 4: XY(3 * q), 5: XY(0), 6: XY(0), 8: ZY(3 * q),
        9: XY(5 * q), 11: ZY(3 * q), 12: XY(2 * q), 14: ZY(PI),
    })


CATALOG_NAMES = ("wire", "zrot", "xrot", "two_qubit", "universal_pair", "hadamard_naive", "hadamard_fused")
VARIANT_NAMES = ("two_qubit_clifford", "universal_pair_clifford")


def gadget_catalog(phi: float = PI / 4, theta: float = PI / 4, variants: bool = True) -> dict[str, Gadget]:
    """Catalog gadgets keyed by name; ``phi``/``theta`` set the free angles.

    With ``variants`` the Clifford-arm versions of the two-qubit gadgets are
    included as well.
    """
    out = {
        "wire": wire_gadget(phi),
        "zrot": zrot_gadget(theta),
        "xrot": xrot_gadget(theta),
        "two_qubit": two_qubit_gadget(),
        "universal_pair": universal_pair_gadget(),
        "hadamard_naive": hadamard_naive_gadget(),
        "hadamard_fused": hadamard_fused_gadget(),
    }
    if variants:
        out["two_qubit_clifford"] = two_qubit_gadget("clifford")
        out["universal_pair_clifford"] = universal_pair_gadget("clifford")
    return out


def identity_gadget() -> Gadget:
    """A bare wire: one vertex that is both input and output."""
    g = OpenGraph(vertices=(1,), edges=frozenset(), inputs=(1,), outputs=(1,), measurements={})
    return Gadget("identity", g, SymbolicUnitary(1))


# -- composition ---------------------------------------------------------------


def _fresh_relabel(g: Gadget, taken: set[int], fixed: Mapping[int, int]) -> dict[int, int]:
    """Keep ids unless any collides with ``taken``; then renumber from ``max + 1``."""
    rest = [v for v in g.graph.vertices if v not in fixed]
    targets = set(fixed.values())
    if not any(v in taken or v in targets for v in rest):
        mapping = {v: v for v in rest}
    else:
        start = max(taken | targets | {0}) + 1
        mapping = {v: start + k for k, v in enumerate(rest)}
    mapping.update(fixed)
    return mapping


def _unknown_suffix(existing: Mapping[str, tuple], new: Mapping[str, tuple], k: int) -> str:
    """Smallest ``_k``, ``_{k+1}``, ... suffix that avoids every existing name."""
    if not any(u in existing for u in new):
        return ""
    while any(f"{u}_{k}" in existing for u in new):
        k += 1
    return f"_{k}"


def tensor_gadgets(a: Gadget, b: Gadget, name: str | None = None) -> Gadget:
    """Side-by-side gadgets; ``b``'s qubits follow ``a``'s."""
    taken = set(a.graph.vertices)
    mapping = _fresh_relabel(b, taken, {})
    b = b.relabel(mapping, _unknown_suffix(a.unknowns, b.unknowns, 1))
    n = a.n_qubits + b.n_qubits
    graph = OpenGraph(
        vertices=a.graph.vertices + b.graph.vertices,
        edges=a.graph.edges | b.graph.edges,
        inputs=a.graph.inputs + b.graph.inputs,
        outputs=a.graph.outputs + b.graph.outputs,
        measurements={**a.graph.measurements, **b.graph.measurements},
    )
    claim = a.claim.remap_qubits({k: k for k in range(a.n_qubits)}, n).then(
        b.claim.remap_qubits({k: k + a.n_qubits for k in range(b.n_qubits)}, n))
    return Gadget(name or f"{a.name}|{b.name}", graph, claim,
                  a.correlation_sets + b.correlation_sets, {**a.unknowns, **b.unknowns})


def compose_gadgets(
    sequence: Sequence[Gadget],
    wiring: Sequence[Mapping[int, int]] | None = None,
    name: str | None = None,
) -> Gadget:
    """Connect gadgets in series, the first gadget acting first.

    ``wiring[k]`` maps outputs of the running composition to inputs of
    ``sequence[k + 1]``; by default outputs and inputs are paired by
    position. Vertices of later gadgets keep their ids when these do not
    collide, otherwise they are renumbered upward from the current maximum.
    """
    if not sequence:
        raise BadWiring("nothing to compose")
    acc = sequence[0]
    for k, g in enumerate(sequence[1:], start=1):
        outs = acc.graph.outputs
        if len(outs) != len(g.graph.inputs):
            raise BadWiring(f"junction {k}: {len(outs)} outputs feed {len(g.graph.inputs)} inputs")
        if wiring is None:
            junction = dict(zip(outs, g.graph.inputs))
        else:
            if len(wiring) != len(sequence) - 1:
                raise BadWiring("need one wiring map per junction")
            junction = {int(a): int(b) for a, b in dict(wiring[k - 1]).items()}
        if set(junction) != set(outs) or sorted(junction.values()) != sorted(g.graph.inputs):
            raise BadWiring(f"junction {k} is not a bijection from outputs onto inputs")
        to_prev = {b: a for a, b in junction.items()}
        taken = set(acc.graph.vertices)
        mapping = _fresh_relabel(g, taken, to_prev)
        g = g.relabel(mapping, _unknown_suffix(acc.unknowns, g.unknowns, k))
        # composed qubit c ends at outs[c]; it feeds g's qubit q
        q_of = {q: outs.index(v) for q, v in enumerate(g.graph.inputs)}
        new_outs = list(outs)
        for q, v in enumerate(g.graph.outputs):
            new_outs[q_of[q]] = v
        meas = dict(acc.graph.measurements)
        meas.update(g.graph.measurements)
        graph = OpenGraph(
            vertices=tuple(sorted(taken | set(g.graph.vertices))),
            edges=acc.graph.edges | g.graph.edges,
            inputs=acc.graph.inputs,
            outputs=tuple(new_outs),
            measurements=meas,
        )
        claim = acc.claim.then(g.claim.remap_qubits(q_of, acc.n_qubits))
        acc = Gadget(name or f"{acc.name}>{g.name}", graph, claim,
                     acc.correlation_sets + g.correlation_sets, {**acc.unknowns, **g.unknowns})
    if name is not None and acc.name != name:
        acc = Gadget(name, acc.graph, acc.claim, acc.correlation_sets, acc.unknowns)
    return acc


# -- verification --------------------------------------------------------------


@dataclass
class GadgetReport:
    name: str
    mode: str
    total: int
    passed: int
    failures: list[dict]
    fitted: dict[str, OutcomeBitExpr | None]
    claim: SymbolicUnitary
    seed: int | None = None
    message: str = ""
    nonunitary: int = 0

    @property
    def failed(self) -> int:
        return self.total - self.passed

    @property
    def ok(self) -> bool:
        return self.failed == 0 and all(v is not None for v in self.fitted.values())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "total": self.total,
            "passed": self.passed,
            "failed": self.failed,
            "ok": self.ok,
            "fitted": {k: (None if v is None else {**v.to_dict(), "text": str(v)}) for k, v in self.fitted.items()},
            "claim": self.claim.to_dict(),
            "claim_text": str(self.claim),
            "nonunitary": self.nonunitary,
            "failures": self.failures,
            "message": self.message,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _branch_bits(n_meas: int, mode: str, count: int | None, seed: int | None):
    if mode == "exhaustive":
        if n_meas > MAX_EXHAUSTIVE_BITS:
            raise TooLarge(f"exhaustive verification of {n_meas} outcome bits exceeds 2^{MAX_EXHAUSTIVE_BITS}")
        total = 2**n_meas
        return total, (lambda lo, hi: outcome_bits(np.arange(lo, hi, dtype=np.int64), n_meas))
    if mode == "sampled":
        if seed is None:
            raise ValueError("sampled verification needs a seed")
        if count is None or count < 1:
            raise ValueError("sampled verification needs a positive count")
        bits = np.random.default_rng(seed).integers(0, 2, size=(count, n_meas), dtype=np.int8)
        return count, (lambda lo, hi: bits[lo:hi])
    raise ValueError(f"unknown mode {mode!r}")


def verify_gadget(
    gadget: Gadget,
    mode: str = "exhaustive",
    count: int | None = None,
    seed: int | None = None,
    tol: float = 1e-9,
    threads: int | None = None,
    max_degree: int = 2,
) -> GadgetReport:
    """Compare every enumerated or sampled branch with the claim.

    Derived bits named in ``gadget.unknowns`` are fitted first: each branch
    is tested against every assignment of the unknowns, and the bits are then
    fixed one at a time in name order. The branches that pin a bit's value
    give a GF(2) system over its support; if no affine form fits, polynomials
    up to ``max_degree`` are tried. A bit that no branch pins is set to 0.
    """
    graph = gadget.graph
    measured = graph.measured
    n_meas = len(measured)
    total, bits_for = _branch_bits(n_meas, mode, count, seed)
    plan = contraction_plan(graph)
    claim = gadget.claim
    unknowns = sorted(gadget.unknowns)
    k_unknown = len(unknowns)
    d = claim.dim
    support = sorted({v for u in unknowns for v in gadget.unknowns[u]})
    col = {v: i for i, v in enumerate(measured)}

    def work(bounds: tuple[int, int]):
        lo, hi = bounds
        bits = bits_for(lo, hi)
        n = bits.shape[0]
        # each measurement scales a branch by about 1/sqrt(2)
        ops = branch_operators(graph, bits, plan) * 2.0 ** (n_meas / 2)
        norm2 = np.einsum("nij,nij->n", ops.conj(), ops).real / d
        good = norm2 > 1e-12
        ops = ops / np.sqrt(np.where(good, norm2, 1.0))[:, None, None]
        nonunitary = int((~good | (unitarity_deviation(ops) > UNITARY_TOL)).sum())
        cols = {v: bits[:, col[v]].astype(np.uint8) for v in measured}
        mask = np.zeros((n, 2**k_unknown), dtype=bool)
        for a in range(2**k_unknown):
            assign = {u: np.full(n, (a >> i) & 1, dtype=np.uint8) for i, u in enumerate(unknowns)}
            ref = claim.evaluate_batch({**cols, **assign}, n)
            ov = np.abs(np.einsum("nij,nij->n", ref.conj(), ops))
            mask[:, a] = good & (np.abs(ov - d) <= tol)
        return mask, (bits[:, [col[v] for v in support]].astype(np.uint8) if support else None), nonunitary

    threads = default_threads() if threads is None else max(1, int(threads))
    bounds = chunk_bounds(total, VERIFY_CHUNK)
    masks, sup_bits = [], []
    n_nonunitary = 0
    for i in range(0, len(bounds), threads):
        for m, s, nu in ordered_map(work, bounds[i:i + threads], threads):
            masks.append(m)
            sup_bits.append(s)
            n_nonunitary += nu
    mask = np.concatenate(masks)

    fitted: dict[str, OutcomeBitExpr | None] = {}
    message = ""
    final = claim
    if k_unknown:
        sbits = np.concatenate(sup_bits)
        scol = {v: i for i, v in enumerate(support)}
        assign_idx = np.arange(2**k_unknown)
        allowed = mask.copy()
        subst: dict[str, OutcomeBitExpr] = {}
        # fit one derived bit at a time; a bit that is never pinned (only a
        # combination with later bits is observable) is fixed to 0
        if not mask.any():
            message += "no branch matches the claim for any value of the derived bits. "
        for i, u in enumerate(unknowns):
            if not mask.any():
                break
            val = (assign_idx >> i) & 1
            can0 = (allowed & (val == 0)[None, :]).any(axis=1)
            can1 = (allowed & (val == 1)[None, :]).any(axis=1)
            pinned = can0 ^ can1
            form = None
            if pinned.any():
                vals = can1[pinned].astype(np.uint8)
                # own support first, then the union (bits fixed earlier may
                # have absorbed part of this one)
                for sup in (gadget.unknowns[u], support):
                    cols = {v: sbits[pinned, scol[v]] for v in sup}
                    form = fit_affine(cols, vals)
                    deg = 2
                    while form is None and deg <= max_degree:
                        form = fit_polynomial(cols, vals, deg)
                        deg += 1
                    if form is not None:
                        break
                if form is None:
                    message += f"no form of degree <= {max_degree} over {list(gadget.unknowns[u])} fits {u}. "
                    break
            else:
                form = E.zero()
            fitted[u] = form
            subst[u] = form
            c = {v: sbits[:, scol[v]] for v in form.variables}
            row_val = form.evaluate_batch(c, total).astype(np.int64)
            allowed &= val[None, :] == row_val[:, None]
        for u in unknowns:
            fitted.setdefault(u, None)
        if len(subst) == k_unknown:
            final = claim.substitute(subst)
            ok = allowed.any(axis=1)
        else:
            ok = np.zeros(total, dtype=bool)
    else:
        ok = mask[:, 0]

    bad = np.nonzero(~ok)[0]
    failures = []
    for idx in bad[:MAX_REPORTED_FAILURES]:
        lo = (int(idx) // VERIFY_CHUNK) * VERIFY_CHUNK
        row = bits_for(lo, min(lo + VERIFY_CHUNK, total))[int(idx) - lo]
        failures.append({"index": int(idx), "bits": {str(v): int(b) for v, b in zip(measured, row)}})
    if n_nonunitary:
        message += f" {n_nonunitary} branch operators are not proportional to a unitary."
    return GadgetReport(gadget.name, mode, total, int(ok.sum()), failures, fitted, final,
                        seed if mode == "sampled" else None, message.strip(), n_nonunitary)


# -- readouts of composed claims -------------------------------------------------


def two_qubit_layout_forms(claim: SymbolicUnitary) -> dict[str, dict]:
    """Label the exponents of a two-qubit layered claim ``M1``..``M16``.

    Reading the operator right to left the layout is: Paulis, a rotation
    pair, Paulis, a rotation pair, Paulis, the ``CZ`` block, then ``Z Z``.
    Labels count from the operator's left, so ``M1`` is the ``Z Z``
    exponent. Each entry names the gate so rotation order is explicit.
    """
    stages = layered(claim)
    # pad to stage 6 so all seven slots exist
    while len(stages) < 7:
        stages.append([])
    zero = E.zero()

    def pauli_slot(stage, gate, q):
        e = zero
        for f in stage:
            if f.targets == (q,) and (f.gate == gate or f.gate == "Y"):
                e = e ^ f.exponent
        return e

    def rot_slot(stage, q):
        for f in stage:
            if f.targets == (q,) and f.gate.startswith("R"):
                return f.tag.replace("theta", f"{f.angle:.6g}"), f.exponent
        return "I", zero

    out: dict[str, dict] = {}
    zz_i, zz_j = pauli_slot(stages[6], "Z", 0), pauli_slot(stages[6], "Z", 1)
    out["M1"] = {"gate": "Z_i Z_j", "form": zz_i, "consistent": zz_i == zz_j}
    czf = [f for f in stages[5] if f.gate == "CZ"]
    out["M2"] = {"gate": "Z(pi/2)_i Z(pi/2)_j CZ", "form": czf[0].exponent if czf else zero,
                 "consistent": all(f.exponent == (czf[0].exponent if czf else zero) for f in stages[5])}
    k = 3
    for p_stage, r_stage in ((4, 3), (2, 1)):
        for gate, q in (("X", 0), ("X", 1), ("Z", 0), ("Z", 1)):
            out[f"M{k}"] = {"gate": f"{gate}_{'ij'[q]}", "form": pauli_slot(stages[p_stage], gate, q)}
            k += 1
        for q in (0, 1):
            tag, form = rot_slot(stages[r_stage], q)
            out[f"M{k}"] = {"gate": f"{tag}_{'ij'[q]}", "form": form}
            k += 1
    for gate, q in (("Z", 0), ("Z", 1)):
        out[f"M{k}"] = {"gate": f"{gate}_{'ij'[q]}", "form": pauli_slot(stages[0], gate, q)}
        k += 1
    return out


# -- shift operator --------------------------------------------------------------


@dataclass(frozen=True)
class GadgetUse:
    """One gadget placement: ``kind`` in {zrot, xrot, cz}, 1-based qubits."""

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None


@dataclass(frozen=True)
class ShiftDecomposition:
    """Swap network, its gate expansion and the gadget sequence.

    ``swaps`` follows operator notation (rightmost acts first); ``gates`` and
    ``gadgets`` are in application order. Each correlation set lists
    ``(gadget index, local vertex)`` pairs whose outcomes must agree.
    """

    n: int
    swaps: tuple[tuple[int, int], ...]
    gates: tuple[tuple[str, tuple[int, ...]], ...]
    gadgets: tuple[GadgetUse, ...]
    correlation_sets: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def n_qubits(self) -> int:
        return self.n + 2

    def counts(self) -> dict:
        per_swap = {"cz": 3, "h": 6, "rotation_gadgets": 18, "gadgets": 21}
        n_cz = sum(g.kind == "cz" for g in self.gadgets)
        n_rot = len(self.gadgets) - n_cz
        return {
            "swaps": len(self.swaps),
            "per_swap": per_swap,
            "cz_gadgets": n_cz,
            "rotation_gadgets": n_rot,
            "gadgets": len(self.gadgets),
            "nodes": self.node_count(),
        }

    def node_count(self) -> int:
        """Vertices of the series composition: measured nodes plus final outputs."""
        sizes = {"zrot": 4, "xrot": 4, "cz": 9}
        return sum(sizes[g.kind] for g in self.gadgets) + self.n_qubits

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "swaps": [list(s) for s in self.swaps],
            "counts": self.counts(),
            "gadgets": [{"kind": g.kind, "qubits": list(g.qubits), "angle": g.angle} for g in self.gadgets],
            "correlation_sets": [[list(p) for p in s] for s in self.correlation_sets],
        }


def shift_swaps(n: int) -> list[tuple[int, int]]:
    if n % 2 or n < 4:
        raise BadArity(f"shift needs an even n >= 4, got {n}")
    return [(n - 2, n + 1), (n - 1, n + 2)] + [(i, i + 1) for i in range(1, n - 1)]


def shift_decomposition(n: int) -> ShiftDecomposition:
    """Expand the swap network into ``CZ``/rotation gadgets.

    A swap is three CNOTs and ``CNOT(c, t) = H_t CZ H_t``; every ``H`` is
    ``Z(pi/2) X(pi/2) Z(pi/2)``, whose three rotation bits form one
    correlation set.
    """
    swaps = shift_swaps(n)
    gate_list: list[tuple[str, tuple[int, ...]]] = []
    uses: list[GadgetUse] = []
    corr: list[tuple[tuple[int, int], ...]] = []
    half = PI / 2
    for i, j in reversed(swaps):
        for c, t in ((i, j), (j, i), (i, j)):
            for step in ("H", "CZ", "H"):
                if step == "CZ":
                    gate_list.append(("CZ", (c, t)))
                    uses.append(GadgetUse("cz", (c, t)))
                    continue
                gate_list.append(("H", (t,)))
                base = len(uses)
                uses.extend([GadgetUse("zrot", (t,), half), GadgetUse("xrot", (t,), half),
                             GadgetUse("zrot", (t,), half)])
                # the rotation exponents are m2, m3, m2 of the three gadgets
                corr.append(((base, 2), (base + 1, 3), (base + 2, 2)))
    return ShiftDecomposition(n, tuple(swaps), tuple(gate_list), tuple(uses), tuple(corr))


def swap_matrix(i: int, j: int, n_qubits: int) -> np.ndarray:
    """Permutation matrix exchanging 1-based qubits ``i`` and ``j``."""
    d = 2**n_qubits
    idx = np.arange(d)
    bi = (idx >> (n_qubits - i)) & 1
    bj = (idx >> (n_qubits - j)) & 1
    flip = bi != bj
    tgt = idx.copy()
    tgt[flip] = idx[flip] ^ ((1 << (n_qubits - i)) | (1 << (n_qubits - j)))
    m = np.zeros((d, d))
    m[tgt, idx] = 1
    return m


def shift_unitary(n: int) -> np.ndarray:
    nq = n + 2
    u = np.eye(2**nq)
    for i, j in shift_swaps(n):
        u = u @ swap_matrix(i, j, nq)
    return u


def _embed(g: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """Matrix of ``g`` acting on 1-based ``qubits`` of an ``n_qubits`` register."""
    k = len(qubits)
    d = 2**n_qubits
    rest = [q for q in range(1, n_qubits + 1) if q not in qubits]
    perm = [q - 1 for q in qubits] + [q - 1 for q in rest]
    full = np.kron(g, np.eye(2 ** (n_qubits - k))).reshape([2] * (2 * n_qubits))
    inv = np.argsort(perm)
    axes = list(inv) + [n_qubits + a for a in inv]
    return full.transpose(axes).reshape(d, d)


def decomposition_unitary(dec: ShiftDecomposition, expand_h: bool = True) -> np.ndarray:
    """Product of the expanded gates; ``H`` becomes three rotations if ``expand_h``."""
    nq = dec.n_qubits
    u = np.eye(2**nq, dtype=complex)
    h = gates.rz(PI / 2) @ gates.rx(PI / 2) @ gates.rz(PI / 2) if expand_h else gates.H
    for tag, qs in dec.gates:
        g = gates.CZ if tag == "CZ" else h
        u = _embed(g, qs, nq) @ u
    return u


MAX_ASSEMBLY_N = 4


def assemble_shift(n: int = 4) -> Gadget:
    """Series composition of catalog gadgets realizing the shift network.

    Structural only: outcome bits are not X-fused, so the claim is the
    uncorrelated product. Limited to ``n <= 4``.
    """
    if n > MAX_ASSEMBLY_N:
        raise TooLarge(f"assembly is provided for n <= {MAX_ASSEMBLY_N}")
    dec = shift_decomposition(n)
    nq = dec.n_qubits
    cz_piece = two_qubit_gadget("clifford")
    # fitted form of the derived bit of the Clifford-arm gadget
    cz_claim = cz_piece.claim.substitute({"M": _m(5, 7, 8, 9)})
    cz_piece = Gadget(cz_piece.name, cz_piece.graph, cz_claim)
    pieces = {"zrot": zrot_gadget(PI / 2), "xrot": xrot_gadget(PI / 2), "cz": cz_piece}
    ident = identity_gadget()
    acc: Gadget | None = None
    for use in dec.gadgets:
        g = pieces[use.kind]
        placed = g
        for _ in range(nq - len(use.qubits)):
            placed = tensor_gadgets(placed, ident)
        # placed qubit k -> register qubit order: used qubits first, then the rest
        rest = [q for q in range(1, nq + 1) if q not in use.qubits]
        where = [q - 1 for q in use.qubits] + [q - 1 for q in rest]
        order = [where.index(r) for r in range(nq)]
        placed = placed.permute_qubits(order)
        if acc is None:
            acc = tensor_gadgets(ident, ident)
            for _ in range(nq - 2):
                acc = tensor_gadgets(acc, ident)
        acc = compose_gadgets([acc, placed])
    return Gadget(f"shift_{n}", acc.graph, acc.claim, acc.correlation_sets, acc.unknowns)


# -- BHH repetition count --------------------------------------------------------


def bhh_repetitions(n: int, t: int, eps: float, C: float = 1.0, log_base: float = 2.0) -> int:
    """``ceil(C * ceil(log(4t))^2 * t^5 * t^3.1 * (n t + log(1/eps)))``.

    ``log_base`` defaults to 2.
    """
    if n < 1 or t < 1:
        raise ValueError("n and t must be positive integers")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if C <= 0 or log_base <= 1:
        raise ValueError("C must be positive and log_base > 1")
    lg = math.log(4 * t, log_base)
    ceil_lg = math.ceil(lg - 1e-12)
    inner = n * t + math.log(1 / eps, log_base)
    value = C * ceil_lg**2 * t**5 * t**3.1 * inner
    return math.ceil(value - 1e-9 * max(1.0, abs(value)))
