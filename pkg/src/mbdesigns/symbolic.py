"""Symbolic induced unitaries with GF(2) outcome exponents.

An :class:`OutcomeBitExpr` is a polynomial over GF(2) in outcome bits. Gadget
claims only use affine forms, but pushing Paulis through ``CZ`` or ``H``
produces products of exponents, so the type admits higher-degree monomials.

A :class:`SymbolicUnitary` is a factor list in application order: the first
factor acts first. In operator notation (rightmost acts first) the list is
read right to left, so ``Z^a X(t)^b`` is stored as ``[X(t)^b, Z^a]``.

Variables are hashable labels. Integers name measured vertices; strings name
derived bits that are fitted from branch data (e.g. ``"M"``).
"""

from __future__ import annotations

import math
import itertools
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import gates
from .errors import Unsupported

Var = Hashable

PAULI_GATES = ("X", "Y", "Z")
ROTATION_GATES = ("RX", "RY", "RZ")
CLIFFORD_GATES = ("H", "CZ")
GATES = PAULI_GATES + ROTATION_GATES + CLIFFORD_GATES


def _var_key(v: Var):
    return (0, v, "") if isinstance(v, (int, np.integer)) else (1, 0, str(v))


def _var_name(v: Var) -> str:
    return f"m{v}" if isinstance(v, (int, np.integer)) else str(v)


# -- GF(2) expressions ---------------------------------------------------------


@dataclass(frozen=True)
class OutcomeBitExpr:
    """XOR of monomials in outcome bits; the empty monomial is the constant 1."""

    terms: frozenset[frozenset] = frozenset()

    @classmethod
    def zero(cls) -> OutcomeBitExpr:
        return cls()

    @classmethod
    def one(cls) -> OutcomeBitExpr:
        return cls(frozenset([frozenset()]))

    @classmethod
    def var(cls, v: Var) -> OutcomeBitExpr:
        return cls(frozenset([frozenset([v])]))

    @classmethod
    def affine(cls, bits: Iterable[Var] = (), const: int = 0) -> OutcomeBitExpr:
        out = cls.one() if const & 1 else cls.zero()
        for b in bits:
            out = out ^ cls.var(b)
        return out

    @classmethod
    def coerce(cls, value) -> OutcomeBitExpr:
        if isinstance(value, OutcomeBitExpr):
            return value
        if isinstance(value, (bool, int, np.integer)):
            return cls.one() if int(value) & 1 else cls.zero()
        raise TypeError(f"cannot interpret {value!r} as an outcome expression")

    def __xor__(self, other) -> OutcomeBitExpr:
        other = OutcomeBitExpr.coerce(other)
        return OutcomeBitExpr(self.terms ^ other.terms)

    __add__ = __xor__
    __rxor__ = __xor__
    __radd__ = __xor__

    def __and__(self, other) -> OutcomeBitExpr:
        other = OutcomeBitExpr.coerce(other)
        acc: set[frozenset] = set()
        for a in self.terms:
            for b in other.terms:
                acc ^= {a | b}
        return OutcomeBitExpr(frozenset(acc))

    __mul__ = __and__
    __rand__ = __and__
    __rmul__ = __and__

    def __bool__(self) -> bool:
        return bool(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def const(self) -> int:
        return int(frozenset() in self.terms)

    @property
    def degree(self) -> int:
        return max((len(t) for t in self.terms), default=0)

    @property
    def is_affine(self) -> bool:
        return self.degree <= 1

    @property
    def bits(self) -> tuple:
        """Variables of the degree-one part, sorted."""
        return tuple(sorted((next(iter(t)) for t in self.terms if len(t) == 1), key=_var_key))

    @property
    def variables(self) -> frozenset:
        return frozenset(v for t in self.terms for v in t)

    def linear_part(self) -> OutcomeBitExpr:
        return OutcomeBitExpr(frozenset(t for t in self.terms if len(t) == 1))

    def evaluate(self, assignment: Mapping[Var, int]) -> int:
        total = 0
        for t in self.terms:
            total ^= int(all(int(assignment[v]) & 1 for v in t))
        return total

    def evaluate_batch(self, columns: Mapping[Var, np.ndarray], size: int | None = None) -> np.ndarray:
        """Vectorized evaluation; ``columns`` maps each variable to a 0/1 array."""
        if size is None:
            size = len(next(iter(columns.values()))) if columns else 1
        out = np.zeros(size, dtype=np.uint8)
        for t in self.terms:
            mono = np.ones(size, dtype=np.uint8)
            for v in t:
                mono &= np.asarray(columns[v], dtype=np.uint8)
            out ^= mono
        return out

    def substitute(self, mapping: Mapping[Var, OutcomeBitExpr | int]) -> OutcomeBitExpr:
        out = OutcomeBitExpr.zero()
        for t in self.terms:
            mono = OutcomeBitExpr.one()
            for v in t:
                mono = mono & (OutcomeBitExpr.coerce(mapping[v]) if v in mapping else OutcomeBitExpr.var(v))
            out = out ^ mono
        return out

    def rename(self, mapping: Mapping[Var, Var]) -> OutcomeBitExpr:
        return self.substitute({k: OutcomeBitExpr.var(v) for k, v in mapping.items()})

    def sorted_terms(self) -> list[tuple]:
        mons = [tuple(sorted(t, key=_var_key)) for t in self.terms]
        return sorted(mons, key=lambda m: (len(m), [_var_key(v) for v in m]))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in self.sorted_terms():
            parts.append("1" if not m else "".join(_var_name(v) for v in m))
        ordered = [p for p in parts if p != "1"] + [p for p in parts if p == "1"]
        return "⊕".join(ordered)

    def __repr__(self) -> str:
        return f"OutcomeBitExpr({self})"

    def to_dict(self) -> dict:
        data: dict = {"bits": list(self.bits), "const": self.const}
        higher = [list(m) for m in self.sorted_terms() if len(m) > 1]
        if higher:
            data["monomials"] = higher
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> OutcomeBitExpr:
        out = cls.affine(data.get("bits", ()), int(data.get("const", 0)))
        for mono in data.get("monomials", ()):
            out = out ^ OutcomeBitExpr(frozenset([frozenset(mono)]))
        return out


def _e(value) -> OutcomeBitExpr:
    return OutcomeBitExpr.coerce(value)


# -- GF(2) linear algebra ------------------------------------------------------


def _row_reduce(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    a = np.array(mat, dtype=np.uint8) & 1
    pivots: list[int] = []
    row = 0
    for col in range(a.shape[1]):
        if row >= a.shape[0]:
            break
        hits = np.nonzero(a[row:, col])[0]
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        mask = a[:, col].astype(bool)
        mask[row] = False
        a[mask] ^= a[row]
        pivots.append(col)
        row += 1
    return a, pivots


def gf2_rank(mat: np.ndarray) -> int:
    mat = np.atleast_2d(np.asarray(mat))
    if mat.size == 0:
        return 0
    return len(_row_reduce(mat)[1])


def gf2_solve(a: np.ndarray, y: np.ndarray) -> np.ndarray | None:
    """One solution of ``a x = y`` over GF(2), or ``None`` if inconsistent."""
    a = np.atleast_2d(np.asarray(a, dtype=np.uint8))
    y = np.asarray(y, dtype=np.uint8).reshape(-1, 1)
    red, pivots = _row_reduce(np.hstack([a, y]))
    n = a.shape[1]
    if n in pivots:
        return None
    x = np.zeros(n, dtype=np.uint8)
    for r, col in enumerate(pivots):
        x[col] = red[r, -1]
    return x


def fit_affine(columns: Mapping[Var, np.ndarray], values: np.ndarray) -> OutcomeBitExpr | None:
    """Affine form over the given variables reproducing ``values``, if one exists."""
    names = sorted(columns, key=_var_key)
    values = np.asarray(values, dtype=np.uint8)
    cols = [np.asarray(columns[v], dtype=np.uint8) for v in names]
    a = np.column_stack(cols + [np.ones(len(values), dtype=np.uint8)]) if cols else np.ones((len(values), 1), np.uint8)
    x = gf2_solve(a, values)
    if x is None:
        return None
    return OutcomeBitExpr.affine([v for v, c in zip(names, x[:-1]) if c], int(x[-1]))


def fit_polynomial(columns: Mapping[Var, np.ndarray], values: np.ndarray, degree: int = 2) -> OutcomeBitExpr | None:
    """GF(2) polynomial of at most ``degree`` reproducing ``values``, if one exists."""
    names = sorted(columns, key=_var_key)
    values = np.asarray(values, dtype=np.uint8)
    monos: list[tuple] = []
    feats: list[np.ndarray] = []
    for k in range(degree + 1):
        for combo in itertools.combinations(names, k):
            col = np.ones(len(values), dtype=np.uint8)
            for v in combo:
                col = col & np.asarray(columns[v], dtype=np.uint8)
            monos.append(combo)
            feats.append(col)
    x = gf2_solve(np.column_stack(feats), values)
    if x is None:
        return None
    return OutcomeBitExpr(frozenset(frozenset(m) for m, c in zip(monos, x) if c))


# -- factors -------------------------------------------------------------------


def _gate_tag(gate: str, angle: float | None) -> str:
    if gate in ROTATION_GATES:
        return f"{gate[1]}(theta)"
    return gate


_TAG_ALIASES = {"Z(theta)": "RZ", "X(theta)": "RX", "Y(theta)": "RY"}


@dataclass(frozen=True)
class Factor:
    """One gate raised to a GF(2) exponent.

    Rotations carry an angle and a sign expression; the applied angle is
    ``angle * (-1)**sign``.
    """

    gate: str
    targets: tuple[int, ...]
    exponent: OutcomeBitExpr = field(default_factory=OutcomeBitExpr.one)
    angle: float | None = None
    sign: OutcomeBitExpr = field(default_factory=OutcomeBitExpr.zero)

    def __post_init__(self) -> None:
        gate = _TAG_ALIASES.get(self.gate, self.gate)
        if gate not in GATES:
            raise Unsupported(f"unknown gate tag {self.gate!r}")
        object.__setattr__(self, "gate", gate)
        targets = tuple(int(t) for t in self.targets)
        want = 2 if gate == "CZ" else 1
        if len(targets) != want or len(set(targets)) != want:
            raise Unsupported(f"gate {gate} needs {want} distinct target(s), got {targets}")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "exponent", _e(self.exponent))
        object.__setattr__(self, "sign", _e(self.sign))
        if gate in ROTATION_GATES:
            if self.angle is None or not math.isfinite(self.angle):
                raise Unsupported(f"rotation {gate} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        else:
            if self.angle is not None:
                raise Unsupported(f"gate {gate} takes no angle")
            if self.sign:
                raise Unsupported(f"gate {gate} takes no sign")

    @property
    def is_pauli(self) -> bool:
        return self.gate in PAULI_GATES

    @property
    def axis(self) -> str | None:
        if self.gate in PAULI_GATES:
            return self.gate
        if self.gate in ROTATION_GATES:
            return self.gate[1]
        return None

    @property
    def tag(self) -> str:
        return _gate_tag(self.gate, self.angle)

    def replace(self, **changes) -> Factor:
        data = {"gate": self.gate, "targets": self.targets, "exponent": self.exponent,
                "angle": self.angle, "sign": self.sign}
        data.update(changes)
        return Factor(**data)

    def matrix(self, sign: int = 0) -> np.ndarray:
        """Gate matrix on its own targets (2x2, or 4x4 for CZ)."""
        if self.gate in PAULI_GATES:
            return gates.PAULIS[self.gate]
        if self.gate == "H":
            return gates.H
        if self.gate == "CZ":
            return gates.CZ
        theta = self.angle * (-1) ** (sign & 1)
        return gates.ROTATIONS[self.gate[1]](theta)

    def __str__(self) -> str:
        name = self.gate
        if self.gate in ROTATION_GATES:
            name = f"{self.gate[1]}({self.angle:.6g})"
            if self.sign:
                name = f"{self.gate[1]}((-1)^({self.sign})·{self.angle:.6g})"
        tgt = ",".join(str(t) for t in self.targets)
        return f"{name}[{tgt}]^({self.exponent})"

    def to_dict(self) -> dict:
        data: dict = {"gate": self.tag, "targets": list(self.targets), "exponent": self.exponent.to_dict()}
        if self.angle is not None:
            data["angle"] = self.angle
        if self.sign:
            data["sign"] = self.sign.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> Factor:
        sign = OutcomeBitExpr.from_dict(data["sign"]) if "sign" in data else OutcomeBitExpr.zero()
        return cls(data["gate"], tuple(data["targets"]), OutcomeBitExpr.from_dict(data["exponent"]),
                   data.get("angle"), sign)


def pauli(name: str, qubit: int, exponent=1) -> Factor:
    return Factor(name, (qubit,), _e(exponent))


def rot(axis: str, angle: float, qubit: int, exponent=1) -> Factor:
    return Factor("R" + axis, (qubit,), _e(exponent), angle)


def hadamard(qubit: int, exponent=1) -> Factor:
    return Factor("H", (qubit,), _e(exponent))


def cz(i: int, j: int, exponent=1) -> Factor:
    return Factor("CZ", (i, j), _e(exponent))


# -- symbolic unitaries --------------------------------------------------------


def _apply_1q(u: np.ndarray, g: np.ndarray, q: int, n: int) -> np.ndarray:
    """Left-multiply batch ``u`` (N, d, d) by a one-qubit gate on qubit ``q``."""
    N, d, _ = u.shape
    t = u.reshape(N, 2**q, 2, 2 ** (n - q - 1), d)
    if g.ndim == 2:
        t = np.einsum("ab,nibjk->niajk", g, t)
    else:
        t = np.einsum("nab,nibjk->niajk", g, t)
    return t.reshape(N, d, d)


def _cz_sign(i: int, j: int, n: int) -> np.ndarray:
    idx = np.arange(2**n)
    bi = (idx >> (n - 1 - i)) & 1
    bj = (idx >> (n - 1 - j)) & 1
    return np.where(bi & bj, -1.0, 1.0)


@dataclass(frozen=True)
class SymbolicUnitary:
    """Ordered factor list in application order (first factor acts first)."""

    n_qubits: int
    factors: tuple[Factor, ...] = ()

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise Unsupported("a symbolic unitary needs at least one qubit")
        facs = tuple(self.factors)
        for f in facs:
            if not isinstance(f, Factor):
                raise TypeError(f"expected Factor, got {type(f).__name__}")
            if any(t < 0 or t >= self.n_qubits for t in f.targets):
                raise Unsupported(f"factor {f} targets a qubit outside 0..{self.n_qubits - 1}")
        object.__setattr__(self, "factors", facs)

    @classmethod
    def from_written(cls, n_qubits: int, factors: Sequence[Factor]) -> SymbolicUnitary:
        """Build from operator notation, where the rightmost factor acts first."""
        return cls(n_qubits, tuple(reversed(list(factors))))

    def written(self) -> list[Factor]:
        return list(reversed(self.factors))

    def __len__(self) -> int:
        return len(self.factors)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def variables(self) -> frozenset:
        out: set = set()
        for f in self.factors:
            out |= f.exponent.variables | f.sign.variables
        return frozenset(out)

    def then(self, other: SymbolicUnitary) -> SymbolicUnitary:
        """``other`` applied after ``self``."""
        if other.n_qubits != self.n_qubits:
            raise Unsupported("qubit counts differ")
        return SymbolicUnitary(self.n_qubits, self.factors + other.factors)

    def substitute(self, mapping: Mapping[Var, OutcomeBitExpr | int]) -> SymbolicUnitary:
        return SymbolicUnitary(self.n_qubits, tuple(
            f.replace(exponent=f.exponent.substitute(mapping), sign=f.sign.substitute(mapping))
            for f in self.factors))

    def rename(self, mapping: Mapping[Var, Var]) -> SymbolicUnitary:
        return self.substitute({k: OutcomeBitExpr.var(v) for k, v in mapping.items()})

    def remap_qubits(self, mapping: Mapping[int, int], n_qubits: int | None = None) -> SymbolicUnitary:
        n = self.n_qubits if n_qubits is None else n_qubits
        return SymbolicUnitary(n, tuple(f.replace(targets=tuple(mapping[t] for t in f.targets))
                                        for f in self.factors))

    def simplified(self) -> SymbolicUnitary:
        """Drop factors whose exponent is identically zero."""
        return SymbolicUnitary(self.n_qubits, tuple(f for f in self.factors if not f.exponent.is_zero))

    def evaluate(self, assignment: Mapping[Var, int]) -> np.ndarray:
        cols = {v: np.array([int(assignment[v]) & 1], dtype=np.uint8) for v in self.variables}
        return self.evaluate_batch(cols, 1)[0]

    def evaluate_batch(self, columns: Mapping[Var, np.ndarray], size: int | None = None) -> np.ndarray:
        """Matrices for a batch of assignments, shape ``(N, d, d)``."""
        if size is None:
            size = len(next(iter(columns.values()))) if columns else 1
        n, d = self.n_qubits, self.dim
        u = np.broadcast_to(np.eye(d, dtype=complex), (size, d, d)).copy()
        for f in self.factors:
            on = f.exponent.evaluate_batch(columns, size).astype(bool)
            if not on.any():
                continue
            if f.gate == "CZ":
                s = _cz_sign(*f.targets, n)
                u[on] = s[None, :, None] * u[on]
                continue
            if f.gate in ROTATION_GATES:
                sgn = f.sign.evaluate_batch(columns, size)[on]
                theta = f.angle * (1.0 - 2.0 * sgn)
                g = gates.ROTATIONS_BATCH[f.gate[1]](theta)
            else:
                g = f.matrix()
            u[on] = _apply_1q(u[on], g, f.targets[0], n)
        return u

    def __str__(self) -> str:
        return " · ".join(str(f) for f in self.written()) or "I"

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "order": "application",
                "factors": [f.to_dict() for f in self.factors]}

    @classmethod
    def from_dict(cls, data: Mapping) -> SymbolicUnitary:
        facs = tuple(Factor.from_dict(f) for f in data["factors"])
        if data.get("order", "application") == "written":
            facs = tuple(reversed(facs))
        return cls(int(data["n_qubits"]), facs)


# -- Pauli push-through ----------------------------------------------------------


def _conjugate(g: Factor, p: Factor, paulis_first: bool) -> list[Factor]:
    """Factors (application order) equal to ``P^a G^e P^a`` up to phase."""
    a, e = p.exponent, g.exponent
    q = p.targets[0]
    if q not in g.targets:
        return [g]
    if g.gate in PAULI_GATES:
        return [g]
    if g.gate in ROTATION_GATES:
        if p.gate == g.axis:
            return [g]
        return [g.replace(sign=g.sign ^ a)]
    if g.gate == "H":
        if p.gate == "Y":
            return [g]
        ae = a & e
        extra = [pauli("X", q, ae), pauli("Z", q, ae)]
        return extra + [g] if paulis_first else [g] + extra
    # CZ: only the X part of P picks up a Z on the partner qubit
    if p.gate == "Z":
        return [g]
    other = g.targets[1] if g.targets[0] == q else g.targets[0]
    extra = [pauli("Z", other, a & e)]
    return extra + [g] if paulis_first else [g] + extra


def _fold_clifford_sign(f: Factor) -> list[Factor] | None:
    """Rewrite ``R(-t)`` as ``R(t)`` times a Pauli when ``t`` is an odd multiple of pi/2."""
    if f.gate not in ROTATION_GATES or not f.sign:
        return None
    k = f.angle / (math.pi / 2)
    if abs(k - round(k)) > 1e-12 or round(k) % 2 == 0:
        return None
    return [f.replace(sign=OutcomeBitExpr.zero()), pauli(f.axis, f.targets[0], f.exponent & f.sign)]


def pauli_pushthrough(symbolic: SymbolicUnitary, side: str = "first", fold_clifford: bool = False) -> SymbolicUnitary:
    """Move every Pauli factor to one end of the factor list.

    ``side="first"`` collects Paulis at the start of the list (they act
    first), so in operator notation they sit on the right:
    ``Z X(t)`` becomes ``X(-t) Z``. ``side="last"`` collects them at the end
    (operator left). Rotations pick up sign expressions and ``H``/``CZ``
    generate extra Paulis with product exponents. With ``fold_clifford`` a
    sign-flipped rotation by an odd multiple of pi/2 is rewritten as the
    unflipped rotation times a Pauli, keeping all angles positive.
    """
    if side not in ("first", "last"):
        raise ValueError("side must be 'first' or 'last'")
    facs = list(symbolic.factors)
    for f in facs:
        if f.gate not in GATES:
            raise Unsupported(f"unknown gate {f.gate}")
    first = side == "first"
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(facs) - 1:
            left, right = facs[i], facs[i + 1]
            if first and not left.is_pauli and right.is_pauli:
                facs[i:i + 2] = [right] + _conjugate(left, right, paulis_first=True)
                changed = True
            elif not first and left.is_pauli and not right.is_pauli:
                facs[i:i + 2] = _conjugate(right, left, paulis_first=False) + [left]
                changed = True
            if fold_clifford:
                for k in (i, i + 1):
                    if k < len(facs):
                        folded = _fold_clifford_sign(facs[k])
                        if folded is not None:
                            facs[k:k + 1] = folded
                            changed = True
            i += 1
    out = [f for f in facs if not f.exponent.is_zero]
    return SymbolicUnitary(symbolic.n_qubits, tuple(out))


def merge_paulis(symbolic: SymbolicUnitary) -> SymbolicUnitary:
    """Combine each run of adjacent Pauli factors into one X and one Z per qubit.

    ``Y`` is split as ``X Z``; reordering inside a run only changes the phase.
    """
    out: list[Factor] = []
    run: list[Factor] = []

    def flush() -> None:
        xs: dict[int, OutcomeBitExpr] = {}
        zs: dict[int, OutcomeBitExpr] = {}
        for f in run:
            q = f.targets[0]
            if f.gate in ("X", "Y"):
                xs[q] = xs.get(q, OutcomeBitExpr.zero()) ^ f.exponent
            if f.gate in ("Z", "Y"):
                zs[q] = zs.get(q, OutcomeBitExpr.zero()) ^ f.exponent
        for q in sorted(set(xs) | set(zs)):
            if q in zs and zs[q]:
                out.append(pauli("Z", q, zs[q]))
            if q in xs and xs[q]:
                out.append(pauli("X", q, xs[q]))
        run.clear()

    for f in symbolic.factors:
        if f.is_pauli:
            run.append(f)
        else:
            flush()
            out.append(f)
    flush()
    return SymbolicUnitary(symbolic.n_qubits, tuple(out))


# -- rank ------------------------------------------------------------------------


@dataclass(frozen=True)
class RankReport:
    """GF(2) rank of the distinct linear parts of selected exponents."""

    selection: str
    forms: tuple[OutcomeBitExpr, ...]
    variables: tuple
    rank: int
    affine: bool

    @property
    def n_forms(self) -> int:
        return len(self.forms)

    @property
    def uniform(self) -> bool:
        """Full rank: the derived bits are jointly uniform for uniform outcomes."""
        return self.affine and self.rank == self.n_forms

    def to_dict(self) -> dict:
        return {"selection": self.selection, "forms": [str(f) for f in self.forms],
                "variables": [_var_name(v) for v in self.variables], "rank": self.rank,
                "n_forms": self.n_forms, "uniform": self.uniform, "affine": self.affine}


def outcome_bit_rank(symbolic: SymbolicUnitary, selection: str = "all") -> RankReport:
    """Rank of the exponents' linear parts.

    ``selection`` is ``"all"``, ``"pauli"`` or ``"non_pauli"`` (rotations,
    ``H`` and ``CZ``). Forms are deduplicated after dropping constants, and
    constant-only forms are ignored.
    """
    if selection == "all":
        chosen = symbolic.factors
    elif selection == "pauli":
        chosen = [f for f in symbolic.factors if f.is_pauli]
    elif selection == "non_pauli":
        chosen = [f for f in symbolic.factors if not f.is_pauli]
    else:
        raise ValueError(f"unknown selection {selection!r}")
    affine = all(f.exponent.is_affine for f in chosen)
    forms: list[OutcomeBitExpr] = []
    for f in chosen:
        lin = f.exponent.linear_part()
        if lin and lin not in forms:
            forms.append(lin)
    variables = tuple(sorted({v for f in forms for v in f.variables}, key=_var_key))
    col = {v: k for k, v in enumerate(variables)}
    mat = np.zeros((len(forms), len(variables)), dtype=np.uint8)
    for r, f in enumerate(forms):
        for v in f.bits:
            mat[r, col[v]] = 1
    return RankReport(selection, tuple(forms), variables, gf2_rank(mat) if forms else 0, affine)


def layered(symbolic: SymbolicUnitary) -> list[list[Factor]]:
    """Group factors into alternating non-Pauli (odd) and Pauli (even) stages.

    Each factor lands in the earliest stage of its parity that is not before
    any earlier factor sharing a qubit. Factors on disjoint qubits commute, so
    concatenating the stages reproduces the same operator. Stage 0 holds
    Paulis acting before any non-Pauli gate.
    """
    stage_of: list[int] = []
    last: dict[int, int] = {}
    for f in symbolic.factors:
        base = max((last[q] for q in f.targets if q in last), default=0)
        want = 0 if f.is_pauli else 1
        s = base if base % 2 == want else base + 1
        stage_of.append(s)
        for q in f.targets:
            last[q] = s
    if not stage_of:
        return []
    stages: list[list[Factor]] = [[] for _ in range(max(stage_of) + 1)]
    for f, s in zip(symbolic.factors, stage_of):
        stages[s].append(f)
    return stages


def layered_form(symbolic: SymbolicUnitary) -> SymbolicUnitary:
    """Stage-ordered copy with each Pauli stage merged to one X and Z per qubit."""
    facs: list[Factor] = []
    for k, stage in enumerate(layered(symbolic)):
        if k % 2 == 0:
            facs.extend(merge_paulis(SymbolicUnitary(symbolic.n_qubits, tuple(stage))).factors)
        else:
            facs.extend(stage)
    return SymbolicUnitary(symbolic.n_qubits, tuple(facs))
