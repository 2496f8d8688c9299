"""Frame potentials, design verdicts, the L=5 design catalog and the L=6 family.

For a qubit ensemble ``{p_i, U_i}`` the frame potential of order ``t`` is
``sum_ij p_i p_j |tr(U_i^dag U_j)|^{2t}``; it is bounded below by the Catalan
number ``(2t)! / (t! (t+1)!)`` with equality exactly for ``t``-designs.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from mbdesigns._parallel import compensated_sum, tree_sum
from mbdesigns.ensemble import (
    UnitaryEnsemble,
    linear_cluster_unitaries,
    match_operators,
)
from mbdesigns.errors import EmptyEnsemble, NumericalError, OutOfFamily, Unsupported

DEFAULT_TOL = 1e-9
ROW_BLOCK = 1024


@dataclass(frozen=True)
class DesignReport:
    t: int
    frame_potential: float
    bound: float
    gap: float
    diamond_surrogate: float
    exact: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def design_bound(t: int) -> int:
    """Catalan number ``(2t)! / (t! (t+1)!)``, the qubit Haar frame potential."""
    if t < 1 or t > 20:
        raise ValueError(f"t must lie in 1..20, got {t}")
    return math.comb(2 * t, t) // (t + 1)


def _frame_potential_arrays(u: np.ndarray, p: np.ndarray, t: int) -> float:
    n = len(u)
    flat = u.reshape(n, -1)
    blocks = []
    for lo in range(0, n, ROW_BLOCK):
        g = np.abs(flat[lo : lo + ROW_BLOCK].conj() @ flat.T) ** (2 * t)
        blocks.append(float(p[lo : lo + ROW_BLOCK] @ g @ p))
    if n >= 512:  # L >= 9 for a linear cluster
        return compensated_sum(blocks)
    return tree_sum(blocks)


def frame_potential(ensemble: UnitaryEnsemble, t: int) -> float:
    """``sum_ij p_i p_j |tr(U_i^dag U_j)|^{2t}`` computed from Gram-matrix row blocks."""
    if len(ensemble) == 0:
        raise EmptyEnsemble("frame potential of an empty ensemble")
    if t < 1 or t > 8:
        raise ValueError(f"t must lie in 1..8, got {t}")
    return _frame_potential_arrays(ensemble.unitaries, ensemble.probabilities, t)


def cluster_frame_potential(angles: Sequence[float], t: int) -> float:
    """Frame potential of the uniform linear-cluster ensemble with these angles."""
    u = linear_cluster_unitaries(angles)
    n = len(u)
    return _frame_potential_arrays(u, np.full(n, 1.0 / n), t)


def design_gap(ensemble: UnitaryEnsemble, t: int) -> float:
    return frame_potential(ensemble, t) - design_bound(t)


def diamond_norm_bound(gap: float) -> float:
    """``sqrt(gap)``; gaps slightly below zero from rounding are clamped."""
    if gap < -DEFAULT_TOL:
        raise NumericalError(f"frame potential lies below the Haar bound by {-gap:.3g}")
    return math.sqrt(max(gap, 0.0))


def is_exact_design(ensemble: UnitaryEnsemble, t: int, tol: float = DEFAULT_TOL) -> bool:
    return design_gap(ensemble, t) <= tol


def design_report(ensemble: UnitaryEnsemble, t: int, tol: float = DEFAULT_TOL) -> DesignReport:
    return report_from_potential(frame_potential(ensemble, t), t, tol)


def report_from_potential(fp: float, t: int, tol: float = DEFAULT_TOL) -> DesignReport:
    bound = design_bound(t)
    gap = fp - bound
    return DesignReport(t, fp, float(bound), gap, diamond_norm_bound(gap), gap <= tol)


# -- recursion -----------------------------------------------------------------


def _correlated_overlaps(interior: tuple[float, ...], t: int) -> float:
    """``f^t``: overlaps between branches whose first and last outcomes are 0 and 1."""
    k = len(interior) + 2
    u = linear_cluster_unitaries((0.0, *interior, 0.0))
    inner = np.arange(2 ** (k - 2))
    zeros = u[inner << 1].reshape(len(inner), -1)
    ones = u[(1 << (k - 1)) | (inner << 1) | 1].reshape(len(inner), -1)
    n = len(inner)
    diag = 0.0
    upper = []
    for lo in range(0, n, ROW_BLOCK):
        hi = min(lo + ROW_BLOCK, n)
        g = np.abs(zeros[lo:hi].conj() @ ones.T) ** (2 * t)
        rows = np.arange(lo, hi)
        diag += float(g[rows - lo, rows].sum())
        cols = np.arange(n)
        upper.append(float(np.where(cols[None, :] > rows[:, None], g, 0.0).sum()))
    return float(2 * (diag + 2 * tree_sum(upper)))


def frame_potential_recursive(angles: Sequence[float], t: int) -> float:
    """Linear-cluster frame potential from the partial recursion over cluster length.

    ``angles`` are the ``L`` measurement angles; the endpoints do not enter.
    ``F_{L+1} = [F_L(phi_2..phi_{L-1}) + F_L(phi_3..phi_L)] / 2
    - F_{L-1}(phi_3..phi_{L-1}) / 4 + 2^{-2L-1} f(phi_2..phi_L)``,
    with ``F_1 = 4^t / 2`` and ``F_2 = 4^t / 4``.
    """
    angles = [float(a) for a in angles]
    if not angles:
        raise ValueError("at least one angle is required")
    return _recursive(tuple(angles[1:-1]), int(t)) if len(angles) > 1 else 4.0**t / 2


@lru_cache(maxsize=4096)
def _recursive(interior: tuple[float, ...], t: int) -> float:
    k = len(interior) + 2  # cluster length L+1
    if k == 2:
        return 4.0**t / 4
    el = k - 1
    left = _recursive(interior[:-1], t)
    right = _recursive(interior[1:], t)
    inner = 4.0**t / 2 if el == 2 else _recursive(interior[1:-1], t)
    return 0.5 * (left + right) - 0.25 * inner + 2.0 ** (-2 * el - 1) * _correlated_overlaps(interior, t)


# -- closed forms --------------------------------------------------------------


def _big_x(phi: float) -> float:
    c2 = math.cos(phi) ** 2
    return 1 - c2 + c2 * c2


def _f3(phi: float) -> float:
    return 2 * (1 + math.cos(phi) ** 4 + math.sin(phi) ** 4)


def f5_closed_form(x2_big: float, x3: float, x4_big: float) -> float:
    """``F^2_5`` in terms of ``X_2, x_3, X_4`` (``X = 1 - x + x^2`` with ``x = cos^2``)."""
    a = 3 * (1 - 1 / x2_big) * (1 - 1 / x4_big) - 1
    return 4 * x2_big * x4_big * (x3 * x3 + a * x3 + 1)


def analytic_frame_potential(length: int, angles: Sequence[float], t: int = 2) -> float:
    """Closed-form ``t = 2`` frame potentials for clusters of length 3, 4 and 5."""
    angles = list(angles)
    if t != 2 or length not in (3, 4, 5):
        raise Unsupported(f"no closed form for L={length}, t={t}")
    if len(angles) != length:
        raise ValueError(f"expected {length} angles, got {len(angles)}")
    if length == 3:
        return _f3(angles[1])
    if length == 4:
        return _f3(angles[1]) * _f3(angles[2]) / 4
    return f5_closed_form(_big_x(angles[1]), math.cos(angles[2]) ** 2, _big_x(angles[3]))


# -- L=5 catalog ---------------------------------------------------------------


def l5_catalog() -> list[np.ndarray]:
    """The 32 unitaries of the canonical L=5 exact 3-design, in 8 rows of 4."""
    s3 = math.sqrt(3)
    wp, wm = s3 + 1, s3 - 1
    i = 1j
    rows = [
        (1.0, [[[1, 0], [0, 1]], [[0, 1], [1, 0]], [[0, i], [-i, 0]], [[-i, 0], [0, i]]]),
        (1 / math.sqrt(2), [[[1, 1], [1, -1]], [[1, -1], [1, 1]], [[i, -i], [-i, -i]], [[-i, -i], [i, -i]]]),
        (1 / s3, [[[-1, 1 + i], [1 - i, 1]], [[1 - i, 1], [-1, 1 + i]], [[1 + i, i], [i, 1 - i]],
                  [[i, 1 - i], [1 + i, i]]]),
        (1 / math.sqrt(6), [[[-i, 2 + i], [-2 + i, i]], [[-2 + i, i], [-i, 2 + i]],
                            [[-1 - 2 * i, -1], [-1, 1 - 2 * i]], [[-1, 1 - 2 * i], [-1 - 2 * i, -1]]]),
        (1 / math.sqrt(6), [[[s3 - i, -1 + i], [1 + i, s3 + i]], [[1 + i, s3 + i], [s3 - i, -1 + i]],
                            [[-1 + i, -1 + i * s3], [-1 - i * s3, 1 + i]],
                            [[-1 - i * s3, 1 + i], [-1 + i, -1 + i * s3]]]),
        (1 / math.sqrt(6), [[[1 - i * s3, -1 - i], [-1 + i, -1 - i * s3]],
                            [[-1 + i, -1 - i * s3], [1 - i * s3, -1 - i]],
                            [[-1 - i, s3 - i], [-s3 - i, -1 + i]], [[-s3 - i, -1 + i], [-1 - i, s3 - i]]]),
        (1 / math.sqrt(12), [[[wp, wm + 2 * i], [wm - 2 * i, -wp]], [[wm - 2 * i, -wp], [wp, wm + 2 * i]],
                             [[2 + i * wm, -i * wp], [-i * wp, 2 - i * wm]],
                             [[-i * wp, 2 - i * wm], [2 + i * wm, -i * wp]]]),
        (1 / math.sqrt(12), [[[-i * wm, -2 - i * wp], [2 - i * wp, i * wm]],
                             [[2 - i * wp, i * wm], [-i * wm, -2 - i * wp]],
                             [[wp + 2 * i, -wm], [-wm, -wp + 2 * i]], [[-wm, -wp + 2 * i], [wp + 2 * i, -wm]]]),
    ]
    return [scale * np.array(m, dtype=complex) for scale, mats in rows for m in mats]


def catalog_rows() -> list[list[np.ndarray]]:
    cat = l5_catalog()
    return [cat[k : k + 4] for k in range(0, 32, 4)]


L5_OPTIMAL_ANGLES = (0.0, math.pi / 4, math.acos(math.sqrt(1 / 3)), math.pi / 4, 0.0)


@dataclass
class CatalogMatch:
    """Result of matching an ensemble against a list of unitaries.

    ``assignment[i]`` is the catalog index paired with ensemble element ``i``.
    When an alignment was searched, ``left``/``right`` are the fixed unitaries
    and ``mirrored`` says whether the ensemble was complex-conjugated first:
    catalog element ``assignment[i]`` equals ``left @ f(U_i) @ right`` up to
    phase, with ``f`` the identity or complex conjugation.
    """

    matched: bool
    assignment: list[int]
    unmatched: list[int]
    left: np.ndarray | None = field(default=None, repr=False)
    right: np.ndarray | None = field(default=None, repr=False)
    mirrored: bool = False

    def to_dict(self) -> dict:
        out = {"matched": self.matched, "assignment": self.assignment, "unmatched": self.unmatched,
               "mirrored": self.mirrored, "aligned": self.left is not None}
        for name in ("left", "right"):
            m = getattr(self, name)
            if m is not None:
                out[name] = {"re": m.real.tolist(), "im": m.imag.tolist()}
        return out


def verify_catalog_match(
    ensemble: UnitaryEnsemble | np.ndarray,
    catalog: Sequence[np.ndarray] | None = None,
    tol: float = DEFAULT_TOL,
    align: bool = False,
) -> CatalogMatch:
    """Perfect phase-equivalent matching of an ensemble against a catalog.

    With ``align=False`` the elements are compared as given. With
    ``align=True`` fixed unitaries ``V, W`` (and optionally complex
    conjugation) are searched so that ``{V U_i W}`` matches; the search is
    exact, pairing rotation axes in the adjoint representation.
    """
    u = ensemble.unitaries if isinstance(ensemble, UnitaryEnsemble) else np.asarray(ensemble, dtype=complex)
    cat = np.array(l5_catalog() if catalog is None else list(catalog), dtype=complex)
    assignment, unmatched = match_operators(u, cat, tol=tol)
    if not unmatched or not align:
        return CatalogMatch(not unmatched, [] if assignment is None else assignment.tolist(), unmatched)
    for mirrored in (False, True):
        src = u.conj() if mirrored else u
        found = _find_alignment(src, cat, tol)
        if found is not None:
            v, w = found
            assignment, unmatched = match_operators(v @ src @ w, cat, tol=tol)
            return CatalogMatch(not unmatched, assignment.tolist(), unmatched, v, w, mirrored)
    return CatalogMatch(False, assignment.tolist(), unmatched)


_PAULI_VEC = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def adjoint_rotation(u: np.ndarray) -> np.ndarray:
    """``R_ij = tr(s_i U s_j U^dag) / 2``, the SO(3) image of a (stack of) unitary."""
    u = np.asarray(u, dtype=complex)
    ud = np.conj(np.swapaxes(u, -1, -2))
    conj = np.einsum("...ab,jbc,...cd->...jad", u, _PAULI_VEC, ud)
    return np.einsum("iba,...jab->...ij", _PAULI_VEC, conj).real / 2


def _axis_angle(r: np.ndarray) -> tuple[np.ndarray, float]:
    cos = np.clip((np.trace(r) - 1) / 2, -1.0, 1.0)
    vec = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return vec, float(cos)


def _rotation_to_unitary(r: np.ndarray) -> np.ndarray:
    """A unitary whose adjoint image is ``r``."""
    vec, cos = _axis_angle(r)
    theta = math.acos(cos)
    if theta < 1e-12:
        return np.eye(2, dtype=complex)
    if abs(math.pi - theta) < 1e-9:
        w, vecs = np.linalg.eigh((r + r.T) / 2)
        n = vecs[:, int(np.argmax(w))]
    else:
        n = vec / np.linalg.norm(vec)
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * np.einsum("i,iab->ab", n, _PAULI_VEC)


def _kabsch(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Proper rotation best mapping the rows of ``src`` onto ``dst``."""
    h = src.T @ dst
    uu, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ uu.T)) or 1.0
    return vt.T @ np.diag([1, 1, d]) @ uu.T


def _find_alignment(u: np.ndarray, cat: np.ndarray, tol: float):
    """Search ``V, W`` with ``{V U_i W}`` equal to ``cat`` up to phases."""
    ru = adjoint_rotation(u)
    rc = adjoint_rotation(cat)
    n = len(u)
    if n != len(cat):
        return None
    # relative rotations A_i = R_i R_0^T must be conjugate to B_l = C_l C_j^T
    a = ru @ ru[0].T
    ax = [_axis_angle(m) for m in a]
    picks = [i for i, (v, c) in enumerate(ax) if np.linalg.norm(v) > 1e-6]
    if len(picks) < 2:
        return None
    i1 = picks[0]
    i2 = next((i for i in picks[1:] if np.linalg.norm(np.cross(ax[i1][0], ax[i][0])) > 1e-6), None)
    if i2 is None:
        return None
    for j in range(n):
        b = rc @ rc[j].T
        bx = [_axis_angle(m) for m in b]
        for l1 in range(n):
            if abs(bx[l1][1] - ax[i1][1]) > 1e-7 or abs(np.linalg.norm(bx[l1][0]) - np.linalg.norm(ax[i1][0])) > 1e-7:
                continue
            for l2 in range(n):
                if abs(bx[l2][1] - ax[i2][1]) > 1e-7:
                    continue
                if abs(np.dot(bx[l1][0], bx[l2][0]) - np.dot(ax[i1][0], ax[i2][0])) > 1e-7:
                    continue
                s = np.array([ax[i1][0], ax[i2][0], np.cross(ax[i1][0], ax[i2][0])])
                d = np.array([bx[l1][0], bx[l2][0], np.cross(bx[l1][0], bx[l2][0])])
                rv = _kabsch(s, d)
                rw = ru[0].T @ rv.T @ rc[j]
                v = _rotation_to_unitary(rv)
                w = _rotation_to_unitary(rw)
                _, unmatched = match_operators(v @ u @ w, cat, tol=tol)
                if not unmatched:
                    return v, w
    return None


# -- L=6 family ----------------------------------------------------------------


def l6_family_x(x1: float, x3: float, x6: float) -> tuple[float, ...]:
    """``cos^2`` values ``(x1, 1/2, x3, (3 x3 - 2)/(3 x3 - 3), 1/2, x6)``."""
    for name, x in (("x1", x1), ("x3", x3), ("x6", x6)):
        if not 0 <= x <= 1:
            raise OutOfFamily(f"{name}={x} lies outside [0, 1]")
    if not 0 <= x3 <= 2 / 3 + 1e-15:
        raise OutOfFamily(f"x3={x3} lies outside [0, 2/3]")
    x4 = (3 * x3 - 2) / (3 * x3 - 3)
    return (x1, 0.5, x3, min(max(x4, 0.0), 1.0), 0.5, x6)


def x_to_angle(x: float) -> float:
    return math.acos(math.sqrt(min(max(x, 0.0), 1.0)))


def angle_to_x(phi: float) -> float:
    return math.cos(phi) ** 2


def l6_family_angles(x1: float, x3: float, x6: float) -> list[float]:
    """Six XY angles from the continuous family of L=6 exact 3-designs."""
    return [x_to_angle(x) for x in l6_family_x(x1, x3, x6)]


def catalog_to_json() -> str:
    return json.dumps([{"re": m.real.tolist(), "im": m.imag.tolist()} for m in l5_catalog()])


