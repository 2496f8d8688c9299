"""Angle searches that minimize linear-cluster frame potentials.

Interior angles are parameterized by ``x = cos^2(phi)`` on ``[0, 1]``. Endpoint
angles do not affect the frame potential and are fixed at 0.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from ._parallel import default_threads, ordered_map
from .designs import cluster_frame_potential, design_bound, frame_potential_recursive, x_to_angle

DIRECT_MAX_LENGTH = 9
MULTI_MAX_LENGTH = 12
RECURSION_MAX_LENGTH = 16
PATTERNS = ("pi4", "single_min", "multi_min")
INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the single- and multi-angle searches."""

    restarts: int = 32
    seed: int = 0
    coord_tol: float = 1e-10
    max_iter: int = 200
    f_tol: float = 1e-12
    grid: int = 9
    threads: int | None = None

    def __post_init__(self) -> None:
        for name in ("restarts", "max_iter", "grid"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("coord_tol", "f_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


# -- objective -----------------------------------------------------------------


def interior_to_angles(xs: Sequence[float]) -> list[float]:
    return [0.0, *(x_to_angle(x) for x in xs), 0.0]


def cluster_potential(angles: Sequence[float], t: int) -> float:
    """Direct sum up to length 9, the recursion beyond."""
    L = len(angles)
    if L <= DIRECT_MAX_LENGTH:
        return cluster_frame_potential(angles, t)
    if L > RECURSION_MAX_LENGTH:
        raise ValueError(f"length {L} exceeds {RECURSION_MAX_LENGTH}")
    return frame_potential_recursive(angles, t)


def _objective(L: int, t: int, xs: Sequence[float]) -> float:
    if L == 1:
        return cluster_potential([0.0], t)
    return cluster_potential(interior_to_angles(xs), t)


# -- curves --------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    L: int
    t: int
    pattern: str
    delta_f: float
    angles: tuple[float, ...] = ()


@dataclass
class SweepCurve:
    points: list[SweepPoint] = field(default_factory=list)

    def add(self, point: SweepPoint) -> None:
        if point.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {point.pattern!r}")
        if point.delta_f < -1e-9:
            raise ValueError(f"negative design gap {point.delta_f} at L={point.L}")
        prior = [p.L for p in self.points if p.t == point.t and p.pattern == point.pattern]
        if prior and point.L <= max(prior):
            raise ValueError("L must increase within a (t, pattern) series")
        self.points.append(point)

    def series(self, t: int, pattern: str) -> list[SweepPoint]:
        return [p for p in self.points if p.t == t and p.pattern == pattern]

    def extend(self, other: SweepCurve) -> None:
        for p in other.points:
            self.add(p)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["L", "t", "pattern", "delta_f"])
        for p in self.points:
            w.writerow([p.L, p.t, p.pattern, f"{p.delta_f:.17g}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> SweepCurve:
        curve = cls()
        for row in csv.DictReader(io.StringIO(text)):
            curve.add(SweepPoint(int(row["L"]), int(row["t"]), row["pattern"], float(row["delta_f"])))
        return curve


def sweep_constant_angle(L_max: int, t: int, phi: float = math.pi / 4, L_min: int = 2) -> SweepCurve:
    """Design gap with every interior angle equal to ``phi``."""
    curve = SweepCurve()
    bound = design_bound(t)
    x = math.cos(phi) ** 2
    for L in range(max(1, L_min), L_max + 1):
        xs = [x] * max(0, L - 2)
        fp = _objective(L, t, xs)
        curve.add(SweepPoint(L, t, "pi4", fp - bound, tuple(interior_to_angles(xs)) if L > 1 else (0.0,)))
    return curve


# -- one-dimensional search ----------------------------------------------------


def golden_section(f, lo: float, hi: float, tol: float, max_iter: int = 200) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    best = min(((fc, c), (fd, d), (f(a), a), (f(b), b)))
    return best[1], best[0]


def _line_min(f, grid: int, tol: float, max_iter: int, extra: Iterable[float] = ()) -> tuple[float, float]:
    """Grid bracketing on ``[0, 1]`` then golden-section refinement."""
    pts = sorted(set(np.linspace(0.0, 1.0, grid + 1).tolist()) | set(extra))
    vals = [f(x) for x in pts]
    best_x, best_f = min(zip(pts, vals), key=lambda p: (p[1], p[0]))
    k = pts.index(best_x)
    lo, hi = pts[max(0, k - 1)], pts[min(len(pts) - 1, k + 1)]
    x, fx = golden_section(f, lo, hi, tol, max_iter)
    if (fx, x) < (best_f, best_x):
        return x, fx
    return best_x, best_f


def minimize_single_angle(L: int, t: int, config: SearchConfig | None = None) -> tuple[float, float]:
    """Best common interior angle; returns ``(phi, F)``.

    ``[0, 1]`` is split into ``config.restarts`` subintervals, each searched by
    golden section; ``x = 1/2`` is always evaluated.
    """
    config = config or SearchConfig()
    if L < 1:
        raise ValueError("L must be positive")
    if L <= 2:
        return math.pi / 4, _objective(L, t, [])

    def f(x: float) -> float:
        return _objective(L, t, [x] * (L - 2))

    edges = np.linspace(0.0, 1.0, config.restarts + 1)

    def search(k: int) -> tuple[float, float]:
        x, fx = golden_section(f, float(edges[k]), float(edges[k + 1]), config.coord_tol, config.max_iter)
        return fx, x

    results = ordered_map(search, list(range(config.restarts)), config.threads)
    results.append((f(0.5), 0.5))
    fx, x = min(results)
    return x_to_angle(x), fx


# -- multi-angle search --------------------------------------------------------


def _starts(n: int, config: SearchConfig, seeds: Sequence[Sequence[float]]) -> list[tuple[float, ...]]:
    starts = [tuple(float(v) for v in s) for s in seeds]
    extra = max(0, config.restarts - len(starts))
    if extra:
        lattice = qmc.Halton(d=n, scramble=True, seed=config.seed).random(extra)
        starts.extend(tuple(float(v) for v in row) for row in lattice)
    return starts


def _known_seeds(n: int) -> list[list[float]]:
    half = [0.5] * n
    alt = [0.5, 1 / 3, 0.5] + [0.5] * max(0, n - 3)
    return [half, alt[:n]]


def coordinate_descent(f, x0: Sequence[float], config: SearchConfig) -> tuple[tuple[float, ...], float]:
    x = list(x0)
    fx = f(x)
    for _ in range(config.max_iter):
        prev = fx
        for i in range(len(x)):
            def line(v: float, i: int = i) -> float:
                y = list(x)
                y[i] = v
                return f(y)

            xi, fi = _line_min(line, config.grid, config.coord_tol, config.max_iter, extra=(x[i],))
            if fi <= fx:
                x[i], fx = xi, fi
        if prev - fx < config.f_tol:
            break
    return tuple(x), fx


def minimize_multi_angle(L: int, t: int, config: SearchConfig | None = None) -> tuple[list[float], float]:
    """Multi-start coordinate descent over ``x_2..x_{L-1}``.

    Starts are the constant-1/2 point, the ``(1/2, 1/3, 1/2, ...)`` point, the
    best single-angle point and a scrambled Halton lattice. The winner is the
    smallest ``(F, x)`` pair, so the result does not depend on thread count.
    """
    config = config or SearchConfig()
    if L < 1:
        raise ValueError("L must be positive")
    if L <= 2:
        return ([0.0] * L), _objective(L, t, [])
    if L > MULTI_MAX_LENGTH:
        raise ValueError(f"multi-angle search supports L <= {MULTI_MAX_LENGTH}")
    n = L - 2
    phi, _ = minimize_single_angle(L, t, config)
    seeds = _known_seeds(n) + [[math.cos(phi) ** 2] * n]

    def f(xs: Sequence[float]) -> float:
        return _objective(L, t, xs)

    def run(x0: tuple[float, ...]) -> tuple[float, tuple[float, ...]]:
        xs, fx = coordinate_descent(f, x0, config)
        return fx, xs

    results = ordered_map(run, _starts(n, config, seeds), config.threads)
    fx, xs = min(results)
    return interior_to_angles(xs), fx


def sweep(
    L_max: int,
    t: int,
    patterns: Sequence[str] = ("pi4",),
    config: SearchConfig | None = None,
    L_min: int = 2,
) -> SweepCurve:
    """Design-gap curves for the requested patterns, series by series."""
    config = config or SearchConfig()
    bound = design_bound(t)
    curve = SweepCurve()
    for pattern in patterns:
        if pattern == "pi4":
            curve.extend(sweep_constant_angle(L_max, t, math.pi / 4, L_min))
        elif pattern == "single_min":
            for L in range(max(1, L_min), L_max + 1):
                phi, fx = minimize_single_angle(L, t, config)
                curve.add(SweepPoint(L, t, pattern, fx - bound, tuple([0.0] + [phi] * max(0, L - 2) + [0.0])))
        elif pattern == "multi_min":
            for L in range(max(1, L_min), L_max + 1):
                angles, fx = minimize_multi_angle(L, t, config)
                curve.add(SweepPoint(L, t, pattern, fx - bound, tuple(angles)))
        else:
            raise ValueError(f"unknown pattern {pattern!r}")
    return curve


def resolve_threads(threads: int | None) -> int:
    return default_threads() if threads is None else max(1, int(threads))
