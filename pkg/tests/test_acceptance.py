"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances.

Lines are printed as each check runs and repeated in the terminal summary.
Where a literal target is unattainable the literal check is a strict xfail
and prints FAIL; the closest attainable variant prints its own line.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from helpers import line, random_graph

from mbdesigns import gadgets as G
from mbdesigns.designs import (
    L5_OPTIMAL_ANGLES,
    catalog_rows,
    cluster_frame_potential,
    design_bound,
    frame_potential,
    frame_potential_recursive,
    l5_catalog,
    l6_family_angles,
    verify_catalog_match,
)
from mbdesigns.ensemble import (
    UnitaryEnsemble,
    equal_up_to_phase,
    graph_ensemble,
    haar_moment_operator,
    linear_cluster_ensemble,
    moment_operator,
    single_qubit_branch_unitary,
)
from mbdesigns.errors import BadNeighborChoice, MBDesignError
from mbdesigns.fusion import fuse, fuse_x, postselection_check
from mbdesigns.graphstate import XY, OpenGraph, make_linear_cluster
from mbdesigns.optimize import SearchConfig, minimize_multi_angle, sweep_constant_angle
from mbdesigns.symbolic import OutcomeBitExpr, outcome_bit_rank

E = OutcomeBitExpr
Q = math.pi / 4


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_c01_convention_lock(record):
    rng = np.random.default_rng(1)
    with Timer() as clock:
        worst = 0.0
        ok = True
        for phi in rng.uniform(0, 2 * math.pi, 20):
            ens = graph_ensemble(make_linear_cluster(1, [phi]))
            for m, u in zip(ens.outcomes, ens.unitaries):
                ref = single_qubit_branch_unitary(int(m), phi)
                ok &= equal_up_to_phase(u, ref, 1e-10)
                worst = max(worst, 2 - abs(np.trace(ref.conj().T @ u)))
    ok &= clock.seconds < 1
    assert record(1, ok, "graph_ensemble on the one-edge graph equals the branch formula, 20 angles",
                  f"max 2-|tr| {worst:.1e}, {clock.seconds:.2f}s")


def test_c02_closed_form_anchors(record):
    rng = np.random.default_rng(2)
    with Timer() as clock:
        values = {
            "L=2,t=1": (cluster_frame_potential(rng.uniform(0, 6, 2).tolist(), 1), 1.0),
            "L=3,pi/4,t=2": (cluster_frame_potential([0, Q, 0], 2), 3.0),
            "L=4,pi/4,pi/4,t=2": (cluster_frame_potential([0, Q, Q, 0], 2), 9 / 4),
        }
    ok = all(abs(v - ref) <= 1e-10 for v, ref in values.values()) and clock.seconds < 1
    detail = ", ".join(f"{k}={v:.12g}" for k, (v, _) in values.items())
    assert record(2, ok, "frame potential anchors within 1e-10", f"{detail}, {clock.seconds:.2f}s")


def test_c03_exact_design(record):
    with Timer() as clock:
        f = {t: cluster_frame_potential(L5_OPTIMAL_ANGLES, t) for t in (2, 3, 4)}
    targets = {2: 2.0, 3: 5.0, 4: 14 + 14 / 27}
    ok = all(abs(f[t] - targets[t]) <= 1e-9 for t in f) and clock.seconds < 10
    assert record(3, ok, "L=5 optimal pattern: F=2, 5, 14+14/27 for t=2, 3, 4",
                  ", ".join(f"t={t}: {f[t]:.12g}" for t in f) + f", {clock.seconds:.2f}s")


def _catalog_structure():
    rows_ok = True
    for mats in catalog_rows():
        for i in range(4):
            for j in range(4):
                ip = abs(np.trace(mats[i].conj().T @ mats[j]))
                rows_ok &= ip <= 1e-12 if i != j else abs(ip - 2) <= 1e-12
    removal = []
    for row in range(8):
        kept = [u for k, r in enumerate(catalog_rows()) if k != row for u in r]
        removal.append(frame_potential(UnitaryEnsemble.uniform_from(np.array(kept)), 2))
    return rows_ok, min(removal)


def test_c04_catalog_aligned(record):
    with Timer() as clock:
        match = verify_catalog_match(linear_cluster_ensemble(L5_OPTIMAL_ANGLES), l5_catalog(), align=True)
        rows_ok, min_removed = _catalog_structure()
    ok = match.matched and rows_ok and min_removed > 2 + 1e-6 and clock.seconds < 10
    assert record(4, ok, "catalog: perfect phase matching after a fixed frame alignment, rows orthogonal, "
                         "every row needed",
                  f"matched {32 - len(match.unmatched)}/32, min F2 without a row {min_removed:.6f}, "
                  f"{clock.seconds:.2f}s")


@pytest.mark.xfail(strict=True, reason="generated set differs from the printed catalog by a fixed frame")
def test_c04_catalog_literal(record):
    match = verify_catalog_match(linear_cluster_ensemble(L5_OPTIMAL_ANGLES), l5_catalog(), align=False)
    record(4, match.matched, "catalog: literal element-wise match, no alignment",
           f"matched {32 - len(match.unmatched)}/32")
    assert match.matched


def test_c05_l6_family(record):
    rng = np.random.default_rng(5)
    with Timer() as clock:
        worst = 0.0
        for x3 in rng.uniform(0, 2 / 3, 10):
            angles = l6_family_angles(float(rng.random()), float(x3), float(rng.random()))
            worst = max(worst, abs(cluster_frame_potential(angles, 3) - 5))
    ok = worst <= 1e-8 and clock.seconds < 60
    assert record(5, ok, "L=6 family gives a 3-design for 10 sampled x3", f"max |F-5| {worst:.1e}, "
                                                                           f"{clock.seconds:.2f}s")


def test_c06_recursion_matches_direct(record):
    rng = np.random.default_rng(6)
    with Timer() as clock:
        worst = 0.0
        for L in range(3, 9):
            for t in (1, 2, 3):
                for _ in range(20):
                    a = rng.uniform(0, 2 * math.pi, L).tolist()
                    worst = max(worst, abs(frame_potential_recursive(a, t) - cluster_frame_potential(a, t)))
    ok = worst <= 1e-8 and clock.seconds < 300
    assert record(6, ok, "recursion equals direct sum, L=3..8, t=1..3, 20 vectors each",
                  f"max diff {worst:.1e}, {clock.seconds:.2f}s")


def test_c07_moment_operators(record):
    ens = linear_cluster_ensemble(L5_OPTIMAL_ANGLES)
    with Timer() as clock:
        low = max(np.max(np.abs(moment_operator(ens, t) - haar_moment_operator(t))) for t in (1, 2, 3))
        gap4 = np.linalg.norm(moment_operator(ens, 4) - haar_moment_operator(4), 2)
    ok = low <= 1e-9 and gap4 > 1e-3 and clock.seconds < 120
    assert record(7, ok, "L=5 twirl equals Haar twirl for t<=3, differs at t=4",
                  f"max entry diff t<=3 {low:.1e}, t=4 norm gap {gap4:.3f}, {clock.seconds:.2f}s")


SPLIT = OpenGraph(
    tuple(range(1, 7)),
    frozenset({(1, 2), (2, 3), (4, 5), (5, 6)}),
    (),
    (6,),
    {1: XY(0.1), 2: XY(0.2), 3: XY(0), 4: XY(0), 5: XY(0.5)},
)


def _random_cases(basis, want=10, seed=8):
    rng = np.random.default_rng(seed)
    cases = []
    while len(cases) < want:
        n = int(rng.integers(4, 8))
        g = random_graph(rng, n, outputs=(n,))
        a_set = {int(v) for v in rng.choice(np.arange(1, n), size=2, replace=False)}
        try:
            cases.append((g, fuse(g, a_set, basis)))
        except (MBDesignError, BadNeighborChoice):
            continue
    return cases


def test_c08_fusion_oracle(record):
    with Timer() as clock:
        results = {}
        for basis in ("Z", "X", "Y"):
            examples = [(SPLIT, fuse(SPLIT, {3, 4}, basis))]
            if basis != "X":
                lg = line(6, outputs=(6,))
                examples.append((lg, fuse(lg, {3, 4}, basis)))
            cases = examples + _random_cases(basis)
            results[basis] = [postselection_check(g, r)[0] for g, r in cases]
    ok = all(all(v) for v in results.values()) and clock.seconds < 300
    detail = ", ".join(f"{b}: {sum(v)}/{len(v)}" for b, v in results.items())
    assert record(8, ok, "fused ensembles equal post-selected originals (example graphs + 10 random each)",
                  f"{detail}, {clock.seconds:.2f}s")


def _rank_ok(claim):
    r = outcome_bit_rank(claim, "non_pauli")
    return r.rank == r.n_forms, r.rank


def test_c09_gadget_claims(record):
    with Timer() as clock:
        names = ["zrot", "xrot", "hadamard_naive", "hadamard_fused", "two_qubit_clifford"]
        cat = G.gadget_catalog(0.7, 0.7)
        reports = {n: G.verify_gadget(cat[n]) for n in names}
        pair = G.verify_gadget(cat["universal_pair_clifford"], mode="sampled", count=100_000, seed=1)
        forms = G.two_qubit_layout_forms(pair.claim)
        ranks = {n: _rank_ok(r.claim) for n, r in reports.items()}
        ranks["universal_pair_clifford"] = _rank_ok(pair.claim)
    ok = (
        all(r.ok and r.failed == 0 for r in reports.values())
        and pair.ok and pair.total == 100_000
        and all(v[0] for v in ranks.values())
        and clock.seconds < 600
    )
    m_two = reports["two_qubit_clifford"].fitted["M"]
    emitted = " ".join(f"{k}={v['form']}" for k, v in forms.items())
    print(f"  fitted two-qubit M = {m_two}")
    print(f"  layout forms: {emitted}")
    detail = ", ".join(f"{n} {r.passed}/{r.total}" for n, r in reports.items())
    assert record(9, ok, "gadget claims (Clifford-arm two-qubit variants), forms fitted, ranks full",
                  f"{detail}, universal_pair_clifford {pair.passed}/{pair.total} sampled seed 1, "
                  f"M={m_two}, {clock.seconds:.1f}s")


@pytest.mark.xfail(strict=True, reason="nominal arm angles leave half the branches non-unitary")
def test_c09_two_qubit_nominal_angles(record):
    r = G.verify_gadget(G.two_qubit_gadget("nominal"))
    record(9, r.ok, "two_qubit with the nominal arm angles, exhaustive",
           f"{r.passed}/{r.total}, {r.nonunitary} non-unitary branches")
    assert r.ok


@pytest.mark.xfail(strict=True, reason="nominal arm angles leave half the branches non-unitary")
def test_c09_universal_pair_nominal_angles(record):
    r = G.verify_gadget(G.universal_pair_gadget("nominal"), mode="sampled", count=100_000, seed=1)
    record(9, r.ok, "universal_pair with the nominal arm angles, 1e5 samples",
           f"{r.passed}/{r.total}, {r.nonunitary} non-unitary branches")
    assert r.ok


def test_c10_end_to_end_hadamard(record):
    with Timer() as clock:
        naive = G.hadamard_naive_gadget()
        fused = fuse_x(naive.graph, G.HADAMARD_FUSED_SET)
        nominal = G.hadamard_fused_nominal_graph()
        same_graph = fused.graph.edges == nominal.edges and set(fused.graph.vertices) == set(nominal.vertices)
        oracle, _ = postselection_check(naive.graph, fused)
        gadget = G.hadamard_fused_gadget()
        report = G.verify_gadget(gadget)
        gates = [f.gate for f in report.claim.written()]
    ok = same_graph and oracle and report.ok and gates == ["X", "Z", "H"] and clock.seconds < 60
    assert record(10, ok, "X-fusing the naive Hadamard on {2,7,10} gives the nominal fused graph, claim "
                          "X^M Z^M' H^m verified",
                  f"edges match {same_graph}, oracle {oracle}, {report.passed}/{report.total}, "
                  f"{clock.seconds:.2f}s")


def test_c11_sweep_trend(record):
    with Timer() as clock:
        pts = sweep_constant_angle(9, 2, Q, L_min=3).points
        gaps = {p.L: p.delta_f for p in pts}
        rec = {L: frame_potential_recursive([0.0] + [Q] * (L - 2) + [0.0], 2) - design_bound(2) for L in gaps}
    logs = np.log([gaps[L] for L in sorted(gaps)])
    ok = (
        bool(np.all(np.diff(logs) < 0))
        and all(abs(rec[L] - gaps[L]) <= 1e-9 for L in gaps)
        and abs(gaps[3] - 1) <= 1e-9 and abs(gaps[4] - 1 / 4) <= 1e-9 and abs(gaps[5] - 1 / 16) <= 1e-9
        and clock.seconds < 300
    )
    assert record(11, ok, "pi/4 series at t=2 strictly decreasing for L=3..9 with anchors 1, 1/4, 1/16",
                  ", ".join(f"L={L}: {gaps[L]:.6g}" for L in sorted(gaps)) + f", {clock.seconds:.2f}s")


def test_c12_optimizer(record):
    with Timer() as clock:
        a1, f52 = minimize_multi_angle(5, 2, SearchConfig(seed=11))
        a2, f63 = minimize_multi_angle(6, 3, SearchConfig(seed=11))
        again = minimize_multi_angle(6, 3, SearchConfig(seed=11, threads=4))
    ok = abs(f52 - 2) <= 1e-6 and abs(f63 - 5) <= 1e-6 and again == (a2, f63) and clock.seconds < 600
    assert record(12, ok, "multi-angle search recovers F*=2 (L=5,t=2) and F*=5 (L=6,t=3), deterministic",
                  f"{f52:.10f}, {f63:.10f}, {clock.seconds:.1f}s")
