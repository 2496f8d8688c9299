from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mbdesigns.designs import cluster_frame_potential, design_bound
from mbdesigns.optimize import (
    DIRECT_MAX_LENGTH,
    MULTI_MAX_LENGTH,
    RECURSION_MAX_LENGTH,
    SearchConfig,
    SweepCurve,
    SweepPoint,
    cluster_potential,
    coordinate_descent,
    golden_section,
    minimize_multi_angle,
    minimize_single_angle,
    resolve_threads,
    sweep,
    sweep_constant_angle,
)

FAST = SearchConfig(restarts=4, seed=1)


class TestObjective:
    def test_direct_and_recursive_agree_at_switch(self, rng):
        a = rng.uniform(0, 2 * math.pi, DIRECT_MAX_LENGTH + 1).tolist()
        direct = cluster_frame_potential(a, 2)
        assert cluster_potential(a, 2) == pytest.approx(direct, rel=1e-10)

    def test_length_limit(self):
        with pytest.raises(ValueError):
            cluster_potential([0.0] * (RECURSION_MAX_LENGTH + 1), 2)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SearchConfig(restarts=0)
        with pytest.raises(ValueError):
            SearchConfig(coord_tol=0)


class TestLineSearch:
    @given(st.floats(0.05, 0.95))
    def test_golden_section_finds_parabola_minimum(self, c):
        x, fx = golden_section(lambda v: (v - c) ** 2, 0.0, 1.0, 1e-10)
        assert x == pytest.approx(c, abs=1e-6)
        assert fx == pytest.approx(0, abs=1e-10)

    def test_coordinate_descent_separable(self):
        xs, fx = coordinate_descent(lambda v: (v[0] - 0.3) ** 2 + (v[1] - 0.8) ** 2, [0.5, 0.5], FAST)
        assert xs == pytest.approx((0.3, 0.8), abs=1e-6)
        assert fx == pytest.approx(0, abs=1e-10)


class TestSweeps:
    def test_pi4_anchors(self):
        s = sweep_constant_angle(5, 2).series(2, "pi4")
        gaps = {p.L: p.delta_f for p in s}
        assert gaps[3] == pytest.approx(1, abs=1e-9)
        assert gaps[4] == pytest.approx(1 / 4, abs=1e-9)
        assert gaps[5] == pytest.approx(1 / 16, abs=1e-9)

    def test_pi4_strictly_decreasing(self):
        gaps = [p.delta_f for p in sweep_constant_angle(9, 2, L_min=3).points]
        assert all(np.diff(np.log(gaps)) < 0)

    def test_recursion_path(self):
        gaps = [p.delta_f for p in sweep_constant_angle(12, 2, L_min=9).points]
        assert all(np.diff(gaps) < 0)

    def test_single_minimum(self):
        phi, f = minimize_single_angle(5, 2, FAST)
        assert f >= design_bound(2) - 1e-12
        assert cluster_potential([0, phi, phi, phi, 0], 2) == pytest.approx(f)

    @pytest.mark.parametrize("L, t, target", [(5, 2, 2.0), (6, 3, 5.0)])
    def test_multi_recovers_designs(self, L, t, target):
        angles, f = minimize_multi_angle(L, t, FAST)
        assert f == pytest.approx(target, abs=1e-6)
        assert cluster_potential(angles, t) == pytest.approx(f, abs=1e-12)

    def test_multi_length_limit(self):
        with pytest.raises(ValueError):
            minimize_multi_angle(MULTI_MAX_LENGTH + 1, 2)

    @pytest.mark.parametrize("t", [2, 3])
    def test_dominance(self, t):
        c = sweep(6, t, ("pi4", "single_min", "multi_min"), FAST, L_min=2)
        pi4 = c.series(t, "pi4")
        single = c.series(t, "single_min")
        multi = c.series(t, "multi_min")
        for a, b, m in zip(pi4, single, multi):
            assert b.delta_f <= a.delta_f + 1e-9
            assert m.delta_f <= b.delta_f + 1e-9

    def test_deterministic_under_seed(self):
        a = minimize_multi_angle(6, 2, SearchConfig(restarts=6, seed=7, threads=1))
        b = minimize_multi_angle(6, 2, SearchConfig(restarts=6, seed=7, threads=4))
        assert a == b

    def test_sweep_csv_independent_of_threads(self):
        cfg = dict(restarts=4, seed=2)
        a = sweep(6, 2, ("single_min", "multi_min"), SearchConfig(threads=1, **cfg)).to_csv()
        b = sweep(6, 2, ("single_min", "multi_min"), SearchConfig(threads=3, **cfg)).to_csv()
        assert a == b

    def test_unknown_pattern(self):
        with pytest.raises(ValueError):
            sweep(4, 2, ("best",))


class TestCurve:
    def test_csv_round_trip(self, tmp_path):
        c = sweep_constant_angle(7, 3)
        path = tmp_path / "c.csv"
        c.write_csv(path)
        back = SweepCurve.from_csv(path.read_text())
        assert [(p.L, p.t, p.pattern, p.delta_f) for p in back.points] == [
            (p.L, p.t, p.pattern, p.delta_f) for p in c.points
        ]

    def test_header(self):
        assert sweep_constant_angle(3, 2).to_csv().splitlines()[0] == "L,t,pattern,delta_f"

    def test_rejects_negative_gap(self):
        with pytest.raises(ValueError):
            SweepCurve().add(SweepPoint(3, 2, "pi4", -0.1))

    def test_rejects_non_increasing_length(self):
        c = SweepCurve()
        c.add(SweepPoint(3, 2, "pi4", 1.0))
        with pytest.raises(ValueError):
            c.add(SweepPoint(3, 2, "pi4", 0.5))
        c.add(SweepPoint(3, 3, "pi4", 0.5))

    def test_rejects_unknown_pattern(self):
        with pytest.raises(ValueError):
            SweepCurve().add(SweepPoint(3, 2, "random", 1.0))


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("MBQC_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(0) == 1
    monkeypatch.delenv("MBQC_THREADS")
    assert resolve_threads(None) == 1
