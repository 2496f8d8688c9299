from __future__ import annotations

import json

import pytest

from mbdesigns.cli import main, run
from mbdesigns.designs import L5_OPTIMAL_ANGLES
from mbdesigns.graphstate import OpenGraph, XY, make_linear_cluster


@pytest.fixture
def l5_file(tmp_path):
    path = tmp_path / "l5.json"
    path.write_text(make_linear_cluster(5, list(L5_OPTIMAL_ANGLES)).to_json())
    return str(path)


@pytest.fixture
def split_file(tmp_path):
    g = OpenGraph(tuple(range(1, 7)), frozenset({(1, 2), (2, 3), (4, 5), (5, 6)}), (), (6,),
                  {1: XY(0.1), 2: XY(0.2), 3: XY(0), 4: XY(0), 5: XY(0.5)})
    path = tmp_path / "split.json"
    path.write_text(g.to_json())
    return str(path)


def _json(result):
    return json.loads(result.stdout)


class TestFp:
    def test_pi4(self):
        r = run(["fp", "--length", "3", "--pattern", "pi4", "--t", "2"])
        assert r.exit_code == 0
        assert _json(r)["frame_potential"] == pytest.approx(3, abs=1e-10)

    def test_angles(self):
        r = run(["fp", "--length", "5", "--angles", ",".join(map(str, L5_OPTIMAL_ANGLES)), "--t", "3"])
        d = _json(r)
        assert d["exact"] and d["frame_potential"] == pytest.approx(5, abs=1e-9)

    def test_degrees_rejected(self):
        r = run(["fp", "--length", "2", "--angles", "0,45", "--degrees", "--t", "2"])
        assert r.exit_code == 2 and "radians" in r.stderr

    def test_angle_count(self):
        assert run(["fp", "--length", "3", "--angles", "0,1", "--t", "2"]).exit_code == 2

    def test_bad_t(self):
        assert run(["fp", "--length", "3", "--pattern", "pi4", "--t", "0"]).exit_code == 2

    def test_missing_arguments(self):
        assert run(["fp", "--length", "3", "--t", "2"]).exit_code == 2
        assert run([]).exit_code == 2


class TestEnsemble:
    def test_linear(self):
        d = _json(run(["ensemble", "--length", "2", "--angles", "0,0.5"]))
        assert d["d"] == 2 and len(d["elements"]) == 4

    def test_graph(self, l5_file):
        d = _json(run(["ensemble", "--graph", l5_file]))
        assert len(d["elements"]) == 32

    def test_threads_do_not_change_output(self, l5_file):
        a = run(["ensemble", "--graph", l5_file, "--threads", "1"]).stdout
        b = run(["ensemble", "--graph", l5_file, "--threads", "3"]).stdout
        assert a == b


class TestVerify:
    def test_design(self, l5_file):
        r = run(["verify", "--graph", l5_file, "--t", "3"])
        assert r.exit_code == 0 and _json(r)["exact"]

    def test_not_a_design(self, l5_file):
        r = run(["verify", "--graph", l5_file, "--t", "4"])
        assert r.exit_code == 1
        assert _json(r)["gap"] == pytest.approx(14 / 27, abs=1e-9)

    def test_catalog(self):
        r = run(["verify", "--catalog"])
        assert r.exit_code == 0 and _json(r)["n_matched"] == 32

    def test_catalog_literal_fails(self):
        assert run(["verify", "--catalog", "--literal"]).exit_code == 1

    def test_missing_file(self, tmp_path):
        r = run(["verify", "--graph", str(tmp_path / "none.json"), "--t", "2"])
        assert r.exit_code == 2 and "cannot read" in r.stderr

    def test_malformed_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert run(["verify", "--graph", str(p), "--t", "2"]).exit_code == 2


class TestFuse:
    @pytest.mark.parametrize("basis", ["x", "y", "z"])
    def test_check(self, split_file, basis):
        r = run(["fuse", "--graph", split_file, "--set", "3,4", "--basis", basis, "--check"])
        assert r.exit_code == 0
        assert _json(r)["check"]["ok"]

    def test_output_file(self, split_file, tmp_path):
        out = tmp_path / "fused.json"
        assert run(["fuse", "--graph", split_file, "--set", "3,4", "--basis", "X", "--out", str(out)]).exit_code == 0
        g = OpenGraph.from_json(out.read_text())
        assert g.edges == frozenset({(1, 7), (2, 7), (5, 7), (6, 7)})

    def test_output_vertex_rejected(self, split_file):
        r = run(["fuse", "--graph", split_file, "--set", "6", "--basis", "z"])
        assert r.exit_code == 2 and r.stderr


class TestGadget:
    def test_list(self):
        d = _json(run(["gadget", "list"]))
        assert {"zrot", "hadamard_fused", "two_qubit_clifford"} <= set(d)

    def test_verify_pass(self):
        r = run(["gadget", "verify", "hadamard_naive"])
        assert r.exit_code == 0 and _json(r)["passed"] == 4096

    def test_verify_fail(self):
        r = run(["gadget", "verify", "two_qubit"])
        assert r.exit_code == 1 and not _json(r)["ok"]

    def test_sampled(self):
        r = run(["gadget", "verify", "universal_pair_clifford", "--mode", "sampled", "--count", "500", "--seed", "4"])
        d = _json(r)
        assert r.exit_code == 0 and d["seed"] == 4 and d["total"] == 500

    def test_sampled_needs_seed(self):
        r = run(["gadget", "verify", "zrot", "--mode", "sampled", "--count", "5"])
        assert r.exit_code == 2 and "--seed" in r.stderr


class TestSweep:
    def test_pi4(self, tmp_path):
        out = tmp_path / "s.csv"
        r = run(["sweep", "--t", "2", "--lmin", "3", "--lmax", "5", "--out", str(out)])
        assert r.exit_code == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "L,t,pattern,delta_f" and len(rows) == 4
        assert float(rows[3].split(",")[3]) == pytest.approx(1 / 16, abs=1e-9)

    def test_threads_byte_identical(self, tmp_path):
        texts = []
        for threads in ("1", "4"):
            out = tmp_path / f"s{threads}.csv"
            args = ["sweep", "--t", "2", "--lmax", "6", "--patterns", "pi4,single,multi", "--seed", "3",
                    "--restarts", "4", "--out", str(out), "--threads", threads]
            assert run(args).exit_code == 0
            texts.append(out.read_bytes())
        assert texts[0] == texts[1]

    def test_env_threads(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MBQC_THREADS", "2")
        out = tmp_path / "s.csv"
        assert run(["sweep", "--t", "2", "--lmax", "4", "--out", str(out)]).exit_code == 0

    def test_multi_needs_seed(self, tmp_path):
        r = run(["sweep", "--t", "2", "--lmax", "5", "--patterns", "multi", "--out", str(tmp_path / "s.csv")])
        assert r.exit_code == 2

    def test_unknown_pattern(self, tmp_path):
        r = run(["sweep", "--t", "2", "--lmax", "5", "--patterns", "best", "--out", str(tmp_path / "s.csv")])
        assert r.exit_code == 2

    def test_length_range(self, tmp_path):
        r = run(["sweep", "--t", "2", "--lmax", "40", "--out", str(tmp_path / "s.csv")])
        assert r.exit_code == 2

    def test_bad_threads(self, tmp_path):
        r = run(["sweep", "--t", "2", "--lmax", "4", "--out", str(tmp_path / "s.csv"), "--threads", "0"])
        assert r.exit_code == 2


class TestBhh:
    def test_value(self):
        assert _json(run(["bhh-size", "--n", "2", "--t", "1", "--eps", "0.5"]))["repetitions"] == 12

    def test_invalid_eps(self):
        assert run(["bhh-size", "--n", "2", "--t", "1", "--eps", "0"]).exit_code == 2


def test_main_prints(capsys):
    assert main(["bhh-size", "--n", "1", "--t", "1", "--eps", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["repetitions"] == 4


def test_help():
    r = run(["--help"])
    assert r.exit_code == 0 and "sweep" in r.stdout
