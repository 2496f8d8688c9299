from __future__ import annotations

import math

import numpy as np
import pytest
from helpers import random_graph
from hypothesis import given
from hypothesis import strategies as st

from mbdesigns import gates
from mbdesigns.errors import BadInputDimension, DegenerateLength, GraphError, InputVertex, NoSuchVertex
from mbdesigns.fusion import realize_local_complement
from mbdesigns.graphstate import (
    XY,
    ZY,
    MeasurementSpec,
    OpenGraph,
    PauliString,
    Plane,
    apply_local,
    apply_pauli,
    local_complement,
    make_linear_cluster,
    open_graph_state,
    stabilizer_generator,
)

PATH3 = OpenGraph((1, 2, 3), frozenset({(1, 2), (2, 3)}), (), (3,), {1: XY(0), 2: XY(0)})


def _plain(n, edges):
    return OpenGraph(tuple(range(1, n + 1)), frozenset(edges), (), tuple(range(1, n + 1)), {})


class TestMeasurementSpec:
    def test_angle_wrapped(self):
        assert XY(2 * math.pi + 0.5).angle == pytest.approx(0.5)
        assert XY(-0.5).angle == pytest.approx(2 * math.pi - 0.5)

    def test_non_finite_rejected(self):
        with pytest.raises(GraphError):
            XY(float("nan"))

    def test_xy_kets_are_orthonormal(self):
        s = XY(0.7)
        k0, k1 = s.ket(0), s.ket(1)
        assert abs(np.vdot(k0, k1)) < 1e-15
        assert np.vdot(k0, k0).real == pytest.approx(1)

    def test_xy_bra_convention(self):
        # ket is (|0> + (-1)^m e^{-i phi}|1>)/sqrt 2; bra is its conjugate
        phi = 0.9
        for m in (0, 1):
            ket = np.array([1, (-1) ** m * np.exp(-1j * phi)]) / math.sqrt(2)
            assert np.allclose(XY(phi).ket(m), ket)
            assert np.allclose(XY(phi).bra(m), ket.conj())

    def test_zy_outcome_zero_is_plus_one_eigenvector(self):
        phi = 1.1
        obs = math.cos(phi) * gates.Z + math.sin(phi) * gates.Y
        k0, k1 = ZY(phi).ket(0), ZY(phi).ket(1)
        assert np.allclose(obs @ k0, k0)
        assert np.allclose(obs @ k1, -k1)

    def test_plane_coerced_from_string(self):
        assert MeasurementSpec("ZY", 0.0).plane is Plane.ZY


class TestOpenGraph:
    def test_duplicate_vertices(self):
        with pytest.raises(GraphError):
            OpenGraph((1, 1), frozenset(), (), (1,), {})

    def test_self_loop(self):
        with pytest.raises(GraphError):
            OpenGraph((1, 2), frozenset({(1, 1)}), (), (1, 2), {})

    def test_dangling_edge(self):
        with pytest.raises(GraphError):
            OpenGraph((1, 2), frozenset({(1, 3)}), (), (1, 2), {})

    def test_output_must_not_be_measured(self):
        with pytest.raises(GraphError):
            OpenGraph((1, 2), frozenset({(1, 2)}), (), (2,), {1: XY(0), 2: XY(0)})

    def test_non_output_needs_measurement(self):
        with pytest.raises(GraphError):
            OpenGraph((1, 2), frozenset({(1, 2)}), (), (2,), {})

    def test_edges_normalized(self):
        g = OpenGraph((1, 2), frozenset({(2, 1)}), (), (1, 2), {})
        assert g.edges == frozenset({(1, 2)})

    def test_unknown_vertex_neighbors(self):
        with pytest.raises(NoSuchVertex):
            PATH3.neighbors(9)

    def test_json_schema(self):
        g = make_linear_cluster(2, [0.25, 0.5])
        d = g.to_dict()
        assert d == {
            "vertices": [1, 2, 3],
            "edges": [[1, 2], [2, 3]],
            "inputs": [1],
            "outputs": [3],
            "measurements": {"1": {"plane": "XY", "angle": 0.25}, "2": {"plane": "XY", "angle": 0.5}},
        }

    @given(st.integers(0, 2**32 - 1), st.integers(1, 7))
    def test_json_round_trip(self, seed, n):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n, inputs=(1,), outputs=(n,))
        assert OpenGraph.from_json(g.to_json()) == g

    def test_malformed_document(self):
        with pytest.raises(GraphError):
            OpenGraph.from_dict({"edges": []})


class TestLinearCluster:
    def test_smallest(self):
        g = make_linear_cluster(1, [0])
        assert g.vertices == (1, 2)
        assert g.edges == frozenset({(1, 2)})
        assert g.inputs == (1,) and g.outputs == (2,)
        assert g.measurements[1] == XY(0)

    def test_path(self):
        g = make_linear_cluster(2, [0, 0])
        assert g.edges == frozenset({(1, 2), (2, 3)})
        assert set(g.measurements) == {1, 2}

    def test_optimal_pattern(self):
        angles = [0, math.pi / 4, math.acos(math.sqrt(1 / 3)), math.pi / 4, 0]
        g = make_linear_cluster(5, angles)
        assert len(g.vertices) == 6
        assert [g.measurements[k].angle for k in range(1, 6)] == pytest.approx(angles)

    def test_zero_length(self):
        with pytest.raises(DegenerateLength):
            make_linear_cluster(0, [])

    def test_angle_count(self):
        with pytest.raises(ValueError):
            make_linear_cluster(2, [0])


class TestLocalComplement:
    def test_path_to_triangle(self):
        tri = local_complement(PATH3, 2)
        assert tri.edges == frozenset({(1, 2), (2, 3), (1, 3)})

    def test_triangle_to_path(self):
        tri = local_complement(PATH3, 2)
        assert local_complement(tri, 1).edges == frozenset({(1, 2), (1, 3)})

    def test_unknown_vertex(self):
        with pytest.raises(NoSuchVertex):
            local_complement(PATH3, 7)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 7))
    def test_involution_and_preservation(self, seed, n):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n, inputs=(1,), outputs=(n,))
        a = int(rng.integers(1, n + 1))
        h = local_complement(g, a)
        assert local_complement(h, a) == g
        assert (h.vertices, h.inputs, h.outputs) == (g.vertices, g.inputs, g.outputs)
        assert dict(h.measurements) == dict(g.measurements)


class TestStabilizer:
    def test_path_middle(self):
        g = _plain(3, {(1, 2), (2, 3)})
        assert stabilizer_generator(g, 2) == PauliString({1: "Z", 2: "X", 3: "Z"})

    def test_isolated(self):
        assert stabilizer_generator(_plain(1, set()), 1) == PauliString({1: "X"})

    def test_path_end(self):
        g = _plain(3, {(1, 2), (2, 3)})
        assert str(stabilizer_generator(g, 1)) == "+X1Z2"

    def test_input_rejected(self):
        with pytest.raises(InputVertex):
            stabilizer_generator(make_linear_cluster(1, [0]), 1)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 8))
    def test_graph_state_is_stabilized(self, seed, n):
        rng = np.random.default_rng(seed)
        edges = {(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1) if rng.random() < 0.5}
        g = _plain(n, edges)
        psi = open_graph_state(g)
        for a in g.vertices:
            assert np.allclose(apply_pauli(g, stabilizer_generator(g, a), psi), psi, atol=1e-10)

    def test_bad_phase(self):
        with pytest.raises(ValueError):
            PauliString({1: "X"}, phase=2)


class TestOpenGraphState:
    def test_control_in_zero(self):
        g = OpenGraph((1, 2), frozenset({(1, 2)}), (1,), (1, 2), {})
        psi = open_graph_state(g, np.array([1, 0]))
        assert np.allclose(psi, np.kron([1, 0], [1, 1]) / math.sqrt(2))

    def test_cz_on_plus_plus(self):
        g = OpenGraph((1, 2), frozenset({(1, 2)}), (1,), (1, 2), {})
        psi = open_graph_state(g, np.array([1, 1]) / math.sqrt(2))
        plus, minus = np.array([1, 1]) / math.sqrt(2), np.array([1, -1]) / math.sqrt(2)
        expected = (np.kron([1, 0], plus) + np.kron([0, 1], minus)) / math.sqrt(2)
        assert np.allclose(psi, expected)

    def test_input_order_follows_vertex_ids(self):
        # input listed as (2, 1): first amplitude axis is still vertex 1
        g = OpenGraph((1, 2), frozenset(), (2, 1), (1, 2), {})
        psi = open_graph_state(g, np.kron([0, 1], [1, 0]))  # vertex 2 = |1>, vertex 1 = |0>
        assert np.allclose(psi, np.kron([1, 0], [0, 1]))

    def test_dimension_mismatch(self):
        g = make_linear_cluster(1, [0])
        with pytest.raises(BadInputDimension):
            open_graph_state(g, np.ones(4) / 2)
        with pytest.raises(BadInputDimension):
            open_graph_state(g)

    def test_unnormalized(self):
        with pytest.raises(BadInputDimension):
            open_graph_state(make_linear_cluster(1, [0]), np.array([1.0, 1.0]))

    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    def test_local_complement_realized_by_local_unitaries(self, seed, n):
        rng = np.random.default_rng(seed)
        edges = {(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1) if rng.random() < 0.5}
        g = _plain(n, edges)
        a = int(rng.integers(1, n + 1))
        lhs = apply_local(g, realize_local_complement(g, a), open_graph_state(g))
        rhs = open_graph_state(local_complement(g, a))
        assert abs(abs(np.vdot(lhs, rhs)) - 1) < 1e-10
