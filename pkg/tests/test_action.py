"""Action functional: midpoint evaluation and graph minimization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reeb_ldp import (
    GraphPath,
    GraphPoint,
    GridMismatch,
    UncoveredEdge,
    evaluate_action,
    minimize_action,
    terminal_speed,
)

# harmonic edge has B2 = 2h, so with u = sqrt(2h) the action of a path
# is int u'(t)^2 / 2 dt and the T-horizon minimum between levels is
# (u1 - u0)^2 / (2 T).


def _u(h):
    return math.sqrt(2.0 * h)


def _ramp(eid, h0, h1, t_final=1.0, n=256):
    t = np.linspace(0.0, t_final, n + 1)
    h = h0 + (h1 - h0) * t / t_final
    return GraphPath(times=t, edge_ids=np.full(n + 1, eid, dtype=int),
                     h_values=h)


def test_linear_ramp_value(harmonic_graph, harmonic_tables):
    # h(t) = 1 + t gives 0.5 * int 1/(2(1+t)) dt = log(2)/4
    eid = harmonic_graph.edges[0].id
    out = evaluate_action(harmonic_graph, harmonic_tables,
                          _ramp(eid, 1.0, 2.0))
    assert abs(out.value - 0.25 * math.log(2.0)) < 1e-4
    assert out.vertex_dwell == 0.0


def test_resting_path_is_free(harmonic_graph, harmonic_tables):
    eid = harmonic_graph.edges[0].id
    out = evaluate_action(harmonic_graph, harmonic_tables,
                          _ramp(eid, 1.5, 1.5))
    assert out.value == 0.0
    assert out.vertex_dwell == 0.0


def test_dwell_at_vertex_is_free_and_counted(harmonic_graph, harmonic_tables):
    eid = harmonic_graph.edges[0].id
    out = evaluate_action(harmonic_graph, harmonic_tables,
                          _ramp(eid, 0.0, 0.0, t_final=1.0))
    assert out.value == 0.0
    assert out.vertex_dwell == pytest.approx(1.0)


def test_uncovered_edge_raises(harmonic_graph, harmonic_tables):
    with pytest.raises(UncoveredEdge):
        evaluate_action(harmonic_graph, harmonic_tables,
                        _ramp(9999, 1.0, 2.0))


def test_minimize_square_root_law(harmonic_graph, harmonic_tables):
    eid = harmonic_graph.edges[0].id
    res = minimize_action(harmonic_graph, harmonic_tables,
                          GraphPoint(eid, 1.0), GraphPoint(eid, 2.0), 1.0)
    expected = (_u(2.0) - _u(1.0)) ** 2 / 2.0    # = 3 - 2 sqrt(2)
    assert abs(res.value - expected) < 1e-3
    assert abs(res.dp_value - res.value) <= 1e-3 * res.value
    # the sampled minimizer re-evaluates to the same number
    ev = evaluate_action(harmonic_graph, harmonic_tables, res.path)
    assert abs(ev.value - expected) < 5e-3


def test_minimize_time_scaling(harmonic_graph, harmonic_tables):
    eid = harmonic_graph.edges[0].id
    r1 = minimize_action(harmonic_graph, harmonic_tables,
                         GraphPoint(eid, 1.0), GraphPoint(eid, 2.5), 1.0)
    r2 = minimize_action(harmonic_graph, harmonic_tables,
                         GraphPoint(eid, 1.0), GraphPoint(eid, 2.5), 2.0)
    assert r2.value == pytest.approx(r1.value / 2.0, rel=1e-9)


def test_slack_walks_back_along_route(harmonic_graph, harmonic_tables):
    # with terminal slack 0.3 the cheapest admissible endpoint is h = 2.7
    eid = harmonic_graph.edges[0].id
    res = minimize_action(harmonic_graph, harmonic_tables,
                          GraphPoint(eid, 1.0), GraphPoint(eid, 3.0), 1.0, slack=0.3)
    expected = (_u(2.7) - _u(1.0)) ** 2 / 2.0
    assert abs(res.value - expected) < 1e-3
    assert res.arc_length == pytest.approx(_u(2.7) - _u(1.0), abs=2e-3)


def test_bad_horizon_raises(harmonic_graph, harmonic_tables):
    eid = harmonic_graph.edges[0].id
    with pytest.raises(GridMismatch):
        minimize_action(harmonic_graph, harmonic_tables,
                        GraphPoint(eid, 1.0), GraphPoint(eid, 2.0), 0.0)


def test_route_across_saddle_symmetric(doublewell_graph, doublewell_tables):
    g = doublewell_graph
    wells = [e for e in g.edges
             if any(v.id == e.v_lo and v.h == pytest.approx(0.0, abs=1e-9)
                    for v in g.vertices)]
    assert len(wells) == 2
    a, b = wells[0].id, wells[1].id
    fwd = minimize_action(g, doublewell_tables, GraphPoint(a, 0.1), GraphPoint(b, 0.1), 1.0)
    bwd = minimize_action(g, doublewell_tables, GraphPoint(b, 0.1), GraphPoint(a, 0.1), 1.0)
    assert fwd.value == pytest.approx(bwd.value, rel=1e-6)
    assert fwd.value > 0
    assert len(fwd.legs) >= 2          # crosses the saddle vertex
    sp = terminal_speed(fwd.path)
    assert np.all(np.isfinite(sp))


@settings(max_examples=12, deadline=None)
@given(st.floats(min_value=0.5, max_value=4.0),
       st.floats(min_value=0.5, max_value=4.0),
       st.floats(min_value=0.5, max_value=2.0))
def test_minimum_matches_u_distance(harmonic_graph, harmonic_tables,
                                    harmonic_geos, h0, h1, t_final):
    eid = harmonic_graph.edges[0].id
    res = minimize_action(harmonic_graph, harmonic_tables,
                          GraphPoint(eid, h0), GraphPoint(eid, h1), t_final,
                          n_time=100, geos=harmonic_geos)
    expected = (_u(h1) - _u(h0)) ** 2 / (2.0 * t_final)
    assert res.value == pytest.approx(expected, rel=1e-4, abs=1e-9)
