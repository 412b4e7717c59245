"""Rate function on graph paths and its constrained minimization.

The action of a graph path phi = (edge(t), h(t)) over [0, T] is

    S(phi) = 1/2 * int_0^T  hdot(t)^2 / B2(h(t)) dt

with the conventions 0/0 = 0 (resting where B2 = 0 is free) and
S = +inf when hdot != 0 where B2 vanishes.

Minimization uses the edge coordinate G(h) = int dh / B(h), which turns
the action into the Dirichlet energy 1/2 int Gdot^2 dt.  G is finite
through vertices (B ~ sqrt(c delta) at extrema, B^2 ~ c/|log delta| at
saddles), so on the tree-shaped graph the minimizer between two points
runs the unique route at constant G-speed and

    S* = (sum of leg G-lengths)^2 / (2 T).

A time-stepped dynamic program over a uniform grid of the route arc
(quadratic-kernel min-convolution per step, computed with the
lower-envelope recursion in O(n) per step) confirms the closed form and
produces the discrete minimizer; a terminal window allows any endpoint
within a graph-metric slack of the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import GridMismatch, OutOfSpan, UncoveredEdge, Unreachable
from .reeb import GraphPath, GraphPoint, graph_distance


@dataclass
class ActionValue:
    value: float
    vertex_dwell: float = 0.0

    @property
    def finite(self):
        return math.isfinite(self.value)


def _segment_g_length(dh, b2_a, b2_b):
    """Exact int dh/sqrt(b2) for b2 linear on the segment (endpoints may
    vanish)."""
    ra, rb = math.sqrt(max(b2_a, 0.0)), math.sqrt(max(b2_b, 0.0))
    if ra + rb <= 0.0:
        return math.inf if dh > 0 else 0.0
    return 2.0 * dh / (ra + rb)


@dataclass
class EdgeGeometry:
    """Cumulative G(h) along one edge and its inverse.

    Between knots, G is evaluated by the exact linear-B2 segment rule
    from the nearest knot, so G inherits the accuracy of the coefficient
    table rather than of a second interpolation layer.
    """

    edge_id: int
    table: object
    h_knots: np.ndarray
    g_knots: np.ndarray
    b2_knots: np.ndarray
    _h_of_g: PchipInterpolator = None

    def __post_init__(self):
        self._h_of_g = PchipInterpolator(self.g_knots, self.h_knots)

    @property
    def h_lo(self):
        return float(self.h_knots[0])

    @property
    def h_hi(self):
        return float(self.h_knots[-1])

    @property
    def g_total(self):
        return float(self.g_knots[-1])

    def g(self, h):
        h_arr = np.atleast_1d(np.asarray(h, dtype=float))
        eps = 1e-12 * max(1.0, abs(self.h_hi))
        if np.any(h_arr < self.h_lo - eps) or np.any(h_arr > self.h_hi + eps):
            raise OutOfSpan(
                f"level outside edge {self.edge_id} geometry span "
                f"[{self.h_lo:.6g}, {self.h_hi:.6g}]")
        h_arr = np.clip(h_arr, self.h_lo, self.h_hi)
        idx = np.clip(np.searchsorted(self.h_knots, h_arr, side="right") - 1,
                      0, len(self.h_knots) - 2)
        _, b2_h = self.table.lookup(h_arr)
        b2_h = np.atleast_1d(b2_h)
        dh = h_arr - self.h_knots[idx]
        ra = np.sqrt(np.maximum(self.b2_knots[idx], 0.0))
        rb = np.sqrt(np.maximum(b2_h, 0.0))
        denom = ra + rb
        seg = np.where(denom > 0, 2.0 * dh / np.where(denom > 0, denom, 1.0),
                       0.0)
        out = self.g_knots[idx] + seg
        if np.isscalar(h) or np.asarray(h).ndim == 0:
            return float(out[0])
        return out

    def h(self, g):
        g_arr = np.clip(np.atleast_1d(np.asarray(g, dtype=float)),
                        0.0, self.g_total)
        h = np.asarray(self._h_of_g(g_arr), dtype=float)
        # Newton polish: dh/dg = B(h)
        for _ in range(3):
            resid = g_arr - np.atleast_1d(self.g(h))
            _, b2 = self.table.lookup(np.clip(h, self.h_lo, self.h_hi))
            h = np.clip(h + resid * np.sqrt(np.maximum(np.atleast_1d(b2), 0.0)),
                        self.h_lo, self.h_hi)
        if np.isscalar(g) or np.asarray(g).ndim == 0:
            return float(h[0])
        return h


def build_edge_geometry(table, refine=4, sqrt_nodes=8, saddle_floor=1e-10):
    """Integrate dh/B over an edge table into a cumulative-G interpolant."""
    base = table.h_grid
    span = table.h_hi - table.h_lo
    nodes = []
    for a, b in zip(base[:-1], base[1:]):
        seg = np.linspace(a, b, refine + 1)[:-1]
        nodes.append(seg)
    nodes.append([base[-1]])
    grid = np.concatenate([np.atleast_1d(np.asarray(n)) for n in nodes])

    # sqrt-spaced refinement against an extremum end, geometric against
    # a saddle end (where the table grid stops at the guard band)
    extra = []
    for end, kind, anchor, sgn in (("lo", table.lo_kind, table.h_lo, 1.0),
                                   ("hi", table.hi_kind, table.h_hi, -1.0)):
        if kind == "extremum":
            d0 = base[1] - base[0] if end == "lo" else base[-1] - base[-2]
            s = np.linspace(0.0, 1.0, sqrt_nodes + 1) ** 2
            extra.append(anchor + sgn * s * d0)
        elif kind == "saddle":
            d_in = abs((base[1] if end == "lo" else base[-2]) - anchor)
            tail = np.geomspace(saddle_floor * span, d_in, 24)
            extra.append(anchor + sgn * tail)
            extra.append([anchor])          # vertex knot itself
    if extra:
        grid = np.concatenate([grid] + [np.asarray(e) for e in extra])
    grid = np.unique(grid)
    grid = grid[(grid >= table.h_lo - 1e-15) & (grid <= table.h_hi + 1e-15)]

    _, b2 = table.lookup(grid)
    g = np.zeros_like(grid)
    for i in range(1, len(grid)):
        g[i] = g[i - 1] + _segment_g_length(grid[i] - grid[i - 1],
                                            b2[i - 1], b2[i])
    keep = np.concatenate([[True], np.diff(g) > 0])
    return EdgeGeometry(edge_id=table.edge_id, table=table,
                        h_knots=grid[keep], g_knots=g[keep],
                        b2_knots=np.asarray(b2)[keep])


def build_geometries(tables, **kw):
    return {eid: build_edge_geometry(t, **kw) for eid, t in tables.items()}


# -- action of a given path ---------------------------------------------------

def evaluate_action(graph, tables, path, b2_floor=1e-10):
    """Midpoint-rule action of a sampled graph path.

    Cells that cross a vertex level are split at the vertex.  A cell
    moving in h where B2 sits below b2_floor contributes +inf; a resting
    cell contributes zero and counts toward vertex_dwell when it rests
    at a vertex level.
    """
    times = path.times
    h = path.h_values
    edges = path.edge_ids
    total = 0.0
    dwell = 0.0
    vertex_levels = {v.id: v.h for v in graph.vertices}
    hspan = max(abs(v) for v in vertex_levels.values()) or 1.0

    def b2_at(eid, hm):
        if eid not in tables:
            raise UncoveredEdge(f"no coefficient table for edge {eid}")
        return tables[eid].lookup(hm)[1]

    def cell(eid, h0, h1, dt):
        nonlocal total, dwell
        dh = h1 - h0
        if dt <= 0:
            raise GridMismatch("non-increasing path times")
        if dh == 0.0:
            near_vertex = any(abs(h0 - hv) <= 1e-9 * max(1.0, hspan)
                              for hv in vertex_levels.values())
            if near_vertex:
                dwell += dt
            return
        b2 = b2_at(eid, 0.5 * (h0 + h1))
        if b2 < b2_floor:
            total = math.inf
            return
        total += 0.5 * dh * dh / (b2 * dt)

    for k in range(len(times) - 1):
        if not math.isfinite(total):
            break
        dt = float(times[k + 1] - times[k])
        e0, e1 = int(edges[k]), int(edges[k + 1])
        h0, h1 = float(h[k]), float(h[k + 1])
        if e0 == e1:
            cell(e0, h0, h1, dt)
            continue
        shared = set(graph.edge_vertex_ids(e0)) & set(graph.edge_vertex_ids(e1))
        if not shared:
            raise GridMismatch(
                f"path jumps between non-adjacent edges {e0} -> {e1}")
        hv = vertex_levels[next(iter(shared))]
        # split at the vertex; when hv is not between h0 and h1 the cell
        # is a tent that turns around at the vertex level
        d0, d1 = abs(hv - h0), abs(h1 - hv)
        if d0 + d1 == 0.0:
            dwell += dt
            continue
        theta = d0 / (d0 + d1)
        if theta > 0:
            cell(e0, h0, hv, theta * dt)
        if theta < 1:
            cell(e1, hv, h1, (1.0 - theta) * dt)
    return ActionValue(value=total, vertex_dwell=dwell)


# -- routes on the tree -------------------------------------------------------

@dataclass
class RouteLeg:
    edge_id: int
    h_from: float
    h_to: float
    g_len: float


def _vertex_adjacency(graph):
    adj = {v.id: [] for v in graph.vertices}
    for e in graph.edges:
        if e.v_lo is not None and e.v_hi is not None:
            adj[e.v_lo].append((e.v_hi, e.id))
            adj[e.v_hi].append((e.v_lo, e.id))
    return adj


def _vertex_path(graph, va, vb):
    """Unique simple vertex path on the tree; list of (vertex, via_edge)."""
    if va == vb:
        return [(va, None)]
    adj = _vertex_adjacency(graph)
    parent = {va: (None, None)}
    queue = [va]
    while queue:
        cur = queue.pop(0)
        if cur == vb:
            break
        for nxt, eid in adj[cur]:
            if nxt not in parent:
                parent[nxt] = (cur, eid)
                queue.append(nxt)
    if vb not in parent:
        raise Unreachable(vb, f"vertex {vb} not connected to {va}")
    out = []
    cur = vb
    while cur is not None:
        prev, eid = parent[cur]
        out.append((cur, eid))
        cur = prev
    return list(reversed(out))


def _edge_leg(geos, eid, h_from, h_to):
    geo = geos.get(eid)
    if geo is None:
        raise UncoveredEdge(f"no geometry for edge {eid}")
    g_len = abs(float(geo.g(h_to)) - float(geo.g(h_from)))
    return RouteLeg(edge_id=eid, h_from=float(h_from), h_to=float(h_to),
                    g_len=g_len)


def _attachments(graph, p):
    """[(vertex_id, partial leg or None)] entering the vertex tree."""
    if p.at_vertex is not None:
        return [(p.at_vertex, None)]
    e = graph.edge(p.edge_id)
    out = []
    for vid in (e.v_lo, e.v_hi):
        if vid is not None:
            out.append((vid, (e.id, p.h, graph.vertex(vid).h)))
    return out


def route_between(graph, geos, p_start, p_target):
    """Legs of the unique simple route between two graph points."""
    same_edge = (p_start.at_vertex is None and p_target.at_vertex is None
                 and p_start.edge_id == p_target.edge_id)
    if same_edge:
        return [_edge_leg(geos, p_start.edge_id, p_start.h, p_target.h)]
    if p_start.at_vertex is not None and p_start.at_vertex == p_target.at_vertex:
        return []
    best = None
    for va, leg_a in _attachments(graph, p_start):
        for vb, leg_b in _attachments(graph, p_target):
            legs = []
            if leg_a is not None:
                legs.append(_edge_leg(geos, *leg_a))
            vp = _vertex_path(graph, va, vb)
            for (v_prev, _), (v_next, eid) in zip(vp[:-1], vp[1:]):
                legs.append(_edge_leg(geos, eid, graph.vertex(v_prev).h,
                                      graph.vertex(v_next).h))
            if leg_b is not None:
                eid, h_pt, h_v = leg_b
                legs.append(_edge_leg(geos, eid, h_v, h_pt))
            total = sum(l.g_len for l in legs)
            if best is None or total < best[0]:
                best = (total, legs)
    return best[1]


def _walk_back_slack(graph, geos, legs, slack):
    """Trim the route tail by a graph-metric slack; returns (legs, g_cut).

    The cheapest admissible endpoint lies on the route at r-distance
    exactly `slack` from the target (or at the start if the slack covers
    the whole route).
    """
    if slack <= 0 or not legs:
        return legs, 0.0
    remaining = slack
    new_legs = list(legs)
    g_cut = 0.0
    while new_legs and remaining > 0:
        leg = new_legs[-1]
        r_len = abs(leg.h_to - leg.h_from)
        if r_len <= remaining:
            remaining -= r_len
            g_cut += leg.g_len
            new_legs.pop()
        else:
            sgn = 1.0 if leg.h_to > leg.h_from else -1.0
            h_new = leg.h_to - sgn * remaining
            trimmed = _edge_leg(geos, leg.edge_id, leg.h_from, h_new)
            g_cut += leg.g_len - trimmed.g_len
            new_legs[-1] = trimmed
            remaining = 0.0
    return new_legs, g_cut


# -- minimization -------------------------------------------------------------

@dataclass
class MinActionResult:
    value: float                      # closed-form minimum
    dp_value: float                   # dynamic-program confirmation
    arc_length: float                 # G-length actually traversed
    t_final: float
    slack: float
    legs: list
    path: GraphPath                   # constant-speed minimizer samples
    dp_path: GraphPath


def _route_sampler(graph, geos, legs, p_start):
    """Map route arc s in [0, L] to (edge_id, h); vectorized walker."""
    bounds = np.concatenate([[0.0], np.cumsum([l.g_len for l in legs])])

    def sample(s_vals):
        s_vals = np.atleast_1d(np.asarray(s_vals, dtype=float))
        s_vals = np.clip(s_vals, 0.0, bounds[-1])
        eids = np.empty(s_vals.shape, dtype=int)
        hs = np.empty(s_vals.shape)
        if not legs:
            eids[:] = p_start.edge_id
            hs[:] = p_start.h
            return eids, hs
        idx = np.clip(np.searchsorted(bounds, s_vals, side="right") - 1,
                      0, len(legs) - 1)
        for j, leg in enumerate(legs):
            m = idx == j
            if not np.any(m):
                continue
            geo = geos[leg.edge_id]
            g_a = float(geo.g(leg.h_from))
            g_b = float(geo.g(leg.h_to))
            sgn = 1.0 if g_b >= g_a else -1.0
            g_loc = g_a + sgn * (s_vals[m] - bounds[j])
            hs[m] = geo.h(g_loc)
            eids[m] = leg.edge_id
        return eids, hs

    return sample, float(bounds[-1])


def _envelope_step(cost, xs, w, parents_row):
    """One min-convolution D'(i) = min_j cost(j) + w (x_i - x_j)^2.

    Lower-envelope-of-parabolas recursion; O(n) per step on the uniform
    grid.  Infinite entries contribute no parabola.
    """
    n = len(cost)
    js = np.nonzero(np.isfinite(cost))[0]
    if len(js) == 0:
        raise Unreachable(-1, "dynamic program lost all finite states")
    v = np.empty(len(js), dtype=np.int64)       # apex node of each parabola
    z = np.empty(len(js) + 1)                   # envelope breakpoints
    v[0] = js[0]
    z[0] = -math.inf
    z[1] = math.inf
    k = 0
    for j in js[1:]:
        while True:
            q = v[k]
            s = ((cost[j] + w * xs[j] ** 2) - (cost[q] + w * xs[q] ** 2)) \
                / (2.0 * w * (xs[j] - xs[q]))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = j
        z[k] = s
        z[k + 1] = math.inf
    out = np.empty(n)
    ki = 0
    for i in range(n):
        while z[ki + 1] < xs[i]:
            ki += 1
        j = v[ki]
        out[i] = cost[j] + w * (xs[i] - xs[j]) ** 2
        parents_row[i] = j
    return out


def minimize_action(graph, tables, p_start, p_target, t_final, slack=0.0,
                    n_time=400, n_arc=None, geos=None):
    """Least-action graph path from p_start to (a slack window around)
    p_target in time t_final.

    Returns both the closed-form constant-G-speed minimizer and the
    dynamic-program minimizer on the discretized route.
    """
    if t_final <= 0:
        raise GridMismatch("t_final must be positive")
    if geos is None:
        geos = build_geometries(tables)
    legs_full = route_between(graph, geos, p_start, p_target)
    legs, g_cut = _walk_back_slack(graph, geos, legs_full, slack)
    arc = sum(l.g_len for l in legs)
    value = arc * arc / (2.0 * t_final)

    times = np.linspace(0.0, t_final, n_time + 1)
    sample, L_trim = _route_sampler(graph, geos, legs, p_start)
    eids, hs = sample(np.linspace(0.0, L_trim, n_time + 1))
    path = GraphPath(times=times, edge_ids=eids, h_values=hs)

    # dynamic program over the full (untrimmed) route arc; the grid
    # spacing is commensurate with the admissible endpoint nearest the
    # start so the constant-speed minimizer lies exactly on grid nodes
    sample_full, L = _route_sampler(graph, geos, legs_full, p_start)
    s_opt = max(L - g_cut, 0.0)
    cap = n_arc if n_arc is not None else 8001
    if L <= 0:
        xs = np.zeros(1)
    elif s_opt <= 0:
        xs = np.linspace(0.0, L, min(cap, 2 * n_time + 1))
    else:
        m = max(1, int(round(2.0 * s_opt / L)))
        gamma = s_opt / (n_time * m)
        n_nodes = int(math.floor(L / gamma + 1e-9)) + 1
        if n_nodes > cap:
            xs = np.linspace(0.0, L, cap)
        else:
            xs = np.arange(n_nodes) * gamma
    dt = t_final / n_time
    w = 1.0 / (2.0 * dt)
    cost = np.full(len(xs), math.inf)
    cost[0] = 0.0
    parents = np.zeros((n_time, len(xs)), dtype=np.int32)
    for k in range(n_time):
        cost = _envelope_step(cost, xs, w, parents[k])
    allowed = xs >= s_opt - 1e-12 if L > 0 else np.array([True])
    if not np.any(allowed):
        raise Unreachable(-1, "empty terminal window")
    term = np.where(allowed, cost, math.inf)
    i_end = int(np.argmin(term))
    dp_value = float(term[i_end])
    idx_seq = [i_end]
    for k in range(n_time - 1, -1, -1):
        idx_seq.append(int(parents[k][idx_seq[-1]]))
    idx_seq.reverse()
    dp_eids, dp_hs = sample_full(xs[np.asarray(idx_seq)])
    dp_path = GraphPath(times=times, edge_ids=dp_eids, h_values=dp_hs)

    return MinActionResult(value=float(value), dp_value=dp_value,
                           arc_length=float(arc), t_final=float(t_final),
                           slack=float(slack), legs=legs, path=path,
                           dp_path=dp_path)


def terminal_speed(path, n_tail=8):
    """|dh/dt| over the last n_tail cells (vertex-approach diagnostics)."""
    dh = np.abs(np.diff(path.h_values[-n_tail - 1:]))
    dt = np.diff(path.times[-n_tail - 1:])
    return dh / dt
