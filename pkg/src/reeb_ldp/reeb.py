"""Reeb graph of a planar Morse Hamiltonian and the graph metric.

The graph identifies every connected component of every level set with
a point (edge id, H value).  Construction runs a marching-squares
component census at probe levels between consecutive critical values
and wires segments into edges by their enclosure signature: the set of
critical points a closed level curve encloses is constant along an
edge and distinct between edges, so it is a robust edge fingerprint
that is independent of grid resolution.

Distances: r between two graph points is the shortest-path length with
edge cost |Delta H|; the trajectory metric is the sup of r over a
shared time grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .errors import (AmbiguousWiring, ContinuityBreak, EqualSaddleLevels,
                     GridMismatch, NonConvergence, OutsideBox)


# -- data model -------------------------------------------------------------

@dataclass(frozen=True)
class Vertex:
    id: int
    cp_index: int
    kind: str            # "interior" (saddle) | "exterior" (extremum)
    h: float
    location: tuple[float, float]


@dataclass(frozen=True)
class Edge:
    id: int
    h_lo: float
    h_hi: float                      # math.inf for the unbounded edge
    v_lo: int | None
    v_hi: int | None                 # None above the top critical level
    mask: frozenset                  # enclosed critical-point indices
    h_hi_table: float                # tabulation truncation for the top edge
    seeds: tuple                     # ((h_probe, x, y), ...) one per slab

    @property
    def unbounded(self):
        return math.isinf(self.h_hi)

    def contains(self, h, closed=True):
        if closed:
            return self.h_lo <= h <= min(self.h_hi, float("inf"))
        return self.h_lo < h < self.h_hi

    def span(self):
        hi = self.h_hi_table if self.unbounded else self.h_hi
        return (self.h_lo, hi)


@dataclass(frozen=True)
class GraphPoint:
    """Point on the Reeb graph: (edge id, H value), optionally at a vertex."""

    edge_id: int
    h: float
    at_vertex: int | None = None


@dataclass
class GraphPath:
    """Piecewise graph-valued path sampled on a time grid."""

    times: np.ndarray
    edge_ids: np.ndarray
    h_values: np.ndarray
    vertex_flags: np.ndarray = None          # vertex id or -1

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.edge_ids = np.asarray(self.edge_ids, dtype=int)
        self.h_values = np.asarray(self.h_values, dtype=float)
        if self.vertex_flags is None:
            self.vertex_flags = np.full(self.times.shape, -1, dtype=int)
        else:
            self.vertex_flags = np.asarray(self.vertex_flags, dtype=int)
        n = len(self.times)
        if not (len(self.edge_ids) == len(self.h_values) == len(self.vertex_flags) == n):
            raise ValueError("inconsistent path array lengths")

    def __len__(self):
        return len(self.times)

    def point(self, k):
        vf = int(self.vertex_flags[k])
        return GraphPoint(int(self.edge_ids[k]), float(self.h_values[k]),
                          at_vertex=vf if vf >= 0 else None)

    def max_step(self):
        """Declared continuity modulus: largest |Delta h| between samples."""
        if len(self.times) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.h_values))))

    def validate_continuity(self, graph):
        """Consecutive samples on the same edge or across one shared vertex."""
        for k in range(len(self.times) - 1):
            e0, e1 = int(self.edge_ids[k]), int(self.edge_ids[k + 1])
            if e0 == e1:
                continue
            shared = set(graph.edge_vertex_ids(e0)) & set(graph.edge_vertex_ids(e1))
            if not shared:
                raise ContinuityBreak(
                    f"samples {k}->{k + 1} jump between non-adjacent edges {e0}, {e1}")
            hv = graph.vertices[next(iter(shared))].h
            lo = min(self.h_values[k], self.h_values[k + 1]) - 1e-12
            hi = max(self.h_values[k], self.h_values[k + 1]) + 1e-12
            if not (lo <= hv <= hi):
                raise ContinuityBreak(
                    f"samples {k}->{k + 1} cross edges {e0}->{e1} without passing "
                    f"their shared vertex level {hv}")
        return True


class ReebGraph:
    """Vertices at critical points, edges = families of closed orbits."""

    def __init__(self, vertices, edges, critical_points, h_max_box, grid_n):
        self.vertices = list(vertices)
        self.edges = list(edges)
        self.critical_points = list(critical_points)
        self.h_max_box = float(h_max_box)
        self.grid_n = int(grid_n)
        self._incidence = {v.id: [] for v in self.vertices}
        for e in self.edges:
            for vid in (e.v_lo, e.v_hi):
                if vid is not None:
                    self._incidence[vid].append(e.id)
        self._vertex_dist = self._all_pairs_distances()
        self.top_level = max((v.h for v in self.vertices), default=-math.inf)

    def edge(self, edge_id):
        return self.edges[edge_id]

    def vertex(self, vertex_id):
        return self.vertices[vertex_id]

    def edges_at_vertex(self, vertex_id):
        return list(self._incidence[vertex_id])

    def edge_vertex_ids(self, edge_id):
        e = self.edges[edge_id]
        return [v for v in (e.v_lo, e.v_hi) if v is not None]

    def _all_pairs_distances(self):
        n = len(self.vertices)
        d = np.full((n, n), np.inf)
        np.fill_diagonal(d, 0.0)
        for e in self.edges:
            if e.v_lo is not None and e.v_hi is not None:
                w = abs(e.h_hi - e.h_lo)
                i, j = e.v_lo, e.v_hi
                d[i, j] = min(d[i, j], w)
                d[j, i] = min(d[j, i], w)
        for k in range(n):
            d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
        return d

    def vertex_distance(self, v1, v2):
        return float(self._vertex_dist[v1, v2])

    def edges_by_mask_bit(self, bit):
        return [e for e in self.edges if bit in e.mask]

    def unbounded_edge(self):
        for e in self.edges:
            if e.unbounded:
                return e
        raise AmbiguousWiring("graph has no unbounded edge")

    def export_dict(self):
        return {
            "vertices": [{"id": v.id, "x": v.location[0], "y": v.location[1],
                          "h": v.h, "kind": v.kind} for v in self.vertices],
            "edges": [{"id": e.id, "h_lo": e.h_lo,
                       "h_hi": None if e.unbounded else e.h_hi,
                       "h_hi_table": e.span()[1],
                       "v_lo": e.v_lo, "v_hi": e.v_hi} for e in self.edges],
            "h_max_box": self.h_max_box,
        }

    def export_json(self, path=None):
        text = json.dumps(self.export_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


# -- construction -----------------------------------------------------------

def _points_in_polygon(poly, pts):
    """Even-odd ray casting; poly (m,2) closed or open, pts (k,2)."""
    px, py = poly[:, 0], poly[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    cond = (py[None, :] > y) != (qy[None, :] > y)
    denom = qy[None, :] - py[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = px[None, :] + (y - py[None, :]) * (qx[None, :] - px[None, :]) / denom
    crossings = cond & (x < xint)
    return np.sum(crossings, axis=1) % 2 == 1


def _grid_h(system, grid_n):
    x0, x1, y0, y1 = system.box
    xs = np.linspace(x0, x1, grid_n)
    ys = np.linspace(y0, y1, grid_n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return xs, ys, system.h_poly(X, Y)


def _census(system, xs, ys, Hgrid, level):
    """Closed level-set components at a level: list of polygons in xy."""
    contours = measure.find_contours(Hgrid, level)
    polys = []
    for c in contours:
        closed = bool(np.allclose(c[0], c[-1]))
        if not closed:
            raise AmbiguousWiring(
                f"open level-set component at H={level:.6g}; enlarge the box "
                "or check growth assumptions")
        gx = np.interp(c[:, 0], np.arange(len(xs)), xs)
        gy = np.interp(c[:, 1], np.arange(len(ys)), ys)
        polys.append(np.stack([gx, gy], axis=1))
    return polys


def _boundary_min_h(system, n=2048):
    x0, x1, y0, y1 = system.box
    t = np.linspace(0.0, 1.0, n)
    sides = [
        np.stack([x0 + (x1 - x0) * t, np.full(n, y0)], axis=1),
        np.stack([x0 + (x1 - x0) * t, np.full(n, y1)], axis=1),
        np.stack([np.full(n, x0), y0 + (y1 - y0) * t], axis=1),
        np.stack([np.full(n, x1), y0 + (y1 - y0) * t], axis=1),
    ]
    return float(min(np.min(system.h_batch(s)) for s in sides))


def build_reeb_graph(system, critical_points, grid_n=512, delta_wire=1e-3):
    """Census-and-wire construction of the Reeb graph.

    Probes component counts at mid-slab levels and validates counts at
    +-delta_wire around each saddle.  Raises EqualSaddleLevels when a
    saddle value collides with any other critical value, AmbiguousWiring
    when the census cannot be wired consistently at this resolution.
    """
    cps = sorted(critical_points, key=lambda p: (p.h_value, p.location))
    if not cps:
        raise AmbiguousWiring("no critical points supplied")
    values = np.array([p.h_value for p in cps])
    locs = np.array([p.location for p in cps])

    for i, p in enumerate(cps):
        if p.kind != "saddle":
            continue
        gaps = np.abs(np.delete(values, i) - p.h_value)
        if gaps.size and np.min(gaps) < 4 * delta_wire:
            raise EqualSaddleLevels(
                f"saddle level {p.h_value:.6g} within {4 * delta_wire:.3g} of "
                "another critical value; wiring is ill-posed at this separation")

    h_max_box = _boundary_min_h(system)
    top_crit = float(values.max())
    if h_max_box <= top_crit + 4 * delta_wire:
        raise AmbiguousWiring(
            f"box max usable level {h_max_box:.6g} does not clear the top "
            f"critical value {top_crit:.6g}; enlarge the box")

    # distinct levels (extrema may tie)
    levels = []
    for v in sorted(values):
        if not levels or v - levels[-1] > 2 * delta_wire:
            levels.append(float(v))
    slabs = [(levels[k], levels[k + 1]) for k in range(len(levels) - 1)]
    slabs.append((levels[-1], h_max_box))

    xs, ys, Hgrid = _grid_h(system, grid_n)

    # census each slab at its midpoint; fingerprint components by enclosure
    segments = {}        # mask -> list of (slab_index, h_probe, seed_xy)
    for s_idx, (lo, hi) in enumerate(slabs):
        probe = 0.5 * (lo + hi)
        polys = _census(system, xs, ys, Hgrid, probe)
        if not polys:
            raise AmbiguousWiring(f"no level-set components at probe H={probe:.6g}")
        seen = set()
        for poly in polys:
            inside = _points_in_polygon(poly, locs)
            mask = frozenset(int(i) for i in np.nonzero(inside)[0])
            if not mask:
                raise AmbiguousWiring(
                    f"component at H={probe:.6g} encloses no critical point; "
                    "grid too coarse")
            if mask in seen:
                raise AmbiguousWiring(
                    f"two components at H={probe:.6g} share enclosure {sorted(mask)}")
            seen.add(mask)
            # seed: polygon point with the largest gradient norm (far from saddles)
            gn = np.hypot(system.hx(poly[:, 0], poly[:, 1]),
                          system.hy(poly[:, 0], poly[:, 1]))
            k = int(np.argmax(gn))
            segments.setdefault(mask, []).append(
                (s_idx, probe, (float(poly[k, 0]), float(poly[k, 1]))))

    # merge slab segments into edges; slabs of one edge must be contiguous
    edge_records = []
    for mask, segs in segments.items():
        idxs = sorted(s[0] for s in segs)
        if idxs != list(range(idxs[0], idxs[-1] + 1)):
            raise AmbiguousWiring(
                f"edge fingerprint {sorted(mask)} appears in non-contiguous slabs")
        lo = slabs[idxs[0]][0]
        hi = slabs[idxs[-1]][1]
        unbounded = idxs[-1] == len(slabs) - 1
        edge_records.append({
            "mask": mask, "h_lo": lo,
            "h_hi": math.inf if unbounded else hi,
            "seeds": tuple((h, x, y) for _, h, (x, y) in sorted(segs)),
        })
    edge_records.sort(key=lambda r: (r["h_lo"], min(r["mask"])))

    vertices = []
    for k, p in enumerate(cps):
        vertices.append(Vertex(id=k, cp_index=k,
                               kind="interior" if p.kind == "saddle" else "exterior",
                               h=p.h_value, location=p.location))

    # wire: attach each edge endpoint level to its vertex
    def vertex_at_level(level, mask, from_below):
        cands = [v for v in vertices if abs(v.h - level) <= 2 * delta_wire]
        if not cands:
            raise AmbiguousWiring(f"no vertex at edge endpoint level {level:.6g}")
        if len(cands) > 1:
            # extrema ties: pick the one the edge encloses
            cands = [v for v in cands if v.cp_index in mask]
        if len(cands) != 1:
            raise AmbiguousWiring(f"ambiguous vertex at level {level:.6g}")
        return cands[0]

    edges = []
    for eid, rec in enumerate(edge_records):
        v_lo = vertex_at_level(rec["h_lo"], rec["mask"], from_below=False).id
        v_hi = None
        if not math.isinf(rec["h_hi"]):
            v_hi = vertex_at_level(rec["h_hi"], rec["mask"], from_below=True).id
        edges.append(Edge(id=eid, h_lo=rec["h_lo"], h_hi=rec["h_hi"],
                          v_lo=v_lo, v_hi=v_hi, mask=rec["mask"],
                          h_hi_table=h_max_box, seeds=rec["seeds"]))

    graph = ReebGraph(vertices, edges, cps, h_max_box, grid_n)

    # structural validation
    for v in graph.vertices:
        deg = len(graph.edges_at_vertex(v.id))
        want = 3 if v.kind == "interior" else 1
        if deg != want:
            raise AmbiguousWiring(
                f"vertex {v.id} ({v.kind}) has degree {deg}, expected {want}")
    if len(graph.edges) != len(graph.vertices):
        raise AmbiguousWiring(
            f"{len(graph.edges)} edges vs {len(graph.vertices)} vertices; "
            "wiring inconsistent")

    # census validation just around each saddle
    for v in graph.vertices:
        if v.kind != "interior":
            continue
        for lvl in (v.h - delta_wire, v.h + delta_wire):
            n_seen = len(_census(system, xs, ys, Hgrid, lvl))
            n_alive = sum(1 for e in graph.edges if e.h_lo < lvl < e.h_hi)
            if n_seen != n_alive:
                raise AmbiguousWiring(
                    f"census at H={lvl:.6g} sees {n_seen} components but the "
                    f"wiring implies {n_alive}")
    return graph


# -- projection ---------------------------------------------------------------

def _capture_radius(critical_points, scale):
    locs = np.array([p.location for p in critical_points])
    if len(locs) < 2:
        return 0.05 * scale
    d2 = np.sum((locs[:, None, :] - locs[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    return min(0.05 * scale, 0.25 * math.sqrt(float(np.min(d2))))


def _flow_to_critical(system, x, ascend, critical_points, max_arc=None):
    """Follow the +-grad H flow into a critical-point basin.

    Unit-speed steps with Armijo backtracking (monotone H along the
    walk, so the walk cannot leave its basin).  Capture is by proximity:
    within the capture radius of an extremum of the matching kind, or of
    a saddle.  Returns the critical-point index, or None if the walk
    escapes the box (unbounded ascent) or stalls.
    """
    z = np.array([float(x[0]), float(x[1])])
    scale = system.box_scale()
    if max_arc is None:
        max_arc = 50.0 * scale
    locs = np.array([p.location for p in critical_points])
    r_cap = _capture_radius(critical_points, scale)
    ds0 = min(0.01 * scale, 0.5 * r_cap)
    want = "maximum" if ascend else "minimum"
    sgn = -1.0 if ascend else 1.0          # descend f = sgn-free H or -H
    travelled = 0.0
    ds = ds0
    x0, x1, y0, y1 = system.box
    pad = 0.5 * scale
    for _ in range(100000):
        d2 = np.sum((locs - z) ** 2, axis=1)
        k = int(np.argmin(d2))
        if d2[k] < r_cap * r_cap:
            kind = critical_points[k].kind
            if kind == want or kind == "saddle":
                return k
            return None                     # flow cannot approach this kind
        g = system.grad(z[0], z[1])
        gk = sgn * np.asarray(g)            # gradient of the descended function
        gn = math.hypot(gk[0], gk[1])
        if gn < 1e-13:
            return None                     # stalled away from the known points
        u = -gk / gn
        f0 = sgn * system.h(z[0], z[1])
        step = ds
        for _ in range(60):
            znew = z + step * u
            if sgn * system.h(znew[0], znew[1]) <= f0 - 0.25 * step * gn:
                break
            step *= 0.5
        else:
            return None
        z = znew
        travelled += step
        ds = min(ds0, 2.0 * step)
        if travelled > max_arc:
            return None
        if not (x0 - pad <= z[0] <= x1 + pad and y0 - pad <= z[1] <= y1 + pad):
            return None                    # escaped: unbounded direction
    return None


def _saddle_side_restart(system, cp, z, ascend, r_cap):
    """Continuation point past a saddle the walk merely grazed.

    Steps off the saddle along its through-going eigendirection on the
    side the walk arrived from, just outside the capture ball.
    """
    loc = np.asarray(cp.location)
    evals, evecs = np.linalg.eigh(np.asarray(system.hess(loc[0], loc[1])))
    e = evecs[:, int(np.argmax(evals))] if ascend else evecs[:, int(np.argmin(evals))]
    side = math.copysign(1.0, float(np.dot(np.asarray(z) - loc, e)) or 1.0)
    return loc + side * 1.5 * r_cap * e


def _basin_extremum(system, cps, x, h, ascend):
    """Index of the critical point identifying x's level-set component.

    Runs the basin walk; a saddle capture counts when the walk level sits
    on the connected side of the saddle (h above it for descent, below
    for ascent), otherwise the walk restarts past the saddle.
    """
    start = np.array([float(x[0]), float(x[1])])
    r_cap = _capture_radius(cps, system.box_scale())
    for _ in range(4):
        k = _flow_to_critical(system, start, ascend, cps)
        if k is None:
            return None
        p = cps[k]
        if p.kind != "saddle":
            return k
        if (h > p.h_value) == (not ascend):
            return k
        start = _saddle_side_restart(system, p, start, ascend, r_cap)
    return None


def project(system, graph, x):
    """Project a plane point to its Reeb-graph point (edge id, H value).

    The H value is H(x) exactly.  The component is identified by walking
    the gradient flow into a critical-point basin and matching the basin
    against edge enclosures: edges containing a fixed critical point in
    their enclosure have pairwise disjoint H-intervals, so (basin, H)
    pins the edge.
    """
    x = (float(x[0]), float(x[1]))
    if not system.in_box(*x):
        raise OutsideBox(f"point {x} outside box {system.box}")
    h = float(system.h(*x))
    cps = graph.critical_points

    # at a critical point or exactly on a vertex level -> vertex point
    for v in graph.vertices:
        lx, ly = v.location
        if math.hypot(x[0] - lx, x[1] - ly) < 1e-9 * system.box_scale():
            eid = graph.edges_at_vertex(v.id)[0]
            return GraphPoint(edge_id=eid, h=h, at_vertex=v.id)
    exact = [v for v in graph.vertices if v.h == h]
    if exact:
        if len(exact) > 1:
            k = _flow_to_critical(system, x, ascend=False, critical_points=cps)
            exact.sort(key=lambda v: (v.cp_index != k, v.id))
        v = exact[0]
        eid = graph.edges_at_vertex(v.id)[0]
        return GraphPoint(edge_id=eid, h=h, at_vertex=v.id)

    if h > graph.top_level:
        return GraphPoint(edge_id=graph.unbounded_edge().id, h=h)

    for ascend in (False, True):
        k = _basin_extremum(system, cps, x, h, ascend)
        if k is None:
            continue
        hits = [e for e in graph.edges_by_mask_bit(k) if e.h_lo < h < e.h_hi]
        if len(hits) > 1:
            # innermost component: smallest enclosure wins
            sizes = sorted(len(e.mask) for e in hits)
            if sizes[0] == sizes[1]:
                raise AmbiguousWiring(
                    f"point {x}: H={h:.6g} lies on two same-size enclosures "
                    f"around critical point {k}")
            hits = [min(hits, key=lambda e: len(e.mask))]
        if hits:
            return GraphPoint(edge_id=hits[0].id, h=h)
    raise NonConvergence(f"could not identify the level component through {x}")


def project_trajectory(system, graph, states, times=None, resync_every=64,
                       step_bound=None):
    """Continuity-propagated projection of a sampled plane trajectory.

    Tracks the edge id incrementally from the exact H series, resolving
    descents through interior vertices (and upward splits) with pointwise
    projection, and resyncs against `project` every `resync_every`
    samples.  Raises ContinuityBreak when one step hops across more than
    one vertex level.
    """
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    if times is None:
        times = np.arange(n, dtype=float)
    if step_bound is None:
        step_bound = 0.25 * system.box_scale()
    steps = np.hypot(np.diff(states[:, 0]), np.diff(states[:, 1]))
    if steps.size and np.max(steps) > step_bound:
        raise ContinuityBreak(
            f"spatial step {np.max(steps):.3g} exceeds bound {step_bound:.3g}")

    hs = system.h_batch(states)
    p0 = project(system, graph, states[0])
    edge_ids = np.empty(n, dtype=int)
    vflags = np.full(n, -1, dtype=int)
    edge_ids[0] = p0.edge_id
    if p0.at_vertex is not None:
        vflags[0] = p0.at_vertex

    cur = graph.edge(p0.edge_id)
    for k in range(1, n):
        h = hs[k]
        if cur.h_lo <= h <= cur.h_hi:
            hops = 0
        else:
            hops = 0
            while not (cur.h_lo <= h <= cur.h_hi):
                hops += 1
                if hops > 1:
                    raise ContinuityBreak(
                        f"sample {k} jumps across more than one vertex level")
                if h > cur.h_hi:
                    vid = cur.v_hi
                    ups = [graph.edge(e) for e in graph.edges_at_vertex(vid)
                           if graph.edge(e).h_lo == cur.h_hi and e != cur.id]
                    cand = [e for e in ups if e.h_lo <= h <= e.h_hi]
                else:
                    vid = cur.v_lo
                    downs = [graph.edge(e) for e in graph.edges_at_vertex(vid)
                             if graph.edge(e).h_hi == cur.h_lo and e != cur.id]
                    cand = [e for e in downs if e.h_lo <= h <= e.h_hi]
                if not cand:
                    raise ContinuityBreak(
                        f"sample {k}: no incident edge continues past vertex {vid}")
                if len(cand) == 1:
                    cur = cand[0]
                else:
                    p = project(system, graph, states[k])
                    cur = graph.edge(p.edge_id)
        for v in graph.vertices:
            if v.h == h:
                vflags[k] = v.id
                break
        edge_ids[k] = cur.id
        if resync_every and k % resync_every == 0:
            p = project(system, graph, states[k])
            if p.at_vertex is None and p.edge_id != cur.id:
                cur = graph.edge(p.edge_id)
                edge_ids[k] = cur.id
    return GraphPath(times=np.asarray(times, dtype=float), edge_ids=edge_ids,
                     h_values=hs, vertex_flags=vflags)


# -- metric -------------------------------------------------------------------

def _point_vertex_terms(graph, p):
    """[(vertex id, |h - H(vertex)| entry cost), ...] for a graph point."""
    if p.at_vertex is not None:
        return [(p.at_vertex, 0.0)]
    e = graph.edge(p.edge_id)
    out = []
    for vid in (e.v_lo, e.v_hi):
        if vid is not None:
            out.append((vid, abs(p.h - graph.vertex(vid).h)))
    return out


def graph_distance(graph, p1, p2):
    """Shortest-path metric r with edge cost |Delta H|."""
    same_edge = (p1.at_vertex is None and p2.at_vertex is None
                 and p1.edge_id == p2.edge_id)
    best = abs(p1.h - p2.h) if same_edge else math.inf
    if p1.at_vertex is not None and p1.at_vertex == p2.at_vertex:
        return 0.0
    for v1, c1 in _point_vertex_terms(graph, p1):
        for v2, c2 in _point_vertex_terms(graph, p2):
            best = min(best, c1 + graph.vertex_distance(v1, v2) + c2)
    # points on the same edge as the other's vertex
    if p1.at_vertex is not None and p2.at_vertex is None:
        e2 = graph.edge(p2.edge_id)
        if p1.at_vertex in (e2.v_lo, e2.v_hi):
            best = min(best, abs(graph.vertex(p1.at_vertex).h - p2.h))
    if p2.at_vertex is not None and p1.at_vertex is None:
        e1 = graph.edge(p1.edge_id)
        if p2.at_vertex in (e1.v_lo, e1.v_hi):
            best = min(best, abs(graph.vertex(p2.at_vertex).h - p1.h))
    return float(best)


def resample_path(graph, path, times):
    """Linear-in-h resampling of a graph path onto a new time grid."""
    times = np.asarray(times, dtype=float)
    if not (times[0] >= path.times[0] - 1e-12 and times[-1] <= path.times[-1] + 1e-12):
        raise GridMismatch("resampling grid extends beyond the path horizon")
    idx = np.searchsorted(path.times, times, side="right") - 1
    idx = np.clip(idx, 0, len(path.times) - 2)
    t0 = path.times[idx]
    t1 = path.times[idx + 1]
    w = np.where(t1 > t0, (times - t0) / np.where(t1 > t0, t1 - t0, 1.0), 0.0)
    w = np.clip(w, 0.0, 1.0)
    h = (1 - w) * path.h_values[idx] + w * path.h_values[idx + 1]
    edge = np.where(w < 0.5, path.edge_ids[idx], path.edge_ids[idx + 1])
    # snap h into the chosen edge's closed span so the point stays valid
    for eid in np.unique(edge):
        e = graph.edge(int(eid))
        m = edge == eid
        h[m] = np.clip(h[m], e.h_lo, e.h_hi)
    return GraphPath(times=times, edge_ids=edge, h_values=h)


def path_distance(graph, path1, path2):
    """Uniform trajectory metric: sup over the grid of graph_distance."""
    if abs(path1.times[0] - path2.times[0]) > 1e-12 or \
       abs(path1.times[-1] - path2.times[-1]) > 1e-12:
        raise GridMismatch("paths must share the same horizon")
    if len(path1) != len(path2) or not np.allclose(path1.times, path2.times,
                                                   rtol=0, atol=1e-12):
        path2 = resample_path(graph, path2, path1.times)
    best = 0.0
    for k in range(len(path1)):
        best = max(best, graph_distance(graph, path1.point(k), path2.point(k)))
    return best
