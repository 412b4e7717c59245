"""Averaged coefficients on Reeb edges.

For one closed orbit at level h the orbit-average time scale and noise
coefficient are

    T(h)  = loop integral of dl / |grad H|
    B2(h) = (1/T) * loop integral of (gradH . a . gradH / |grad H|) dl

with a = sigma sigma^T.  T is the flow period of the orbit, B2 the
effective squared noise felt by the slow energy coordinate.

Curves are traced with an adaptive RKF45 walk of the unit tangent field
grad^perp H / |grad H| plus a Newton projection onto {H = h} after each
accepted step, so recorded segment lengths are true arc lengths.  A
Poincare section through the seed detects closure.

Per-edge tables sample h on vertex-refined grids and interpolate with
pchip; near a saddle endpoint T follows the log divergence T ~ a +
b*log(delta) (fit on the geometric tail), near an extremum endpoint the
exact limits T = 2*pi/sqrt(lambda1*lambda2), B2 = 0 are grid nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (DegenerateCurve, NoClosure, NonConvergence, OutOfSpan,
                     OutsideBox)

# Fehlberg 4(5) tableau
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)


@dataclass
class LevelPolyline:
    """Sampled closed orbit: points (n,2), per-segment true arc lengths."""

    h: float
    points: np.ndarray
    seg_lengths: np.ndarray
    closed: bool = True

    @property
    def arc_length(self):
        return float(np.sum(self.seg_lengths))

    def __len__(self):
        return len(self.points)


def _unit_tangent(system, x, y, gtol):
    gx = system.hx(x, y)
    gy = system.hy(x, y)
    gn = math.hypot(gx, gy)
    if gn < gtol:
        raise DegenerateCurve(
            f"|grad H| = {gn:.3g} at ({x:.6g}, {y:.6g}); level curve passes "
            "too close to a critical point")
    return np.array([gy / gn, -gx / gn]), gn


def newton_to_level(system, z, h, tol=1e-13, max_iter=8, gtol=1e-12):
    """Project z onto {H = h} along the gradient direction."""
    z = np.array([float(z[0]), float(z[1])])
    hscale = max(1.0, abs(h))
    for _ in range(max_iter):
        r = system.h(z[0], z[1]) - h
        if abs(r) <= tol * hscale:
            return z
        gx = system.hx(z[0], z[1])
        gy = system.hy(z[0], z[1])
        gn2 = gx * gx + gy * gy
        if gn2 < gtol * gtol:
            raise DegenerateCurve(
                f"gradient vanished while projecting onto H={h:.6g}")
        z[0] -= gx * r / gn2
        z[1] -= gy * r / gn2
    r = system.h(z[0], z[1]) - h
    if abs(r) > 100 * tol * hscale:
        raise NonConvergence(f"level projection stalled at residual {r:.3g}")
    return z


def continue_to_level(system, z, h_target, n_steps=32, **newton_kw):
    """Walk a point along gradient lines to another level of the same slab.

    Valid only when no critical value lies between H(z) and h_target;
    then the gradient-line path stays on one component family.
    """
    z = np.array([float(z[0]), float(z[1])])
    h0 = float(system.h(z[0], z[1]))
    if h0 == h_target:
        return newton_to_level(system, z, h_target, **newton_kw)
    for hk in np.linspace(h0, h_target, n_steps + 1)[1:]:
        z = newton_to_level(system, z, float(hk), **newton_kw)
    return z


def trace_level_curve(system, seed, h=None, max_ds=0.01, tol=1e-9,
                      gtol=1e-9, max_arc=None, min_loop_steps=8):
    """Trace the closed level-set component through a seed point.

    Returns a LevelPolyline whose final point is the (projected) seed,
    so the polygon is explicitly closed.  Raises NoClosure if the curve
    leaves the box or exceeds the arc budget, DegenerateCurve if it runs
    into a critical point.
    """
    if h is None:
        h = float(system.h(float(seed[0]), float(seed[1])))
    z0 = newton_to_level(system, seed, h)
    x0b, x1b, y0b, y1b = system.box
    scale = system.box_scale()
    if max_arc is None:
        max_arc = 6.0 * 2.0 * ((x1b - x0b) + (y1b - y0b))
    t0, _ = _unit_tangent(system, z0[0], z0[1], gtol)
    r_close = min(max(10.0 * max_ds, 0.01 * scale), 0.5 * scale)

    pts = [z0.copy()]
    segs = []
    z = z0.copy()
    s = 0.0
    ds = max_ds
    g_prev = 0.0
    n_acc = 0
    while s < max_arc:
        # one adaptive RKF45 step of the unit tangent field
        k = []
        try:
            for row in _A:
                zi = z + ds * sum(a * ki for a, ki in zip(row, k)) if row else z
                ti, _ = _unit_tangent(system, zi[0], zi[1], gtol)
                k.append(ti)
        except DegenerateCurve:
            ds *= 0.5
            if ds < 1e-12 * scale:
                raise
            continue
        z4 = z + ds * sum(b * ki for b, ki in zip(_B4, k))
        z5 = z + ds * sum(b * ki for b, ki in zip(_B5, k))
        err = math.hypot(z5[0] - z4[0], z5[1] - z4[1])
        if err > tol and ds > 1e-12 * scale:
            ds = max(ds * max(0.2, 0.9 * (tol / err) ** 0.2), 1e-12 * scale)
            continue
        znew = newton_to_level(system, z5, h)
        pad = 1e-7 * scale
        if not (x0b - pad <= znew[0] <= x1b + pad
                and y0b - pad <= znew[1] <= y1b + pad):
            raise NoClosure(
                f"level curve H={h:.6g} left the box; component is not closed")
        step = ds
        s += step
        n_acc += 1
        g_new = float(np.dot(znew - z0, t0))
        if n_acc > min_loop_steps and g_prev < 0.0 <= g_new \
                and np.hypot(*(znew - z0)) < r_close:
            theta = -g_prev / (g_new - g_prev)
            segs.append(theta * step)
            pts.append(z0.copy())
            return LevelPolyline(h=h, points=np.array(pts),
                                 seg_lengths=np.array(segs), closed=True)
        pts.append(znew.copy())
        segs.append(step)
        z = znew
        g_prev = g_new
        if err > 0:
            ds = min(max_ds, ds * min(5.0, 0.9 * (tol / err) ** 0.2))
        else:
            ds = min(max_ds, 5.0 * ds)
    raise NoClosure(
        f"level curve H={h:.6g} did not close within arc budget {max_arc:.3g}")


def compute_coeffs(system, polyline):
    """(T, B2) by trapezoid quadrature over a traced orbit."""
    pts = polyline.points
    g = system.grad_batch(pts)
    gn = np.hypot(g[:, 0], g[:, 1])
    if np.min(gn) <= 0:
        raise DegenerateCurve("zero gradient on the traced orbit")
    q_t = 1.0 / gn                       # integrand of T
    q_n = system.g2_batch(pts) / gn      # integrand of T * B2
    w = polyline.seg_lengths
    T = float(np.sum(w * 0.5 * (q_t[:-1] + q_t[1:])))
    num = float(np.sum(w * 0.5 * (q_n[:-1] + q_n[1:])))
    return T, num / T


def coeffs_at(system, seed, h=None, **trace_kw):
    """Trace the orbit through seed (optionally continued to level h)."""
    z = np.asarray(seed, dtype=float)
    if h is not None:
        h0 = float(system.h(z[0], z[1]))
        if h0 != h:
            z = continue_to_level(system, z, h)
    poly = trace_level_curve(system, z, h=h, **trace_kw)
    return compute_coeffs(system, poly)


# -- per-edge tables ---------------------------------------------------------

def _edge_seed_for_level(system, graph, edge, h):
    """Seed on the right component for a level inside the edge span."""
    seeds = edge.seeds
    hs = np.array([s[0] for s in seeds])
    k = int(np.argmin(np.abs(hs - h)))
    z = np.array([seeds[k][1], seeds[k][2]])
    return continue_to_level(system, z, h)


def _loglinear_fit(deltas, values):
    x = np.log(np.asarray(deltas, dtype=float))
    y = np.asarray(values, dtype=float)
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def extremum_period_limit(system, cp):
    """Exact small-orbit period at a nondegenerate extremum."""
    lam = np.abs(np.asarray(cp.hess_eigenvalues, dtype=float))
    return 2.0 * math.pi / math.sqrt(float(lam[0] * lam[1]))


@dataclass
class EdgeCoefficientTable:
    """Interpolated T(h), B2(h) over one edge's tabulated span."""

    edge_id: int
    h_lo: float
    h_hi: float                        # tabulated top (box cut for unbounded)
    lo_kind: str                       # "saddle" | "extremum"
    hi_kind: str                       # "saddle" | "extremum" | "cut"
    guard: float
    h_grid: np.ndarray
    t_vals: np.ndarray
    b2_vals: np.ndarray
    saddle_fits: dict = field(default_factory=dict)      # end -> (a, b, r2)
    end_values: dict = field(default_factory=dict)       # end -> (T, B2) at vertex
    _t_interp: PchipInterpolator = None
    _b2_interp: PchipInterpolator = None
    _n_interp: PchipInterpolator = None

    def __post_init__(self):
        self.h_grid = np.asarray(self.h_grid, dtype=float)
        self.t_vals = np.asarray(self.t_vals, dtype=float)
        self.b2_vals = np.asarray(self.b2_vals, dtype=float)
        self._t_interp = PchipInterpolator(self.h_grid, self.t_vals)
        self._b2_interp = PchipInterpolator(self.h_grid, self.b2_vals)
        self._n_interp = PchipInterpolator(self.h_grid,
                                           self.t_vals * self.b2_vals)

    @property
    def span(self):
        return (self.h_lo, self.h_hi)

    def _guard_width(self):
        return self.guard * (self.h_hi - self.h_lo)

    def lookup(self, h):
        """T and B2 at level(s) h; raises OutOfSpan outside the table."""
        h_arr = np.atleast_1d(np.asarray(h, dtype=float))
        eps = 1e-12 * max(1.0, abs(self.h_hi))
        if np.any(h_arr < self.h_lo - eps) or np.any(h_arr > self.h_hi + eps):
            bad = h_arr[(h_arr < self.h_lo - eps) | (h_arr > self.h_hi + eps)]
            raise OutOfSpan(
                f"level {bad[0]:.6g} outside edge {self.edge_id} table span "
                f"[{self.h_lo:.6g}, {self.h_hi:.6g}]")
        h_arr = np.clip(h_arr, self.h_lo, self.h_hi)
        t = np.asarray(self._t_interp(h_arr), dtype=float)
        b2 = np.asarray(self._b2_interp(h_arr), dtype=float)
        gw = self._guard_width()

        for end, vertex_h, sgn in (("lo", self.h_lo, 1.0), ("hi", self.h_hi, -1.0)):
            kind = self.lo_kind if end == "lo" else self.hi_kind
            if kind == "cut":
                continue
            delta = sgn * (h_arr - vertex_h)
            inside = delta < gw
            if not np.any(inside):
                continue
            if kind == "saddle":
                a, b, _ = self.saddle_fits[end]
                d = np.maximum(delta[inside], 1e-300)
                t_mod = a + b * np.log(d)
                n_mod = np.asarray(self._n_interp(h_arr[inside]), dtype=float)
                t[inside] = np.where(delta[inside] > 0, t_mod, np.inf)
                with np.errstate(divide="ignore", invalid="ignore"):
                    b2[inside] = np.where(delta[inside] > 0, n_mod / t_mod, 0.0)
            else:
                # extremum end: exact vertex nodes are in the grid; only pin
                # the vertex value itself
                at_v = delta <= 0
                if np.any(at_v & inside):
                    t_end, b2_end = self.end_values[end]
                    sel = inside & at_v
                    t[sel] = t_end
                    b2[sel] = b2_end
        b2 = np.maximum(b2, 0.0)
        if np.isscalar(h) or np.asarray(h).ndim == 0:
            return float(t[0]), float(b2[0])
        return t, b2

    def to_dict(self):
        return {
            "edge_id": self.edge_id, "h_lo": self.h_lo, "h_hi": self.h_hi,
            "lo_kind": self.lo_kind, "hi_kind": self.hi_kind,
            "guard": self.guard,
            "h_grid": self.h_grid.tolist(),
            "t_vals": self.t_vals.tolist(),
            "b2_vals": self.b2_vals.tolist(),
            "saddle_fits": {k: list(v) for k, v in self.saddle_fits.items()},
            "end_values": {k: list(v) for k, v in self.end_values.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(edge_id=d["edge_id"], h_lo=d["h_lo"], h_hi=d["h_hi"],
                   lo_kind=d["lo_kind"], hi_kind=d["hi_kind"], guard=d["guard"],
                   h_grid=np.array(d["h_grid"]), t_vals=np.array(d["t_vals"]),
                   b2_vals=np.array(d["b2_vals"]),
                   saddle_fits={k: tuple(v) for k, v in d["saddle_fits"].items()},
                   end_values={k: tuple(v) for k, v in d["end_values"].items()})


def _edge_grid(h_lo, h_hi, lo_kind, hi_kind, guard, n_geo, n_mid):
    """Sampling levels: geometric tails toward vertex ends, uniform middle."""
    span = h_hi - h_lo
    pts = []
    tails = {}
    for end, kind, anchor, sgn in (("lo", lo_kind, h_lo, 1.0),
                                   ("hi", hi_kind, h_hi, -1.0)):
        if kind == "cut":
            pts.append(anchor)
            continue
        deltas = np.geomspace(guard * span, 0.25 * span, n_geo)
        tails[end] = anchor + sgn * deltas
        pts.extend(tails[end].tolist())
    lo_in = h_lo + 0.25 * span
    hi_in = h_hi - 0.25 * span if hi_kind != "cut" else h_hi
    mid = np.linspace(lo_in, hi_in, n_mid + 2)
    pts.extend(mid.tolist())
    grid = np.unique(np.asarray(pts, dtype=float))
    grid = grid[(grid >= h_lo) & (grid <= h_hi)]
    return grid, tails


def tabulate_edge(system, graph, edge, guard=1e-4, n_geo=16, n_mid=12,
                  max_ds=0.01, tol=1e-9, min_fit_r2=0.98, cut_margin=1e-3):
    """Build the coefficient table for one edge by tracing orbits."""
    h_lo = edge.h_lo
    if edge.unbounded:
        # stay strictly below the level that touches the box boundary
        h_hi = edge.h_hi_table - cut_margin * (edge.h_hi_table - h_lo)
    else:
        h_hi = edge.h_hi

    def end_kind(vid, cut):
        if cut:
            return "cut", None
        v = graph.vertex(vid)
        return ("saddle" if v.kind == "interior" else "extremum"), v

    lo_kind, lo_v = end_kind(edge.v_lo, False)
    hi_kind, hi_v = end_kind(edge.v_hi, edge.unbounded)

    grid, tails = _edge_grid(h_lo, h_hi, lo_kind, hi_kind, guard, n_geo, n_mid)
    t_vals = np.empty_like(grid)
    b2_vals = np.empty_like(grid)
    for i, h in enumerate(grid):
        seed = _edge_seed_for_level(system, graph, edge, float(h))
        t_vals[i], b2_vals[i] = coeffs_at(system, seed, max_ds=max_ds, tol=tol)

    saddle_fits = {}
    end_values = {}
    grid_list = grid.tolist()
    for end, kind, v, anchor, sgn in (("lo", lo_kind, lo_v, h_lo, 1.0),
                                      ("hi", hi_kind, hi_v, h_hi, -1.0)):
        if kind == "saddle":
            hs_tail = tails[end]
            deltas = sgn * (hs_tail - anchor)
            # fit the innermost geometric decade(s)
            cut = deltas <= (guard * (h_hi - h_lo)) * 60.0
            if np.count_nonzero(cut) < 6:
                cut = np.argsort(deltas) < 8
            idx = [grid_list.index(hv) for hv in hs_tail[cut]]
            a, b, r2 = _loglinear_fit(deltas[cut], t_vals[idx])
            if r2 < min_fit_r2:
                raise NonConvergence(
                    f"edge {edge.id} {end}-end period fit T ~ a + b log(delta) "
                    f"has R^2 = {r2:.4f} < {min_fit_r2}")
            saddle_fits[end] = (a, b, r2)
            end_values[end] = (math.inf, 0.0)
        elif kind == "extremum":
            cp = graph.critical_points[v.cp_index]
            end_values[end] = (extremum_period_limit(system, cp), 0.0)

    # exact vertex nodes for extremum ends
    extra_h, extra_t, extra_b2 = [], [], []
    if lo_kind == "extremum":
        extra_h.append(h_lo)
        extra_t.append(end_values["lo"][0])
        extra_b2.append(0.0)
    if hi_kind == "extremum":
        extra_h.append(h_hi)
        extra_t.append(end_values["hi"][0])
        extra_b2.append(0.0)
    if extra_h:
        allh = np.concatenate([grid, np.array(extra_h)])
        allt = np.concatenate([t_vals, np.array(extra_t)])
        allb = np.concatenate([b2_vals, np.array(extra_b2)])
        order = np.argsort(allh)
        allh, allt, allb = allh[order], allt[order], allb[order]
        keep = np.concatenate([[True], np.diff(allh) > 0])
        grid, t_vals, b2_vals = allh[keep], allt[keep], allb[keep]

    return EdgeCoefficientTable(
        edge_id=edge.id, h_lo=h_lo, h_hi=h_hi, lo_kind=lo_kind,
        hi_kind=hi_kind, guard=guard, h_grid=grid, t_vals=t_vals,
        b2_vals=b2_vals, saddle_fits=saddle_fits, end_values=end_values)


def tabulate_all(system, graph, **kw):
    return {e.id: tabulate_edge(system, graph, e, **kw) for e in graph.edges}


def min_period(tables):
    """Smallest tabulated orbit period across edges (dt safety scale)."""
    return float(min(np.min(t.t_vals) for t in tables.values()))
