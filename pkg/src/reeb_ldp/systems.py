"""Hamiltonian systems on the plane with polynomial data.

A system bundles a polynomial Hamiltonian H, its exact gradient and
Hessian, a noise field sigma (identity, constant matrix, or polynomial
entries), and a working box.  On top of that sit critical-point search
with Newton refinement, structural assumption checks (growth at
infinity, nondegeneracy, uniqueness of critical points per level-set
component, ellipticity of sigma sigma*), and the positive-drift margin
4(H - H_min) * AH - |grad H * sigma|^2 used near nondegenerate minima.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadKind, ConfigError, DegenerateCritical, NonConvergence
from .poly import Poly2, poly_from_table

_BUILTIN_TABLES = {
    # H = (x^2 + y^2) / 2
    "harmonic": [[2, 0, 0.5], [0, 2, 0.5]],
    # H = (x^2 - 1)^2 / 4 + y^2 / 2
    "doublewell": [[4, 0, 0.25], [2, 0, -0.5], [0, 0, 0.25], [0, 2, 0.5]],
    # H = x^2 - y^2 (chart/transit testing only; violates growth)
    "canonical_saddle": [[2, 0, 1.0], [0, 2, -1.0]],
}

_BUILTIN_BOXES = {
    "harmonic": (-3.2, 3.2, -3.2, 3.2),
    "doublewell": (-2.2, 2.2, -2.2, 2.2),
    "canonical_saddle": (-1.0, 1.0, -1.0, 1.0),
}


class SigmaField:
    """Noise matrix sigma(x): 2 x width, possibly state dependent."""

    def __init__(self, kind, data, width):
        self.kind = kind          # "identity" | "constant" | "poly"
        self.width = int(width)
        if kind == "identity":
            self._const = np.eye(2, self.width)
        elif kind == "constant":
            self._const = np.asarray(data, dtype=float)
            if self._const.shape != (2, self.width):
                raise ConfigError(f"sigma matrix must be 2x{self.width}")
        elif kind == "poly":
            self._polys = [[poly_from_table(entry) for entry in row] for row in data]
            if len(self._polys) != 2 or any(len(r) != self.width for r in self._polys):
                raise ConfigError("polynomial sigma must have shape 2 x width")
            self._const = None
        else:
            raise ConfigError(f"unknown sigma kind {kind!r}")

    @property
    def is_constant(self):
        return self.kind in ("identity", "constant")

    def __call__(self, x, y):
        """sigma at a point; scalar args -> (2, width) array."""
        if self._const is not None:
            return self._const
        return np.array([[p(x, y) for p in row] for row in self._polys])

    def batch(self, xs):
        """sigma for points xs (n,2) -> (n, 2, width)."""
        if self._const is not None:
            return np.broadcast_to(self._const, (xs.shape[0], 2, self.width))
        out = np.empty((xs.shape[0], 2, self.width))
        for i, row in enumerate(self._polys):
            for j, p in enumerate(row):
                out[:, i, j] = p(xs[:, 0], xs[:, 1])
        return out

    def a_matrix(self, x, y):
        """Diffusion matrix a = sigma sigma* at a point."""
        s = self(x, y)
        return s @ s.T

    def to_config(self):
        if self.kind == "identity":
            return {"identity": self.width}
        if self.kind == "constant":
            return {"constant": self._const.tolist()}
        return {"poly": [[p.terms() for p in row] for row in self._polys]}


@dataclass(frozen=True)
class CriticalPoint:
    """Nondegenerate critical point of H."""

    location: tuple[float, float]
    h_value: float
    kind: str                        # "minimum" | "maximum" | "saddle"
    hess_eigenvalues: tuple[float, float]

    @property
    def is_extremum(self):
        return self.kind != "saddle"


@dataclass
class EvalRecord:
    """Pointwise fields of a system: H, grad, Hess, AH, |grad H * sigma|^2."""

    h: float
    grad: np.ndarray
    hess: np.ndarray
    ah: float
    g2: float


class HamiltonianSystem:
    """Polynomial Hamiltonian with noise field and working box."""

    def __init__(self, h_poly, sigma=None, box=None, name="custom"):
        self.name = name
        self.h_poly = h_poly
        self.hx = h_poly.diff("x")
        self.hy = h_poly.diff("y")
        self.hxx = self.hx.diff("x")
        self.hxy = self.hx.diff("y")
        self.hyy = self.hy.diff("y")
        self.sigma = sigma if sigma is not None else SigmaField("identity", None, 2)
        if box is None:
            box = (-3.0, 3.0, -3.0, 3.0)
        self.box = tuple(float(b) for b in box)
        if not (self.box[0] < self.box[1] and self.box[2] < self.box[3]):
            raise ConfigError("box must satisfy xmin < xmax and ymin < ymax")

    # -- pointwise fields ------------------------------------------------

    def h(self, x, y):
        return self.h_poly(x, y)

    def grad(self, x, y):
        return np.array([self.hx(x, y), self.hy(x, y)])

    def hess(self, x, y):
        hxy = self.hxy(x, y)
        return np.array([[self.hxx(x, y), hxy], [hxy, self.hyy(x, y)]])

    def grad_norm(self, x, y):
        return math.hypot(self.hx(x, y), self.hy(x, y))

    def ah(self, x, y):
        """Generator applied to H: (1/2) sum a_ij d2H/dxi dxj, a = sigma sigma*."""
        a = self.sigma.a_matrix(x, y)
        hxy = self.hxy(x, y)
        return 0.5 * (a[0, 0] * self.hxx(x, y) + 2.0 * a[0, 1] * hxy
                      + a[1, 1] * self.hyy(x, y))

    def g2(self, x, y):
        """Squared noise coupling |grad H^T sigma|^2."""
        s = self.sigma(x, y)
        v = self.hx(x, y) * s[0] + self.hy(x, y) * s[1]
        return float(np.dot(v, v))

    def evaluate(self, point):
        x, y = float(point[0]), float(point[1])
        return EvalRecord(h=self.h(x, y), grad=self.grad(x, y),
                          hess=self.hess(x, y), ah=self.ah(x, y), g2=self.g2(x, y))

    # -- batch fields (trajectory ensembles) ------------------------------

    def h_batch(self, xs):
        return self.h_poly(xs[..., 0], xs[..., 1])

    def grad_batch(self, xs):
        return np.stack([self.hx(xs[..., 0], xs[..., 1]),
                         self.hy(xs[..., 0], xs[..., 1])], axis=-1)

    def perp_batch(self, xs):
        """Hamiltonian vector field (-dH/dy, dH/dx)."""
        return np.stack([-self.hy(xs[..., 0], xs[..., 1]),
                         self.hx(xs[..., 0], xs[..., 1])], axis=-1)

    def perp(self, x, y):
        return np.array([-self.hy(x, y), self.hx(x, y)])

    def ah_batch(self, xs):
        x, y = xs[..., 0], xs[..., 1]
        if self.sigma.is_constant:
            a = self.sigma.a_matrix(0.0, 0.0)
            return 0.5 * (a[0, 0] * self.hxx(x, y) + 2.0 * a[0, 1] * self.hxy(x, y)
                          + a[1, 1] * self.hyy(x, y))
        sig = self.sigma.batch(xs.reshape(-1, 2))
        a = np.einsum("nik,njk->nij", sig, sig).reshape(xs.shape[:-1] + (2, 2))
        return 0.5 * (a[..., 0, 0] * self.hxx(x, y) + 2.0 * a[..., 0, 1] * self.hxy(x, y)
                      + a[..., 1, 1] * self.hyy(x, y))

    def g2_batch(self, xs):
        g = self.grad_batch(xs)
        if self.sigma.is_constant:
            s = self.sigma(0.0, 0.0)
            v = g @ s
        else:
            sig = self.sigma.batch(xs.reshape(-1, 2)).reshape(xs.shape[:-1] + (2, self.sigma.width))
            v = np.einsum("...i,...ik->...k", g, sig)
        return np.sum(v * v, axis=-1)

    # -- geometry helpers --------------------------------------------------

    def in_box(self, x, y):
        x0, x1, y0, y1 = self.box
        return (x0 <= x <= x1) and (y0 <= y <= y1)

    def in_box_batch(self, xs):
        x0, x1, y0, y1 = self.box
        return ((xs[..., 0] >= x0) & (xs[..., 0] <= x1)
                & (xs[..., 1] >= y0) & (xs[..., 1] <= y1))

    def box_scale(self):
        x0, x1, y0, y1 = self.box
        return max(x1 - x0, y1 - y0)

    def to_config(self):
        return {
            "hamiltonian": {"poly": self.h_poly.terms()},
            "sigma": self.sigma.to_config(),
            "box": list(self.box),
        }

    def __repr__(self):
        return f"HamiltonianSystem({self.name!r}, box={self.box})"


# -- construction ---------------------------------------------------------

def make_sigma(spec):
    if spec is None:
        return SigmaField("identity", None, 2)
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("sigma spec must be one of "
                          "{'identity': width} | {'constant': rows} | {'poly': rows}")
    kind, data = next(iter(spec.items()))
    if kind == "identity":
        return SigmaField("identity", None, int(data))
    if kind == "constant":
        rows = np.asarray(data, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != 2:
            raise ConfigError("constant sigma must be a 2-row matrix")
        return SigmaField("constant", rows, rows.shape[1])
    if kind == "poly":
        if not isinstance(data, list) or len(data) != 2:
            raise ConfigError("polynomial sigma must give 2 rows of entry tables")
        return SigmaField("poly", data, len(data[0]))
    raise ConfigError(f"unknown sigma kind {kind!r}")


def builtin_system(name, sigma=None, box=None):
    if name not in _BUILTIN_TABLES:
        raise ConfigError(f"unknown builtin {name!r}; have {sorted(_BUILTIN_TABLES)}")
    h = poly_from_table(_BUILTIN_TABLES[name])
    return HamiltonianSystem(h, sigma=sigma,
                             box=box if box is not None else _BUILTIN_BOXES[name],
                             name=name)


def load_system(config):
    """Build a system from a config dict, JSON string, or file path."""
    if isinstance(config, str):
        try:
            if config.strip().startswith("{"):
                config = json.loads(config)
            else:
                with open(config) as fh:
                    config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load system config: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("system config must be a JSON object")
    ham = config.get("hamiltonian")
    if not isinstance(ham, dict):
        raise ConfigError("config requires a 'hamiltonian' object")
    sigma = make_sigma(config.get("sigma"))
    box = config.get("box")
    if "builtin" in ham:
        return builtin_system(ham["builtin"], sigma=sigma, box=box)
    if "poly" in ham:
        try:
            h = poly_from_table(ham["poly"])
        except (ValueError, TypeError, IndexError) as exc:
            raise ConfigError(f"bad polynomial table: {exc}") from exc
        if h.degree < 2:
            raise ConfigError("Hamiltonian must have degree >= 2")
        return HamiltonianSystem(h, sigma=sigma, box=box, name="poly")
    raise ConfigError("hamiltonian must specify 'builtin' or 'poly'")


# -- critical points --------------------------------------------------------

def _newton_critical(system, z0, max_iter=60, tol=1e-12):
    z = np.array(z0, dtype=float)
    scale = system.box_scale()
    for _ in range(max_iter):
        g = system.grad(z[0], z[1])
        gn = math.hypot(g[0], g[1])
        if gn < tol * max(1.0, scale):
            return z
        hess = system.hess(z[0], z[1])
        det = hess[0, 0] * hess[1, 1] - hess[0, 1] * hess[1, 0]
        if abs(det) < 1e-14:
            return None
        step = np.linalg.solve(hess, g)
        if not np.all(np.isfinite(step)):
            return None
        # damped if the step is wild relative to the box
        norm = math.hypot(step[0], step[1])
        if norm > 0.5 * scale:
            step *= 0.5 * scale / norm
        z = z - step
        if not np.all(np.isfinite(z)) or abs(z[0]) > 100 * scale or abs(z[1]) > 100 * scale:
            return None
    g = system.grad(z[0], z[1])
    if math.hypot(g[0], g[1]) < 1e-9 * max(1.0, scale):
        return z
    return None


def find_critical_points(system, box=None, grid_n=64, dedupe_tol=1e-6,
                         degenerate_tol=1e-8):
    """Newton-refined critical points from grid seeds, sorted by H value.

    Raises DegenerateCritical when a converged root has |det Hess| below
    degenerate_tol, and NonConvergence when a grid cell brackets a sign
    change of both gradient components but no seed converged nearby.
    """
    x0, x1, y0, y1 = box if box is not None else system.box
    xs = np.linspace(x0, x1, grid_n)
    ys = np.linspace(y0, y1, grid_n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    gx = system.hx(X, Y)
    gy = system.hy(X, Y)
    g2 = gx * gx + gy * gy

    # seeds: local minima of |grad|^2 plus cells where both components flip sign
    seeds = []
    interior = g2[1:-1, 1:-1]
    neigh = np.stack([g2[:-2, 1:-1], g2[2:, 1:-1], g2[1:-1, :-2], g2[1:-1, 2:]])
    mins = (interior <= neigh.min(axis=0))
    for i, j in zip(*np.nonzero(mins)):
        seeds.append((X[i + 1, j + 1], Y[i + 1, j + 1]))

    sign_cells = []
    sx = np.sign(gx)
    sy = np.sign(gy)
    flip_x = (sx[:-1, :-1] * sx[1:, :-1] <= 0) | (sx[:-1, :-1] * sx[:-1, 1:] <= 0)
    flip_y = (sy[:-1, :-1] * sy[1:, :-1] <= 0) | (sy[:-1, :-1] * sy[:-1, 1:] <= 0)
    for i, j in zip(*np.nonzero(flip_x & flip_y)):
        c = (0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]))
        sign_cells.append(c)
        seeds.append(c)

    roots = []
    for seed in seeds:
        z = _newton_critical(system, seed)
        if z is None:
            continue
        if not (x0 - 1e-9 <= z[0] <= x1 + 1e-9 and y0 - 1e-9 <= z[1] <= y1 + 1e-9):
            continue
        if all(math.hypot(z[0] - r[0], z[1] - r[1]) > dedupe_tol for r in roots):
            roots.append((float(z[0]), float(z[1])))

    cell = max((x1 - x0), (y1 - y0)) / (grid_n - 1)
    for c in sign_cells:
        if not any(math.hypot(c[0] - r[0], c[1] - r[1]) < 3 * cell for r in roots):
            raise NonConvergence(
                f"gradient sign change near {c} but Newton found no critical point")

    points = []
    for rx, ry in roots:
        hess = system.hess(rx, ry)
        det = hess[0, 0] * hess[1, 1] - hess[0, 1] * hess[1, 0]
        if abs(det) < degenerate_tol:
            raise DegenerateCritical(
                f"critical point at ({rx:.6g}, {ry:.6g}) has |det Hess| = {abs(det):.3g}")
        eigs = np.linalg.eigvalsh(hess)
        if eigs[0] > 0:
            kind = "minimum"
        elif eigs[1] < 0:
            kind = "maximum"
        else:
            kind = "saddle"
        points.append(CriticalPoint(location=(rx, ry), h_value=float(system.h(rx, ry)),
                                    kind=kind, hess_eigenvalues=(float(eigs[0]), float(eigs[1]))))
    points.sort(key=lambda p: (p.h_value, p.location))
    return points


# -- assumption checks -------------------------------------------------------

@dataclass
class AssumptionReport:
    """Advisory report; hard failures are in items[*]['passed']."""

    items: list = field(default_factory=list)

    @property
    def all_passed(self):
        return all(it["passed"] for it in self.items)

    def item(self, check_id):
        for it in self.items:
            if it["id"] == check_id:
                return it
        raise KeyError(check_id)


def _band_connected(system, p1, p2, level, delta, grid_n=256):
    """True if p1 and p2 lie in one component of {|H - level| < delta}.

    The H-band is widened pointwise to 0.75 grid cells of the level
    curve (first order in |grad H|) so thin high-gradient stretches of a
    separatrix stay connected at finite grid resolution.
    """
    from scipy import ndimage

    x0, x1, y0, y1 = system.box
    xs = np.linspace(x0, x1, grid_n)
    ys = np.linspace(y0, y1, grid_n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    cell = max(x1 - x0, y1 - y0) / (grid_n - 1)
    gn = np.hypot(system.hx(X, Y), system.hy(X, Y))
    width = np.maximum(delta, 0.75 * cell * gn)
    mask = np.abs(system.h_poly(X, Y) - level) < width
    labels, _ = ndimage.label(mask)

    def label_at(p):
        i = int(round((p[0] - x0) / (x1 - x0) * (grid_n - 1)))
        j = int(round((p[1] - y0) / (y1 - y0) * (grid_n - 1)))
        return labels[min(max(i, 0), grid_n - 1), min(max(j, 0), grid_n - 1)]

    l1, l2 = label_at(p1), label_at(p2)
    return l1 != 0 and l1 == l2


def check_assumptions(system, ring_radius=None, grid_n=128, critical_points=None):
    """Report-style verification of the structural assumptions.

    Growth constants are sampled on a ring; curvature and ellipticity on
    the working box; uniqueness of critical points per level-set component
    via a band flood fill around shared levels.
    """
    report = AssumptionReport()
    x0, x1, y0, y1 = system.box
    if ring_radius is None:
        ring_radius = 0.9 * 0.5 * min(x1 - x0, y1 - y0)

    # 1: curvature bound on the box (global boundedness only for degree <= 2)
    xs = np.linspace(x0, x1, grid_n)
    ys = np.linspace(y0, y1, grid_n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    hxx, hxy, hyy = system.hxx(X, Y), system.hxy(X, Y), system.hyy(X, Y)
    curv = np.max(np.abs(np.stack([np.broadcast_to(hxx, X.shape),
                                   np.broadcast_to(hxy, X.shape),
                                   np.broadcast_to(hyy, X.shape)])))
    report.items.append({
        "id": "smoothness",
        "passed": bool(np.isfinite(curv)),
        "details": {"max_abs_second_derivative_on_box": float(curv),
                    "globally_bounded": system.h_poly.degree <= 2},
    })

    # 2: growth on a ring: H >= A1 |x|^2, |grad H| >= A2 |x|, Laplacian >= A3
    theta = np.linspace(0.0, 2 * math.pi, 720, endpoint=False)
    rx, ry = ring_radius * np.cos(theta), ring_radius * np.sin(theta)
    hv = system.h_poly(rx, ry)
    gn = np.hypot(system.hx(rx, ry), system.hy(rx, ry))
    lap = system.hxx(rx, ry) + system.hyy(rx, ry)
    a1 = float(np.min(hv) / ring_radius ** 2)
    a2 = float(np.min(gn) / ring_radius)
    a3 = float(np.min(lap))
    report.items.append({
        "id": "growth",
        "passed": bool(a1 > 0 and a2 > 0 and a3 > 0),
        "details": {"ring_radius": float(ring_radius), "A1": a1, "A2": a2, "A3": a3},
    })

    # 3: finitely many nondegenerate critical points
    cps = critical_points
    degenerate_msg = None
    if cps is None:
        try:
            cps = find_critical_points(system)
        except DegenerateCritical as exc:
            degenerate_msg = str(exc)
            cps = []
    report.items.append({
        "id": "morse",
        "passed": degenerate_msg is None and len(cps) > 0,
        "details": {"count": len(cps),
                    "kinds": sorted(p.kind for p in cps),
                    "degenerate": degenerate_msg},
    })

    # 4: at most one critical point per vertex level-curve component
    violations = []
    if cps:
        values = [p.h_value for p in cps]
        gaps = [abs(a - b) for i, a in enumerate(values) for b in values[i + 1:]]
        pos = [g for g in gaps if g > 1e-9]
        delta = 0.25 * min(pos) if pos else 1e-3
        delta = min(delta, 1e-3)
        for i, p in enumerate(cps):
            for q in cps[i + 1:]:
                if abs(p.h_value - q.h_value) > max(1e-9, 0.5 * delta):
                    continue
                if p.kind != "saddle" and q.kind != "saddle":
                    continue  # isolated extrema at equal levels are separate components
                if _band_connected(system, p.location, q.location,
                                   0.5 * (p.h_value + q.h_value), delta):
                    violations.append({"level": p.h_value,
                                       "points": [p.location, q.location]})
    report.items.append({
        "id": "level_uniqueness",
        "passed": not violations,
        "details": {"violations": violations},
    })

    # 5: sigma sigma* uniformly elliptic and bounded on the box
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    sig = system.sigma.batch(pts)
    a = np.einsum("nik,njk->nij", sig, sig)
    tr = a[:, 0, 0] + a[:, 1, 1]
    det = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    disc = np.sqrt(np.maximum(tr * tr - 4 * det, 0.0))
    lam_min = float(np.min(0.5 * (tr - disc)))
    lam_max = float(np.max(0.5 * (tr + disc)))
    report.items.append({
        "id": "ellipticity",
        "passed": bool(lam_min > 1e-12 and np.isfinite(lam_max)),
        "details": {"lambda_min": lam_min, "lambda_max": lam_max},
    })
    return report


def positive_drift_margin(system, minimum, radius, n_radii=32, n_angles=64):
    """min over a punctured ball at a minimum of 4(H-H_min)*AH - |grad H*sigma|^2.

    A strictly positive margin certifies that the energy diffusion has
    positive drift relative to its quadratic variation near the minimum.
    """
    if isinstance(minimum, CriticalPoint):
        if minimum.kind != "minimum":
            raise BadKind(f"positive_drift_margin requires a minimum, got {minimum.kind}")
        cx, cy = minimum.location
        h0 = minimum.h_value
    else:
        cx, cy = float(minimum[0]), float(minimum[1])
        hess = system.hess(cx, cy)
        eigs = np.linalg.eigvalsh(hess)
        if eigs[0] <= 0:
            raise BadKind("positive_drift_margin requires a nondegenerate minimum")
        h0 = float(system.h(cx, cy))
    radii = radius * np.geomspace(1e-3, 1.0, n_radii)
    theta = np.linspace(0.0, 2 * math.pi, n_angles, endpoint=False)
    R, TH = np.meshgrid(radii, theta, indexing="ij")
    pts = np.stack([(cx + R * np.cos(TH)).ravel(), (cy + R * np.sin(TH)).ravel()], axis=1)
    hv = system.h_batch(pts) - h0
    ah = system.ah_batch(pts)
    g2 = system.g2_batch(pts)
    margin = 4.0 * hv * ah - g2
    k = int(np.argmin(margin))
    return {"margin": float(margin[k]),
            "argmin": (float(pts[k, 0]), float(pts[k, 1])),
            "radius": float(radius),
            "n_samples": int(margin.size)}
