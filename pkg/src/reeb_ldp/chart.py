"""Canonical coordinates around a saddle and transit-time estimates.

The chart psi maps a rectangle in (mu, nu) to the plane so that

    H(psi(mu, nu)) = h_s + mu^2 - nu^2        (exactly, by construction)

with psi built from the Hessian eigenframe seed

    psi0(mu, nu) = x_s + sqrt(2/lam_plus) mu e_plus
                       + sqrt(2/|lam_minus|) nu e_minus

followed by a pointwise Newton correction along grad H onto the target
level.  The correction keeps each point on its gradient line, so psi
stays injective and orientation-positive where the build checks pass.

In chart coordinates the flow moves on hyperbolas mu^2 - nu^2 = G and
the passage time from (mu, nu) to the exit edge |nu| = l is

    T = 1/2 * | int det J_psi(s sqrt(G) cosh u, sqrt(G) sinh u) du |

over the traversed u-range (s = sign of mu), giving the exact identity
T = asinh(l/sqrt(G))/2 - asinh(nu/sqrt(G))/2 for an identity chart and
the log bound T <= Mbar * (log(l + sqrt(l^2+G)) - log(G)/2) in general.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import BadKind, ChartFail, NonConvergence, OutsideChart


def _project_levels(system, pts, targets, tol=1e-12, max_iter=40):
    """Vector Newton along grad H onto per-point target levels."""
    z = np.array(pts, dtype=float)
    t = np.asarray(targets, dtype=float)
    scale = np.maximum(1.0, np.abs(t))
    for _ in range(max_iter):
        r = system.h_batch(z) - t
        if np.all(np.abs(r) <= tol * scale):
            return z
        g = system.grad_batch(z)
        gn2 = np.sum(g * g, axis=1)
        bad = gn2 < 1e-24
        if np.any(bad & (np.abs(r) > tol * scale)):
            raise NonConvergence("gradient vanished during level correction")
        step = r / np.maximum(gn2, 1e-300)
        # damped far from the target to avoid jumping level branches
        step = np.clip(step, -0.5, 0.5)
        z -= g * step[:, None]
    r = system.h_batch(z) - t
    if np.max(np.abs(r) / scale) > 100 * tol:
        raise NonConvergence(
            f"level correction stalled, residual {np.max(np.abs(r)):.3g}")
    return z


@dataclass
class SaddleChart:
    system: object
    cp_index: int
    x_s: np.ndarray
    h_s: float
    l: float
    e_plus: np.ndarray
    e_minus: np.ndarray
    lam_plus: float
    lam_minus: float
    m_lo: float = None               # min det J over U
    m_bar: float = None              # max |det J| over U (Mbar)
    residual_max: float = None
    newton_tol: float = 1e-12

    def seed(self, mu, nu):
        mu = np.asarray(mu, dtype=float)
        nu = np.asarray(nu, dtype=float)
        a = math.sqrt(2.0 / self.lam_plus)
        b = math.sqrt(2.0 / abs(self.lam_minus))
        out = (self.x_s[None, :]
               + a * mu[..., None] * self.e_plus[None, :]
               + b * nu[..., None] * self.e_minus[None, :])
        return out

    def forward(self, mu, nu):
        """psi(mu, nu); accepts scalars or equal-shape arrays."""
        mu_a = np.atleast_1d(np.asarray(mu, dtype=float))
        nu_a = np.atleast_1d(np.asarray(nu, dtype=float))
        mu_a, nu_a = np.broadcast_arrays(mu_a, nu_a)
        pts = self.seed(mu_a.ravel(), nu_a.ravel())
        tgt = self.h_s + mu_a.ravel() ** 2 - nu_a.ravel() ** 2
        out = _project_levels(self.system, pts, tgt, tol=self.newton_tol)
        if np.isscalar(mu) and np.isscalar(nu):
            return out[0]
        return out.reshape(mu_a.shape + (2,))

    def level(self, mu, nu):
        return self.h_s + mu ** 2 - nu ** 2

    def jac(self, mu, nu, fd=None):
        """Finite-difference Jacobian d psi / d(mu, nu)."""
        if fd is None:
            fd = 1e-6 * self.l
        mu_a = np.atleast_1d(np.asarray(mu, dtype=float))
        nu_a = np.atleast_1d(np.asarray(nu, dtype=float))
        mu_a, nu_a = np.broadcast_arrays(mu_a, nu_a)
        pp = self.forward(mu_a + fd, nu_a)
        pm = self.forward(mu_a - fd, nu_a)
        qp = self.forward(mu_a, nu_a + fd)
        qm = self.forward(mu_a, nu_a - fd)
        J = np.empty(mu_a.shape + (2, 2))
        J[..., :, 0] = (pp - pm) / (2 * fd)
        J[..., :, 1] = (qp - qm) / (2 * fd)
        if np.isscalar(mu) and np.isscalar(nu):
            return J[0]
        return J

    def det_jac(self, mu, nu):
        J = self.jac(mu, nu)
        return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]

    def in_domain(self, mu, nu):
        return (abs(mu) <= 2.0 * self.l + 1e-12) and (abs(nu) <= self.l + 1e-12)

    def inverse(self, x, tol=1e-11, max_iter=60):
        """Chart coordinates of a plane point via 2D Newton."""
        x = np.asarray(x, dtype=float)
        d = x - self.x_s
        a = math.sqrt(2.0 / self.lam_plus)
        b = math.sqrt(2.0 / abs(self.lam_minus))
        mu = float(np.dot(d, self.e_plus)) / a
        nu = float(np.dot(d, self.e_minus)) / b
        for _ in range(max_iter):
            r = self.forward(mu, nu) - x
            if math.hypot(r[0], r[1]) < tol * max(1.0, self.l):
                return mu, nu
            J = self.jac(mu, nu)
            try:
                dmu, dnu = np.linalg.solve(J, r)
            except np.linalg.LinAlgError:
                raise NonConvergence("singular chart Jacobian in inverse")
            mu -= float(dmu)
            nu -= float(dnu)
        raise NonConvergence(f"chart inverse did not converge at {x}")

    def log_transit_bound(self, g):
        """Upper bound Mbar * (log(l + sqrt(l^2+G)) - log(G)/2)."""
        g = np.asarray(g, dtype=float)
        return self.m_bar * (np.log(self.l + np.sqrt(self.l ** 2 + g))
                             - 0.5 * np.log(g))


def build_saddle_chart(system, cp, l=None, critical_points=None,
                       newton_tol=1e-12, grid_n=(41, 21), max_retries=3):
    """Construct and certify a saddle chart, shrinking l on failure.

    Certification samples the construction rectangle
    [-4l, 4l] x [-2l, 2l]: the Newton correction must converge with tiny
    residual and det J_psi must stay positive and bounded.  Raises
    ChartFail when no acceptable l remains, BadKind for non-saddles.
    """
    if cp.kind != "saddle":
        raise BadKind(f"chart requires a saddle, got {cp.kind}")
    lam = np.asarray(cp.hess_eigenvalues, dtype=float)
    H = np.asarray(system.hess(cp.location[0], cp.location[1]), dtype=float)
    evals, evecs = np.linalg.eigh(H)
    lam_minus, lam_plus = float(evals[0]), float(evals[1])
    if not (lam_minus < 0 < lam_plus):
        raise BadKind(f"Hessian eigenvalues {evals} are not saddle-like")
    e_minus = evecs[:, 0]
    e_plus = evecs[:, 1]
    # right-handed frame: det [e_plus e_minus] > 0
    if e_plus[0] * e_minus[1] - e_plus[1] * e_minus[0] < 0:
        e_minus = -e_minus

    if l is None:
        l = 0.5
        if critical_points is not None and len(critical_points) > 1:
            d = min(math.dist(cp.location, q.location)
                    for q in critical_points if q is not cp)
            l = min(0.5, 0.25 * d)

    cp_index = -1
    if critical_points is not None:
        for i, q in enumerate(critical_points):
            if q is cp or (q.location == cp.location and q.kind == cp.kind):
                cp_index = i
                break

    last_err = None
    for attempt in range(max_retries + 1):
        chart = SaddleChart(system=system, cp_index=cp_index,
                            x_s=np.asarray(cp.location, dtype=float),
                            h_s=float(cp.h_value), l=float(l),
                            e_plus=e_plus, e_minus=e_minus,
                            lam_plus=lam_plus, lam_minus=lam_minus,
                            newton_tol=newton_tol)
        try:
            mu = np.linspace(-4 * l, 4 * l, grid_n[0])
            nu = np.linspace(-2 * l, 2 * l, grid_n[1])
            MU, NU = np.meshgrid(mu, nu, indexing="ij")
            pts = chart.forward(MU, NU)
            resid = np.abs(system.h_batch(pts.reshape(-1, 2))
                           - chart.level(MU, NU).ravel())
            resid_max = float(np.max(resid / np.maximum(1.0, np.abs(chart.h_s))))
            if resid_max > 50 * newton_tol:
                raise NonConvergence(f"chart residual {resid_max:.3g}")
            # certify det J on the certified domain U only
            mu_u = np.linspace(-2 * l, 2 * l, grid_n[0])
            nu_u = np.linspace(-l, l, grid_n[1])
            MU2, NU2 = np.meshgrid(mu_u, nu_u, indexing="ij")
            dets = chart.det_jac(MU2, NU2)
            m_lo = float(np.min(dets))
            m_hi = float(np.max(np.abs(dets)))
            if m_lo <= 0:
                raise NonConvergence(f"chart folds: min det J = {m_lo:.3g}")
            if m_hi / m_lo > 1e3:
                raise NonConvergence("chart conditioning too poor")
            chart.m_lo = m_lo
            chart.m_bar = m_hi
            chart.residual_max = resid_max
            return chart
        except NonConvergence as err:
            last_err = err
            l *= 0.5
    raise ChartFail(
        f"no acceptable chart size at saddle {tuple(cp.location)}; "
        f"last failure: {last_err}")


def transit_time(chart, mu, nu, quad_tol=1e-11):
    """Time for the flow from (mu, nu) to reach the exit edge |nu| = l.

    Requires a transiting entry: G = mu^2 - nu^2 > 0 and the whole
    hyperbola branch inside the certified domain (G <= 3 l^2).
    """
    mu = float(mu)
    nu = float(nu)
    l = chart.l
    if not chart.in_domain(mu, nu):
        raise OutsideChart(f"({mu:.4g}, {nu:.4g}) outside chart domain")
    G = mu * mu - nu * nu
    if G <= 0:
        raise OutsideChart(f"entry ({mu:.4g}, {nu:.4g}) has G = {G:.4g} <= 0; "
                           "not a transiting orbit")
    if G > 3.0 * l * l * (1 + 1e-12):
        raise OutsideChart(f"G = {G:.4g} > 3 l^2; orbit leaves through the "
                           "mu edge before |nu| = l")
    s = 1.0 if mu > 0 else -1.0
    rG = math.sqrt(G)
    u0 = math.asinh(nu / rG)
    u1 = -s * math.asinh(l / rG)

    def integrand(u):
        m = s * rG * math.cosh(u)
        n = rG * math.sinh(u)
        return float(chart.det_jac(m, n))

    val, _ = quad(integrand, min(u0, u1), max(u0, u1), epsabs=quad_tol,
                  epsrel=1e-9, limit=200)
    return 0.5 * abs(val)


def transit_time_identity(l, mu, nu):
    """Closed form for an identity chart (H = h_s + x^2 - y^2)."""
    G = mu * mu - nu * nu
    if G <= 0:
        raise OutsideChart("G <= 0")
    rG = math.sqrt(G)
    s = 1.0 if mu > 0 else -1.0
    return 0.5 * abs(math.asinh(nu / rG) + s * math.asinh(l / rG))


def transit_derivative_scaling(chart, g_values, nu=0.0):
    """max over g of |dT/dG| * G / Mbar; O(1) iff T has the log law."""
    out = []
    for g in np.asarray(g_values, dtype=float):
        mu = math.sqrt(g + nu * nu)
        dg = 1e-6 * g
        tp = transit_time(chart, math.sqrt(g + dg + nu * nu), nu)
        tm = transit_time(chart, math.sqrt(g - dg + nu * nu), nu)
        out.append(abs(tp - tm) / (2 * dg) * g / chart.m_bar)
    return float(np.max(out))


def flow_exit_time(system, chart, mu, nu, rtol=1e-10, atol=1e-12,
                   t_max=None):
    """Transit time measured on the actual flow (cross-check oracle).

    Integrates dx/dt = gradperp H from psi(mu, nu) until the chart
    nu-coordinate reaches +-l.
    """
    from scipy.integrate import solve_ivp

    x0 = chart.forward(float(mu), float(nu))
    l = chart.l
    if t_max is None:
        G = mu * mu - nu * nu
        t_max = 10.0 * (1.0 + float(chart.log_transit_bound(max(G, 1e-12))))

    def rhs(t, z):
        return [system.hy(z[0], z[1]), -system.hx(z[0], z[1])]

    def exit_edge(t, z):
        _, nu_c = chart.inverse(z)
        return l - abs(nu_c)

    exit_edge.terminal = True
    sol = solve_ivp(rhs, (0.0, t_max), x0, rtol=rtol, atol=atol,
                    events=exit_edge, dense_output=False)
    if not len(sol.t_events[0]):
        raise NonConvergence("flow did not reach the chart exit edge")
    return float(sol.t_events[0][0])
