"""Monte Carlo verification harness.

Three independent probes of the rate machinery:

* tube probabilities P(rho_{0,T}(Y(X), phi) < delta) across an epsilon
  ladder, with a weighted least-squares fit of -log p against eps^-beta
  whose slope is compared to the minimized action over the tube closure;
* escape-from-extremum hitting probabilities of {H = k eps^beta};
* direct 1-D Brownian barrier/endpoint estimates for the three
  saddle-noise bounds, plus a reflection-principle cross-check.

All estimators are deterministic given (seed, parameters) and
independent of the worker count: trajectory batches use the counter
RNG from `sde`, the Brownian oracle streams fixed 2^17-path blocks
with per-block Philox keys.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .errors import ConfigError, UncoveredEdge
from .reeb import (GraphPoint, path_distance, project, project_trajectory,
                   resample_path)
from .rng import derive_key
from .sde import SimulationConfig, default_threads, resolve_dt, simulate

__all__ = [
    "wilson_interval", "fit_rate", "TubeExperiment", "TubeEstimate",
    "derive_start_point", "estimate_tube", "tube_reference_action",
    "escape_extremum_probe", "brownian_saddle_oracle",
    "quadratic_variation_check", "max_endpoint_joint",
]

_Z95 = 1.959963984540054


def wilson_interval(hits, n, z=_Z95):
    """Wilson 95% score interval for a binomial proportion."""
    if n <= 0:
        raise ConfigError("wilson_interval needs n >= 1")
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def fit_rate(x, y, weights=None):
    """Weighted least squares y ~ intercept + slope*x.

    Returns (slope, intercept, slope_se, residuals).  Weights default
    to 1; slope_se is the usual 1/sqrt(sum w (x-xbar)^2) with the
    supplied weights taken as inverse variances.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if len(x) < 2:
        raise ConfigError("rate fit needs at least 2 points")
    sw = w.sum()
    xb = (w * x).sum() / sw
    yb = (w * y).sum() / sw
    sxx = (w * (x - xb) ** 2).sum()
    if sxx <= 0:
        raise ConfigError("rate fit needs distinct abscissae")
    slope = (w * (x - xb) * (y - yb)).sum() / sxx
    intercept = yb - slope * xb
    resid = y - (intercept + slope * x)
    return float(slope), float(intercept), float(1.0 / math.sqrt(sxx)), resid


# -- tube probabilities ------------------------------------------------------

@dataclass(frozen=True)
class TubeExperiment:
    """One tube-probability study: reference path, radius, epsilon ladder."""

    path: object                      # GraphPath, phi(0) = Y(x0)
    delta: float
    epsilons: tuple
    beta: float
    n_samples: object = 10 ** 3       # int, or one int per ladder point
    seed: int = 0
    x0: tuple = None                  # derived from path.point(0) if None
    method: str = "split_rk4"
    audit_fraction: float = 0.01

    def __post_init__(self):
        if self.delta <= 0:
            raise ConfigError("tube radius delta must be positive")
        eps = tuple(float(e) for e in self.epsilons)
        if len(eps) < 1 or any(not (0 < e < 1) for e in eps):
            raise ConfigError("epsilon ladder entries must lie in (0,1)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon ladder must be strictly decreasing")
        object.__setattr__(self, "epsilons", eps)
        ns = self.n_samples
        ns = tuple(int(n) for n in (ns if np.iterable(ns) else [ns] * len(eps)))
        if len(ns) != len(eps):
            raise ConfigError("n_samples must match the epsilon ladder")
        if any(n < 10 ** 3 for n in ns):
            raise ConfigError("tube estimates need >= 1e3 samples per epsilon")
        object.__setattr__(self, "n_samples", ns)
        if not (0 < self.beta < 1):
            raise ConfigError(f"beta must be in (0,1), got {self.beta}")


@dataclass
class TubeEstimate:
    """Per-epsilon hit statistics and the fitted exponential rate."""

    epsilons: np.ndarray
    n_samples: np.ndarray
    hits: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    all_miss: np.ndarray              # bool; excluded from the fit
    n_exited: np.ndarray
    delta: float
    beta: float
    t_final: float
    s_fit: float = None               # None when < 3 usable ladder points
    s_fit_se: float = None
    intercept: float = None
    residuals: np.ndarray = None
    s_reference: float = None
    ratio: float = None
    verdict: str = None               # "pass" | "fail" | None
    monotone: bool = None
    audit_checked: int = 0
    audit_agree: bool = True
    audit_max_dev: float = 0.0

    def to_dict(self):
        def arr(a):
            return None if a is None else np.asarray(a).tolist()
        return {
            "delta": self.delta, "beta": self.beta, "t_final": self.t_final,
            "per_epsilon": [
                {"epsilon": float(e), "n": int(n), "hits": int(k),
                 "p_hat": float(p), "wilson_lo": float(lo),
                 "wilson_hi": float(hi), "all_miss": bool(m),
                 "n_exited": int(x)}
                for e, n, k, p, lo, hi, m, x in zip(
                    self.epsilons, self.n_samples, self.hits, self.p_hat,
                    self.ci_lo, self.ci_hi, self.all_miss, self.n_exited)],
            "s_fit": self.s_fit, "s_fit_se": self.s_fit_se,
            "intercept": self.intercept, "residuals": arr(self.residuals),
            "s_reference": self.s_reference, "ratio": self.ratio,
            "verdict": self.verdict, "monotone": self.monotone,
            "audit": {"checked": self.audit_checked,
                      "agree": self.audit_agree,
                      "max_dev": self.audit_max_dev},
        }


def derive_start_point(system, graph, point):
    """Plane point whose projection is the given graph point.

    Vertex points map to the critical point itself; edge points are
    seeded on the correct level-curve component via the edge census
    seeds and continued to the exact level.
    """
    from .coeffs import _edge_seed_for_level
    if point.at_vertex is not None:
        return np.array(graph.vertices[point.at_vertex].location, dtype=float)
    edge = graph.edge(point.edge_id)
    for vid in (edge.v_lo, edge.v_hi):
        if vid is not None and graph.vertices[vid].h == point.h:
            return np.array(graph.vertices[vid].location, dtype=float)
    return _edge_seed_for_level(system, graph, edge, point.h)


def tube_reference_action(graph, tables, p_start, p_target, t_final, delta):
    """Minimum action over the closed delta-tube (endpoint slack delta)."""
    from .action import minimize_action
    return minimize_action(graph, tables, p_start, p_target, t_final,
                           slack=delta).value


def _tube_record_every(epsilon, beta, t_final):
    # record every step while that stays small; the recorded grid is the
    # metric grid, so thinning is a declared coarsening, not an error
    _, n_steps = resolve_dt(epsilon, beta, t_final)
    return 1 if n_steps <= 4096 else None


def _slow_rho(system, graph, ref, times, states):
    """Projection-based recomputation of sup_t r(Y(X_t), phi(t))."""
    if np.any(~system.in_box_batch(np.asarray(states))):
        return math.inf
    gp = project_trajectory(system, graph, states, times=times)
    return path_distance(graph, gp, ref)


def estimate_tube(system, graph, tables, exp, s_reference=None,
                  rel_tol=0.35, threads=None):
    """Monte Carlo tube probabilities and the fitted LDP rate.

    For each epsilon in the ladder, simulates a batch from x0, measures
    rho on the recorded grid against the reference path, counts hits
    rho < delta, and fits -log p_hat = s_fit * eps^-beta + c by weighted
    least squares over the ladder points with at least one hit.  On a
    single-edge graph rho is the vectorized sup |H - phi|; a fixed
    1% subsample is re-measured through the full projection path and
    must agree exactly.
    """
    path = exp.path
    t_final = float(path.times[-1] - path.times[0])
    if abs(path.times[0]) > 1e-12:
        raise ConfigError("reference path must start at t = 0")
    x0 = exp.x0
    if x0 is None:
        x0 = derive_start_point(system, graph, path.point(0))
    x0 = np.asarray(x0, dtype=float)
    y0 = project(system, graph, x0)
    p0 = path.point(0)
    scale = system.box_scale()
    if y0.at_vertex is None and p0.at_vertex is None and \
            y0.edge_id != p0.edge_id:
        raise ConfigError(
            f"x0 projects to edge {y0.edge_id}, reference starts on "
            f"edge {p0.edge_id}")
    if abs(y0.h - p0.h) > 1e-9 * max(1.0, scale):
        raise ConfigError(
            f"H(x0) = {y0.h:.12g} does not match the reference start "
            f"level {p0.h:.12g}")

    single_edge = len(graph.edges) == 1
    m = len(exp.epsilons)
    hits = np.zeros(m, dtype=int)
    n_exited = np.zeros(m, dtype=int)
    p_hat = np.zeros(m)
    ci = np.zeros((m, 2))
    audit_checked = 0
    audit_agree = True
    audit_dev = 0.0

    for j, eps in enumerate(exp.epsilons):
        n_j = exp.n_samples[j]
        cfg = SimulationConfig(
            epsilon=eps, beta=exp.beta, t_final=t_final,
            x0=tuple(float(c) for c in x0), n_traj=n_j, method=exp.method,
            seed=exp.seed, stream=f"tube/{j}",
            record_every=_tube_record_every(eps, exp.beta, t_final))
        res = simulate(system, cfg, threads=threads)
        ref = resample_path(graph, path, res.times)
        if single_edge:
            rho = np.max(np.abs(res.h_values - ref.h_values[None, :]), axis=1)
            rho[res.exited] = np.inf
        else:
            rho = np.array([
                _slow_rho(system, graph, ref, res.times, res.states[i])
                for i in range(n_j)])
        hit = rho < exp.delta
        hits[j] = int(np.count_nonzero(hit))
        n_exited[j] = int(np.count_nonzero(res.exited))
        p_hat[j] = hits[j] / n_j
        ci[j] = wilson_interval(hits[j], n_j)

        if single_edge and exp.audit_fraction > 0:
            stride = max(1, int(round(1.0 / exp.audit_fraction)))
            for i in range(0, n_j, stride):
                slow = _slow_rho(system, graph, ref, res.times, res.states[i])
                audit_checked += 1
                if (slow < exp.delta) != bool(hit[i]):
                    audit_agree = False
                if np.isfinite(slow) and np.isfinite(rho[i]):
                    audit_dev = max(audit_dev, abs(slow - rho[i]))
                elif np.isfinite(slow) != np.isfinite(rho[i]):
                    audit_agree = False

    all_miss = hits == 0
    est = TubeEstimate(
        epsilons=np.array(exp.epsilons), n_samples=np.array(exp.n_samples),
        hits=hits, p_hat=p_hat, ci_lo=ci[:, 0], ci_hi=ci[:, 1],
        all_miss=all_miss, n_exited=n_exited, delta=exp.delta, beta=exp.beta,
        t_final=t_final, audit_checked=audit_checked,
        audit_agree=audit_agree, audit_max_dev=float(audit_dev))

    usable = ~all_miss
    est.monotone = bool(np.all(np.diff(p_hat) <= 0)) if m > 1 else None
    if s_reference is not None:
        est.s_reference = float(s_reference)
    if int(usable.sum()) >= 3:
        x = np.array(exp.epsilons)[usable] ** (-exp.beta)
        p = p_hat[usable]
        n = np.array(exp.n_samples)[usable]
        y = -np.log(p)
        # delta-method variance of -log p_hat, Anscombe-adjusted so a
        # saturated ladder point cannot produce an infinite weight
        pa = (hits[usable] + 0.5) / (n + 1.0)
        w = n * pa / (1.0 - pa)
        s_fit, c, se, resid = fit_rate(x, y, w)
        est.s_fit, est.intercept, est.s_fit_se = s_fit, c, se
        est.residuals = resid
        if s_reference is not None and s_reference > 0:
            est.ratio = s_fit / s_reference
            est.verdict = ("pass" if abs(est.ratio - 1.0) <= rel_tol
                           else "fail")
    return est


# -- escape from an extremum -------------------------------------------------

def escape_extremum_probe(system, graph, config, k_grid, threads=None):
    """P(tau_1 < T) with tau_1 the first hit of {H = h_min + k eps^beta}.

    One trajectory batch from the extremum serves every k (the hitting
    events are nested, so the empirical curve is exactly monotone).
    Reports the smallest tested k whose estimate reaches 1/2.
    """
    x0 = np.asarray(config.x0, dtype=float)
    verts = [v for v in graph.vertices if v.kind == "exterior"]
    if not verts:
        raise ConfigError("graph has no extremum vertex")
    v = min(verts, key=lambda v: np.hypot(*(np.array(v.location) - x0)))
    if np.hypot(*(np.array(v.location) - x0)) > 1e-6 * max(1.0, system.box_scale()):
        raise ConfigError(
            f"config.x0 = {tuple(x0)} is not at an extremum critical point")

    _, n_steps = resolve_dt(config.epsilon, config.beta, config.t_final,
                            config.dt, config.min_orbit_period)
    if config.record_every is None and n_steps <= 4096:
        config = replace(config, record_every=1)
    res = simulate(system, config, threads=threads)
    sup_dev = np.max(np.abs(res.h_values - v.h), axis=1)

    amp = config.epsilon ** config.beta
    ks = np.asarray(sorted(float(k) for k in k_grid))
    levels = v.h + ks * amp
    n = config.n_traj
    counts = np.array([int(np.count_nonzero(sup_dev >= k * amp)) for k in ks])
    p = counts / n
    cis = np.array([wilson_interval(c, n) for c in counts])
    k_star = None
    for k, pk in zip(ks, p):
        if pk >= 0.5:
            k_star = float(k)
            break
    return {
        "epsilon": config.epsilon, "beta": config.beta,
        "t_final": config.t_final, "n_traj": n, "extremum_h": v.h,
        "k_grid": ks.tolist(), "levels": levels.tolist(),
        "p_hat": p.tolist(), "wilson_lo": cis[:, 0].tolist(),
        "wilson_hi": cis[:, 1].tolist(), "k_star": k_star,
        "monotone": bool(np.all(np.diff(p) <= 0)),
        "n_exited": int(np.count_nonzero(res.exited)),
    }


# -- Brownian barrier oracles -------------------------------------------------

def max_endpoint_joint(barrier, endpoint, t):
    """P(max_{[0,t]} W < barrier, W_t < endpoint) by reflection."""
    if barrier <= 0:
        return 0.0
    rt = math.sqrt(t)
    x = min(endpoint, barrier)
    return float(ndtr(x / rt) - ndtr((x - 2.0 * barrier) / rt))


def _case_ii_exact(b1, b2, endpoint, t_star, t_final):
    """Two-stage barrier probability by conditioning on W at the switch."""
    tau = t_final - t_star
    r1 = math.sqrt(t_star)

    def integrand(y):
        dens = (math.exp(-0.5 * (y / r1) ** 2) -
                math.exp(-0.5 * ((y - 2 * b1) / r1) ** 2)) / (r1 * math.sqrt(2 * math.pi))
        if dens <= 0:
            return 0.0
        tail = max_endpoint_joint(b2 - y, endpoint - y, tau)
        return dens * tail

    hi = min(b2, b1)
    val, _ = quad(integrand, hi - 40.0 * math.sqrt(t_final), hi, limit=200)
    return float(val)


@dataclass(frozen=True)
class _BarrierCase:
    label: str
    barriers: tuple                   # ((t_until, level), ...) in order
    endpoint: float
    bound: float
    params: dict
    exact: float = None

    def barrier_at(self, t):
        for t_until, level in self.barriers:
            if t < t_until:
                return level
        return self.barriers[-1][1]


def _saddle_noise_cases(epsilon, beta, t_final, case_i, case_ii, case_iii):
    lg = abs(math.log(epsilon))
    amp = epsilon ** (beta / 2.0)
    cases = []

    a, d, kappa = case_i
    if not (0 < d < a < 0.5):
        raise ConfigError("case (i) needs 0 < d < a < 1/2")
    end = -4.0 * epsilon ** ((a - d) * beta) * (a - d) * beta * lg / amp
    bar = 0.25 * a * beta * lg * epsilon ** (a * beta) / amp
    bound = 2.0 * math.exp(-epsilon ** (-(1.0 - 2.0 * (a - d)) * beta - kappa))
    cases.append(_BarrierCase(
        "i", ((t_final, bar),), end, bound,
        {"a": a, "d": d, "kappa": kappa},
        exact=max_endpoint_joint(bar, end, t_final)))

    d, kappa = case_ii
    if not (0 < d < min((1.0 / beta - 1.0) / 3.0, 0.5)):
        raise ConfigError("case (ii) needs 0 < d < (1/beta-1)/3 ^ 1/2")
    t_star = epsilon ** (d * beta)
    if t_star >= t_final:
        raise ConfigError("case (ii) stage switch eps^(d beta) must precede T")
    b1 = epsilon ** (d * beta / 2.0)
    b2 = -epsilon ** (-d * beta / 2.0)
    end = -2.0 * (1.0 - d) * beta * lg * epsilon ** (-d * beta / 2.0)
    bound = 2.0 * math.exp(-epsilon ** (-2.0 * d * beta - kappa))
    cases.append(_BarrierCase(
        "ii", ((t_star, b1), (t_final, b2)), end, bound,
        {"d": d, "kappa": kappa, "t_star": t_star},
        exact=_case_ii_exact(b1, b2, end, t_star, t_final)))

    big_a, d = case_iii
    if not (0 < d < (1.0 / beta - 1.0) / 2.0):
        raise ConfigError("case (iii) needs 0 < d < (1/beta-1)/2")
    if big_a < 0:
        raise ConfigError("case (iii) needs A >= 0")
    end = -big_a / amp
    bar = 0.25 * d * beta * lg * epsilon ** (d * beta) / amp
    bound = 2.0 * math.exp(-big_a ** 2 * epsilon ** (-beta) / t_final)
    cases.append(_BarrierCase(
        "iii", ((t_final, bar),), end, bound, {"A": big_a, "d": d},
        exact=max_endpoint_joint(bar, end, t_final)))
    return cases


_BM_BLOCK = 1 << 17


def _bm_walk_block(key, n, n_steps, dt, cases, refl_barrier, bridge):
    """March one path block; returns per-case hit counts and max-alive."""
    rng = np.random.Generator(np.random.Philox(key=key))
    w = np.zeros(n)
    sq = math.sqrt(dt)
    half_dt = 0.5 * dt
    alive = [np.ones(n, dtype=bool) for _ in cases]
    refl_alive = np.ones(n, dtype=bool)
    refl_raw = np.ones(n, dtype=bool)
    for k in range(n_steps):
        w_new = w + sq * rng.standard_normal(n)
        ell = -np.log(rng.random(n)) * half_dt if bridge else None
        t_mid = (k + 0.5) * dt
        for c, a in zip(cases, alive):
            b = c.barrier_at(t_mid)
            ok = w_new < b
            if bridge:
                ok &= (b - w) * (b - w_new) > ell
            a &= ok
        refl_raw &= w_new < refl_barrier
        ok = w_new < refl_barrier
        if bridge:
            ok &= (refl_barrier - w) * (refl_barrier - w_new) > ell
        refl_alive &= ok
        w = w_new
    counts = [int(np.count_nonzero(a & (w < c.endpoint)))
              for c, a in zip(cases, alive)]
    return counts, int(np.count_nonzero(refl_alive)), int(np.count_nonzero(refl_raw))


def brownian_saddle_oracle(epsilon=0.05, beta=0.5, t_final=1.0,
                           case_i=(0.4, 0.1, 0.05), case_ii=(0.2, 1.0),
                           case_iii=(1.5, 0.3), n_paths=10 ** 6,
                           n_steps=10 ** 4, seed=0, bridge=True,
                           refl_barrier=1.0, threads=None):
    """Estimate the three saddle-noise barrier events on one path ensemble.

    Each case is the probability that a standard Brownian motion stays
    below a (piecewise-constant) barrier on (0,T) and ends below a
    threshold; the report compares the estimate against the claimed
    lower bound 2 exp(-...) at the given parameters.  With bridge=True
    the inter-step crossing probability exp(-2(b-w0)(b-w1)/dt) is
    sampled, making the barrier test unbiased for the continuous path;
    the raw discrete-max variant is reported alongside for the
    reflection check.  Exact values by the reflection principle (and a
    conditioning quadrature for the two-stage case) are included.
    """
    if n_paths < 1 or n_steps < 1:
        raise ConfigError("n_paths and n_steps must be positive")
    cases = _saddle_noise_cases(epsilon, beta, t_final, case_i, case_ii,
                                case_iii)
    dt = t_final / n_steps
    blocks = [(i, min(_BM_BLOCK, n_paths - lo))
              for i, lo in enumerate(range(0, n_paths, _BM_BLOCK))]
    keys = [derive_key(seed, f"bm-oracle/{i}") for i, _ in blocks]

    if threads is None:
        threads = default_threads()
    work = lambda bk: _bm_walk_block(bk[1], bk[0][1], n_steps, dt,
                                     cases, refl_barrier, bridge)
    jobs = list(zip(blocks, keys))
    if threads <= 1:
        out = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(work, jobs))

    counts = np.sum([o[0] for o in out], axis=0)
    refl_hits = n_paths - sum(o[1] for o in out)
    refl_raw_hits = n_paths - sum(o[2] for o in out)

    report = {"epsilon": epsilon, "beta": beta, "t_final": t_final,
              "n_paths": n_paths, "n_steps": n_steps, "bridge": bridge,
              "seed": seed, "cases": {}}
    for c, k in zip(cases, counts):
        lo, hi = wilson_interval(int(k), n_paths)
        vacuous = c.bound >= 1.0
        report["cases"][c.label] = {
            "params": c.params, "endpoint": c.endpoint,
            "barriers": [list(b) for b in c.barriers], "bound": c.bound,
            "hits": int(k), "p_hat": k / n_paths,
            "wilson_lo": lo, "wilson_hi": hi, "exact": c.exact,
            "vacuous": bool(vacuous),
            "passes": bool((not vacuous) and (k / n_paths >= c.bound)),
        }
    p_exact = 2.0 * (1.0 - ndtr(refl_barrier / math.sqrt(t_final)))
    p_mc = refl_hits / n_paths
    report["reflection"] = {
        "barrier": refl_barrier, "p_max_mc": p_mc,
        "p_max_raw": refl_raw_hits / n_paths, "p_exact": float(p_exact),
        "rel_err": abs(p_mc - p_exact) / p_exact,
    }
    report["all_pass"] = all(c["passes"] or c["vacuous"]
                             for c in report["cases"].values())
    return report


# -- quadratic variation ------------------------------------------------------

def quadratic_variation_check(result, tables, system=None, graph=None):
    """Realized QV of H against eps^beta * int B^2(H_s) ds, per trajectory.

    The predicted side integrates the tabulated averaged coefficient
    along the recorded H series (trapezoid); levels beyond a table span
    are clamped to its endpoints.  With a single table every record is
    looked up there; otherwise the recorded states are projected to
    resolve edge identities (system and graph required).  Box-exited
    trajectories are excluded from the ratio statistics and counted.
    """
    cfg = result.config
    times = result.times
    h = result.h_values
    if len(tables) == 1:
        table = next(iter(tables.values()))
        _, b2 = table.lookup(np.clip(h, table.h_lo, table.h_hi).ravel())
        b2 = b2.reshape(h.shape)
    else:
        if system is None or graph is None:
            raise ConfigError("multi-edge QV check needs system and graph")
        b2 = np.empty_like(h)
        for i in range(h.shape[0]):
            if result.exited[i]:
                b2[i] = 0.0
                continue
            gp = project_trajectory(system, graph,
                                    result.states[i], times=times)
            for k, eid in enumerate(gp.edge_ids):
                eid = int(eid)
                if eid not in tables:
                    raise UncoveredEdge(
                        f"trajectory {i} visits edge {eid} with no table")
                t = tables[eid]
                _, b2[i, k] = t.lookup(float(np.clip(h[i, k], t.h_lo, t.h_hi)))
    integral = np.trapezoid(b2, times, axis=1)
    predicted = cfg.epsilon ** cfg.beta * integral
    keep = ~result.exited & (predicted > 0)
    ratio = result.qv_sum[keep] / predicted[keep]
    n = int(keep.sum())
    mean = float(np.mean(ratio)) if n else math.nan
    std = float(np.std(ratio, ddof=1)) if n > 1 else math.nan
    se = std / math.sqrt(n) if n > 1 else math.nan
    q = (np.percentile(ratio, [25, 50, 75]).tolist() if n else
         [math.nan] * 3)
    return {
        "epsilon": cfg.epsilon, "beta": cfg.beta, "t_final": cfg.t_final,
        "n_traj": cfg.n_traj, "n_used": n,
        "n_exited": int(np.count_nonzero(result.exited)),
        "mean_ratio": mean, "std_ratio": std, "se_mean": se,
        "mean_ci95": [mean - _Z95 * se, mean + _Z95 * se] if n > 1 else None,
        "ratio_quartiles": q,
    }
