"""Small-noise Hamiltonian SDE at the intermediate time scale.

Simulates, in sped-up time,

    dX = eps^(beta-1) * gradperp H(X) dt + eps^(beta/2) * sigma(X) dW

for eps in (0,1), beta in (0,1).  Setting beta = 1 recovers the
original-time dynamics dX = gradperp H ds + sqrt(eps) sigma dW, so one
stepping kernel covers both clocks; with dyadic eps, beta, dt the two
parameterizations step through bitwise identical states.

The default stepper integrates the drift with one RK4 substep (exact
Hamiltonian transport up to O(dt^5)) and adds the Euler noise kick with
sigma frozen at the step start.  A plain Euler-Maruyama stepper is kept
as an option; both are weak order 1 in the noise, but Euler's O(dt)
energy production is visible at this time scale while the split
stepper's is not.

Noise is counter-addressed (see rng module): normal j of trajectory i
at step k is word (k*n_traj + i)*width + j of the keyed Philox stream,
so results are independent of chunking and thread count.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BoxExit, ConfigError, StepTooLarge
from .rng import CounterRng

CHUNK = 512                      # fixed; must not depend on thread count


def default_threads():
    try:
        return max(1, int(os.environ.get("REEB_LDP_THREADS", "1")))
    except ValueError:
        return 1


def max_stable_dt(epsilon, beta, min_orbit_period=None):
    """Step ceiling: resolve the sped-up rotation (and the fastest orbit)."""
    cap = 0.05 * epsilon ** (1.0 - beta)
    if min_orbit_period is not None:
        cap = min(cap, 0.02 * epsilon ** (1.0 - beta) * float(min_orbit_period))
    return cap


def resolve_dt(epsilon, beta, t_final, dt=None, min_orbit_period=None):
    """Accepted step size and step count; the step must tile t_final."""
    cap = max_stable_dt(epsilon, beta, min_orbit_period)
    if dt is None:
        n = max(1, int(math.ceil(t_final / cap)))
        return t_final / n, n
    if dt > cap * (1.0 + 1e-12):
        raise StepTooLarge(
            f"dt = {dt:.6g} exceeds the stability ceiling {cap:.6g} for "
            f"eps={epsilon}, beta={beta}")
    n = int(round(t_final / dt))
    if n < 1 or abs(n * dt - t_final) > 1e-9 * max(t_final, 1.0):
        raise ConfigError(f"dt = {dt!r} does not tile t_final = {t_final!r}")
    return float(dt), n


@dataclass(frozen=True)
class SimulationConfig:
    epsilon: float
    beta: float
    t_final: float
    x0: tuple
    n_traj: int = 1
    dt: float = None                  # None: auto from the stability ceiling
    method: str = "split_rk4"         # "split_rk4" | "euler"
    seed: int = 0
    stream: str = "sde"
    record_every: int = None          # None: auto-thin to <= 2048 records
    freeze_on_exit: bool = True
    min_orbit_period: float = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon must be in (0,1), got {self.epsilon}")
        if not (0.0 < self.beta <= 1.0):
            raise ConfigError(f"beta must be in (0,1], got {self.beta}")
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1")
        if self.method not in ("split_rk4", "euler"):
            raise ConfigError(f"unknown method {self.method!r}")

    def to_dict(self):
        d = asdict(self)
        d["x0"] = list(self.x0)
        return d


@dataclass
class SimulationResult:
    config: SimulationConfig
    dt: float
    n_steps: int
    times: np.ndarray                 # recorded times, (n_rec,)
    states: np.ndarray                # (n_traj, n_rec, 2)
    h_values: np.ndarray              # (n_traj, n_rec)
    final_states: np.ndarray          # (n_traj, 2)
    exited: np.ndarray                # bool (n_traj,)
    exit_times: np.ndarray            # nan where not exited
    qv_sum: np.ndarray                # sum of squared H increments
    g2_int: np.ndarray                # int g2(X) dt   (unscaled)
    ah_int: np.ndarray                # int AH(X) dt   (unscaled)
    h0: np.ndarray
    h_final: np.ndarray
    rho: np.ndarray = None            # sup |H - h_ref|; inf for exits

    @property
    def predicted_qv(self):
        return self.config.epsilon ** self.config.beta * self.g2_int

    @property
    def drift_term(self):
        return self.config.epsilon ** self.config.beta * self.ah_int

    @property
    def martingale_part(self):
        return self.h_final - self.h0 - self.drift_term

    def state_digest(self):
        payload = np.ascontiguousarray(self.final_states, dtype="<f8").tobytes()
        return hashlib.sha256(payload).hexdigest()


def _apply_sigma(sigma, states, xi):
    """sigma(x) applied to the noise vector, batched over trajectories."""
    if sigma.kind == "identity" and sigma.width == 2:
        return xi
    if sigma.is_constant:
        return xi @ sigma(0.0, 0.0).T
    B = sigma.batch(states)                       # (n, 2, w)
    return np.einsum("nij,nj->ni", B, xi)


def _drift_rk4(system, states, tau):
    k1 = system.perp_batch(states)
    k2 = system.perp_batch(states + (0.5 * tau) * k1)
    k3 = system.perp_batch(states + (0.5 * tau) * k2)
    k4 = system.perp_batch(states + tau * k3)
    return states + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(system, config, rho_ref=None, threads=None):
    """Run the trajectory batch; all bookkeeping is per full step.

    rho_ref: optional callable t -> reference H level.  When given, the
    per-trajectory sup_t |H(X_t) - rho_ref(t)| is accumulated over every
    step (not just recorded ones); trajectories that leave the box get
    rho = +inf.  This is the graph distance to a same-component
    reference path when no interior vertex separates them.
    """
    cfg = config
    dt, n_steps = resolve_dt(cfg.epsilon, cfg.beta, cfg.t_final, cfg.dt,
                             cfg.min_orbit_period)
    n = cfg.n_traj
    w = system.sigma.width
    tau = dt * cfg.epsilon ** (cfg.beta - 1.0)          # drift substep
    amp = math.sqrt(cfg.epsilon ** cfg.beta * dt)       # noise amplitude
    rng = CounterRng(cfg.seed, cfg.stream)

    record_every = cfg.record_every
    if record_every is None:
        record_every = max(1, int(math.ceil(n_steps / 2048)))
    rec_idx = list(range(0, n_steps + 1, record_every))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    rec_map = {s: i for i, s in enumerate(rec_idx)}
    n_rec = len(rec_idx)

    states = np.tile(np.asarray(cfg.x0, dtype=float), (n, 1))
    if not system.in_box(*cfg.x0):
        raise ConfigError(f"x0 = {cfg.x0} outside box {system.box}")
    alive = np.ones(n, dtype=bool)
    exit_times = np.full(n, np.nan)
    h_cur = system.h_batch(states)
    h0 = h_cur.copy()
    qv_sum = np.zeros(n)
    g2_int = np.zeros(n)
    ah_int = np.zeros(n)
    rho = None
    if rho_ref is not None:
        rho = np.abs(h_cur - float(rho_ref(0.0)))

    rec_states = np.empty((n, n_rec, 2))
    rec_h = np.empty((n, n_rec))
    rec_states[:, 0] = states
    rec_h[:, 0] = h_cur

    if threads is None:
        threads = default_threads()
    chunks = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def advance(lo, hi, xi_all, step):
        idx = slice(lo, hi)
        live = alive[idx]
        if not np.any(live):
            return
        x = states[idx]
        xi = xi_all[lo:hi]
        if cfg.method == "split_rk4":
            x_new = _drift_rk4(system, x, tau)
        else:
            x_new = x + tau * system.perp_batch(x)
        x_new = x_new + amp * _apply_sigma(system.sigma, x, xi)
        x_new = np.where(live[:, None], x_new, x)
        h_new = np.where(live, system.h_batch(x_new), h_cur[idx])
        dh = h_new - h_cur[idx]
        qv_sum[idx] += np.where(live, dh * dh, 0.0)
        g2_int[idx] += np.where(live, system.g2_batch(x) * dt, 0.0)
        ah_int[idx] += np.where(live, system.ah_batch(x) * dt, 0.0)
        if rho is not None:
            ref = float(rho_ref((step + 1) * dt))
            rho[idx] = np.maximum(rho[idx],
                                  np.where(live, np.abs(h_new - ref), 0.0))
        inside = system.in_box_batch(x_new)
        newly_out = live & ~inside
        if np.any(newly_out):
            gl = np.zeros(n, dtype=bool)
            gl[idx] = newly_out
            exit_times[gl] = (step + 1) * dt
            if rho is not None:
                rho[gl] = np.inf
            if cfg.freeze_on_exit:
                alive[gl] = False
        states[idx] = x_new
        h_cur[idx] = h_new

    try:
        for step in range(n_steps):
            xi_all = rng.step_normals(step, 0, n, w, n)
            if pool is None:
                for lo, hi in chunks:
                    advance(lo, hi, xi_all, step)
            else:
                list(pool.map(lambda c: advance(c[0], c[1], xi_all, step),
                              chunks))
            if (step + 1) in rec_map:
                i = rec_map[step + 1]
                rec_states[:, i] = states
                rec_h[:, i] = h_cur
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    return SimulationResult(
        config=cfg, dt=dt, n_steps=n_steps,
        times=np.array([s * dt for s in rec_idx]),
        states=rec_states, h_values=rec_h,
        final_states=states.copy(), exited=~alive,
        exit_times=exit_times, qv_sum=qv_sum, g2_int=g2_int, ah_int=ah_int,
        h0=h0, h_final=h_cur.copy(), rho=rho)


# -- deterministic flow -------------------------------------------------------

def integrate_flow(system, x0, t_final, rtol=1e-10, atol=1e-12, t_eval=None,
                   raise_on_exit=True):
    """Hamiltonian flow dx/dt = gradperp H in plain time via RK45.

    Raises BoxExit (with the crossing time and state) if the orbit
    leaves the box, unless raise_on_exit is False, in which case the
    solution is truncated at the exit.
    """
    x0b, x1b, y0b, y1b = system.box

    def rhs(t, z):
        return [system.hy(z[0], z[1]), -system.hx(z[0], z[1])]

    def wall(t, z):
        return min(z[0] - x0b, x1b - z[0], z[1] - y0b, y1b - z[1])

    wall.terminal = True
    sol = solve_ivp(rhs, (0.0, t_final), [float(x0[0]), float(x0[1])],
                    rtol=rtol, atol=atol, t_eval=t_eval, events=wall,
                    dense_output=True)
    if sol.status == 1 and len(sol.t_events[0]):
        t_ex = float(sol.t_events[0][0])
        z_ex = tuple(float(v) for v in sol.y_events[0][0])
        if raise_on_exit:
            raise BoxExit(t_ex, z_ex)
    return sol
