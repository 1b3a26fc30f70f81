"""Maxwell-Lorentz dynamics without self-interaction.

N charges are stepped with a classical 4th-order one-step method; each
charge's field is the Maxwell evolution of its initial field sourced by
its own (growing) trajectory, and the force on charge i sums the smeared
Lorentz force of the partners' fields only.  Works in both time
directions; the strong Huygens support of the field evaluators keeps the
cost per step independent of the elapsed time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ChargeDensity, ChargeTrajectory, PhasePoint, accel_of_p, v_of_p
from .errors import ConstraintError, DomainError, SpeedGuardError
from .fields import CanonicalMaxwellField, extend_canonical, field_divergence
from .quadrature import QuadSpec, ball_rule

__all__ = [
    "MlsiConfig",
    "MlsiSolution",
    "lorentz_force",
    "mlsi_integrate",
    "mlsi_integrate_bidirectional",
    "constraint_residual",
    "FAST_QUAD",
]

# cheaper orders for the stepping hot path; oracle comparisons use
# DEFAULT_QUAD or finer through their own entry points
FAST_QUAD = QuadSpec(
    sphere_polar=12, sphere_az=24,
    cap_polar=8, cap_az=12,
    ball_radial=16, ball_polar=8, ball_az=16,
    cone_radial=10, cone_polar=8, cone_az=12,
    time_order=6,
)


@dataclass(frozen=True)
class MlsiConfig:
    dt: float = 0.05
    order: int = 4                    # classical RK4; fixed step
    force_radial: int = 6
    force_polar: int = 5
    force_az: int = 10
    v_guard: float = 0.99
    constraint_cadence: int = 10
    constraint_tol: float = 1e-3      # relative rejection threshold at t0
    check_initial_constraints: bool = True
    quad: QuadSpec = field(default_factory=lambda: FAST_QUAD)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


class TrajectoryRecorder:
    """Growing trajectory used during integration.

    Provides the ChargeTrajectory evaluation interface by rebuilding a
    frozen interpolant lazily; supports one provisional node for stage
    evaluations, and tracks the most advanced query time for the
    causality check.
    """

    def __init__(self, t0, q0, p0, pdot0, mass, forward: bool):
        self.mass = mass
        self.forward = forward
        self.ts = [float(t0)]
        self.qs = [np.asarray(q0, dtype=float)]
        self.ps = [np.asarray(p0, dtype=float)]
        self.pdots = [np.asarray(pdot0, dtype=float)]
        self._provisional = False
        self._cache = None
        self.extreme_query = float(t0)

    @property
    def pre(self):
        return None

    @property
    def post(self):
        return None

    @property
    def times(self):
        return np.array([self.ts[0], self.ts[-1]]) if self.forward else np.array([self.ts[-1], self.ts[0]])

    @property
    def v_max(self):
        return self._traj().v_max

    def append(self, t, q, p, pdot):
        self.ts.append(float(t))
        self.qs.append(np.asarray(q, dtype=float))
        self.ps.append(np.asarray(p, dtype=float))
        self.pdots.append(np.asarray(pdot, dtype=float))
        self._cache = None

    def push_provisional(self, t, q, p, pdot):
        if self._provisional:
            raise RuntimeError("provisional node already present")
        self.append(t, q, p, pdot)
        self._provisional = True

    def pop_provisional(self):
        if not self._provisional:
            raise RuntimeError("no provisional node")
        for lst in (self.ts, self.qs, self.ps, self.pdots):
            lst.pop()
        self._provisional = False
        self._cache = None

    def _traj(self) -> ChargeTrajectory:
        if self._cache is None:
            ts = np.array(self.ts)
            q = np.array(self.qs)
            p = np.array(self.ps)
            pd = np.array(self.pdots)
            if not self.forward:
                ts, q, p, pd = ts[::-1], q[::-1], p[::-1], pd[::-1]
            if len(ts) == 1:
                ts = np.array([ts[0], ts[0] + 1e-12])
                q = np.vstack([q, q])
                p = np.vstack([p, p])
                pd = np.vstack([pd, pd])
            self._cache = ChargeTrajectory(ts, q, p, self.mass, pdot=pd)
        return self._cache

    def _note(self, t):
        t = np.asarray(t, dtype=float)
        if t.size:
            if self.forward:
                self.extreme_query = max(self.extreme_query, float(np.max(t)))
            else:
                self.extreme_query = min(self.extreme_query, float(np.min(t)))

    def positions(self, t):
        self._note(t)
        return self._traj().positions(t)

    def eval(self, t):
        self._note(t)
        return self._traj().eval(t)

    def piece_times(self, lo, hi):
        return self._traj().piece_times(lo, hi)

    def frozen(self) -> ChargeTrajectory:
        return self._traj()


@dataclass
class MlsiSolution:
    """Result of an ML-SI run: trajectories, field evaluators, diagnostics."""

    trajectories: list
    fields: list
    densities: list
    masses: list
    t0: float
    t_end: float
    config: MlsiConfig
    diagnostics: dict

    @property
    def n_charges(self):
        return len(self.trajectories)

    def state(self, t):
        """(q, p) arrays of all charges at time t."""
        qs, ps = [], []
        for tr in self.trajectories:
            q, p, _, _ = tr.eval(t)
            qs.append(q)
            ps.append(p)
        return np.array(qs), np.array(ps)


def _force_on(i, t, q_i, p_i, live_fields, densities, masses, cfg: MlsiConfig):
    """Smeared Lorentz force sum over partners k != i."""
    rho_i = densities[i]
    rule = ball_rule(rho_i.R, cfg.force_radial, cfg.force_polar, cfg.force_az)
    pts = q_i + rule.points
    dens = rho_i(rule.points)
    w = rule.weights * dens
    v_i = v_of_p(p_i, masses[i])
    force = np.zeros(3)
    for k, fld in enumerate(live_fields):
        if k == i:
            continue
        E, B = fld.evaluate(t, pts, cfg.quad)
        force += w @ (E + np.cross(np.broadcast_to(v_i, E.shape), B))
    return force


def lorentz_force(i, state: PhasePoint, t, densities, masses, cfg: MlsiConfig | None = None):
    """Force on charge i of a phase point whose fields are evaluable at t."""
    cfg = cfg or MlsiConfig()
    return _force_on(i, t, state.q[i], state.p[i], state.fields, densities, masses, cfg)


def _check_initial_constraints(fields, densities, q0, t0, cfg: MlsiConfig, rng_seed=7):
    # evaluated at the field's own quadrature accuracy, not the stepping one
    rng = np.random.default_rng(rng_seed)
    for i, (fld, rho) in enumerate(zip(fields, densities)):
        h = getattr(fld, "quad", cfg.quad).stencil_h * rho.R
        probes = q0[i] + rng.uniform(-0.6, 0.6, size=(4, 3)) * rho.R
        divE = field_divergence(fld, t0, probes, h, which="E", quad=None)
        divB = field_divergence(fld, t0, probes, h, which="B", quad=None)
        target = 4.0 * np.pi * rho(probes - q0[i])
        scale = 4.0 * np.pi * abs(rho.radial(0.0)) + 1e-300
        res = (np.abs(divE - target).max() + np.abs(divB).max()) / scale
        if res > cfg.constraint_tol:
            raise ConstraintError(
                f"initial field of charge {i} violates the Maxwell constraints "
                f"(relative residual {res:.3e})")


def mlsi_integrate(q0, p0, fields, densities, masses, t0, t_target,
                   cfg: MlsiConfig | None = None) -> MlsiSolution:
    """Integrate the N-charge system from t0 to t_target (either direction).

    q0, p0: (N, 3) arrays; fields: one structured evaluator per charge whose
    open ends match (t0, q0); the returned solution's field evaluators are
    exactly the Maxwell evolutions of the initial fields along the computed
    trajectories.
    """
    cfg = cfg or MlsiConfig()
    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    N = q0.shape[0]
    if t_target == t0:
        raise ValueError("t_target must differ from t0")
    forward = t_target > t0
    h = cfg.dt if forward else -cfg.dt
    n_steps = max(1, math.ceil(abs(t_target - t0) / cfg.dt - 1e-12))

    if cfg.check_initial_constraints:
        _check_initial_constraints(fields, densities, q0, t0, cfg)

    # recorders seeded with a zero slope; fixed up after the first force pass
    recs = [TrajectoryRecorder(t0, q0[i], p0[i], np.zeros(3), masses[i], forward)
            for i in range(N)]
    live = [extend_canonical(fields[i], recs[i], t0) for i in range(N)]

    def forces(t, q, p):
        return np.array([_force_on(i, t, q[i], p[i], live, densities, masses, cfg)
                         for i in range(N)])

    def guard(p):
        sp = np.array([np.linalg.norm(v_of_p(p[i], masses[i])) for i in range(N)])
        if np.any(sp > cfg.v_guard):
            raise SpeedGuardError(f"speed exceeded guard {cfg.v_guard}")

    t = t0
    q = q0.copy()
    p = p0.copy()
    k1 = forces(t, q, p)
    for i in range(N):
        recs[i].pdots[0] = k1[i]
        recs[i]._cache = None
    constraint_series = []
    max_speed = 0.0

    for n in range(n_steps):
        step = h
        if forward and t + step > t_target:
            step = t_target - t
        if not forward and t + step < t_target:
            step = t_target - t

        def stage(dt_frac, qs, ps, slope):
            ts = t + dt_frac * step
            for i in range(N):
                recs[i].push_provisional(ts, qs[i], ps[i], slope[i])
            f = forces(ts, qs, ps)
            for i in range(N):
                recs[i].pop_provisional()
            return f

        v1 = np.array([v_of_p(p[i], masses[i]) for i in range(N)])
        q2 = q + 0.5 * step * v1
        p2 = p + 0.5 * step * k1
        k2 = stage(0.5, q2, p2, k1)
        v2 = np.array([v_of_p(p2[i], masses[i]) for i in range(N)])
        q3 = q + 0.5 * step * v2
        p3 = p + 0.5 * step * k2
        k3 = stage(0.5, q3, p3, k2)
        v3 = np.array([v_of_p(p3[i], masses[i]) for i in range(N)])
        q4 = q + step * v3
        p4 = p + step * k3
        k4 = stage(1.0, q4, p4, k3)
        v4 = np.array([v_of_p(p4[i], masses[i]) for i in range(N)])

        q = q + step / 6.0 * (v1 + 2 * v2 + 2 * v3 + v4)
        p = p + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + step
        guard(p)
        sp = max(np.linalg.norm(v_of_p(p[i], masses[i])) for i in range(N))
        max_speed = max(max_speed, sp)

        # slope at the new node = next step's first stage
        for i in range(N):
            recs[i].append(t, q[i], p[i], np.zeros(3))
        k1 = forces(t, q, p)
        for i in range(N):
            recs[i].pdots[-1] = k1[i]
            recs[i]._cache = None

        if cfg.constraint_cadence and (n + 1) % cfg.constraint_cadence == 0:
            res = _constraint_probe(live, densities, recs, t, cfg)
            constraint_series.append((t, res))

    trajectories = [r.frozen() for r in recs]
    final_fields = [extend_canonical(fields[i], trajectories[i], t0) for i in range(N)]
    diag = {
        "constraint_series": constraint_series,
        "max_speed": max_speed,
        "n_steps": n_steps,
        "causality_extreme_query": [r.extreme_query for r in recs],
        "final_time": t,
    }
    return MlsiSolution(trajectories, final_fields, list(densities), list(masses),
                        t0, t, cfg, diag)


def _constraint_probe(live, densities, recs, t, cfg, n_probes=3, rng_seed=11):
    rng = np.random.default_rng(rng_seed)
    h = cfg.quad.stencil_h * min(d.R for d in densities)
    worst = 0.0
    for i, (fld, rho) in enumerate(zip(live, densities)):
        q_i = recs[i].positions(np.array([t]))[0]
        probes = q_i + rng.uniform(-0.5, 0.5, size=(n_probes, 3)) * rho.R
        divE = field_divergence(fld, t, probes, h, which="E", quad=cfg.quad)
        target = 4.0 * np.pi * rho(probes - q_i)
        scale = 4.0 * np.pi * abs(rho.radial(0.0)) + 1e-300
        worst = max(worst, float(np.abs(divE - target).max() / scale))
    return worst


def mlsi_integrate_bidirectional(q0, p0, fields, densities, masses, t_minus, t_plus,
                                 cfg: MlsiConfig | None = None, t0: float = 0.0):
    """Integrate from t0 backward to t_minus and forward to t_plus.

    Returns a single MlsiSolution whose trajectories cover [t_minus, t_plus]
    and whose field evaluators are anchored on the original initial fields.
    """
    cfg = cfg or MlsiConfig()
    back = mlsi_integrate(q0, p0, fields, densities, masses, t0, t_minus,
                          replace(cfg, check_initial_constraints=False))
    fwd = mlsi_integrate(q0, p0, fields, densities, masses, t0, t_plus,
                         replace(cfg, check_initial_constraints=cfg.check_initial_constraints))
    trajs = []
    for tb, tf in zip(back.trajectories, fwd.trajectories):
        ts = np.concatenate([tb.times[:-1], tf.times])
        q = np.vstack([tb.q[:-1], tf.q])
        p = np.vstack([tb.p[:-1], tf.p])
        pd = np.vstack([tb.pdot[:-1], tf.pdot])
        trajs.append(ChargeTrajectory(ts, q, p, tb.mass, pdot=pd))
    merged_fields = [extend_canonical(fields[i], trajs[i], t0) for i in range(len(trajs))]
    diag = {
        "backward": back.diagnostics,
        "forward": fwd.diagnostics,
        "max_speed": max(back.diagnostics["max_speed"], fwd.diagnostics["max_speed"]),
    }
    return MlsiSolution(trajs, merged_fields, list(densities), list(masses),
                        t_minus, t_plus, cfg, diag)


def constraint_residual(solution: MlsiSolution, t, probes=None, n_probes=8, rng_seed=5):
    """Max over charges/probes of |div E - 4 pi rho| + |div B| (stencil)."""
    cfg = solution.config
    h = cfg.quad.stencil_h * min(d.R for d in solution.densities)
    worst = 0.0
    rng = np.random.default_rng(rng_seed)
    for i, (fld, rho, tr) in enumerate(zip(solution.fields, solution.densities,
                                           solution.trajectories)):
        q_i = tr.positions(np.array([t]))[0]
        if probes is None:
            pts = q_i + rng.uniform(-0.7, 0.7, size=(n_probes, 3)) * rho.R
        else:
            pts = np.atleast_2d(np.asarray(probes, dtype=float))
        divE = field_divergence(fld, t, pts, h, which="E", quad=cfg.quad)
        divB = field_divergence(fld, t, pts, h, which="B", quad=cfg.quad)
        target = 4.0 * np.pi * rho(pts - q_i)
        worst = max(worst, float((np.abs(divE - target) + np.abs(divB)).max()))
    return worst
