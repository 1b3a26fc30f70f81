"""Retarded/advanced time solving and Lienard-Wiechert fields.

Conventions (c = 1, unit point source; the density supplies the charge):

    t^pm = t +- |x - z - q_{t^pm}|
    E = (n +- v)(1 - v^2) / (d^2 (1 +- n.v)^3) + n ^ ((n +- v) ^ a) / (d (1 +- n.v)^3)
    B = -+ n ^ E

with d the light-cone distance, all trajectory data at t^pm.  The smeared
field of a rigid charge is the convolution of the point field with rho.
"""

from __future__ import annotations

import numpy as np

from .core import ChargeDensity, ChargeTrajectory
from .errors import LightconeError
from .quadrature import DEFAULT_QUAD, QuadSpec, ball_rule, offset_ball_nodes

__all__ = [
    "lightcone_time",
    "lw_point_integrand",
    "lw_field",
    "coulomb_field",
    "uniform_point_field",
    "uniform_lw_field",
]

RETARDED = -1
ADVANCED = +1


def _sign_of(sign) -> int:
    if sign in (-1, "retarded", "-", "ret"):
        return RETARDED
    if sign in (+1, "advanced", "+", "adv"):
        return ADVANCED
    raise ValueError(f"sign must select retarded (-) or advanced (+), got {sign!r}")


def lightcone_time(traj: ChargeTrajectory, x, t, z_offset=None, sign=RETARDED,
                   tol=1e-12, max_iter=60):
    """Unique intersection t^pm of the light cone of (t, x - z) with the world line.

    Solves t^pm = t +- |x - z - q_{t^pm}| by Newton iteration with a
    bisection-backed bracket; monotone because |v| <= v_max < 1.  ``x`` may
    be a batch (..., 3); ``t`` is scalar.
    """
    s = _sign_of(sign)
    x = np.asarray(x, dtype=float)
    if z_offset is not None:
        x = x - np.asarray(z_offset, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    t = float(t)

    vmax = min(traj.v_max + 1e-12, 1.0 - 1e-12)
    q_now = traj.eval(np.full(pts.shape[:-1], t))[0]
    d_now = np.linalg.norm(pts - q_now, axis=-1)

    # g(tau) = tau - t - s*|x - q_tau| is strictly monotone with slope >= 1 - vmax
    lo = np.where(s < 0, t - d_now / (1.0 - vmax) - tol, np.full_like(d_now, t))
    hi = np.where(s < 0, np.full_like(d_now, t), t + d_now / (1.0 - vmax) + tol)
    tau = t + s * d_now  # first Newton iterate from the current position

    def g_and_slope(tau):
        q, _, v, _ = traj.eval(tau)
        diff = pts - q
        dist = np.linalg.norm(diff, axis=-1)
        g = tau - t - s * dist
        n = diff / np.maximum(dist, 1e-300)[..., None]
        slope = 1.0 + s * np.sum(n * v, axis=-1)
        return g, slope, dist

    tau = np.clip(tau, lo, hi)
    converged = np.zeros(tau.shape, dtype=bool)
    for _ in range(max_iter):
        g, slope, _ = g_and_slope(tau)
        converged = np.abs(g) <= tol
        if np.all(converged):
            break
        # maintain the bracket, then take a safeguarded Newton step
        lo = np.where(g < 0, tau, lo)
        hi = np.where(g > 0, tau, hi)
        step = np.where(converged, 0.0, -g / np.maximum(slope, 1.0 - vmax))
        cand = tau + step
        bad = (cand <= lo) | (cand >= hi)
        cand = np.where(bad & ~converged, 0.5 * (lo + hi), cand)
        tau = np.where(converged, tau, cand)
    else:
        g, _, _ = g_and_slope(tau)
        if np.any(np.abs(g) > tol):
            raise LightconeError(
                f"light-cone iteration did not converge (max residual {np.max(np.abs(g)):.3e})")
    if single:
        return float(tau[0])
    return tau.reshape(x.shape[:-1])


def lw_point_integrand(traj: ChargeTrajectory, t, x, z=None, sign=RETARDED,
                       eps_dist=0.0):
    """Unit-source Lienard-Wiechert (E, B) at (t, x - z) for the given sign.

    Returns arrays shaped like the broadcast of x.  Raises LightconeError if
    any light-cone distance falls below ``eps_dist``.
    """
    s = _sign_of(sign)
    x = np.asarray(x, dtype=float)
    pts = x if z is None else x - np.asarray(z, dtype=float)
    tau = lightcone_time(traj, pts, t, sign=s)
    q, _, v, a = traj.eval(tau)
    diff = np.atleast_2d(pts) - q
    d = np.linalg.norm(diff, axis=-1)
    if np.any(d <= eps_dist):
        raise LightconeError("evaluation point hit the light-cone source point")
    n = diff / d[..., None]
    sv = s * v
    one = 1.0 + np.sum(n * sv, axis=-1)
    v2 = np.sum(v * v, axis=-1)
    near = (n + sv) * (1.0 - v2)[..., None] / (d * d * one**3)[..., None]
    far = np.cross(n, np.cross(n + sv, a)) / (d * one**3)[..., None]
    E = near + far
    B = -s * np.cross(n, E)
    if x.ndim == 1:
        return E[0], B[0]
    return E.reshape(x.shape), B.reshape(x.shape)


def _smear_nodes(rho: ChargeDensity, x, q_guess, quad: QuadSpec):
    """Quadrature nodes over supp rho for the smeared convolution at point x.

    Uses the plain ball rule far from the source and an offset rule centered
    at the approximate singular point z* = x - q when the light cone passes
    inside the support.
    """
    z_star = x - q_guess
    if np.linalg.norm(z_star) > (1.0 + quad.near_margin) * rho.R:
        rule = ball_rule(rho.R, quad.ball_radial, quad.ball_polar, quad.ball_az)
        return rule.points, rule.weights
    return offset_ball_nodes(rho.R, z_star, quad.ball_radial, quad.ball_polar, quad.ball_az)


def lw_field(traj: ChargeTrajectory, rho: ChargeDensity, t, x, sign=RETARDED,
             quad: QuadSpec = DEFAULT_QUAD):
    """Smeared Lienard-Wiechert field: int d3z rho(z) (E, B)_point(x - z).

    ``x`` may be a single point or a batch (m, 3); every quadrature node gets
    its own light-cone solve.
    """
    s = _sign_of(sign)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    eps = quad.near_eps * rho.R

    E = np.empty_like(pts)
    B = np.empty_like(pts)
    for i, xi in enumerate(pts):
        tau_c = lightcone_time(traj, xi, t, sign=s)
        q_c = traj.eval(tau_c)[0]
        nodes, w = _smear_nodes(rho, xi, q_c, quad)
        Ez, Bz = lw_point_integrand(traj, t, xi[None, :] - nodes, sign=s, eps_dist=eps)
        dens = rho(nodes)
        E[i] = (w * dens) @ Ez
        B[i] = (w * dens) @ Bz
    if single:
        return E[0], B[0]
    return E, B


def coulomb_field(rho: ChargeDensity, q, x):
    """Electrostatic field of rho centered at q: E = Q(r) (x-q)/r^3, B = 0.

    Newton's shell theorem for the radial profile; exact e (x-q)/r^3 outside
    the support and smooth through the center.
    """
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    diff = x - q
    r = np.linalg.norm(diff, axis=-1)
    E = rho.coulomb_ratio(r)[..., None] * diff
    return E, np.zeros_like(E)


def uniform_point_field(q_now, vel, x):
    """Closed-form unit-source field of eternal uniform motion.

    q_now is the present position (at the evaluation time); retarded and
    advanced fields coincide for uniform motion:
        E = (1 - v^2) Rvec / (Rpar^2 + (1 - v^2) Rperp^2)^(3/2),  B = v ^ E.
    """
    x = np.asarray(x, dtype=float)
    q_now = np.asarray(q_now, dtype=float)
    vel = np.asarray(vel, dtype=float)
    Rv = x - q_now
    v2 = float(vel @ vel)
    if v2 == 0.0:
        r = np.linalg.norm(Rv, axis=-1)
        E = Rv / np.maximum(r, 1e-300)[..., None] ** 3
        return E, np.zeros_like(E)
    vhat = vel / np.sqrt(v2)
    Rpar = np.sum(Rv * vhat, axis=-1)
    R2 = np.sum(Rv * Rv, axis=-1)
    Rperp2 = np.maximum(R2 - Rpar**2, 0.0)
    D = (Rpar**2 + (1.0 - v2) * Rperp2) ** 1.5
    E = (1.0 - v2) * Rv / np.maximum(D, 1e-300)[..., None]
    B = np.cross(np.broadcast_to(vel, E.shape), E)
    return E, B


def uniform_lw_field(rho: ChargeDensity, q_now, vel, x, quad: QuadSpec = DEFAULT_QUAD):
    """Smeared field of uniform motion (the boosted-Coulomb oracle)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    q_now = np.asarray(q_now, dtype=float)
    E = np.empty_like(pts)
    B = np.empty_like(pts)
    for i, xi in enumerate(pts):
        nodes, w = _smear_nodes(rho, xi, q_now, quad)
        Ez, Bz = uniform_point_field(q_now, vel, xi[None, :] - nodes)
        dens = rho(nodes)
        E[i] = (w * dens) @ Ez
        B[i] = (w * dens) @ Bz
    if single:
        return E[0], B[0]
    return E, B
