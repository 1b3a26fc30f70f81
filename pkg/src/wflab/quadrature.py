"""Quadrature rules shared by the field solvers.

All sphere rules are product Gauss-Legendre (polar) x trapezoid (azimuth).
Weights are normalized so that summing weight * f(node) gives the *mean*
of f over the full sphere; a cap rule simply carries zero total weight for
the part of the sphere it excludes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1], cached."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    return x, w


def gl_on_interval(a, b, n):
    """Gauss-Legendre nodes/weights mapped to [a, b] (a, b may be arrays)."""
    x, w = gauss_legendre(n)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    nodes = mid[..., None] + half[..., None] * x
    weights = half[..., None] * w
    return nodes, weights


@dataclass(frozen=True)
class SphereQuadRule:
    """Product rule on the unit sphere with mean-normalized weights.

    ``dirs`` has shape (npts, 3) and ``weights`` sums to 1, so
    ``weights @ f(dirs)`` is the surface mean of f.
    """

    n_polar: int
    n_az: int
    dirs: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @staticmethod
    def build(n_polar: int = 12, n_az: int = 24) -> "SphereQuadRule":
        mu, wmu = gauss_legendre(n_polar)
        phi = 2.0 * np.pi * (np.arange(n_az) + 0.5) / n_az
        s = np.sqrt(1.0 - mu**2)
        dirs = np.empty((n_polar, n_az, 3))
        dirs[:, :, 0] = s[:, None] * np.cos(phi)[None, :]
        dirs[:, :, 1] = s[:, None] * np.sin(phi)[None, :]
        dirs[:, :, 2] = mu[:, None]
        w = np.broadcast_to((wmu / (2.0 * n_az))[:, None], (n_polar, n_az))
        out = SphereQuadRule(n_polar, n_az, dirs.reshape(-1, 3).copy(), w.reshape(-1).copy())
        out.dirs.flags.writeable = False
        out.weights.flags.writeable = False
        return out


@lru_cache(maxsize=32)
def sphere_rule(n_polar: int = 12, n_az: int = 24) -> SphereQuadRule:
    return SphereQuadRule.build(n_polar, n_az)


def orthonormal_frames(e3):
    """Two unit vectors orthogonal to each row of e3 (shape (..., 3))."""
    e3 = np.asarray(e3, dtype=float)
    helper = np.zeros_like(e3)
    idx = np.argmin(np.abs(e3), axis=-1)
    np.put_along_axis(helper, idx[..., None], 1.0, axis=-1)
    e1 = np.cross(e3, helper)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(e3, e1)
    return e1, e2


def cap_nodes(center, radius, target, support_radius, n_polar=6, n_az=12):
    """Nodes on spheres restricted to the part within ``support_radius`` of ``target``.

    center: (..., 3), radius: (...,) sphere radii (>= 0), target: (..., 3).
    Returns (points, weights) with shapes (..., n_polar*n_az, 3) and
    (..., n_polar*n_az).  Weights are mean-normalized over the *full* sphere,
    i.e. they sum to (cap area)/(4 pi r^2); an empty cap yields zero weights.
    """
    center = np.asarray(center, dtype=float)
    radius = np.asarray(radius, dtype=float)
    target = np.asarray(target, dtype=float)
    d = target - center
    dist = np.linalg.norm(d, axis=-1)

    r = np.abs(radius)
    tiny = 1e-14
    degenerate = (r * dist) < tiny
    # cos(theta) lower bound toward the target axis
    denom = np.where(degenerate, 1.0, 2.0 * r * dist)
    mu_lo = (r**2 + dist**2 - support_radius**2) / denom
    # degenerate geometry: full sphere if it can reach the support at all
    reach = (r + dist) <= support_radius
    mu_lo = np.where(degenerate, np.where(reach, -1.0, 2.0), mu_lo)
    mu_lo = np.clip(mu_lo, -1.0, 1.0)
    width = np.maximum(0.0, 1.0 - mu_lo)
    # empty cap when mu_lo was clipped at 1

    xi, wxi = gauss_legendre(n_polar)
    mu = mu_lo[..., None] + width[..., None] * (xi + 1.0) * 0.5
    wmu = width[..., None] * 0.5 * wxi            # GL weights on [mu_lo, 1]

    axis = np.where(degenerate[..., None], np.array([0.0, 0.0, 1.0]), d / np.maximum(dist, tiny)[..., None])
    e1, e2 = orthonormal_frames(axis)
    phi = 2.0 * np.pi * (np.arange(n_az) + 0.5) / n_az
    cphi, sphi = np.cos(phi), np.sin(phi)

    sin_t = np.sqrt(np.maximum(0.0, 1.0 - mu**2))
    # dirs: (..., n_polar, n_az, 3)
    dirs = (
        mu[..., :, None, None] * axis[..., None, None, :]
        + sin_t[..., :, None, None]
        * (cphi[:, None] * e1[..., None, None, :] + sphi[:, None] * e2[..., None, None, :])
    )
    pts = center[..., None, None, :] + r[..., None, None, None] * dirs
    w = wmu[..., :, None] / (2.0 * n_az) * np.ones_like(cphi)
    shp = pts.shape[:-3] + (n_polar * n_az, 3)
    return pts.reshape(shp), w.reshape(shp[:-1])


@dataclass(frozen=True)
class BallQuadRule:
    """Rule for integrals over the ball B_R(0): sum w_i f(x_i) = int_B f d3x."""

    points: np.ndarray
    weights: np.ndarray

    @staticmethod
    def build(R: float, n_radial: int = 8, n_polar: int = 8, n_az: int = 16) -> "BallQuadRule":
        xr, wr = gauss_legendre(n_radial)
        r = 0.5 * R * (xr + 1.0)
        wr = 0.5 * R * wr
        sph = sphere_rule(n_polar, n_az)
        pts = r[:, None, None] * sph.dirs[None, :, :]
        w = (wr * r**2)[:, None] * (4.0 * np.pi * sph.weights)[None, :]
        out = BallQuadRule(pts.reshape(-1, 3).copy(), w.reshape(-1).copy())
        out.points.flags.writeable = False
        out.weights.flags.writeable = False
        return out


@lru_cache(maxsize=32)
def ball_rule(R: float, n_radial: int = 8, n_polar: int = 8, n_az: int = 16) -> BallQuadRule:
    return BallQuadRule.build(R, n_radial, n_polar, n_az)


def offset_ball_nodes(R, singular_point, n_radial=10, n_polar=8, n_az=16):
    """Nodes covering B_R(0) in spherical coordinates centered at ``singular_point``.

    The r^2 dr Jacobian of this parametrization tames an integrable 1/r^2
    singularity at ``singular_point``.  Returns (points, weights) with
    sum w_i f(x_i) = int_{B_R(0)} f d3x.
    """
    z0 = np.asarray(singular_point, dtype=float)
    d2 = float(z0 @ z0)
    sph = sphere_rule(n_polar, n_az)
    # radial limits along each direction: |z0 + r w| = R
    b = sph.dirs @ z0
    disc = b**2 - (d2 - R**2)
    valid = disc > 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    r_lo = np.maximum(0.0, -b - sq)
    r_hi = np.maximum(r_lo, -b + sq)
    nodes_r, w_r = gl_on_interval(r_lo, r_hi, n_radial)  # (ndir, n_radial)
    pts = z0[None, None, :] + nodes_r[:, :, None] * sph.dirs[:, None, :]
    w = (w_r * nodes_r**2) * (4.0 * np.pi * sph.weights)[:, None]
    w = np.where(valid[:, None], w, 0.0)
    return pts.reshape(-1, 3), w.reshape(-1)


def ball_intersection_nodes(x, c, R, tau, n_radial=12, n_polar=8, n_az=16):
    """Nodes for integrals over B_tau(x) & B_R(c), parametrized around x.

    The r^2 Jacobian regularizes kernels ~ 1/|w - x|^2.  Directions are
    restricted to the cone toward c that can reach B_R(c), with a polar
    panel split where the region boundary switches between the two sphere
    surfaces (the radial limit min(tau, chord) kinks there).  Returns
    (points, weights) with sum w f(pts) = integral over the intersection.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    d = c - x
    D = np.linalg.norm(d, axis=-1)
    tiny = 1e-14
    inside = D <= R
    mu_min = np.where(inside, -1.0, np.sqrt(np.maximum(0.0, 1.0 - (R / np.maximum(D, tiny)) ** 2)))
    # directions hitting the circle where the sphere boundaries intersect
    mu_star = np.where(D > tiny, (tau**2 + D**2 - R**2) / np.maximum(2.0 * tau * D, tiny), 1.0)
    mu_star = np.clip(mu_star, mu_min, 1.0)
    axis = np.where((D < tiny)[..., None], np.array([0.0, 0.0, 1.0]), d / np.maximum(D, tiny)[..., None])
    e1, e2 = orthonormal_frames(axis)
    xi, wxi = gauss_legendre(n_polar)
    half = np.stack([mu_star - mu_min, 1.0 - mu_star], axis=-1) * 0.5        # (..., 2)
    mid = np.stack([mu_min + mu_star, mu_star + 1.0], axis=-1) * 0.5
    mu = (mid[..., None] + half[..., None] * xi).reshape(mu_min.shape + (2 * n_polar,))
    wmu = (half[..., None] * wxi).reshape(mu_min.shape + (2 * n_polar,))
    phi = 2.0 * np.pi * (np.arange(n_az) + 0.5) / n_az
    cphi, sphi = np.cos(phi), np.sin(phi)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - mu**2))
    dirs = (mu[..., :, None, None] * axis[..., None, None, :]
            + sin_t[..., :, None, None] * (cphi[:, None] * e1[..., None, None, :]
                                           + sphi[:, None] * e2[..., None, None, :]))
    # radial interval along each direction: inside B_R(c) and r <= tau
    b = np.einsum("...j,...klj->...kl", d, dirs)
    disc = b**2 - (D**2 - R**2)[..., None, None]
    ok = disc > 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    r_lo = np.maximum(0.0, b - sq)
    r_hi = np.minimum(np.asarray(tau)[..., None, None], b + sq)
    r_hi = np.maximum(r_hi, r_lo)
    nodes_r, w_r = gl_on_interval(r_lo, r_hi, n_radial)      # (..., 2*np, naz, nr)
    pts = x[..., None, None, None, :] + nodes_r[..., None] * dirs[..., None, :]
    w_ang = (wmu[..., :, None] * (2.0 * np.pi / n_az))
    w = w_ang[..., None] * w_r * nodes_r**2
    w = np.where(ok[..., None], w, 0.0)
    lead = pts.shape[:-4]
    m = 2 * n_polar * n_az * n_radial
    return pts.reshape(lead + (m, 3)), w.reshape(lead + (m,))


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature orders threaded through the field solvers."""

    sphere_polar: int = 16
    sphere_az: int = 32
    cap_polar: int = 12
    cap_az: int = 16
    ball_radial: int = 24
    ball_polar: int = 12
    ball_az: int = 24
    cone_radial: int = 16
    cone_polar: int = 12
    cone_az: int = 20
    time_order: int = 12
    stencil_h: float = 5e-3
    near_margin: float = 0.75   # switch to the offset rule within (1+margin)*R
    near_eps: float = 1e-9      # light-cone distances below near_eps*R are an error

    def refined(self, factor: int = 2) -> "QuadSpec":
        return QuadSpec(
            sphere_polar=self.sphere_polar * factor,
            sphere_az=self.sphere_az * factor,
            cap_polar=self.cap_polar * factor,
            cap_az=self.cap_az * factor,
            ball_radial=self.ball_radial * factor,
            ball_polar=self.ball_polar * factor,
            ball_az=self.ball_az * factor,
            cone_radial=self.cone_radial * factor,
            cone_polar=self.cone_polar * factor,
            cone_az=self.cone_az * factor,
            time_order=self.time_order * factor,
            stencil_h=self.stencil_h / factor,
            near_margin=self.near_margin,
            near_eps=self.near_eps,
        )


DEFAULT_QUAD = QuadSpec()
