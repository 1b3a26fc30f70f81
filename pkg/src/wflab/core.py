"""Domain types: charge densities, trajectories, the relativistic velocity
map, and discrete weighted norms.

Units: c = 1, Gaussian-style coupling with div E = 4 pi rho.  A charge with
momentum p and mass m moves with v(p) = p / sqrt(m^2 + |p|^2), so |v| < 1
always holds for m != 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .quadrature import gauss_legendre, gl_on_interval

__all__ = [
    "v_of_p",
    "accel_of_p",
    "ChargeDensity",
    "make_bump_density",
    "AsymptoteSpec",
    "ChargeTrajectory",
    "traj_eval",
    "PhasePoint",
    "NormGrid",
    "discrete_norm",
    "weight_w",
]


def v_of_p(p, m):
    """Velocity of a charge with momentum p and mass m (Eq. p/sqrt(m^2+p^2))."""
    p = np.asarray(p, dtype=float)
    if m == 0:
        raise ValueError("mass must be nonzero")
    gamma_m = np.sqrt(m * m + np.sum(p * p, axis=-1, keepdims=True))
    return p / gamma_m


def accel_of_p(p, pdot, m):
    """d/dt v(p_t) given p and dp/dt."""
    p = np.asarray(p, dtype=float)
    pdot = np.asarray(pdot, dtype=float)
    gamma_m = np.sqrt(m * m + np.sum(p * p, axis=-1, keepdims=True))
    v = p / gamma_m
    return (pdot - v * np.sum(v * pdot, axis=-1, keepdims=True)) / gamma_m


# ---------------------------------------------------------------------------
# charge density
# ---------------------------------------------------------------------------

def _bump(u):
    """exp(-1/(1-u^2)) on [0,1), 0 outside; C-infinity with compact support."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


def _bump_d1(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    om = 1.0 - ui * ui
    out[inside] = np.exp(-1.0 / om) * (-2.0 * ui / om**2)
    return out


def _bump_d2(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    om = 1.0 - ui * ui
    phi1 = -2.0 * ui / om**2
    phi2 = -2.0 * (1.0 + 3.0 * ui * ui) / om**3
    out[inside] = np.exp(-1.0 / om) * (phi1 * phi1 + phi2)
    return out


def _bump_shape_integral(n=200):
    # int_0^1 u^2 exp(-1/(1-u^2)) du
    x, w = gauss_legendre(n)
    u = 0.5 * (x + 1.0)
    return 0.5 * float(np.sum(w * u * u * _bump(u)))


_SHAPE_INTEGRAL = _bump_shape_integral()


def _enclosed_fraction_fit():
    """Chebyshev fit of S(u) = u^-3 int_0^u t^2 g(t) dt / I on [0.05, 1]."""
    deg = 80
    k = np.arange(deg + 1)
    u = 0.525 + 0.475 * np.cos(np.pi * k / deg)   # Chebyshev points of [0.05, 1]
    nodes, w = gl_on_interval(np.zeros_like(u), u, 64)
    vals = np.sum(w * nodes**2 * _bump(nodes), axis=-1) / (u**3 * _SHAPE_INTEGRAL)
    coef = np.polynomial.chebyshev.chebfit(2.0 * (u - 0.525) / 0.95, vals, deg)
    return coef


_S_CHEB = _enclosed_fraction_fit()


def _enclosed_fraction_over_u3(u):
    """S(u) with Q(u R)/e = u^3 S(u); smooth, S(0) = g(0)/(3 I)."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    big = u >= 1.0
    out[big] = 1.0 / np.maximum(u[big], 1.0) ** 3  # so that u^3 S = 1
    small = u < 0.08
    us = u[small]
    # series of (1/I) int_0^u t^2 g / u^3, g = e^-1 (1 - t^2 - t^4/2 - t^6/6 ...)
    out[small] = np.exp(-1.0) / _SHAPE_INTEGRAL * (
        1.0 / 3.0 - us**2 / 5.0 - us**4 / 14.0 - us**6 / 54.0
    )
    mid = ~big & ~small
    um = u[mid]
    out[mid] = np.polynomial.chebyshev.chebval(2.0 * (um - 0.525) / 0.95, _S_CHEB)
    return out


@dataclass(frozen=True)
class ChargeDensity:
    """Radially symmetric C^2 (here C-infinity) bump profile with support B_R(0).

    rho(x) = norm * exp(-1/(1 - (|x|/R)^2)) inside the support; the
    normalization makes the total charge equal to e.
    """

    e: float
    R: float
    norm: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return self.norm * _bump(r / self.R)

    def radial(self, r):
        return self.norm * _bump(np.asarray(r, dtype=float) / self.R)

    def radial_d1(self, r):
        return self.norm / self.R * _bump_d1(np.asarray(r, dtype=float) / self.R)

    def gradient(self, x):
        """grad rho; zero vector at the center and outside the support."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        g = np.zeros_like(x)
        mask = (r > 0.0) & (r < self.R)
        rm = r[mask]
        g[mask] = (self.radial_d1(rm) / rm)[..., None] * x[mask]
        return g

    def laplacian(self, x):
        """lap rho = rho'' + 2 rho'/r, with the r -> 0 limit 3 rho''(0)."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        u = r / self.R
        out = self.norm / self.R**2 * _bump_d2(u)
        safe = u > 1e-12
        term = np.zeros_like(out)
        term[safe] = 2.0 * self.norm / self.R**2 * _bump_d1(u[safe]) / u[safe]
        term[~safe] = 2.0 * self.norm / self.R**2 * (-2.0 * _bump(u[~safe]))
        return out + term

    def enclosed_charge(self, r):
        """Q(r) = 4 pi int_0^r s^2 rho(s) ds; equals e for r >= R."""
        r = np.asarray(r, dtype=float)
        if self.norm == 0.0:
            return np.zeros_like(r)
        u = r / self.R
        return self.e * u**3 * _enclosed_fraction_over_u3(u)

    def coulomb_ratio(self, r):
        """Q(r)/r^3 extended smoothly through r = 0 (units of charge/length^3)."""
        r = np.asarray(r, dtype=float)
        u = r / self.R
        return self.e / self.R**3 * _enclosed_fraction_over_u3(u)


def make_bump_density(R: float, e: float) -> ChargeDensity:
    """Bump density with support radius R and total charge e."""
    if R <= 0:
        raise ValueError("support radius R must be positive")
    if e == 0.0:
        return ChargeDensity(e=0.0, R=R, norm=0.0)
    norm = e / (4.0 * np.pi * R**3 * _SHAPE_INTEGRAL)
    return ChargeDensity(e=e, R=R, norm=norm)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoteSpec:
    """Continuation of a trajectory beyond its sampled range.

    mode "rest": the charge sits at the anchor position with p = 0 (the
    momentum may jump there; that is the instant-stopping picture behind
    Coulomb boundary fields).  mode "uniform": constant momentum drift.
    """

    mode: str            # "rest" | "uniform"
    t_anchor: float
    q_anchor: np.ndarray
    p_anchor: np.ndarray

    def __post_init__(self):
        if self.mode not in ("rest", "uniform"):
            raise ValueError(f"unknown asymptote mode {self.mode!r}")
        object.__setattr__(self, "q_anchor", np.asarray(self.q_anchor, dtype=float))
        object.__setattr__(self, "p_anchor", np.asarray(self.p_anchor, dtype=float))


def _hermite(theta):
    h00 = 2 * theta**3 - 3 * theta**2 + 1
    h10 = theta**3 - 2 * theta**2 + theta
    h01 = -2 * theta**3 + 3 * theta**2
    h11 = theta**3 - theta**2
    return h00, h10, h01, h11


def _hermite_d(theta):
    d00 = 6 * theta**2 - 6 * theta
    d10 = 3 * theta**2 - 4 * theta + 1
    d01 = -6 * theta**2 + 6 * theta
    d11 = 3 * theta**2 - 2 * theta
    return d00, d10, d01, d11


class ChargeTrajectory:
    """Sampled strictly time-like path t -> (q_t, p_t) with C^1 interpolation.

    Cubic Hermite per component: q uses slope v(p), p uses the supplied
    dp/dt (finite differences of the samples when not given).  Acceleration
    is the derivative of v(p_t) along the interpolant.
    """

    def __init__(self, times, q, p, mass, pdot=None,
                 pre: AsymptoteSpec | None = None,
                 post: AsymptoteSpec | None = None):
        times = np.asarray(times, dtype=float)
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        if times.ndim != 1 or len(times) == 0:
            raise ValueError("need a non-empty 1-d array of sample times")
        if len(times) == 1 and pre is None and post is None:
            raise ValueError("a single sample requires an AsymptoteSpec")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if q.shape != (len(times), 3) or p.shape != (len(times), 3):
            raise ValueError("q and p must have shape (n_samples, 3)")
        if mass == 0:
            raise ValueError("mass must be nonzero")
        v = v_of_p(p, mass)
        speed = np.linalg.norm(v, axis=-1)
        if np.any(speed >= 1.0):
            raise ValueError("samples must be strictly time-like (|v| < 1)")
        if pdot is None:
            pdot = np.gradient(p, times, axis=0) if len(times) > 1 else np.zeros_like(p)
        else:
            pdot = np.asarray(pdot, dtype=float)
            if pdot.shape != p.shape:
                raise ValueError("pdot must match the shape of p")
        self.times = times
        self.q = q
        self.p = p
        self.pdot = pdot
        self.v = v
        self.mass = float(mass)
        self.pre = pre
        self.post = post
        self.v_max = float(np.max(speed)) if len(times) else 0.0
        if pre is not None and pre.mode == "uniform":
            self.v_max = max(self.v_max, float(np.linalg.norm(v_of_p(pre.p_anchor, mass))))
        if post is not None and post.mode == "uniform":
            self.v_max = max(self.v_max, float(np.linalg.norm(v_of_p(post.p_anchor, mass))))
        for arr in (self.times, self.q, self.p, self.pdot, self.v):
            arr.flags.writeable = False

    @property
    def t_start(self):
        return self.times[0]

    @property
    def t_end(self):
        return self.times[-1]

    def piece_times(self, lo, hi):
        """Interior breakpoints of the interpolant within (lo, hi)."""
        ts = self.times
        inner = ts[(ts > lo) & (ts < hi)]
        edges = []
        if self.pre is not None and lo < self.t_start < hi:
            edges.append(self.t_start)
        if self.post is not None and lo < self.t_end < hi:
            edges.append(self.t_end)
        return np.unique(np.concatenate([inner, np.asarray(edges)])) if len(edges) else inner

    def eval(self, t):
        """(q, p, v, a) at times t (any shape); asymptotes extend the domain."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        q = np.empty(t.shape + (3,))
        p = np.empty_like(q)
        pd = np.empty_like(q)

        before = t < self.times[0]
        after = t > self.times[-1]
        mid = ~(before | after)

        if np.any(before):
            if self.pre is None:
                raise DomainError("query before the sampled range and no pre-asymptote")
            self._asymptote(self.pre, t[before], q, p, pd, before)
        if np.any(after):
            if self.post is None:
                raise DomainError("query after the sampled range and no post-asymptote")
            self._asymptote(self.post, t[after], q, p, pd, after)
        if np.any(mid):
            tm = t[mid]
            if len(self.times) == 1:
                q[mid] = self.q[0]
                p[mid] = self.p[0]
                pd[mid] = self.pdot[0]
            else:
                idx = np.clip(np.searchsorted(self.times, tm, side="right") - 1, 0, len(self.times) - 2)
                t0 = self.times[idx]
                h = self.times[idx + 1] - t0
                theta = (tm - t0) / h
                h00, h10, h01, h11 = _hermite(theta)
                d00, d10, d01, d11 = _hermite_d(theta)
                for src, slope, out, dout in ((self.q, self.v, q, None), (self.p, self.pdot, p, pd)):
                    y0, y1 = src[idx], src[idx + 1]
                    m0, m1 = slope[idx], slope[idx + 1]
                    val = (h00[..., None] * y0 + h01[..., None] * y1
                           + (h10[..., None] * m0 + h11[..., None] * m1) * h[..., None])
                    out[mid] = val
                    if dout is not None:
                        der = ((d00[..., None] * y0 + d01[..., None] * y1) / h[..., None]
                               + d10[..., None] * m0 + d11[..., None] * m1)
                        dout[mid] = der
        v = v_of_p(p, self.mass)
        a = accel_of_p(p, pd, self.mass)
        speed2 = np.sum(v * v, axis=-1)
        if np.any(speed2 >= 1.0):
            raise DomainError("interpolated momentum is not strictly time-like")
        if scalar:
            return q[0], p[0], v[0], a[0]
        return q, p, v, a

    def positions(self, t):
        """Positions only; cheaper than eval for window bracketing."""
        t = np.asarray(t, dtype=float)
        t = np.atleast_1d(t)
        q = np.empty(t.shape + (3,))
        before = t < self.times[0]
        after = t > self.times[-1]
        mid = ~(before | after)
        if np.any(before):
            if self.pre is None:
                raise DomainError("query before the sampled range and no pre-asymptote")
            if self.pre.mode == "rest":
                q[before] = self.pre.q_anchor
            else:
                vv = v_of_p(self.pre.p_anchor, self.mass)
                q[before] = self.pre.q_anchor + (t[before] - self.pre.t_anchor)[..., None] * vv
        if np.any(after):
            if self.post is None:
                raise DomainError("query after the sampled range and no post-asymptote")
            if self.post.mode == "rest":
                q[after] = self.post.q_anchor
            else:
                vv = v_of_p(self.post.p_anchor, self.mass)
                q[after] = self.post.q_anchor + (t[after] - self.post.t_anchor)[..., None] * vv
        if np.any(mid):
            tm = t[mid]
            if len(self.times) == 1:
                q[mid] = self.q[0]
            else:
                idx = np.clip(np.searchsorted(self.times, tm, side="right") - 1, 0, len(self.times) - 2)
                t0 = self.times[idx]
                h = self.times[idx + 1] - t0
                theta = (tm - t0) / h
                h00, h10, h01, h11 = _hermite(theta)
                q[mid] = (h00[..., None] * self.q[idx] + h01[..., None] * self.q[idx + 1]
                          + (h10[..., None] * self.v[idx] + h11[..., None] * self.v[idx + 1]) * h[..., None])
        return q

    def _asymptote(self, spec, ts, q, p, pd, mask):
        if spec.mode == "rest":
            q[mask] = spec.q_anchor
            p[mask] = 0.0
            pd[mask] = 0.0
        else:
            vv = v_of_p(spec.p_anchor, self.mass)
            q[mask] = spec.q_anchor + (ts - spec.t_anchor)[..., None] * vv
            p[mask] = spec.p_anchor
            pd[mask] = 0.0

    def frozen_at(self, side: str) -> "ChargeTrajectory":
        """Copy with a rest asymptote attached at the start or end sample."""
        if side == "pre":
            a = AsymptoteSpec("rest", self.times[0], self.q[0], np.zeros(3))
            return ChargeTrajectory(self.times, self.q, self.p, self.mass, self.pdot, pre=a, post=self.post)
        if side == "post":
            a = AsymptoteSpec("rest", self.times[-1], self.q[-1], np.zeros(3))
            return ChargeTrajectory(self.times, self.q, self.p, self.mass, self.pdot, pre=self.pre, post=a)
        raise ValueError("side must be 'pre' or 'post'")


def traj_eval(traj: ChargeTrajectory, t):
    """(q, p, v, a) at time t. Thin functional wrapper over ChargeTrajectory.eval."""
    return traj.eval(t)


def uniform_trajectory(q0, p0, mass, t0=0.0, t1=1.0, n=5) -> ChargeTrajectory:
    """Force-free straight line through (t0, q0) with constant momentum p0."""
    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    ts = np.linspace(t0, t1, n)
    v = v_of_p(p0, mass)
    q = q0[None, :] + (ts - t0)[:, None] * v[None, :]
    p = np.broadcast_to(p0, (n, 3)).copy()
    pre = AsymptoteSpec("uniform", ts[0], q[0], p0)
    post = AsymptoteSpec("uniform", ts[-1], q[-1], p0)
    return ChargeTrajectory(ts, q, p, mass, pdot=np.zeros((n, 3)), pre=pre, post=post)


def static_trajectory(q0, mass, t0=-1.0, t1=1.0) -> ChargeTrajectory:
    return uniform_trajectory(q0, np.zeros(3), mass, t0, t1, n=3)


@dataclass(frozen=True)
class PhasePoint:
    """ML-SI state: positions/momenta of N charges plus one field per charge."""

    q: np.ndarray          # (N, 3)
    p: np.ndarray          # (N, 3)
    fields: tuple          # N field evaluators

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.shape != p.shape or q.ndim != 2 or q.shape[1] != 3:
            raise ValueError("q and p must both have shape (N, 3)")
        if len(self.fields) != q.shape[0]:
            raise ValueError("need one field evaluator per charge")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n_charges(self):
        return self.q.shape[0]


# ---------------------------------------------------------------------------
# weighted norms
# ---------------------------------------------------------------------------

def weight_w(x):
    """The square-integrability weight w(x) = (1 + |x|^2)^-1."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (1.0 + np.sum(x * x, axis=-1))


class NormGrid:
    """Cube lattice restricted to a ball, realizing discrete L2_w / F1_w norms.

    The lattice extends one layer beyond rho_box so that central differences
    for the curl are available at every norm node.
    """

    def __init__(self, center, rho_box: float, spacing: float):
        if rho_box <= 0 or spacing <= 0:
            raise ValueError("rho_box and spacing must be positive")
        center = np.asarray(center, dtype=float)
        nhalf = int(np.ceil(rho_box / spacing)) + 1
        axis = spacing * np.arange(-nhalf, nhalf + 1)
        gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
        pts = np.stack([gx, gy, gz], axis=-1) + center
        r = np.linalg.norm(pts - center, axis=-1)
        self.center = center
        self.rho_box = float(rho_box)
        self.h = float(spacing)
        self.shape = gx.shape
        self.points = pts.reshape(-1, 3)
        interior = np.zeros(self.shape, dtype=bool)
        interior[1:-1, 1:-1, 1:-1] = True
        self.mask = (r <= rho_box) & interior
        self.mu = np.full(self.shape, spacing**3)
        self.w = 1.0 / (1.0 + r**2)
        self.points.flags.writeable = False

    @property
    def nodes(self):
        """Norm nodes (inside the ball) as an (n, 3) array."""
        return self.points[self.mask.reshape(-1)]

    def sample(self, func):
        """Evaluate func on the full lattice; returns (nx, ny, nz, 3) per output."""
        vals = func(self.points)
        if isinstance(vals, tuple):
            return tuple(np.asarray(v).reshape(self.shape + (3,)) for v in vals)
        return np.asarray(vals).reshape(self.shape + (3,))

    def lattice_curl(self, f):
        """Central-difference curl of lattice samples f (nx, ny, nz, 3)."""
        c = np.zeros_like(f)
        h2 = 2.0 * self.h
        sl = slice(1, -1)
        c[sl, sl, sl, 0] = ((f[1:-1, 2:, 1:-1, 2] - f[1:-1, :-2, 1:-1, 2])
                            - (f[1:-1, 1:-1, 2:, 1] - f[1:-1, 1:-1, :-2, 1])) / h2
        c[sl, sl, sl, 1] = ((f[1:-1, 1:-1, 2:, 0] - f[1:-1, 1:-1, :-2, 0])
                            - (f[2:, 1:-1, 1:-1, 2] - f[:-2, 1:-1, 1:-1, 2])) / h2
        c[sl, sl, sl, 2] = ((f[2:, 1:-1, 1:-1, 1] - f[:-2, 1:-1, 1:-1, 1])
                            - (f[1:-1, 2:, 1:-1, 0] - f[1:-1, :-2, 1:-1, 0])) / h2
        return c

    def norm_of_samples(self, fields, order: int = 0) -> float:
        """Discrete norm of one or more lattice-sampled vector fields.

        fields: iterable of (nx, ny, nz, 3) arrays (e.g. E and B of every
        charge).  order 1 adds the curl term of each field.
        """
        total = 0.0
        mask = self.mask
        for f in fields:
            if not np.all(np.isfinite(f[mask])):
                raise ValueError("non-finite field value on the norm grid")
            total += np.sum(self.mu[mask] * self.w[mask] * np.sum(f[mask] ** 2, axis=-1))
            if order >= 1:
                cf = self.lattice_curl(f)
                total += np.sum(self.mu[mask] * self.w[mask] * np.sum(cf[mask] ** 2, axis=-1))
        return float(np.sqrt(total))


def discrete_norm(field, grid: NormGrid, order: int = 0) -> float:
    """Discrete L2_w (order 0) or F1_w (order 1) norm.

    ``field`` is a callable x -> vector (or tuple of vectors), a lattice
    sample array, or a list of either.
    """
    if callable(field):
        sampled = grid.sample(field)
        fields = list(sampled) if isinstance(sampled, tuple) else [sampled]
    elif isinstance(field, np.ndarray):
        fields = [field]
    else:
        fields = []
        for f in field:
            if callable(f):
                s = grid.sample(f)
                fields.extend(list(s) if isinstance(s, tuple) else [s])
            else:
                fields.append(np.asarray(f))
    return grid.norm_of_samples(fields, order=order)
