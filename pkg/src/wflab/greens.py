"""Spherical-mean realization of the d'Alembert propagator.

The combined propagator acts on smooth f as

    (K_t * f)(x) = t * mean of f over the sphere of radius |t| about x,

odd in t, with d/dt (K_t * f)(x) = (sphere mean of f) + (t^2/3) * (ball
mean of lap f).  These two identities are the only analytic inputs; the
homogeneous-wave and free-Maxwell formulas are assembled from them.
"""

from __future__ import annotations

import numpy as np

from .quadrature import DEFAULT_QUAD, QuadSpec, gl_on_interval, sphere_rule

__all__ = [
    "ScalarField3",
    "VectorField3",
    "sphere_mean",
    "ball_mean",
    "K_conv",
    "dtK_conv",
    "kirchhoff_homogeneous",
    "free_maxwell_evolve",
]


class ScalarField3:
    """Scalar field on R^3 given by an evaluator, with optional analytic
    derivatives; missing derivatives fall back to O(h^2) central stencils."""

    def __init__(self, fn, laplacian=None, gradient=None, stencil_h=1e-3):
        self._fn = fn
        self._lap = laplacian
        self._grad = gradient
        self.h = stencil_h

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=float))

    def laplacian(self, x):
        x = np.asarray(x, dtype=float)
        if self._lap is not None:
            return self._lap(x)
        h = self.h
        acc = -6.0 * self._fn(x)
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            acc = acc + self._fn(x + e) + self._fn(x - e)
        return acc / h**2

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self._grad is not None:
            return self._grad(x)
        h = self.h
        out = np.empty(x.shape)
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            out[..., ax] = (self._fn(x + e) - self._fn(x - e)) / (2 * h)
        return out


class VectorField3:
    """Vector field on R^3; same contract as ScalarField3, plus curl/divergence."""

    def __init__(self, fn, laplacian=None, curl=None, divergence=None,
                 grad_div=None, stencil_h=1e-3):
        self._fn = fn
        self._lap = laplacian
        self._curl = curl
        self._div = divergence
        self._grad_div = grad_div
        self.h = stencil_h

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=float))

    def _partials(self, x):
        h = self.h
        cols = []
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            cols.append((self._fn(x + e) - self._fn(x - e)) / (2 * h))
        return cols  # cols[j][..., i] = d_j F_i

    def laplacian(self, x):
        x = np.asarray(x, dtype=float)
        if self._lap is not None:
            return self._lap(x)
        h = self.h
        acc = -6.0 * self._fn(x)
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            acc = acc + self._fn(x + e) + self._fn(x - e)
        return acc / h**2

    def curl(self, x):
        x = np.asarray(x, dtype=float)
        if self._curl is not None:
            return self._curl(x)
        d = self._partials(x)
        out = np.empty(x.shape)
        out[..., 0] = d[1][..., 2] - d[2][..., 1]
        out[..., 1] = d[2][..., 0] - d[0][..., 2]
        out[..., 2] = d[0][..., 1] - d[1][..., 0]
        return out

    def divergence(self, x):
        x = np.asarray(x, dtype=float)
        if self._div is not None:
            return self._div(x)
        d = self._partials(x)
        return d[0][..., 0] + d[1][..., 1] + d[2][..., 2]

    def grad_div(self, x):
        """grad(div F); stencil of the analytic divergence when available."""
        x = np.asarray(x, dtype=float)
        if self._grad_div is not None:
            return self._grad_div(x)
        h = self.h
        out = np.empty(x.shape)
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            out[..., ax] = (self.divergence(x + e) - self.divergence(x - e)) / (2 * h)
        return out


def _as_eval(f):
    return f if callable(f) else (lambda x: np.broadcast_to(f, x.shape[:-1]))


def sphere_mean(f, center, radius, rule=None):
    """Mean of f over the sphere of ``radius`` about ``center``.

    radius = 0 returns f(center).  f may be a ScalarField3/VectorField3, a
    plain callable, or a constant.
    """
    if rule is None:
        rule = sphere_rule()
    center = np.asarray(center, dtype=float)
    radius = float(radius)
    fn = _as_eval(f)
    if radius == 0.0:
        return fn(center)
    pts = center[..., None, :] + radius * rule.dirs
    vals = fn(pts)
    if not np.all(np.isfinite(np.asarray(vals))):
        raise ValueError("non-finite field value on the sphere")
    if np.asarray(vals).ndim == pts.ndim:        # vector values
        return np.einsum("...s,...sj->...j", np.broadcast_to(rule.weights, pts.shape[:-1]), vals)
    return np.einsum("...s,...s->...", np.broadcast_to(rule.weights, pts.shape[:-1]), vals)


def ball_mean(f, center, radius, rule=None, n_radial=12):
    """Mean of f over the solid ball of ``radius`` about ``center``."""
    if rule is None:
        rule = sphere_rule()
    radius = abs(float(radius))
    if radius == 0.0:
        return sphere_mean(f, center, 0.0, rule)
    center = np.asarray(center, dtype=float)
    r, w = gl_on_interval(0.0, radius, n_radial)
    fn = _as_eval(f)
    pts = center[..., None, None, :] + r[..., None, None] * rule.dirs  # (..., nr, ns, 3)
    vals = np.asarray(fn(pts))
    if vals.ndim == pts.ndim:
        shell = np.einsum("s,...rsj->...rj", rule.weights, vals)
        integral = np.einsum("...r,...rj->...j", w * r**2, shell)
    else:
        shell = np.einsum("s,...rs->...r", rule.weights, vals)
        integral = np.einsum("...r,...r->...", w * r**2, shell)
    return integral * (3.0 / radius**3)


def K_conv(f, t, x, rule=None):
    """(K_t * f)(x) = t * sphere mean of f at radius |t|; odd in t."""
    t = float(t)
    if t == 0.0:
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape) if _returns_vector(f, x) else np.zeros(x.shape[:-1])
    return t * sphere_mean(f, x, abs(t), rule)


def _returns_vector(f, x):
    fn = _as_eval(f)
    probe = np.asarray(x, dtype=float).reshape(-1, 3)[:1]
    return np.asarray(fn(probe)).ndim == 2


def dtK_conv(f, t, x, rule=None, n_radial=12):
    """d/dt (K_t * f)(x); needs lap f (analytic on the field type or stencil)."""
    t = float(t)
    if not hasattr(f, "laplacian"):
        raise TypeError("dtK_conv needs a field with a laplacian (ScalarField3/VectorField3)")
    if t == 0.0:
        x = np.asarray(x, dtype=float)
        return f(x)
    mean = sphere_mean(f, x, abs(t), rule)
    vol = ball_mean(f.laplacian, x, abs(t), rule, n_radial=n_radial)
    return mean + (t * t / 3.0) * vol


def kirchhoff_homogeneous(A0, dA0, t, x, rule=None, n_radial=12):
    """Solution of the homogeneous wave equation with data (A0, dA0) at t=0:
    A_t = d/dt K_t * A0 + K_t * dA0 (componentwise for vector data)."""
    return dtK_conv(A0, t, x, rule, n_radial) + K_conv(dA0, t, x, rule)


def free_maxwell_evolve(E0, B0, t, x, quad: QuadSpec = DEFAULT_QUAD):
    """Action of the free Maxwell group W_t on initial data (E0, B0).

    (E_t, B_t) = [d_t, curl; -curl, d_t] K_t*(E0, B0)
                 - int_0^t ds K_{t-s} * (grad div E0, grad div B0).

    E0, B0 are VectorField3 (div-free B0 makes its correction vanish).
    The divergence source of E0 (= 4 pi rho at the initial time) enters
    through E0.grad_div, analytic when supplied.
    """
    rule = sphere_rule(quad.sphere_polar, quad.sphere_az)
    t = float(t)
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return E0(x), B0(x)

    E = dtK_conv(E0, t, x, rule, quad.ball_radial) + K_conv(B0.curl, t, x, rule)
    B = -K_conv(E0.curl, t, x, rule) + dtK_conv(B0, t, x, rule, quad.ball_radial)

    s_nodes, s_w = gl_on_interval(0.0, t, quad.time_order * 3)
    corr_E = np.zeros_like(E)
    corr_B = np.zeros_like(B)
    for s, w in zip(s_nodes, s_w):
        corr_E += w * K_conv(E0.grad_div, t - s, x, rule)
        corr_B += w * K_conv(B0.grad_div, t - s, x, rule)
    return E - corr_E, B - corr_B
