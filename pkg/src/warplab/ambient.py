"""The ambient model space ``M_w^n`` realized on a global polar-vector chart.

A point is a coordinate vector ``X`` in ``R^n`` with ``r(X) = |X|``.  With
``u = X/|X|`` the metric is

    g(V, W) = <V,u><W,u> + (w(r)/r)^2 (<V,W> - <V,u><W,u>)

so coordinate rays are unit-speed radial geodesics and ``|X|`` is the
distance to the pole at the origin.  All functions accept a single point of
shape ``(n,)`` or a batch of shape ``(N, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .model_space import ModelSpaceSpec

__all__ = [
    "AmbientChart",
    "POLE_EXCLUSION",
    "metric_at",
    "covariant_derivative",
    "grad_r",
    "hessian_r_fd",
]

POLE_EXCLUSION = 1e-8
CHRISTOFFEL_FD_STEP = 1e-4

_MODES = {"analytic": "analytic", "analytic_space_form": "analytic", "finite_difference": "finite_difference"}


@dataclass(frozen=True)
class AmbientChart:
    model: ModelSpaceSpec
    christoffel_mode: str = "auto"

    def __post_init__(self):
        mode = self.christoffel_mode
        if mode == "auto":
            mode = "analytic" if self.model.warping.analytic_derivatives else "finite_difference"
        if mode not in _MODES:
            raise ValueError(f"unknown christoffel_mode {mode!r}")
        object.__setattr__(self, "christoffel_mode", _MODES[mode])

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def warping(self):
        return self.model.warping

    def check_points(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DomainError(f"points must have {self.dim} coordinates, got shape {X.shape}")
        r = np.linalg.norm(X, axis=-1)
        if np.any(r >= self.model.domain_end):
            raise DomainError(f"point outside the chart ball of radius {self.model.domain_end:g}")
        return X, r

    def _scale(self, r):
        """``(w(r)/r)^2`` with its limit 1 at the pole."""
        w = self.warping
        safe = np.where(r > 0, r, 1.0)
        ratio = np.where(r > 0, w.eval(safe, 0) / safe, 1.0)
        return ratio * ratio

    def metric(self, X):
        """Metric tensor ``g_ij(X)``, shape ``(..., n, n)``."""
        X, r = self.check_points(X)
        s = self._scale(r)
        u = _unit(X, r)
        eye = np.eye(self.dim)
        uu = u[..., :, None] * u[..., None, :]
        return s[..., None, None] * eye + (1.0 - s)[..., None, None] * uu

    def metric_sqrt(self, X):
        """Symmetric square root of the metric, exact in the polar splitting."""
        X, r = self.check_points(X)
        q = np.sqrt(self._scale(r))
        u = _unit(X, r)
        uu = u[..., :, None] * u[..., None, :]
        return q[..., None, None] * np.eye(self.dim) + (1.0 - q)[..., None, None] * uu

    def metric_inverse(self, X):
        X, r = self.check_points(X)
        s = self._scale(r)
        u = _unit(X, r)
        eye = np.eye(self.dim)
        uu = u[..., :, None] * u[..., None, :]
        return (eye - uu) / s[..., None, None] + uu

    def metric_derivative(self, X, mode=None):
        """``dG[..., k, i, j] = d g_ij / d X_k``."""
        mode = mode or self.christoffel_mode
        if mode == "finite_difference":
            return self._metric_derivative_fd(X)
        X, r = self.check_points(X)
        w = self.warping
        n = self.dim
        near = r < POLE_EXCLUSION
        rs = np.where(near, 1.0, r)
        w0 = w.eval(rs, 0)
        w1 = w.eval(rs, 1)
        ratio = w0 / rs
        s = ratio * ratio
        ds = 2.0 * ratio * (w1 * rs - w0) / (rs * rs)
        u = X / rs[..., None]
        eye = np.eye(n)
        uu = u[..., :, None] * u[..., None, :]
        proj = eye - uu  # (..., i, j)
        # g = s I + (1-s) uu  =>  d_k g = s' u_k P + (1-s) d_k(uu),
        # d_k(u_i u_j) = (P_ki u_j + u_i P_kj) / r
        term1 = ds[..., None, None, None] * u[..., :, None, None] * proj[..., None, :, :]
        dk = proj[..., :, :, None] * u[..., None, None, :]
        duu = (dk + dk.swapaxes(-1, -2)) / rs[..., None, None, None]
        dG = term1 + (1.0 - s)[..., None, None, None] * duu
        return np.where(near[..., None, None, None], 0.0, dG)

    def _metric_derivative_fd(self, X):
        X, r = self.check_points(X)
        n = self.dim
        h = CHRISTOFFEL_FD_STEP * np.maximum(r, POLE_EXCLUSION)
        out = np.empty(X.shape[:-1] + (n, n, n))
        for k in range(n):
            step = np.zeros_like(X)
            step[..., k] = h
            out[..., k, :, :] = (self.metric(X + step) - self.metric(X - step)) / (2.0 * h)[..., None, None]
        return out

    def christoffel(self, X, mode=None):
        """``Gamma[..., l, i, j]`` of the warped metric at ``X``."""
        dG = self.metric_derivative(X, mode)
        Ginv = self.metric_inverse(X)
        # lowered: Gamma_{m,ij} = 1/2 (d_i g_mj + d_j g_mi - d_m g_ij)
        low = 0.5 * (
            np.swapaxes(dG, -3, -2)  # [.., m, i, j] <- d_i g_mj  : dG[i, m, j]
            + np.moveaxis(dG, -3, -1)  # [.., m, i, j] <- d_j g_mi : dG[j, m, i]
            - dG
        )
        return np.einsum("...lm,...mij->...lij", Ginv, low)

    def inner(self, X, V, W):
        G = self.metric(X)
        return np.einsum("...i,...ij,...j->...", V, G, W)


def _unit(X, r):
    safe = np.where(r > 0, r, 1.0)
    return np.where((r > 0)[..., None], X / safe[..., None], 0.0)


def metric_at(A: AmbientChart, X, V, W) -> float:
    """``g(X)(V, W)`` for coordinate vectors ``V, W`` based at ``X``."""
    return float(A.inner(np.asarray(X, float), np.asarray(V, float), np.asarray(W, float)))


def covariant_derivative(A: AmbientChart, X, direction, field, h: float = 1e-5):
    """Levi-Civita derivative of a vector field along ``direction`` at ``X``.

    ``field`` maps a point to the coordinate components of the vector there.
    The directional derivative of the components is a central difference with
    step ``h * max(1, |X|)`` along ``direction``.
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(direction, dtype=float)
    scale = h * max(1.0, float(np.linalg.norm(X)))
    vn = float(np.linalg.norm(V))
    if vn == 0.0:
        return np.zeros(A.dim)
    step = scale / vn
    Y = np.asarray(field(X), dtype=float)
    dY = (np.asarray(field(X + step * V), float) - np.asarray(field(X - step * V), float)) / (2.0 * step)
    G = A.christoffel(X)
    return dY + np.einsum("lij,i,j->l", G, V, Y)


def grad_r(A: AmbientChart, X):
    """Gradient of the distance to the pole: the unit radial vector ``X/|X|``."""
    X, r = A.check_points(X)
    if np.any(r < POLE_EXCLUSION):
        raise DomainError("grad r is undefined at the pole")
    return X / r[..., None]


def hessian_r_fd(A: AmbientChart, X, V) -> float:
    """``Hess r(V, V)`` by finite differences, independent of the closed form.

    Second derivative of ``|X + sV|`` at ``s = 0`` minus the Christoffel
    correction ``Gamma(V, V) . dr``, with Christoffel symbols from finite
    differences of the metric regardless of the chart's mode.
    """
    X, r = A.check_points(X)
    V = np.asarray(V, dtype=float)
    r = float(r)
    if r < POLE_EXCLUSION:
        raise DomainError("Hess r is undefined at the pole")
    vn = float(np.linalg.norm(V))
    if vn == 0.0:
        return 0.0
    h = 1e-4 * r / vn
    if h * vn < 1e-12:
        raise NumericError(f"finite-difference step underflow at r={r:g}")
    d2 = (np.linalg.norm(X + h * V) - 2.0 * r + np.linalg.norm(X - h * V)) / (h * h)
    gamma = A.christoffel(X, mode="finite_difference")
    dr = X / r
    return float(d2 - np.einsum("lij,i,j,l->", gamma, V, V, dr))
