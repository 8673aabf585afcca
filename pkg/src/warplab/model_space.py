"""Rotationally symmetric model spaces ``M_w^m``.

A model space is the warped product ``[0, L) x_w S^{m-1}`` with metric
``dr^2 + w(r)^2 g_S``.  Everything intrinsic about it (mean curvature of the
distance spheres, radial and fibre sectional curvatures, sphere and ball
volumes, the isoperimetric quotient, balance) is a function of the warping
function ``w`` alone, which is what this module evaluates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import expr
from .errors import DomainError, NumericError

__all__ = [
    "WarpingFunction",
    "ModelSpaceSpec",
    "BalanceVerdict",
    "RadialFunction",
    "space_form_warping",
    "warping_from_expression",
    "warping_from_callable",
    "parse_warping",
    "unit_sphere_volume",
    "mean_curvature_eta",
    "radial_curvature",
    "fiber_curvature",
    "vol_fiber",
    "vol_ball",
    "isoperimetric_quotient",
    "balance_report",
    "comparison_hessian_radial",
    "integrated_warping",
    "half_square",
]

# Positive-curvature models stop this far short of the first zero of w.
SPHERE_DOMAIN_MARGIN = 1e-9
QUAD_ABS_FLOOR = 1e-14
QUAD_REL_TOL = 1e-12


@dataclass(frozen=True)
class WarpingFunction:
    """Warping function ``w`` on ``[0, domain_end)`` with ``w(0)=0, w'(0)=1``.

    ``evaluator(r, order)`` returns ``w``, ``w'`` or ``w''`` (order 0, 1, 2)
    elementwise for an array ``r``.
    """

    evaluator: Callable = field(repr=False)
    domain_end: float = math.inf
    kind: str = "custom"
    b: Optional[float] = None
    label: str = ""
    analytic_derivatives: bool = True

    def eval(self, r, order: int = 0):
        if order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        scalar = np.ndim(r) == 0
        out = self.evaluator(np.asarray(r, dtype=float), order)
        out = np.asarray(out, dtype=float)
        if out.shape != np.shape(r):
            out = np.broadcast_to(out, np.shape(r)).copy()
        return float(out) if scalar else out

    def __call__(self, r):
        return self.eval(r, 0)

    def d1(self, r):
        return self.eval(r, 1)

    def d2(self, r):
        return self.eval(r, 2)

    @property
    def spec(self) -> str:
        """Config-file name of this warping function."""
        if self.kind == "space_form":
            return f"space_form:{_fmt(self.b)}"
        return f"custom:{self.label}"

    def check_radius(self, r, *, allow_zero=False):
        r = np.asarray(r, dtype=float)
        lo_bad = (r < 0) if allow_zero else (r <= 0)
        if np.any(lo_bad) or np.any(r >= self.domain_end) or np.any(~np.isfinite(r)):
            lo = "0 <=" if allow_zero else "0 <"
            raise DomainError(f"radius outside {lo} r < {self.domain_end:g}: {np.atleast_1d(r).tolist()[:5]}")


def _fmt(x):
    return repr(float(x)) if x is not None else ""


def space_form_warping(b: float) -> WarpingFunction:
    """Closed-form warping function of the space form of curvature ``b``."""
    b = float(b)
    if b > 0:
        k = math.sqrt(b)

        def ev(r, order):
            if order == 0:
                return np.sin(k * r) / k
            if order == 1:
                return np.cos(k * r)
            return -k * np.sin(k * r)

        end = math.pi / k - SPHERE_DOMAIN_MARGIN
    elif b < 0:
        k = math.sqrt(-b)

        def ev(r, order):
            if order == 0:
                return np.sinh(k * r) / k
            if order == 1:
                return np.cosh(k * r)
            return k * np.sinh(k * r)

        end = math.inf
    else:

        def ev(r, order):
            if order == 0:
                return np.array(r, dtype=float)
            if order == 1:
                return np.ones_like(r, dtype=float)
            return np.zeros_like(r, dtype=float)

        end = math.inf
    return WarpingFunction(ev, end, "space_form", b, label=f"space_form:{_fmt(b)}")


def _validate_custom(w: WarpingFunction, tol=1e-8):
    w0 = w.eval(0.0, 0)
    w1 = w.eval(0.0, 1)
    if not (abs(w0) <= tol and abs(w1 - 1.0) <= tol):
        raise DomainError(f"warping function must satisfy w(0)=0, w'(0)=1; got w(0)={w0:g}, w'(0)={w1:g}")
    hi = min(w.domain_end, 20.0)
    grid = np.linspace(hi / 256, hi * (1 - 1e-6), 256)
    vals = w.eval(grid, 0)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        bad = grid[~(np.isfinite(vals) & (vals > 0))][0]
        raise DomainError(f"warping function must be positive on (0, {hi:g}); fails at r={bad:g}")


def warping_from_expression(text: str, domain_end: float = math.inf) -> WarpingFunction:
    """Warping function from an expression in ``r`` (derivatives via jets)."""
    try:
        e = expr.parse(text, ("r",))
    except expr.ExpressionError as exc:
        raise DomainError(f"bad warping expression {text!r}: {exc}") from None

    def ev(r, order):
        jet = e(r=expr.Jet.variable(r))
        jet = expr.Jet.lift(jet)
        return (jet.v, jet.d1, jet.d2)[order]

    w = WarpingFunction(ev, domain_end, "custom", None, label=e.text)
    _validate_custom(w)
    return w


def warping_from_callable(fn, derivatives=None, domain_end=math.inf, label="callable") -> WarpingFunction:
    """Wrap a user function of ``r``.

    If ``derivatives`` (a pair ``(w1, w2)``) is omitted, ``w'`` and ``w''``
    are central differences with step ``max(1e-5, 1e-5 r)``, one-sided near
    ``r = 0``.
    """
    if derivatives is not None:
        d1, d2 = derivatives

        def ev(r, order):
            return (fn, d1, d2)[order](r)

        w = WarpingFunction(ev, domain_end, "custom", None, label=label)
    else:

        def ev(r, order):
            f0 = np.asarray(fn(r), dtype=float)
            if order == 0:
                return f0
            h = np.maximum(1e-5, 1e-5 * np.abs(r))
            central = r - h >= 0
            rp = fn(r + h)
            if order == 1:
                c = (rp - fn(np.where(central, r - h, r))) / 2.0 / h
                f = (-3.0 * f0 + 4.0 * rp - fn(r + 2 * h)) / (2.0 * h)
                return np.where(central, c, f)
            c = (rp - 2.0 * f0 + fn(np.where(central, r - h, r))) / (h * h)
            f = (2.0 * f0 - 5.0 * rp + 4.0 * fn(r + 2 * h) - fn(r + 3 * h)) / (h * h)
            return np.where(central, c, f)

        w = WarpingFunction(ev, domain_end, "custom", None, label=label, analytic_derivatives=False)
    _validate_custom(w, tol=1e-6)
    return w


def parse_warping(spec: str) -> WarpingFunction:
    """Parse ``space_form:<b>`` or ``custom:<expression>``."""
    kind, sep, rest = spec.strip().partition(":")
    if not sep:
        raise DomainError(f"warping spec must be 'space_form:<b>' or 'custom:<expr>', got {spec!r}")
    kind = kind.strip()
    if kind == "space_form":
        try:
            b = float(rest)
        except ValueError:
            raise DomainError(f"space_form curvature is not a number: {rest!r}") from None
        return space_form_warping(b)
    if kind == "custom":
        return warping_from_expression(rest)
    raise DomainError(f"unknown warping kind {kind!r}")


def unit_sphere_volume(k: int) -> float:
    """Volume of the unit ``k``-sphere in ``R^{k+1}``."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


@dataclass(frozen=True)
class ModelSpaceSpec:
    dim: int
    warping: WarpingFunction

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise DomainError(f"model dimension must be an integer >= 2, got {self.dim}")

    @property
    def unit_sphere_volume(self) -> float:
        """``V0``: volume of the unit ``(m-1)``-sphere."""
        return unit_sphere_volume(self.dim - 1)

    @property
    def domain_end(self) -> float:
        return self.warping.domain_end


def mean_curvature_eta(w: WarpingFunction, r):
    """``eta_w(r) = w'(r) / w(r)``, mean curvature of the distance sphere."""
    w.check_radius(r)
    return w.eval(r, 1) / w.eval(r, 0)


def radial_curvature(w: WarpingFunction, r):
    """``K_w(r) = -w''/w``: sectional curvature of planes containing the radial direction."""
    w.check_radius(r)
    return -w.eval(r, 2) / w.eval(r, 0)


def fiber_curvature(w: WarpingFunction, r):
    """Sectional curvature ``(1 - w'^2) / w^2`` of planes tangent to the distance sphere."""
    w.check_radius(r)
    w0 = w.eval(r, 0)
    w1 = w.eval(r, 1)
    return (1.0 - w1 * w1) / (w0 * w0)


def vol_fiber(M: ModelSpaceSpec, r):
    """``Vol(S_r^w) = V0 w(r)^{m-1}``."""
    M.warping.check_radius(r)
    return M.unit_sphere_volume * M.warping.eval(r, 0) ** (M.dim - 1)


def vol_ball(M: ModelSpaceSpec, r: float) -> float:
    """``Vol(B_r^w) = V0 * integral_0^r w^{m-1}``, by adaptive Gauss-Kronrod quadrature."""
    if np.ndim(r) != 0:
        return np.array([vol_ball(M, float(x)) for x in np.ravel(r)]).reshape(np.shape(r))
    M.warping.check_radius(r)
    return M.unit_sphere_volume * _power_integral(M.warping, M.dim - 1, float(r))


def _power_integral(w: WarpingFunction, p: int, r: float) -> float:
    def integrand(t):
        return w.eval(t, 0) ** p

    val, abserr, info = integrate.quad(
        integrand, 0.0, r, epsabs=QUAD_ABS_FLOOR, epsrel=QUAD_REL_TOL, limit=200, full_output=1
    )[:3]
    bound = max(QUAD_ABS_FLOOR, 1e-10 * abs(val))
    if not np.isfinite(val) or abserr > bound:
        raise NumericError(
            f"quadrature of w^{p} on [0, {r:g}] did not converge: value={val:g}, "
            f"error estimate={abserr:g}, evaluations={info.get('neval')}"
        )
    return float(val)


def isoperimetric_quotient(M: ModelSpaceSpec, r: float) -> float:
    """``q_w(r) = Vol(B_r^w) / Vol(S_r^w)``."""
    return vol_ball(M, r) / vol_fiber(M, r)


@dataclass
class BalanceVerdict:
    grid: list
    below_ok: bool
    above_ok: bool
    min_margin_below: float
    max_margin_above: float
    sufficient_condition_used: str
    totally_balanced: bool
    conditions_holding: tuple
    tolerance: float
    q_eta: list


def balance_report(M: ModelSpaceSpec, grid, tolerance: float = 1e-10) -> BalanceVerdict:
    """Certify balance from below (``q eta >= 1/m``) and above (``q eta <= 1/(m-1)``) on a grid.

    Also reports which curvature conditions that imply balance hold on the
    grid: ``K_w <= 0`` (below) and ``K_w >= -eta_w^2`` (above).  Only the
    grid is certified; nothing is claimed between grid points.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("balance grid must be a nonempty list of radii")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("balance grid must be strictly increasing")
    w = M.warping
    w.check_radius(grid)
    m = M.dim
    q = np.array([isoperimetric_quotient(M, float(r)) for r in grid])
    eta = mean_curvature_eta(w, grid)
    qe = q * eta
    below = qe - 1.0 / m
    above = qe - 1.0 / (m - 1)
    K = radial_curvature(w, grid)
    scale = np.maximum(1.0, np.abs(K))
    holds = []
    if np.all(K <= tolerance * scale):
        holds.append("K_le_0")
    if np.all(K >= -eta * eta - tolerance * np.maximum(scale, eta * eta)):
        holds.append("K_ge_minus_eta_sq")
    below_ok = bool(below.min() >= -tolerance)
    above_ok = bool(above.max() <= tolerance)
    return BalanceVerdict(
        grid=grid.tolist(),
        below_ok=below_ok,
        above_ok=above_ok,
        min_margin_below=float(below.min()),
        max_margin_above=float(above.max()),
        sufficient_condition_used=holds[0] if holds else "none",
        totally_balanced=below_ok and above_ok,
        conditions_holding=tuple(holds),
        tolerance=tolerance,
        q_eta=qe.tolist(),
    )


def comparison_hessian_radial(w: WarpingFunction, r: float, norm_X: float, radial_comp: float) -> float:
    """Model-space Hessian of the distance, ``eta_w(r) (|X|^2 - <X, grad r>^2)``.

    This is the equality value of the Hessian comparison and the lower bound
    for ``Hess r(X, X)`` in any ambient space whose radial curvatures are
    dominated by ``-w''/w``.
    """
    if norm_X < 0 or abs(radial_comp) > norm_X * (1 + 1e-12) + 1e-15:
        raise ValueError(f"need |radial component| <= |X|, got {radial_comp!r} > {norm_X!r}")
    return float(mean_curvature_eta(w, r) * (norm_X * norm_X - radial_comp * radial_comp))


@dataclass(frozen=True)
class RadialFunction:
    """A function ``F(r)`` with its first two derivatives."""

    evaluator: Callable = field(repr=False)
    label: str = ""

    def eval(self, r, order=0):
        return self.evaluator(r, order)


def integrated_warping(w: WarpingFunction) -> RadialFunction:
    """``F(r) = integral_0^r w``, so ``F' = w`` and ``F'' = w'``."""

    def ev(r, order):
        if order == 0:
            if np.ndim(r):
                return np.array([_power_integral(w, 1, float(x)) for x in np.ravel(r)]).reshape(np.shape(r))
            return _power_integral(w, 1, float(r))
        return w.eval(r, order - 1)

    return RadialFunction(ev, f"int_0^r {w.label}")


def half_square() -> RadialFunction:
    """``F(r) = r^2 / 2``."""

    def ev(r, order):
        r = np.asarray(r, dtype=float)
        out = (0.5 * r * r, r, np.ones_like(r))[order]
        return float(out) if out.ndim == 0 else out

    return RadialFunction(ev, "r^2/2")
