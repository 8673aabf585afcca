"""Growth curves, hypothesis fits and pass/fail verdicts for the ends inequalities."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError
from .immersion import MeshedSubmanifold
from .mesh_topology import BallMeasures, EndsScan, ball_measures
from .model_space import (
    ModelSpaceSpec,
    WarpingFunction,
    mean_curvature_eta,
    unit_sphere_volume,
    vol_ball,
    vol_fiber,
)

__all__ = [
    "DEFAULT_TOLERANCES",
    "HYPOTHESIS_FORMS",
    "GrowthReport",
    "HypothesisFit",
    "VerificationVerdict",
    "BishopMyers",
    "growth_curves",
    "check_hypothesis",
    "delta_to_epsilon",
    "ends_inequalities",
    "isoperimetric_verdicts",
    "bishop_myers_bound",
    "bishop_myers_verdict",
    "gap_diagnostic",
]

DEFAULT_TOLERANCES = {
    "monotone_f": 1e-3,  # relative
    "isoperimetric": 1e-2,  # relative
    "volume_comparison": 1e-2,
    "ends_sup_f": 1e-2,
    "area_growth": 2e-2,
    "area_liminf": 2e-2,
    "totally_geodesic_f": 1e-2,
    "totally_geodesic_sff": 1e-6,
    "trend": 2e-2,  # relative slack when testing a fitted curve for decrease
    "bishop_myers": 0.0,
}

# form -> (kind, description); "bound" forms compare against a constant c,
# "decay" forms fit a function that should decrease toward 0.
HYPOTHESIS_FORMS = {
    "T1_c_eta_rho": ("bound", "|B| / eta_w(rho)"),
    "alt_c_eta_r": ("bound", "|B| / eta_w(r)"),
    "T2_eps_over_wprime_sq": ("decay", "|B| w'(r)^2 / eta_w(r)"),
    "cor1_delta_exp": ("decay", "|B| exp(2 sqrt(-b) r)"),
    "cor3_eps_over_r": ("decay", "|B| r"),
    "cor5_c_hb": ("bound", "|B| / h_b(rho)"),
    "cor6_c_over_rho": ("bound", "|B| rho"),
}


@dataclass
class GrowthReport:
    radii: np.ndarray
    vol: np.ndarray
    area: np.ndarray
    f: np.ndarray
    g: np.ndarray
    isop_lhs: np.ndarray
    isop_rhs: np.ndarray
    monotone_f: bool
    max_monotone_violation: float
    skipped: list
    component_areas: list = field(default_factory=list)

    @property
    def valid(self) -> np.ndarray:
        """Mask of radii with a nonempty ball."""
        return self.vol > 0


def growth_curves(
    Mh: MeshedSubmanifold,
    model: ModelSpaceSpec,
    radii,
    threads: int = 1,
    tolerance: float = DEFAULT_TOLERANCES["monotone_f"],
    measures: Optional[BallMeasures] = None,
) -> GrowthReport:
    """``f = Vol(D_t)/Vol(B_t^w)``, ``g = Vol(dD_t)/Vol(S_t^w)`` and the isoperimetric ratios.

    The comparison model must have the submanifold's dimension.  Radii with an
    empty ball are kept with zero entries and listed in ``skipped``.
    """
    if model.dim != Mh.m:
        raise DomainError(f"comparison model has dimension {model.dim}, submanifold has {Mh.m}")
    radii = np.asarray(radii, float)
    meas = measures or ball_measures(Mh, radii, threads)
    vb = np.array([vol_ball(model, t) for t in radii])
    vs = np.array([float(vol_fiber(model, t)) for t in radii])
    vol, area = meas.volume, meas.area
    nonempty = vol > 0
    f = np.where(nonempty, vol / vb, 0.0)
    g = np.where(nonempty, area / vs, 0.0)
    isop_lhs = np.where(nonempty, area / np.where(nonempty, vol, 1.0), 0.0)
    isop_rhs = vs / vb
    fv = f[nonempty]
    if len(fv) > 1:
        drops = (fv[:-1] - fv[1:]) / fv[:-1]
        worst = float(max(drops.max(), 0.0))
    else:
        worst = 0.0
    return GrowthReport(
        radii=radii,
        vol=vol,
        area=area,
        f=f,
        g=g,
        isop_lhs=isop_lhs,
        isop_rhs=isop_rhs,
        monotone_f=worst <= tolerance,
        max_monotone_violation=worst,
        skipped=radii[~nonempty].tolist(),
        component_areas=meas.component_areas,
    )


@dataclass
class HypothesisFit:
    form: str
    quantity: str
    bin_edges: np.ndarray
    fitted_curve: np.ndarray  # per-bin sup; nan for empty bins
    verified_range: tuple
    trend_decreasing: bool
    passes: Optional[bool]
    c: Optional[float] = None
    r0: Optional[float] = None
    notes: str = ""

    def value_at(self, t: float) -> float:
        """Fitted value of the bin containing ``t`` (bins are closed on the left)."""
        e = self.bin_edges
        if not (e[0] <= t <= e[-1]):
            return math.nan
        k = min(int(np.searchsorted(e, t, side="right")) - 1, len(e) - 2)
        return float(self.fitted_curve[k])

    def to_dict(self):
        return {
            "form": self.form,
            "quantity": self.quantity,
            "bin_edges": self.bin_edges.tolist(),
            "fitted_curve": [None if math.isnan(x) else x for x in self.fitted_curve.tolist()],
            "verified_range": list(self.verified_range),
            "trend_decreasing": self.trend_decreasing,
            "passes": self.passes,
            "c": self.c,
            "r0": self.r0,
            "notes": self.notes,
        }


def _space_form_b(w: WarpingFunction):
    return w.b if w.kind == "space_form" else None


def _normalized(form, Mh: MeshedSubmanifold, idx):
    w = Mh.immersion.ambient.warping
    B = Mh.sff[idx]
    r = Mh.r[idx]
    rho = Mh.rho[idx]
    if form == "T1_c_eta_rho":
        return B / mean_curvature_eta(w, rho)
    if form == "alt_c_eta_r":
        return B / mean_curvature_eta(w, r)
    if form == "T2_eps_over_wprime_sq":
        return B * np.asarray(w.eval(r, 1)) ** 2 / mean_curvature_eta(w, r)
    if form == "cor3_eps_over_r":
        return B * r
    if form == "cor6_c_over_rho":
        return B * rho
    b = _space_form_b(w)
    if form == "cor1_delta_exp":
        if b is None or b >= 0:
            raise DomainError("cor1_delta_exp needs a hyperbolic space-form ambient (b < 0)")
        return B * np.exp(2.0 * math.sqrt(-b) * r)
    if form == "cor5_c_hb":
        if b is None or b > 0:
            raise DomainError("cor5_c_hb needs a space-form ambient with b <= 0")
        hb = 1.0 / rho if b == 0 else math.sqrt(-b) / np.tanh(math.sqrt(-b) * rho)
        return B / hb
    raise DomainError(f"unknown hypothesis form {form!r}; choose from {', '.join(HYPOTHESIS_FORMS)}")


def check_hypothesis(
    Mh: MeshedSubmanifold,
    form: str,
    *,
    r_range=None,
    bins: int = 20,
    c: Optional[float] = None,
    trend_tolerance: float = DEFAULT_TOLERANCES["trend"],
) -> HypothesisFit:
    """Per-radius-bin supremum of the normalized curvature quantity of ``form``.

    ``bound`` forms pass when every bin sup is at most ``c`` (``r0`` is the
    start of the trailing run of bins that satisfy it).  ``decay`` forms pass
    when the fitted curve is non-increasing (within ``trend_tolerance``
    relative) and ends below where it starts.  On a compact mesh the
    outside-a-compact hypotheses do not apply and ``passes`` is ``None``.
    """
    if form not in HYPOTHESIS_FORMS:
        raise DomainError(f"unknown hypothesis form {form!r}; choose from {', '.join(HYPOTHESIS_FORMS)}")
    kind, quantity = HYPOTHESIS_FORMS[form]
    if kind == "bound" and c is None:
        raise DomainError(f"form {form} needs a constant c")
    lo, hi = r_range if r_range is not None else (float(Mh.r.min()), min(float(Mh.r.max()), Mh.horizon))
    if not hi > lo and not Mh.is_compact:
        raise DomainError(f"empty verified range [{lo:g}, {hi:g}]")
    edges = np.linspace(lo, hi, int(bins) + 1)
    sel = (Mh.r >= lo) & (Mh.r <= hi) & (Mh.r > 0) & (Mh.rho > 0)
    idx = np.flatnonzero(sel)
    vals = _normalized(form, Mh, idx)
    which = np.clip(np.searchsorted(edges, Mh.r[idx], side="right") - 1, 0, len(edges) - 2)
    curve = np.full(len(edges) - 1, np.nan)
    if idx.size:
        sups = np.full(len(edges) - 1, -np.inf)
        np.maximum.at(sups, which, vals)
        curve = np.where(np.isfinite(sups), sups, np.nan)
    filled = curve[~np.isnan(curve)]
    trend = bool(np.all(filled[1:] <= filled[:-1] * (1.0 + trend_tolerance) + 1e-12)) if filled.size else False
    notes = []
    if np.isnan(curve).any():
        notes.append(f"{int(np.isnan(curve).sum())} empty bins skipped")
    r0 = None
    if kind == "bound":
        ok = np.where(np.isnan(curve), True, curve <= c)
        j = len(ok)
        while j > 0 and ok[j - 1]:
            j -= 1
        r0 = float(edges[j]) if j < len(ok) else None
        passes = bool(ok.all()) and filled.size > 0
    else:
        passes = trend and filled.size > 0 and (filled.max() == 0.0 or filled[-1] < filled[0])
        j = len(filled) - 1
        while j > 0 and filled[j] <= filled[j - 1] * (1.0 + trend_tolerance) + 1e-12:
            j -= 1
        nonempty_edges = edges[:-1][~np.isnan(curve)]
        r0 = float(nonempty_edges[j]) if filled.size else None
    if Mh.is_compact:
        passes = None
        notes.append("not applicable: compact (the hypotheses concern the complement of a compact set)")
    return HypothesisFit(form, quantity, edges, curve, (float(lo), float(hi)), trend, passes, c, r0, "; ".join(notes))


def delta_to_epsilon(delta: float, b: float) -> float:
    """``eps = delta / (4 sqrt(-b))``: the rate ``w'^2/eta`` behaves like ``e^{2 sqrt(-b) r} / (4 sqrt(-b))``."""
    return delta / (4.0 * math.sqrt(-b))


@dataclass
class VerificationVerdict:
    inequality: str
    margin: Optional[float]
    passed: Optional[bool]
    notes: str
    tolerance: float
    kind: str = "theorem"  # theorem | demonstration | not_applicable | advisory
    radii: list = field(default_factory=list)
    lhs: list = field(default_factory=list)
    rhs: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        return d


def _conditions(Mh: MeshedSubmanifold, need_m_gt_2: bool):
    """Name the theorem side conditions the example fails, if any."""
    I = Mh.immersion
    missing = []
    if not I.minimal:
        missing.append("immersion is not minimal")
    if need_m_gt_2 and Mh.m <= 2:
        missing.append("m > 2 required, m = 2")
    return missing


def _kind(Mh, need_m_gt_2):
    if Mh.is_compact:
        return "not_applicable", ["compact submanifold (no ends; hypotheses concern the complement of a compact set)"]
    missing = _conditions(Mh, need_m_gt_2)
    return ("demonstration" if missing else "theorem"), missing


def _verdict(name, lhs_minus_rhs, tol, kind, notes, radii=(), lhs=(), rhs=()):
    if kind == "not_applicable":
        return VerificationVerdict(name, None, None, "; ".join(notes), tol, kind, list(radii), list(lhs), list(rhs))
    margin = float(np.min(lhs_minus_rhs)) if len(lhs_minus_rhs) else None
    passed = None if margin is None else bool(margin >= -tol)
    if margin is None:
        notes = list(notes) + ["no sampled radius qualifies"]
    return VerificationVerdict(name, margin, passed, "; ".join(notes), tol, kind, list(radii), list(lhs), list(rhs))


def isoperimetric_verdicts(Mh: MeshedSubmanifold, G: GrowthReport, tolerances=None):
    """Isoperimetric comparison, monotonicity of ``f`` and ``f >= 1`` when the pole is hit."""
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    kind, notes = _kind(Mh, need_m_gt_2=False)
    if kind == "not_applicable" and not Mh.immersion.minimal:
        notes = notes + ["immersion is not minimal"]
    ok = G.valid
    radii = G.radii[ok]
    lhs, rhs = G.isop_lhs[ok], G.isop_rhs[ok]
    out = [
        _verdict("isoperimetric", (lhs - rhs) / rhs, tol["isoperimetric"], kind, notes + ["margin relative to the model quotient"], radii.tolist(), lhs.tolist(), rhs.tolist()),
    ]
    fv = G.f[ok]
    drops = (fv[:-1] - fv[1:]) / fv[:-1] if len(fv) > 1 else np.zeros(0)
    out.append(
        _verdict("monotone_f", -drops, tol["monotone_f"], kind, notes + ["margin is minus the worst relative decrease"], radii.tolist(), fv.tolist(), [])
    )
    if Mh.contains_pole:
        out.append(_verdict("volume_comparison_f_ge_1", fv - 1.0, tol["volume_comparison"], kind, notes, radii.tolist(), fv.tolist(), [1.0] * len(fv)))
    return out


def ends_inequalities(
    G: GrowthReport,
    E: EndsScan,
    eps_fit: Optional[HypothesisFit],
    m: int,
    Mh: Optional[MeshedSubmanifold] = None,
    tolerances=None,
    t_min: Optional[float] = None,
    b: Optional[float] = None,
):
    """Verdicts for ``sup f <= E``, ``g (1 - 4 eps)^{(m-1)/2} <= E`` and ``liminf g <= E``.

    ``eps_fit`` supplies the fitted epsilon per radius (for ``cor1_delta_exp``
    the fitted delta is converted with the ambient curvature ``b``).  Radii with
    epsilon >= 1/4 make the area-growth bound vacuous and are listed in the
    notes; ``t_min`` restricts the area-growth check to ``t >= t_min``.
    """
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    if Mh is not None:
        kind, notes = _kind(Mh, need_m_gt_2=True)
    else:
        kind, notes = "theorem", []
    ends = E.stabilized_count
    if ends == 0 and kind != "not_applicable":
        kind, notes = "not_applicable", notes + ["hypotheses violated (compact): no ends"]
    if ends is None:
        note = "end count did not stabilize"
        return [VerificationVerdict(n, None, None, note, tol[k], "not_applicable") for n, k in (("ends_sup_f", "ends_sup_f"), ("area_growth", "area_growth"), ("area_liminf", "area_liminf"))]
    ok = G.valid
    radii = G.radii[ok]
    f, g = G.f[ok], G.g[ok]
    out = []
    sup_f = float(f.max()) if f.size else 0.0
    out.append(_verdict("ends_sup_f", [ends - sup_f], tol["ends_sup_f"], kind, notes + [f"ends = {ends}, sup f = {sup_f!r}"], [], [sup_f], [ends]))

    eps = np.full(len(radii), np.nan)
    if eps_fit is not None:
        for i, t in enumerate(radii.tolist()):
            e = eps_fit.value_at(t)
            if eps_fit.form == "cor1_delta_exp" and not math.isnan(e):
                e = delta_to_epsilon(e, b)
            eps[i] = e
    usable = ~np.isnan(eps) & (eps < 0.25)
    if t_min is not None:
        usable &= radii >= t_min
    vacuous = radii[~np.isnan(eps) & (eps >= 0.25)]
    weighted = g * np.power(np.clip(1.0 - 4.0 * eps, 0.0, None), (m - 1) / 2.0)
    n2 = list(notes)
    if vacuous.size:
        n2.append(f"vacuous (eps >= 1/4) at {vacuous.size} radii up to t = {float(vacuous.max())!r}")
    if eps_fit is None:
        n2.append("no epsilon fit supplied")
    out.append(
        _verdict(
            "area_growth",
            ends - weighted[usable],
            tol["area_growth"],
            kind,
            n2,
            radii[usable].tolist(),
            weighted[usable].tolist(),
            [ends] * int(usable.sum()),
        )
    )
    k0 = int(np.searchsorted(radii, radii[0] + (1 - 0.3) * (radii[-1] - radii[0]))) if radii.size else 0
    tail = g[k0:]
    liminf = float(tail.min()) if tail.size else math.nan
    out.append(
        _verdict(
            "area_liminf",
            [ends - liminf] if tail.size else [],
            tol["area_liminf"],
            kind,
            notes + [f"min of g over the trailing 30% of radii = {liminf!r}"],
            radii[k0:].tolist(),
            tail.tolist(),
            [ends] * int(tail.size),
        )
    )
    return out


@dataclass
class BishopMyers:
    t: float
    eps_hat: float
    delta: Optional[float]
    diameter_bound: float
    area_bound: float
    vacuous: bool


def bishop_myers_bound(t: float, eps_hat: float, m: int, w: WarpingFunction) -> BishopMyers:
    """Boundary estimate: ``delta = (1 - 4 eps)/w(t)^2``, diameter ``pi/sqrt(delta)``,
    measure at most ``Vol(S^{m-1}(1)) / delta^{(m-1)/2}``.

    With ``eps >= 1/4`` there is no positive Ricci lower bound; the result is
    marked vacuous and both bounds are infinite.
    """
    if eps_hat >= 0.25 or math.isnan(eps_hat):
        return BishopMyers(float(t), float(eps_hat), None, math.inf, math.inf, True)
    wt = float(w.eval(t, 0))
    delta = (1.0 - 4.0 * eps_hat) / (wt * wt)
    return BishopMyers(
        float(t),
        float(eps_hat),
        delta,
        math.pi / math.sqrt(delta),
        unit_sphere_volume(m - 1) / delta ** ((m - 1) / 2.0),
        False,
    )


def bishop_myers_verdict(Mh: MeshedSubmanifold, G: GrowthReport, eps_fit: HypothesisFit, radii, tolerances=None, b=None):
    """Compare each boundary component's measure at ``t`` with the Bishop bound."""
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}["bishop_myers"]
    kind, notes = _kind(Mh, need_m_gt_2=True)
    w = Mh.immersion.ambient.warping
    margins, lhs, rhs, used, vac, empty = [], [], [], [], [], []
    for t in radii:
        i = int(np.argmin(np.abs(G.radii - t)))
        if abs(G.radii[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"radius {t} is not among the sampled radii")
        e = eps_fit.value_at(t)
        if math.isnan(e):
            empty.append(float(t))
            continue
        if eps_fit.form == "cor1_delta_exp":
            e = delta_to_epsilon(e, b)
        bm = bishop_myers_bound(t, e, Mh.m, w)
        comp = G.component_areas[i]
        longest = float(comp.max()) if len(comp) else 0.0
        if bm.vacuous:
            vac.append(float(t))
            continue
        used.append(float(t))
        lhs.append(longest)
        rhs.append(bm.area_bound)
        margins.append(bm.area_bound - longest)
    n = list(notes) + ["largest boundary component vs area bound"]
    if vac:
        n.append(f"vacuous (eps >= 1/4) at t = {vac}")
    if empty:
        n.append(f"no curvature samples in the epsilon bin at t = {empty}")
    return _verdict("bishop_myers_boundary", margins, tol, kind, n, used, lhs, rhs)


def gap_diagnostic(G: GrowthReport, E: EndsScan, minimal: bool, sup_sff: float, tolerances=None):
    """Flag the totally geodesic equality case, or an anomaly when ``f = 1`` but ``|B|`` is not small."""
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    ok = G.valid
    fv = G.f[ok]
    if not (minimal and E.stabilized_count == 1 and fv.size and np.all(np.abs(fv - 1.0) <= tol["totally_geodesic_f"])):
        return None
    margin = float(tol["totally_geodesic_f"] - np.max(np.abs(fv - 1.0)))
    if sup_sff <= tol["totally_geodesic_sff"]:
        return VerificationVerdict(
            "gap_diagnostic",
            margin,
            True,
            f"consistent with totally geodesic; sup |B| = {sup_sff!r}",
            tol["totally_geodesic_f"],
            "advisory",
        )
    return VerificationVerdict(
        "gap_diagnostic",
        margin,
        False,
        f"anomaly: f = 1 within tolerance but sup |B| = {sup_sff!r}",
        tol["totally_geodesic_f"],
        "advisory",
    )
