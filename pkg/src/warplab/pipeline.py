"""Run a scenario: model -> immersion -> mesh -> topology -> verifier."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ambient import AmbientChart
from .config import ScenarioConfig
from .errors import ConfigError, DomainError, ImmersionDegeneracyError, MeshError, NumericError
from .immersion import BUILTIN_NAMES, MeshedSubmanifold, builtin_example, custom_immersion, mesh
from .mesh_topology import EndsScan, ball_measures, convexity_scan, count_ends, critical_point_scan, ends_radius_limit
from .model_space import (
    ModelSpaceSpec,
    balance_report,
    half_square,
    integrated_warping,
    parse_warping,
)
from .verifier import (
    HYPOTHESIS_FORMS,
    GrowthReport,
    VerificationVerdict,
    bishop_myers_verdict,
    check_hypothesis,
    ends_inequalities,
    gap_diagnostic,
    growth_curves,
    isoperimetric_verdicts,
)

__all__ = ["StageError", "ScenarioResult", "build_immersion", "run_scenario", "CURVE_COLUMNS"]

CURVE_COLUMNS = ("t", "vol_Dt", "area_bdry", "ends", "f", "g", "isop_lhs", "isop_rhs", "eps_hat")


class StageError(Exception):
    """A pipeline stage failed; ``stage`` names it and ``cause`` is the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    mesh: MeshedSubmanifold
    growth: GrowthReport
    ends: EndsScan
    fits: list
    verdicts: list
    balance: object
    timings: dict = field(default_factory=dict)
    eps_hat: np.ndarray = None

    @property
    def failed(self) -> bool:
        return any(v.passed is False and v.kind in ("theorem", "demonstration") for v in self.verdicts)


def _ambient(cfg: ScenarioConfig):
    try:
        w = parse_warping(cfg.warping)
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"[ambient] warping: {exc}") from None
    mode = cfg.christoffel
    return AmbientChart(ModelSpaceSpec(cfg.ambient_dim, w), mode), ModelSpaceSpec(cfg.model_dim, w)


def build_immersion(cfg: ScenarioConfig, ambient: AmbientChart):
    """Construct the configured immersion and check it matches ``[ambient]`` and ``[model]``."""
    if cfg.builtin is None:
        return custom_immersion(cfg.chart, ambient, cfg.domain, wrap=cfg.wrap or (), fd_step=cfg.fd_step, name="custom")
    if cfg.builtin not in BUILTIN_NAMES:
        raise ConfigError(f"[immersion] builtin: unknown example {cfg.builtin!r}; choose from {', '.join(BUILTIN_NAMES)}")
    params = dict(cfg.builtin_params)
    w = ambient.warping
    if cfg.builtin in ("euclidean_plane", "hyperbolic_hyperplane"):
        params.setdefault("m", cfg.model_dim)
        params.setdefault("n", cfg.ambient_dim)
        if cfg.builtin == "hyperbolic_hyperplane" and w.kind == "space_form":
            params.setdefault("b", w.b)
    elif cfg.builtin == "higher_catenoid":
        params.setdefault("m", cfg.model_dim)
    try:
        I = builtin_example(cfg.builtin, **params)
    except TypeError as exc:
        raise ConfigError(f"[immersion] bad parameters for {cfg.builtin}: {exc}") from None
    except DomainError as exc:
        raise ConfigError(f"[immersion] {exc}") from None
    if I.ambient.dim != cfg.ambient_dim:
        raise ConfigError(f"[ambient] dim: {cfg.builtin} lives in dimension {I.ambient.dim}, config says {cfg.ambient_dim}")
    if I.param_dim != cfg.model_dim:
        raise ConfigError(f"[model] dim: {cfg.builtin} has dimension {I.param_dim}, config says {cfg.model_dim}")
    if I.ambient.warping.spec != w.spec:
        raise ConfigError(f"[ambient] warping: {cfg.builtin} needs {I.ambient.warping.spec}, config says {w.spec}")
    return I


def _stage(name, timings, fn):
    t0 = time.perf_counter()
    try:
        out = fn()
    except ConfigError:
        raise
    except (NumericError, ImmersionDegeneracyError, MeshError, DomainError, ArithmeticError) as exc:
        raise StageError(name, exc) from exc
    timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0
    return out


def run_scenario(cfg: ScenarioConfig, threads: int = 1) -> ScenarioResult:
    timings = {}
    ambient, model = _stage("model", timings, lambda: _ambient(cfg))
    radii = cfg.radii
    if radii[-1] >= model.domain_end:
        raise ConfigError(f"[radii] t_hi: {cfg.t_hi} is outside the model domain (r < {model.domain_end:g})")
    balance = _stage("model", timings, lambda: balance_report(model, radii))
    I = _stage("immersion", timings, lambda: build_immersion(cfg, ambient))
    Mh = _stage("mesh", timings, lambda: mesh(I, cfg.resolution, threads=threads))
    limit = ends_radius_limit(Mh)
    if cfg.t_hi > limit:
        raise ConfigError(
            f"[radii] t_hi: {cfg.t_hi} exceeds the usable radius {limit!r}: the mesh horizon "
            f"(least r on the parameter-box boundary) is {Mh.horizon!r}, less one mesh cell"
        )

    def topology():
        meas = ball_measures(Mh, radii, threads)
        return meas, count_ends(Mh, radii)

    meas, ends = _stage("topology", timings, topology)

    def verify():
        tol = cfg.tolerances
        growth = growth_curves(Mh, model, radii, measures=meas, tolerance=tol["monotone_f"])
        r_range = cfg.hyp_range or (cfg.t_lo, cfg.t_hi)
        fits = [
            check_hypothesis(Mh, f, r_range=r_range, bins=cfg.bins, c=cfg.c if HYPOTHESIS_FORMS[f][0] == "bound" else None, trend_tolerance=tol["trend"])
            for f in cfg.forms
        ]
        eps_fit = next((f for f in fits if f.form == cfg.epsilon_form), None)
        b = ambient.warping.b if ambient.warping.kind == "space_form" else None
        verdicts = isoperimetric_verdicts(Mh, growth, tol)
        verdicts += ends_inequalities(growth, ends, eps_fit, Mh.m, Mh=Mh, tolerances=tol, t_min=cfg.area_growth_t_min, b=b)
        if cfg.bishop_radii:
            if eps_fit is None:
                raise ConfigError("[verifier] bishop_radii: needs an epsilon form in [hypotheses]")
            verdicts.append(bishop_myers_verdict(Mh, growth, eps_fit, cfg.bishop_radii, tol, b=b))
        gap = gap_diagnostic(growth, ends, I.minimal, float(Mh.sff.max()), tol)
        if gap is not None:
            verdicts.append(gap)
        if cfg.critical_scan:
            res = critical_point_scan(Mh, *cfg.critical_scan)
            verdicts.append(
                VerificationVerdict(
                    "critical_point_scan",
                    res.value,
                    res.value > 0,
                    f"min |grad^P r| over {res.samples} vertices with r in {list(cfg.critical_scan)} at r = {res.r!r}",
                    0.0,
                    "advisory",
                )
            )
        if cfg.convexity_scan:
            F = half_square() if cfg.convexity_function == "half_square" else integrated_warping(ambient.warping)
            res = convexity_scan(Mh, cfg.convexity_scan, F)
            verdicts.append(
                VerificationVerdict(
                    "convexity_scan",
                    res.value,
                    res.value > 0,
                    f"min eigenvalue of Hess^P({F.label}) over {res.samples} vertices with r in {list(cfg.convexity_scan)} at r = {res.r!r}",
                    0.0,
                    "advisory",
                )
            )
        eps_hat = np.array([eps_fit.value_at(t) for t in radii]) if eps_fit is not None else np.full(len(radii), math.nan)
        return growth, fits, verdicts, eps_hat

    growth, fits, verdicts, eps_hat = _stage("verifier", timings, verify)
    return ScenarioResult(cfg, Mh, growth, ends, fits, verdicts, balance, timings, eps_hat)
