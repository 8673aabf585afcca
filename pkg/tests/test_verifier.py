import math

import numpy as np
import pytest

from warplab.errors import DomainError
from warplab.mesh_topology import EndsScan, count_ends
from warplab.model_space import ModelSpaceSpec, space_form_warping
from warplab.verifier import (
    DEFAULT_TOLERANCES,
    HYPOTHESIS_FORMS,
    GrowthReport,
    bishop_myers_bound,
    bishop_myers_verdict,
    check_hypothesis,
    delta_to_epsilon,
    ends_inequalities,
    gap_diagnostic,
    growth_curves,
    isoperimetric_verdicts,
)

W0 = space_form_warping(0.0)
E2 = ModelSpaceSpec(2, W0)


@pytest.fixture(scope="module")
def plane_growth(plane_mesh):
    return growth_curves(plane_mesh, E2, np.linspace(2, 9, 8))


@pytest.fixture(scope="module")
def catenoid_growth(catenoid_mesh):
    return growth_curves(catenoid_mesh, E2, np.linspace(2, 20, 19))


def test_plane_growth_is_flat(plane_growth):
    np.testing.assert_allclose(plane_growth.f, 1.0, atol=5e-3)
    np.testing.assert_allclose(plane_growth.g, 1.0, atol=5e-3)
    np.testing.assert_allclose(plane_growth.isop_lhs / plane_growth.isop_rhs, 1.0, atol=1e-2)
    assert plane_growth.monotone_f


def test_catenoid_growth(catenoid_growth):
    f = catenoid_growth.f
    assert np.all(np.diff(f) >= -1e-3 * f[:-1])
    assert 1.85 <= f[-1] <= 2.0
    assert catenoid_growth.monotone_f


def test_model_dimension_mismatch(plane_mesh):
    with pytest.raises(DomainError):
        growth_curves(plane_mesh, ModelSpaceSpec(3, W0), [2.0, 3.0])


def test_empty_radii_are_skipped(catenoid_mesh):
    G = growth_curves(catenoid_mesh, E2, [0.5, 2.0, 3.0])
    assert G.skipped == [0.5]
    assert list(G.valid) == [False, True, True]


def test_hypothesis_fits_on_plane(plane_mesh):
    for form, (kind, _q) in HYPOTHESIS_FORMS.items():
        if form == "cor1_delta_exp":
            with pytest.raises(DomainError):
                check_hypothesis(plane_mesh, form, r_range=(2, 9))
            continue
        fit = check_hypothesis(plane_mesh, form, r_range=(2, 9), c=0.5 if kind == "bound" else None)
        assert np.nanmax(fit.fitted_curve) <= 1e-10
        assert fit.passes


def test_catenoid_cor3_fit(catenoid_mesh):
    fit = check_hypothesis(catenoid_mesh, "cor3_eps_over_r", r_range=(2, 20), bins=36)
    assert fit.trend_decreasing and fit.passes
    assert 0.12 <= fit.value_at(10.0) <= 0.16
    # on the ends |B| ~ sqrt(2)/r^2, so the bin sup of |B| r is about sqrt(2)/t_left
    filled = ~np.isnan(fit.fitted_curve)
    np.testing.assert_allclose(fit.fitted_curve[filled][-3:], math.sqrt(2) / fit.bin_edges[:-1][filled][-3:], rtol=0.15)


def test_bound_form_needs_c(catenoid_mesh):
    with pytest.raises(DomainError):
        check_hypothesis(catenoid_mesh, "T1_c_eta_rho", r_range=(2, 20))
    with pytest.raises(DomainError):
        check_hypothesis(catenoid_mesh, "nope", r_range=(2, 20))


def test_bound_form_fails_when_c_too_small(catenoid_mesh):
    fit = check_hypothesis(catenoid_mesh, "cor6_c_over_rho", r_range=(2, 20), c=1e-3)
    assert fit.passes is False
    assert fit.r0 is None


def test_sphere_fits_not_applicable(sphere_mesh):
    fit = check_hypothesis(sphere_mesh, "T1_c_eta_rho", c=0.9)
    assert fit.passes is None
    assert "compact" in fit.notes


def test_value_at_bins():
    from warplab.verifier import HypothesisFit

    fit = HypothesisFit("cor3_eps_over_r", "q", np.array([0.0, 1.0, 2.0]), np.array([5.0, 3.0]), (0, 2), True, True)
    assert fit.value_at(0.0) == 5.0
    assert fit.value_at(1.0) == 3.0
    assert fit.value_at(2.0) == 3.0
    assert math.isnan(fit.value_at(2.5))


def test_bishop_myers_arithmetic():
    bm = bishop_myers_bound(10.0, 0.0, 2, W0)
    assert bm.delta == pytest.approx(0.01)
    assert bm.diameter_bound == pytest.approx(10 * math.pi)
    assert bm.area_bound == pytest.approx(20 * math.pi)
    assert not bm.vacuous
    vac = bishop_myers_bound(10.0, 0.3, 2, W0)
    assert vac.vacuous and vac.delta is None and math.isinf(vac.area_bound)
    bm3 = bishop_myers_bound(2.0, 0.1, 3, W0)
    assert bm3.area_bound == pytest.approx(4 * math.pi / (0.6 / 4.0))


def test_delta_to_epsilon():
    assert delta_to_epsilon(1.0, -1.0) == 0.25
    assert delta_to_epsilon(2.0, -4.0) == 0.25


def test_isoperimetric_verdicts(plane_mesh, plane_growth, catenoid_mesh, catenoid_growth):
    v = {x.inequality: x for x in isoperimetric_verdicts(plane_mesh, plane_growth)}
    assert v["isoperimetric"].passed and v["monotone_f"].passed
    assert v["volume_comparison_f_ge_1"].passed
    assert v["isoperimetric"].kind == "theorem"
    c = {x.inequality: x for x in isoperimetric_verdicts(catenoid_mesh, catenoid_growth)}
    assert "volume_comparison_f_ge_1" not in c
    assert c["isoperimetric"].margin > 0


def test_ends_inequalities_catenoid(catenoid_mesh, catenoid_growth):
    E = count_ends(catenoid_mesh, catenoid_growth.radii)
    fit = check_hypothesis(catenoid_mesh, "cor3_eps_over_r", r_range=(2, 20), bins=36)
    v = {x.inequality: x for x in ends_inequalities(catenoid_growth, E, fit, 2, Mh=catenoid_mesh, t_min=5.0)}
    assert all(x.kind == "demonstration" for x in v.values())
    assert "m > 2 required" in v["ends_sup_f"].notes
    assert v["ends_sup_f"].passed
    assert v["area_growth"].passed and min(v["area_growth"].radii) >= 5.0
    assert v["area_liminf"].passed


def test_ends_inequalities_unstable_count(catenoid_growth):
    E = EndsScan(catenoid_growth.radii, np.arange(len(catenoid_growth.radii)), None, None, 27.0)
    out = ends_inequalities(catenoid_growth, E, None, 2)
    assert all(v.kind == "not_applicable" and v.passed is None for v in out)


def test_ends_inequality_failure_detected():
    radii = np.array([1.0, 2.0, 3.0])
    G = GrowthReport(radii, np.ones(3), np.ones(3), np.array([1.0, 1.5, 2.5]), np.array([1.0, 1.0, 1.0]), np.ones(3), np.ones(3), True, 0.0, [])
    E = EndsScan(radii, np.array([2, 2, 2]), 2, (1.0, 3.0), 10.0)
    v = {x.inequality: x for x in ends_inequalities(G, E, None, 3)}
    assert v["ends_sup_f"].passed is False
    assert v["ends_sup_f"].margin == pytest.approx(-0.5)


def test_bishop_myers_verdict(catenoid_mesh, catenoid_growth):
    fit = check_hypothesis(catenoid_mesh, "cor3_eps_over_r", r_range=(2, 20), bins=18)
    v = bishop_myers_verdict(catenoid_mesh, catenoid_growth, fit, [5.0, 10.0, 20.0])
    assert v.passed
    assert v.radii == [10.0, 20.0]
    assert "vacuous (eps >= 1/4) at t = [5.0]" in v.notes
    with pytest.raises(DomainError):
        bishop_myers_verdict(catenoid_mesh, catenoid_growth, fit, [7.77])


def test_bishop_myers_verdict_empty_bin(catenoid_mesh, catenoid_growth):
    # 0.5-wide bins are finer than the r spacing of this coarse mesh far out
    fit = check_hypothesis(catenoid_mesh, "cor3_eps_over_r", r_range=(2, 20), bins=36)
    assert np.isnan(fit.value_at(20.0))
    v = bishop_myers_verdict(catenoid_mesh, catenoid_growth, fit, [10.0, 20.0])
    assert v.radii == [10.0]
    assert "no curvature samples" in v.notes


def test_gap_diagnostic(plane_mesh, plane_growth, catenoid_mesh, catenoid_growth):
    E = count_ends(plane_mesh, plane_growth.radii)
    gap = gap_diagnostic(plane_growth, E, True, float(plane_mesh.sff.max()))
    assert gap.kind == "advisory" and gap.passed
    assert gap.notes.startswith("consistent with totally geodesic")
    anomaly = gap_diagnostic(plane_growth, E, True, 0.5)
    assert anomaly.passed is False and anomaly.notes.startswith("anomaly")
    Ec = count_ends(catenoid_mesh, catenoid_growth.radii)
    assert gap_diagnostic(catenoid_growth, Ec, True, 1.4) is None


def test_default_tolerances_cover_verdicts():
    assert set(DEFAULT_TOLERANCES) >= {"monotone_f", "isoperimetric", "ends_sup_f", "area_growth", "area_liminf"}
