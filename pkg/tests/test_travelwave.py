import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import cumulative_trapezoid

from cellsil._csv import read_columns
from cellsil.errors import NonPositiveRhs, SpanExceeded, StalledArc
from cellsil.geometry import signed_area
from cellsil.travelwave import (
    ShootingRhs,
    assemble_profile,
    blowup_abscissa_by_quadrature,
    closure_functional_I2,
    find_traveling_waves,
    integral_criterion_I,
    integral_criterion_I_free,
    lambda_of_V,
    root_on_lambda_of_V,
    shoot_arc,
    shoot_closure,
)

from .conftest import ConstantPhi


def test_rhs_at_zero_slope(toy100):
    for variant in ("back", "front"):
        V = 1.3 if variant == "back" else -1.3
        rhs = ShootingRhs(1.3, 4.0, toy100, variant)
        assert rhs(0.0) == V - toy100(V) + 4.0
    assert ShootingRhs(1.3, 4.0, toy100, "side")(0.0) == -toy100(0.0) + 4.0


def test_back_and_front_rhs_are_even(toy100):
    z = np.linspace(0, 30, 301)
    for variant in ("back", "front"):
        rhs = ShootingRhs(2.0, 9.0, toy100, variant)
        np.testing.assert_array_equal(rhs(z), rhs(-z))


def test_blowup_of_flat_nonlinearity():
    rhs = ShootingRhs(0.0, 2.0, ConstantPhi(), "back")
    arc = shoot_arc(rhs, 0.0, np.inf)
    assert arc.reason == "blowup"
    assert abs(arc.x_end - 0.5) <= 1e-6


def test_constant_rhs_reaches_slope_one_at_inverse_rate():
    A = 3.0
    arc = shoot_arc(lambda w: np.full_like(np.asarray(w, float), A), 0.0, 1.0)
    assert arc.x_end == pytest.approx(1 / A, rel=1e-12)
    assert arc.w_end == 1.0 and arc.reason == "slope"


def test_curvature_rhs_blowup_matches_closed_form():
    A = 2.5
    arc = shoot_arc(lambda w: A * (1 + np.asarray(w, float) ** 2) ** 1.5, 0.0, np.inf, n_samples=201)
    assert abs(arc.x_end - 1 / A) <= 1e-6
    inner = arc.x[:-1]
    np.testing.assert_allclose(arc.w[:-1], A * inner / np.sqrt(1 - (A * inner) ** 2), rtol=1e-8, atol=1e-10)


def test_arc_samples_are_consistent(toy100):
    arc = shoot_arc(ShootingRhs(1.0, 9.0, toy100, "back"), 0.0, 1.0, n_samples=4001)
    assert np.all(np.diff(arc.w) > 0)
    assert np.max(np.abs(cumulative_trapezoid(arc.w, arc.x, initial=0.0) - arc.y)) <= 1e-8


def test_stalled_and_span_errors(toy100):
    # lam well below -Phi: the bracket is negative at slope 0
    with pytest.raises(StalledArc):
        shoot_arc(ShootingRhs(1.0, -200.0, toy100, "back"), 0.0, 1.0)
    with pytest.raises(SpanExceeded):
        shoot_arc(lambda w: np.full_like(np.asarray(w, float), 1e-3), 0.0, 1.0, max_span=1.0)


@pytest.mark.parametrize("c", [1.0, 2.0, 4.0])
def test_quadrature_blowup_flat(c):
    assert blowup_abscissa_by_quadrature(ShootingRhs(0.0, c, ConstantPhi(), "back")) == pytest.approx(1 / c, rel=1e-10)


def test_quadrature_rejects_nonpositive_rhs(toy100):
    with pytest.raises(NonPositiveRhs):
        blowup_abscissa_by_quadrature(ShootingRhs(1.0, -200.0, toy100, "back"))


def test_blowup_methods_agree_on_toy(toy100):
    rhs = ShootingRhs(1.0, lambda_of_V(1.0, toy100), toy100, "back")
    q = blowup_abscissa_by_quadrature(rhs)
    s = shoot_arc(rhs, 0.0, np.inf).x_end
    assert abs(s - q) / q <= 1e-4


def test_blowup_methods_agree_on_random_samples(toy100, asym_phi100):
    rng = np.random.default_rng(11)
    for phi in (toy100, asym_phi100):
        for V in rng.uniform(-3, 3, 10):
            for variant in ("back", "front"):
                rhs = ShootingRhs(V, lambda_of_V(V, phi), phi, variant)
                q = blowup_abscissa_by_quadrature(rhs)
                assert abs(shoot_arc(rhs, 0.0, np.inf).x_end - q) / q <= 1e-4


def test_symmetric_phi_back_arc_blows_up_first(ac_phi100):
    for V in (0.5, 1.0, 2.0):
        lam = lambda_of_V(V, ac_phi100)
        xb = blowup_abscissa_by_quadrature(ShootingRhs(V, lam, ac_phi100, "back"))
        xf = blowup_abscissa_by_quadrature(ShootingRhs(V, lam, ac_phi100, "front"))
        assert xb < xf


def test_zero_velocity_closes_as_circle(toy100, ac_phi100):
    rng = np.random.default_rng(2)
    for phi, lo in ((toy100, 101.0), (ac_phi100, 2.0)):
        for lam in rng.uniform(lo, lo + 50, 5):
            assert abs(closure_functional_I2(0.0, lam, phi)) <= 1e-6
    c = shoot_closure(0.0, 3.0, ConstantPhi())
    prof = assemble_profile(c, 256)
    r = 1 / 3.0
    pts = prof.open_points
    radii = np.hypot(pts[:, 0], pts[:, 1] - r)
    assert np.max(np.abs(radii - r)) <= 1e-6


def test_integral_criterion_matches_blowup_difference(toy100):
    for V in (0.5, 1.0, 3.0, 5.0):
        a = integral_criterion_I(V, toy100)
        b = integral_criterion_I_free(V, lambda_of_V(V, toy100), toy100)
        assert a == pytest.approx(b, rel=1e-8, abs=1e-14)


def test_integral_criterion_symmetric_is_positive(ac_phi100):
    for V in (0.5, 1.0, 2.0):
        assert integral_criterion_I(V, ac_phi100) > 0
    # constant Phi: the numerator is 2 z^2 (Phi = 0 would make lambda(V) = V singular)
    assert integral_criterion_I(1.0, ConstantPhi(-0.5)) > 0


def test_integral_criterion_toy_changes_sign(toy100):
    assert integral_criterion_I(0.1, toy100) < 0
    assert integral_criterion_I(8.0, toy100) > 0


def test_integral_root_matches_shooting_root_on_same_lambda(toy100):
    from scipy.optimize import brentq

    v_int = brentq(lambda V: integral_criterion_I(V, toy100), 2.0, 5.0, xtol=1e-10)
    v_shoot = root_on_lambda_of_V(toy100, 2.0, 5.0)
    assert abs(v_int - v_shoot) / v_int <= 0.05


def test_shooting_root_matches_free_lambda_integral(toy100):
    # independent check of the shooting construction at a fixed lam
    from scipy.optimize import brentq

    lam = 9.75
    roots, _ = find_traveling_waves(toy100, (2.2, 2.4), (9.5, 10.0), grid=(8, 8))
    V_shoot = min(roots, key=lambda r: abs(r[1] - lam))
    v_int = brentq(lambda V: integral_criterion_I_free(V, V_shoot[1], toy100), 2.0, 2.6, xtol=1e-12)
    assert abs(v_int - V_shoot[0]) <= 1e-6


@pytest.fixture(scope="module")
def toy_roots(toy100):
    return find_traveling_waves(toy100, (1.5, 3.0), (8.0, 12.0), grid=(8, 8))


def test_toy_profile_invariants(toy_roots, toy100):
    roots, land = toy_roots
    assert roots
    for V, lam, prof in roots:
        assert abs(closure_functional_I2(V, lam, toy100)) <= 1e-8
        np.testing.assert_array_equal(prof.points[0], prof.points[-1])
        assert prof.area() > 0 and signed_area(prof.open_points) > 0
        assert max(prof.glue_angles) <= 1e-3
        assert prof.closure_residual <= 1e-4 * prof.length()


def test_assembled_profile_solves_interface_law(toy100):
    roots, _ = find_traveling_waves(toy100, (2.2, 2.4), (9.5, 10.0), grid=(8, 8), n_points=4096)
    V, lam, prof = roots[0]
    assert prof.interface_residual(toy100) <= 1e-3


@pytest.mark.xfail(strict=True, reason="I2 zero set near lam=9.75 sits at V~2.33, about 8% above the reported 2.15")
def test_toy_root_in_reported_box(toy_roots):
    roots, _ = toy_roots
    assert any(2.0 <= V <= 2.3 and 9.3 <= lam <= 10.2 for V, lam, _ in roots)


def test_toy_root_curve_is_monotone_near_reported_point(toy100):
    roots, _ = find_traveling_waves(toy100, (1.9, 2.5), (0.0, 12.0), grid=(8, 12), both_axes=False)
    V = np.array([r[0] for r in roots])
    lam = np.array([r[1] for r in roots])
    order = np.argsort(lam)
    assert np.all(np.diff(V[order]) > 0)
    # the reported velocity lies on the zero curve, at a smaller lam
    assert V.min() < 2.15 < V.max()


def test_symmetric_phi_has_no_nontrivial_roots(ac_phi100):
    roots, land = find_traveling_waves(ac_phi100, (0.1, 3.0), (0.0, 10.0), grid=(8, 8))
    assert roots == []


def test_landscape_export_marks_failures(tmp_path, toy100):
    from cellsil.travelwave import I2_landscape

    land = I2_landscape(toy100, (1.0, 2.0), (-150.0, 10.0), (8, 8))
    assert np.isnan(land.values).any() and np.isfinite(land.values).any()
    land.to_csv(tmp_path / "l.csv")
    cols = read_columns(tmp_path / "l.csv", ["V", "lambda", "I2"])
    assert len(cols["V"]) == 64 and np.isnan(cols["I2"]).sum() == np.isnan(land.values).sum()


def test_bad_search_arguments(toy100):
    with pytest.raises(ValueError):
        find_traveling_waves(toy100, (0.0, 0.0), (1.0, 2.0), grid=(8, 8))
    with pytest.raises(ValueError):
        find_traveling_waves(toy100, (0.0, 1.0), (1.0, 2.0), grid=(4, 8))


def test_profile_files(tmp_path, toy_roots):
    V, lam, prof = toy_roots[0][0]
    csv_path, json_path = prof.to_files(tmp_path / "p.csv")
    cols = read_columns(csv_path, ["x", "y"])
    np.testing.assert_array_equal(cols["x"], prof.points[:, 0])
    import json

    meta = json.loads(json_path.read_text())
    assert meta["V"] == V and meta["lambda"] == lam


@settings(max_examples=20, deadline=None)
@given(V=st.floats(0.0, 3.0), lam=st.floats(0.5, 20.0))
def test_flat_phi_front_and_back_coincide_only_at_rest(V, lam):
    flat = ConstantPhi()
    back = blowup_abscissa_by_quadrature(ShootingRhs(V, lam + V, flat, "back"))
    front = blowup_abscissa_by_quadrature(ShootingRhs(V, lam + V, flat, "front"))
    assert front >= back - 1e-12
    if V == 0.0:
        assert front == pytest.approx(back, rel=1e-12)
