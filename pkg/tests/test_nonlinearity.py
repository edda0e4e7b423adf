import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from cellsil.errors import BracketFailure, SingularSystem
from cellsil.nonlinearity import (
    BvpPhi,
    TablePhi,
    ToyPhi,
    estimate_beta_crit,
    evaluate_phi,
    evaluate_phi_prime,
    make_phi,
    phi_direct,
    solve_psi,
)

# 1 / max_{|V|<=10} |Phi_1'(V)| for the Allen-Cahn profile (L=20, M=2000);
# Phi is linear in beta, so this is where max |Phi_beta'| crosses 1
AC_BETA_CRIT = 531.956


def dense_psi(profile, V, beta):
    """Same centred-difference system, assembled densely and solved by LAPACK."""
    n, dz = profile.M - 1, profile.dz
    A = (np.diag(np.full(n, -2.0 / dz**2 - 1.0))
         + np.diag(np.full(n - 1, 1.0 / dz**2 + V / (2 * dz)), 1)
         + np.diag(np.full(n - 1, 1.0 / dz**2 - V / (2 * dz)), -1))
    psi = np.zeros(profile.M + 1)
    psi[1:-1] = np.linalg.solve(A, beta * profile.dtheta[1:-1])
    return psi


def test_psi_vanishes_without_forcing(ac_profile):
    for V in (-3.0, 0.0, 2.2):
        assert not np.any(solve_psi(ac_profile, V, 0.0))


@pytest.mark.parametrize("V", [0.0, 1.3])
def test_psi_matches_dense_solve(coarse_ac_profile, V):
    p = coarse_ac_profile
    psi = solve_psi(p, V, 1.0)
    ref = dense_psi(p, V, 1.0)
    for z in (-1.0, 0.0, 1.0):
        j = int(np.argmin(np.abs(p.z - z)))
        assert abs(psi[j] - ref[j]) <= 1e-10
    assert np.max(np.abs(psi - ref)) <= 1e-10


def test_psi_discrete_residual(ac_profile):
    p, V, beta = ac_profile, 0.7, 3.0
    psi = solve_psi(p, V, beta)
    dz = p.dz
    res = ((psi[2:] - 2 * psi[1:-1] + psi[:-2]) / dz**2 + V * (psi[2:] - psi[:-2]) / (2 * dz)
           - psi[1:-1] - beta * p.dtheta[1:-1])
    assert np.max(np.abs(res)) <= 1e-12 * max(1.0, 1.0 / dz**2 * np.max(np.abs(psi)))
    assert psi[0] == 0.0 and psi[-1] == 0.0


def test_symmetric_profile_psi_at_mirrored_nodes(ac_profile):
    # V = 0 and an even forcing give an even psi; compare the mirrored nodes to the dense oracle
    psi = solve_psi(ac_profile, 0.0, 1.0)
    ref = dense_psi(ac_profile, 0.0, 1.0)
    c = ac_profile.center
    for k in (50, 200):
        assert abs(psi[c + k] - ref[c + k]) <= 1e-8
        assert abs(psi[c - k] - ref[c - k]) <= 1e-8
    assert np.max(np.abs(psi - psi[::-1])) <= 1e-8


def test_singular_when_advection_dominates(coarse_ac_profile):
    dz = coarse_ac_profile.dz
    with pytest.raises(SingularSystem):
        solve_psi(coarse_ac_profile, 2.0 / dz, 1.0)


def test_toy_closed_form():
    phi = ToyPhi(100.0)
    assert evaluate_phi(phi, 0.0) == -100.0
    assert evaluate_phi_prime(phi, 0.0) == 100.0
    V = np.linspace(-3, 3, 61)
    h = 1e-5
    np.testing.assert_allclose(phi.prime(V), (phi(V + h) - phi(V - h)) / (2 * h), rtol=1e-7, atol=1e-5)


def test_beta_zero_table_is_zero(ac_profile):
    phi = BvpPhi(ac_profile, 0.0)
    _, vals, dvals = phi.table()
    assert np.max(np.abs(vals)) <= 1e-12
    assert evaluate_phi(phi, 3.7) == 0.0
    assert np.max(np.abs(dvals)) == 0.0


def test_linear_in_beta(ac_profile, asym_profile):
    V = np.linspace(-10, 10, 2001)
    for p in (ac_profile, asym_profile):
        one = phi_direct(p, V, 37.0)
        two = phi_direct(p, V, 74.0)
        assert np.max(np.abs(two - 2 * one)) <= 1e-9


def test_phi_against_dense_and_simpson(ac_profile):
    ref = simpson(dense_psi(ac_profile, 0.0, 10.0) * ac_profile.dtheta**2, x=ac_profile.z)
    phi = BvpPhi(ac_profile, 10.0, v_max=1.0, dv=0.05)
    assert abs(phi(0.0) - ref) <= 1e-6


def test_derivative_against_five_point_stencil(ac_profile):
    phi = BvpPhi(ac_profile, 5.0, v_max=2.0, dv=0.05)
    h = 1e-2
    f = lambda v: phi_direct(ac_profile, v, 5.0)
    five = (-f(1 + 2 * h) + 8 * f(1 + h) - 8 * f(1 - h) + f(1 - 2 * h)) / (12 * h)
    assert abs(evaluate_phi_prime(phi, 1.0) - five) <= 1e-5


def test_symmetric_well_gives_even_phi(ac_phi100):
    assert ac_phi100.is_even(1e-8)
    assert abs(ac_phi100.prime(0.0)) <= 1e-8


def test_asymmetric_well_is_not_even(asym_phi100):
    assert not asym_phi100.is_even(1e-3)
    # the zero velocity is unstable for this nonlinearity
    assert asym_phi100.prime(0.0) > asym_phi100.profile.c0


def test_table_interpolation_error(ac_phi100, asym_phi100):
    rng = np.random.default_rng(3)
    V = rng.uniform(-9.9, 9.9, 40)
    for phi in (ac_phi100, asym_phi100):
        assert np.max(np.abs(phi(V) - phi.direct(V))) <= 1e-6


def test_outside_table_falls_back_to_direct(ac_profile):
    phi = BvpPhi(ac_profile, 2.0, v_max=1.0, dv=0.1)
    assert phi(3.0) == pytest.approx(phi_direct(ac_profile, 3.0, 2.0), abs=0, rel=0)


def test_table_csv_round_trip(tmp_path, asym_phi100):
    path = tmp_path / "phi.csv"
    asym_phi100.to_csv(path)
    table = TablePhi.from_csv(path, beta=100.0)
    V = np.linspace(-9.5, 9.5, 77)
    np.testing.assert_allclose(table(V), asym_phi100(V), atol=1e-12)
    with pytest.raises(ValueError):
        table(11.0)


def test_make_phi_sources(tmp_path):
    assert isinstance(make_phi("toy", 3.0), ToyPhi)
    bvp = make_phi("allen-cahn", 1.0, M=200, v_max=2.0, dv=0.1)
    assert isinstance(bvp, BvpPhi) and bvp.profile.M == 200
    bvp.to_csv(tmp_path / "t.csv")
    assert isinstance(make_phi(f"table:{tmp_path / 't.csv'}", 1.0), TablePhi)


def test_beta_crit_toy_is_at_most_one():
    est = estimate_beta_crit(ToyPhi, 3.0, 10.0)
    assert est <= 1 + 1e-3


def test_beta_crit_bracket_failure():
    with pytest.raises(BracketFailure):
        estimate_beta_crit(ToyPhi, 3.0, 0.5)


def test_beta_crit_allen_cahn_against_grid_scan(ac_profile):
    est = estimate_beta_crit(ac_profile, 10.0, 1000.0)
    # grid-scan oracle on beta with spacing 1e-3, using linearity in beta
    V = np.linspace(-10, 10, 401)
    slope1 = np.max(np.abs(phi_direct(ac_profile, V + 1e-4, 1.0) - phi_direct(ac_profile, V - 1e-4, 1.0))) / 2e-4
    betas = np.arange(0.0, 1000.0, 1e-3)
    scan = betas[betas * slope1 < 1.0][-1]
    assert abs(est - scan) <= 2e-3
    assert abs(est - AC_BETA_CRIT) <= 2e-3


@settings(max_examples=20, deadline=None)
@given(V=st.floats(-4, 4), beta=st.floats(0, 200))
def test_toy_derivative_matches_difference(V, beta):
    phi = ToyPhi(beta)
    h = 1e-6
    assert abs(phi.prime(V) - (phi(V + h) - phi(V - h)) / (2 * h)) <= 1e-4 * max(1.0, beta)


@settings(max_examples=15, deadline=None)
@given(V=st.floats(-5, 5), beta=st.floats(0.5, 50))
def test_symmetric_phi_even_pointwise(coarse_ac_profile, V, beta):
    assert abs(phi_direct(coarse_ac_profile, V, beta) - phi_direct(coarse_ac_profile, -V, beta)) <= 1e-9 * beta
