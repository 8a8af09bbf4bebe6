import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from dampmodes.evolution import (GCoefficients, IntegrationError, Trajectory, adaptive_simpson,
                                 asymptotic_delta, compute_g_ode, compute_g_quadrature, evolve,
                                 g_ode_trajectory, interaction_delta, propagate_interaction,
                                 symplectic_map, to_interaction, to_schrodinger)
from dampmodes.generators import DissipativeCoefficients, UnitaryCoefficients
from dampmodes.master import EquationKind, MasterEquationSpec, g_closed_values, preset_coefficients
from dampmodes.moments import (GaussianMoments, Generator, apply_unitary, generalized_uncertainty,
                               infinitesimal_rates)

KL1 = (UnitaryCoefficients(2.0, 0.0, 0.0), DissipativeCoefficients(1.0, -1.0, 0.0, 0.0))

# 30-digit quadrature of -int eta_bar(s) exp(-gamma (t - s)) ds with eta_bar from
# an arbitrary-precision matrix exponential
HPZ_1_01_1_02 = MasterEquationSpec(EquationKind.HPZ, 1.0, 0.1, 1.0, 0.2)
G_HPZ_T5 = (0.83867116522871, 0.0891481317571404, -0.247711012504813)
G_HPZ_T50 = (2.08999662983475, -0.142696170233429, -0.082926370656613)
G_CL_T7 = (1.01106968391987, 0.0989298603641742, -0.0848058300538399)
HYPERBOLIC = (UnitaryCoefficients(0.5, 1.0, 0.3), DissipativeCoefficients(0.2, -0.4, 0.1, 0.05))
G_HYPERBOLIC_T3 = (3.6049830143127, 0.0896600814188296, 3.34069917528538)


def test_g_ode_kl():
    for t in (0.5, 2.0, 7.0):
        g = compute_g_ode(*KL1, t)
        np.testing.assert_allclose(g.g, [1.0 - math.exp(-t), 0.0, 0.0], atol=1e-10)
        assert g.h == -t


def test_g_ode_without_damping_is_linear():
    d = DissipativeCoefficients(0.0, 0.3, -0.2, 0.1)
    g = compute_g_ode(UnitaryCoefficients(), d, 4.0)
    np.testing.assert_allclose(g.g, -4.0 * d.eta, atol=1e-11)


@pytest.mark.parametrize("method", [compute_g_ode, compute_g_quadrature])
@pytest.mark.parametrize("source, t, expected", [
    (preset_coefficients(HPZ_1_01_1_02), 5.0, G_HPZ_T5),
    (preset_coefficients(HPZ_1_01_1_02), 50.0, G_HPZ_T50),
    (preset_coefficients(MasterEquationSpec(EquationKind.CL, 1.0, 0.1, 1.0)), 7.0, G_CL_T7),
    (HYPERBOLIC, 3.0, G_HYPERBOLIC_T3),
])
def test_g_against_high_precision_reference(method, source, t, expected):
    np.testing.assert_allclose(method(*source, t).g, expected, rtol=0, atol=1e-9)


def test_g_ode_cl_matches_closed_form():
    spec = MasterEquationSpec(EquationKind.CL, 1.0, 0.1, 1.0)
    np.testing.assert_allclose(compute_g_ode(*preset_coefficients(spec), 5.0).g,
                               g_closed_values(spec, 5.0), atol=1e-8)


def test_g_quadrature_kl_and_zero():
    assert compute_g_quadrature(*KL1, 1.0).g0 == pytest.approx(0.6321205588285577, abs=1e-10)
    np.testing.assert_array_equal(compute_g_quadrature(*KL1, 0.0).g, 0.0)


def test_g_quadrature_hpz_matches_closed_form():
    np.testing.assert_allclose(compute_g_quadrature(*preset_coefficients(HPZ_1_01_1_02), 3.0).g,
                               g_closed_values(HPZ_1_01_1_02, 3.0), atol=1e-8)


def test_g_ode_trajectory_unsorted_times():
    u, d = preset_coefficients(HPZ_1_01_1_02)
    times = [5.0, 1.0, 3.0, 0.0]
    out = g_ode_trajectory(u, d, times)
    assert [g.t for g in out] == times
    np.testing.assert_allclose([g.g for g in out], g_closed_values(HPZ_1_01_1_02, times).T,
                               atol=1e-9)


def test_g_ode_rejects_negative_time():
    with pytest.raises(ValueError):
        g_ode_trajectory(*KL1, [-1.0])


def test_adaptive_simpson_scalar_and_vector():
    assert adaptive_simpson(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)
    got = adaptive_simpson(lambda s: np.array([np.exp(s), s ** 3]), 0.0, 1.0, dim=2)
    np.testing.assert_allclose(got, [math.e - 1.0, 0.25], atol=1e-12)
    assert adaptive_simpson(np.cos, 1.0, 1.0) == 0.0


def test_adaptive_simpson_reports_failure():
    with pytest.raises(IntegrationError):
        adaptive_simpson(lambda s: 1.0 / np.sqrt(np.abs(s - 0.3)), 0.0, 1.0, tol=1e-14, max_depth=8)


def test_symplectic_examples():
    np.testing.assert_allclose(symplectic_map(UnitaryCoefficients(math.pi, 0.0, 0.0), 1.0),
                               [[0.0, -1.0], [1.0, 0.0]], atol=1e-15)
    np.testing.assert_allclose(symplectic_map(UnitaryCoefficients(0.0, 0.0, 2 * math.log(2)), 1.0),
                               np.diag([2.0, 0.5]), atol=1e-15)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3))
def test_symplectic_determinant(theta, phi, psi, t):
    s = symplectic_map(UnitaryCoefficients(theta, phi, psi), t)
    assert np.linalg.det(s) == pytest.approx(1.0, abs=1e-12 * max(1.0, np.abs(s).max() ** 2))


@pytest.mark.parametrize("which, field", [(Generator.L0, "theta"), (Generator.M1, "phi"),
                                          (Generator.M2, "psi")])
def test_symplectic_agrees_with_single_generator_maps(which, field):
    m = GaussianMoments(0.4, -1.1, 0.9, 0.7, 0.2)
    u = UnitaryCoefficients(**{field: 0.8})
    via_map = apply_unitary(m, which, 0.8 * 1.7)
    np.testing.assert_allclose(to_interaction(m, u, 1.7).as_array(), via_map.as_array(), atol=1e-13)


def test_to_schrodinger_examples():
    u = UnitaryCoefficients(2.0, 0.0, 0.0)
    m = GaussianMoments(0.3, -0.2, 0.8, 0.6, 0.1)
    assert to_schrodinger(m, u, 0.0) == m
    rot = to_schrodinger(GaussianMoments.coherent(1.0, 0.0), u, math.pi / 2)
    assert (rot.mean_x, rot.mean_p) == pytest.approx((0.0, -1.0), abs=1e-15)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3))
def test_frame_change_preserves_delta_and_inverts(theta, phi, psi, t):
    u = UnitaryCoefficients(theta, phi, psi)
    m = GaussianMoments(0.4, -1.1, 0.9, 0.7, 0.2)
    back = to_interaction(to_schrodinger(m, u, t), u, t)
    scale = max(1.0, np.abs(symplectic_map(u, t)).max() ** 4)
    assert to_schrodinger(m, u, t).delta == pytest.approx(m.delta, abs=1e-12 * scale)
    np.testing.assert_allclose(back.as_array(), m.as_array(), atol=1e-11 * scale)


def test_propagate_identity_and_kl_limit():
    m = GaussianMoments(0.3, -0.2, 0.8, 0.6, 0.1)
    assert propagate_interaction(m, 0.7, GCoefficients(0.0, 0.0, 0.0, 0.0, 0.0)) == m
    g_inf = GCoefficients.from_g([1.0, 0.0, 0.0], 1.0, 800.0)
    out = propagate_interaction(m, 1.0, g_inf)
    assert (out.sigma_xx, out.sigma_pp, out.sigma_xp) == pytest.approx((0.5, 0.5, 0.0))
    assert out.delta == pytest.approx(0.25)


def test_propagate_checks_h():
    with pytest.raises(ValueError):
        propagate_interaction(GaussianMoments(), 0.5, GCoefficients(-1.0, 0.0, 0.0, 0.0, 1.0))


@given(st.floats(0, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 5))
def test_interaction_delta_matches_propagated_moments(gamma, g0, g1, g2, t):
    m0 = GaussianMoments(0.4, -1.1, 0.9, 0.7, 0.2)
    g = GCoefficients.from_g([g0, g1, g2], gamma, t)
    assert interaction_delta(m0, gamma, g) == pytest.approx(
        generalized_uncertainty(propagate_interaction(m0, gamma, g)), abs=1e-12)


@pytest.mark.parametrize("g, expected", [((1.0, 0.0, 0.0), 0.25), ((0.0, 0.0, 0.0), 0.0),
                                         ((1.0, 1.0, 0.0), 0.0)])
def test_asymptotic_delta(g, expected):
    assert asymptotic_delta(g) == pytest.approx(expected)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], [GaussianMoments(), GaussianMoments()])
    with pytest.raises(ValueError):
        Trajectory([0.0, 1.0], [GaussianMoments()])
    tr = Trajectory([0.0, 1.0], [GaussianMoments(), GaussianMoments.thermal(1.0)])
    assert len(tr) == 2 and tr.moment_array().shape == (2, 5)
    np.testing.assert_allclose(tr.delta, [0.25, 1.0])


def _moment_ode(u, d, m0, times):
    """Integrate d m/dt = -(sum of coefficient * phase-space rate) directly."""
    coeffs = [(Generator.L0, u.theta), (Generator.M1, u.phi), (Generator.M2, u.psi),
              (Generator.O0, d.gamma), (Generator.OPLUS, d.eta0), (Generator.L1PLUS, d.eta1),
              (Generator.L2PLUS, d.eta2)]

    def rhs(_, y):
        m = GaussianMoments(*y)
        return -sum(c * np.array(infinitesimal_rates(w, m)) for w, c in coeffs)

    sol = solve_ivp(rhs, (0.0, times[-1]), m0.as_array(), t_eval=times, method="DOP853",
                    rtol=1e-11, atol=1e-13)
    return sol.y.T


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 0.5),
       st.floats(-1, 0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_evolve_matches_direct_moment_equations(theta, phi, psi, gamma, e0, e1, e2):
    u = UnitaryCoefficients(theta, phi, psi)
    d = DissipativeCoefficients(gamma, e0, e1, e2)
    m0 = GaussianMoments(0.5, -0.3, 0.8, 0.6, 0.1)
    times = np.linspace(0.0, 2.0, 9)
    ref = _moment_ode(u, d, m0, times)
    scale = max(1.0, np.abs(ref).max())
    got = evolve(m0, u, d, times).moment_array()
    np.testing.assert_allclose(got, ref, atol=1e-8 * scale)


def test_evolve_ode_and_quadrature_agree():
    u, d = HYPERBOLIC
    m0 = GaussianMoments.coherent(1.0, 0.5)
    times = np.linspace(0.0, 3.0, 7)
    np.testing.assert_allclose(evolve(m0, u, d, times, method="ode").moment_array(),
                               evolve(m0, u, d, times, method="quad").moment_array(), atol=1e-9)
    with pytest.raises(ValueError):
        evolve(m0, u, d, times, method="euler")


@pytest.mark.parametrize("method", ["ode", "quad"])
def test_hyperbolic_long_time_stays_accurate(method):
    # overdamped CL: g and the frame map grow like exp(|omega| t)
    u = UnitaryCoefficients(2.0, 0.0, -3.0)
    d = DissipativeCoefficients(3.0, -6.0, -6.0, 0.0)
    m0 = GaussianMoments(1.0, 0.5, 0.7, 0.6, 0.1)
    times = np.array([0.0, 0.5, 5.0, 20.0])
    ref = _moment_ode(u, d, m0, times)
    got = evolve(m0, u, d, times, method=method).moment_array()
    np.testing.assert_allclose(got, ref, atol=1e-8)
