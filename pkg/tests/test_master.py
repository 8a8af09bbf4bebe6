import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampmodes.evolution import compute_g_ode, g_ode_trajectory
from dampmodes.generators import RegimeError, eta_bar
from dampmodes.master import (EquationKind, MasterEquationSpec, delta_longtime, eta_bar_closed,
                              evolve_preset, g_closed, g_closed_values, g_stripped,
                              positivity_check, preset_coefficients)
from dampmodes.moments import GaussianMoments

KL, CL, HPZ = EquationKind.KL, EquationKind.CL, EquationKind.HPZ


def spec_for_gamma_hat(kind, gh, b, d=0.0, omega0=1.0):
    gamma = 2.0 * omega0 * gh / math.sqrt(1.0 + gh * gh)
    return MasterEquationSpec(kind, omega0, gamma, b, d)


specs = st.builds(
    MasterEquationSpec,
    st.sampled_from(list(EquationKind)),
    st.floats(0.5, 2.0),
    st.floats(0.0, 0.9),
    st.floats(0.5, 1.5),
    st.floats(-0.5, 0.5),
)


def test_preset_coefficients():
    u, d = preset_coefficients(MasterEquationSpec(KL, 1.0, 0.2, 1.0))
    assert (u.theta, u.phi, u.psi) == (2.0, 0.0, 0.0)
    assert d.eta0 == pytest.approx(-0.4) and (d.eta1, d.eta2) == (0.0, 0.0)
    u, d = preset_coefficients(MasterEquationSpec(CL, 1.0, 0.2, 1.0))
    assert u.psi == pytest.approx(-0.2) and d.eta1 == pytest.approx(-0.4)
    _, d = preset_coefficients(MasterEquationSpec(HPZ, 1.0, 0.2, 1.0, 0.3))
    assert d.eta2 == pytest.approx(-0.3)


def test_spec_validation():
    with pytest.raises(ValueError):
        MasterEquationSpec(KL, 0.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        MasterEquationSpec(KL, 1.0, -0.1, 1.0)
    with pytest.raises(ValueError):
        MasterEquationSpec(KL, 1.0, 0.1, 0.3)
    assert MasterEquationSpec(KL, 1.0, 0.1, 0.3, allow_low_b=True).b == 0.3
    with pytest.raises(ValueError):
        MasterEquationSpec(KL, 1.0, math.inf, 1.0)
    assert MasterEquationSpec("cl", 1.0, 0.1, 1.0).kind is CL
    with pytest.raises(ValueError):
        EquationKind.parse("xyz")


def test_overdamped_has_no_closed_form():
    spec = MasterEquationSpec(CL, 1.0, 2.5, 1.0)
    assert not spec.has_closed_form
    with pytest.raises(RegimeError):
        spec.omega
    with pytest.raises(RegimeError):
        g_closed(spec, 1.0)
    assert MasterEquationSpec(KL, 1.0, 2.5, 1.0).has_closed_form


def test_eta_bar_closed_kl_constant():
    spec = MasterEquationSpec(KL, 1.0, 0.3, 0.7)
    out = eta_bar_closed(spec, np.linspace(0, 9, 5))
    np.testing.assert_allclose(out[0], -2 * 0.7 * 0.3)
    np.testing.assert_array_equal(out[1:], 0.0)


def test_eta_bar_closed_cl_at_zero():
    spec = MasterEquationSpec(CL, 1.0, 0.3, 0.7)
    assert eta_bar_closed(spec, 0.0)[1] == pytest.approx(-2 * 0.7 * 0.3)


@given(specs)
def test_eta_bar_closed_starts_at_eta(spec):
    # fixes the sign of the cosine term in the CL/HPZ eta0 component
    np.testing.assert_allclose(eta_bar_closed(spec, 0.0), preset_coefficients(spec)[1].eta,
                               atol=1e-14)


def test_eta_bar_closed_hpz_matches_generic():
    spec = MasterEquationSpec(HPZ, 1.0, 0.1, 1.0, 0.2)
    np.testing.assert_allclose(eta_bar_closed(spec, 1.3), eta_bar(*preset_coefficients(spec), 1.3),
                               atol=1e-10)


@given(specs, st.floats(0.0, 40.0))
def test_eta_bar_closed_matches_generic_everywhere(spec, t):
    np.testing.assert_allclose(eta_bar_closed(spec, t), eta_bar(*preset_coefficients(spec), t),
                               atol=1e-12)


def test_g_closed_examples():
    g = g_closed(MasterEquationSpec(KL, 1.0, 1.0, 0.5), math.log(2))
    assert g.g0 == pytest.approx(0.5) and g.h == pytest.approx(-math.log(2))
    for kind in EquationKind:
        np.testing.assert_array_equal(g_closed(MasterEquationSpec(kind, 1.0, 0.2, 0.8, 0.3), 0.0).g, 0.0)


def test_g_closed_cl_matches_ode():
    spec = MasterEquationSpec(CL, 1.0, 0.1, 1.0)
    np.testing.assert_allclose(g_closed(spec, 7.0).g, compute_g_ode(*preset_coefficients(spec), 7.0).g,
                               atol=1e-8)


def test_g_closed_high_precision_reference():
    # 30-digit quadrature reference, see test_evolution
    spec = MasterEquationSpec(HPZ, 1.0, 0.1, 1.0, 0.2)
    np.testing.assert_allclose(g_closed_values(spec, 5.0),
                               [0.83867116522871, 0.0891481317571404, -0.247711012504813], atol=1e-12)
    np.testing.assert_allclose(g_closed_values(spec, 50.0),
                               [2.08999662983475, -0.142696170233429, -0.082926370656613], atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(specs)
def test_g_closed_matches_rate_equations(spec):
    times = np.linspace(0.0, 30.0, 61)
    ode = np.array([g.g for g in g_ode_trajectory(*preset_coefficients(spec), times)]).T
    np.testing.assert_allclose(g_closed_values(spec, times), ode, atol=1e-8)


def test_g_stripped_is_long_time_limit():
    spec = MasterEquationSpec(HPZ, 1.0, 0.3, 0.8, 0.2)
    t = 400.0
    period = 2 * math.pi / spec.omega
    ts = t + period * np.arange(512) / 512
    avg = g_closed_values(spec, ts).mean(axis=1)
    np.testing.assert_allclose(avg, g_stripped(spec), atol=1e-12)


def test_delta_longtime_kl():
    lt = delta_longtime(MasterEquationSpec(KL, 1.0, 0.3, 0.5))
    assert lt.delta_printed == pytest.approx(0.25) and lt.delta_exact == pytest.approx(0.25)


def test_delta_longtime_cl():
    spec = MasterEquationSpec(CL, 1.0, 0.1, 1.0)
    lt = delta_longtime(spec)
    assert lt.delta_printed == pytest.approx(1.0 + 0.01 / 3.99, rel=1e-14)
    assert lt.delta_exact == pytest.approx(lt.delta_printed, rel=1e-13)


def test_delta_longtime_hpz_weak_damping():
    lt = delta_longtime(MasterEquationSpec(HPZ, 1.0, 1e-7, 0.6, 0.4))
    assert lt.delta_printed == pytest.approx(0.49, rel=1e-12)
    assert lt.delta_exact == pytest.approx(0.49, rel=1e-12)


def test_delta_longtime_hpz_difference_scales_with_gamma_hat_squared():
    ratios = []
    for gh in (0.2, 0.1, 0.05):
        lt = delta_longtime(spec_for_gamma_hat(HPZ, gh, 0.6, 0.4))
        ratios.append((lt.delta_exact - lt.delta_printed) / gh ** 2)
    diffs = [r * gh ** 2 for r, gh in zip(ratios, (0.2, 0.1, 0.05))]
    assert diffs[0] > diffs[1] > diffs[2] > 0
    np.testing.assert_allclose(ratios, ratios[-1], rtol=0.05)


def test_positivity_examples():
    rep = positivity_check(MasterEquationSpec(KL, 1.0, 0.4, 0.5))
    assert rep.ok and rep.margin == pytest.approx(0.0, abs=1e-15)
    rep = positivity_check(MasterEquationSpec(HPZ, 1.0, 0.05, 0.5, -1.2))
    assert not rep and rep.delta_printed == pytest.approx(0.04)
    assert "VIOLATED" in rep.describe()


@given(st.floats(0.0, 1.9), st.floats(0.5, 3.0))
def test_cl_always_positive(gamma, b):
    assert positivity_check(MasterEquationSpec(CL, 1.0, gamma, b))


@pytest.mark.parametrize("kind", list(EquationKind))
def test_evolve_preset_methods_agree(kind):
    spec = MasterEquationSpec(kind, 1.0, 0.3, 0.8, 0.2)
    m0 = GaussianMoments(0.5, -1.0, 1.2, 0.6, 0.1)
    times = np.linspace(0.0, 10.0, 11)
    closed = evolve_preset(spec, m0, times, method="closed").moment_array()
    np.testing.assert_allclose(evolve_preset(spec, m0, times, method="ode").moment_array(), closed,
                               atol=1e-9)
    np.testing.assert_allclose(evolve_preset(spec, m0, times, method="quad").moment_array(), closed,
                               atol=1e-9)


def test_evolve_preset_overdamped_uses_ode():
    spec = MasterEquationSpec(CL, 1.0, 3.0, 1.0)
    traj = evolve_preset(spec, GaussianMoments.coherent(1.0, 0.0), np.linspace(0, 20, 5))
    assert abs(traj.moments[-1].mean_x) < 1e-2
    assert traj.delta[-1] > 0.25


@pytest.mark.parametrize("kind", [KL, CL])
def test_trajectory_settles_to_longtime_delta(kind):
    spec = MasterEquationSpec(kind, 1.0, 0.5, 0.75)
    traj = evolve_preset(spec, GaussianMoments.coherent(1.0, 0.5), [200.0])
    # period-averaged limit; the remaining oscillation is O(gamma_hat**2)
    assert traj.delta[0] == pytest.approx(delta_longtime(spec).delta_exact, rel=3 * spec.gamma_hat ** 2)
