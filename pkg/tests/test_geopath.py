import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from geogate import device as dev
from geogate.geopath import (
    RegimeViolationError,
    Scheme,
    SingularTrajectoryError,
    drive_schedule,
    ideal_gate,
    integrate_path,
    latitude_parameters,
    phase_accounting,
    synthesize,
)

G = dev.mhz(2.0)


def quiet_synth(*a, **k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return synthesize(*a, **k)


def wrap(x):
    return float(np.angle(np.exp(1j * x)))


def test_sngqc_durations():
    sch = synthesize(Scheme.SNGQC, np.pi, g_e=G)
    assert [s.duration for s in sch.segments] == pytest.approx([0.25, 0.25])
    assert sch.duration == pytest.approx(0.5)
    assert sch.segments[0].phi_a == pytest.approx(np.pi / 2)
    assert sch.segments[1].phi_a == pytest.approx(-np.pi - np.pi / 2)


def test_ungqc_pole_limit_is_sngqc():
    a = synthesize(Scheme.UNGQC, np.pi / 2, chi=np.pi, g_e=G)
    b = synthesize(Scheme.SNGQC, np.pi / 2, g_e=G)
    assert a.segments == b.segments


def test_ungqc_segments_structure():
    sch = quiet_synth(Scheme.UNGQC, np.pi, chi=0.43 * np.pi, eta=0.5, g_e=G)
    lon1, lat, lon2 = sch.segments
    assert lon1.duration == pytest.approx(0.43 * np.pi / G)
    assert lon2.duration == pytest.approx(lon1.duration)
    assert lon1.phi_b == lon1.delta_e == 0.0
    assert lat.duration > 0
    assert sch.duration == pytest.approx(sum(s.duration for s in sch.segments))


def test_dynamical_segments():
    sch = synthesize(Scheme.DYNAMICAL, np.pi / 2, g_e=G)
    d = [s.duration * G for s in sch.segments]
    assert d == pytest.approx([np.pi / 2, np.pi, np.pi / 2])
    assert all(s.phi_b == 0 and s.delta_e == 0 for s in sch.segments)


@given(st.floats(0.05, 0.95), st.floats(0.1, 3.0), st.floats(-1.9, 1.9).filter(lambda x: abs(x) > 0.05))
def test_latitude_sweep_identity(chi_over_pi, eta, gamma_over_pi):
    chi, gamma = chi_over_pi * np.pi, gamma_over_pi * np.pi
    k = (1 + eta) * np.cos(chi) - eta
    assume(abs(k) > 1e-3)
    dur, slope, _ = latitude_parameters(gamma, chi, eta, G)
    assert dur * slope == pytest.approx(-2 * gamma / ((1 + eta) * (1 - np.cos(chi))), rel=1e-10)


def test_singular_trajectory():
    eta = 0.5
    chi = np.arccos(eta / (1 + eta))
    with pytest.raises(SingularTrajectoryError):
        synthesize(Scheme.UNGQC, np.pi, chi=chi, eta=eta, g_e=G)


def test_negative_latitude_flips_direction():
    with pytest.warns(UserWarning, match="negative"):
        sch = synthesize(Scheme.UNGQC, np.pi, chi=0.43 * np.pi, eta=0.5, g_e=G)
    assert sch.gamma == pytest.approx(-np.pi)
    assert all(s.duration > 0 for s in sch.segments)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        synthesize(Scheme.SNGQC, 0.0)
    with pytest.raises(ValueError):
        synthesize(Scheme.UNGQC, np.pi, chi=1.2 * np.pi)
    with pytest.raises(ValueError):
        synthesize(Scheme.UNGQC, np.pi, chi=0.4 * np.pi, eta=-1)
    with pytest.raises(ValueError):
        synthesize(Scheme.SNGQC, np.pi, g_e=-1.0)


def test_total_duration_continuous_in_chi():
    chis = np.linspace(0.05, 1.0, 2000) * np.pi
    chis = chis[np.abs((1.5) * np.cos(chis) - 0.5) > 1e-6]
    durs = np.array([quiet_synth(Scheme.UNGQC, np.pi / 2, chi=c, g_e=G).duration for c in chis])
    assert np.max(np.abs(np.diff(durs))) < 0.01 * np.max(durs)


def test_ideal_gate_examples():
    assert np.allclose(ideal_gate(np.pi), np.diag([1, 1, 1, -1]))
    assert np.allclose(ideal_gate(0.0), np.eye(4))


@given(st.floats(-10, 10))
def test_ideal_gate_unitary(g):
    u = ideal_gate(g)
    assert np.allclose(u.conj().T @ u, np.eye(4))


# path integration ------------------------------------------------------------


def test_sngqc_path_is_two_meridians():
    sch = synthesize(Scheme.SNGQC, np.pi / 2, g_e=G)
    samples = integrate_path(sch)
    for k in (0, 1):
        seg = [s for s in samples if s.segment == k]
        xis = [s.xi for s in seg[1:]]
        assert np.ptp(xis) < 1e-12
    t = np.array([s.t for s in samples if s.segment == 0])
    chi = np.array([s.chi for s in samples if s.segment == 0])
    assert np.allclose(chi, np.minimum(G * t, np.pi), atol=1e-9)
    assert samples[-1].chi < 1e-9


def test_latitude_holds_polar_angle():
    sch = quiet_synth(Scheme.UNGQC, np.pi, chi=0.43 * np.pi, eta=0.5, g_e=G)
    lat = [s.chi for s in integrate_path(sch) if s.segment == 1]
    assert np.ptp(lat) < 1e-6
    assert lat[0] == pytest.approx(0.43 * np.pi, abs=1e-6)


def test_ungqc_working_point_round_trip():
    sch = quiet_synth(Scheme.UNGQC, np.pi, chi=0.43 * np.pi, eta=0.5, g_e=G)
    samples = integrate_path(sch)
    assert samples[-1].chi < 1e-3
    gamma, gamma_d, gamma_g = phase_accounting(samples, sch)
    assert abs(wrap(gamma - np.pi)) < 1e-3
    assert gamma_d / gamma_g == pytest.approx(0.5, abs=1e-3)


@settings(max_examples=50)
@given(
    st.floats(-1.9, 1.9).filter(lambda x: abs(x) > 0.05),
    st.floats(0.1, 0.95),
    st.floats(0.2, 2.0),
)
def test_closure_property(gamma_over_pi, chi_over_pi, eta):
    chi = chi_over_pi * np.pi
    assume(abs((1 + eta) * np.cos(chi) - eta) > 0.05)
    sch = quiet_synth(Scheme.UNGQC, gamma_over_pi * np.pi, chi=chi, eta=eta, g_e=G)
    samples = integrate_path(sch)
    assert samples[-1].chi < 1e-3
    gamma, gamma_d, gamma_g = phase_accounting(samples, sch)
    assert gamma == pytest.approx(gamma_d + gamma_g, abs=1e-6)


@pytest.mark.parametrize("gamma", [np.pi, np.pi / 2, np.pi / 4, -np.pi / 3])
def test_sngqc_phase_is_geometric(gamma):
    sch = synthesize(Scheme.SNGQC, gamma, g_e=G)
    g, gd, gg = phase_accounting(integrate_path(sch), sch)
    assert abs(gd) < 1e-6
    assert abs(wrap(g - gamma)) < 1e-6


@pytest.mark.parametrize("gamma", [np.pi, np.pi / 2, np.pi / 4])
def test_ungqc_geometric_phase_closed_form(gamma):
    sch = quiet_synth(Scheme.UNGQC, gamma, chi=0.43 * np.pi, eta=0.5, g_e=G)
    _, gd, gg = phase_accounting(integrate_path(sch), sch)
    lat = sch.segments[1]
    dxi = lat.phi_b * lat.duration
    assert gg == pytest.approx(-0.5 * dxi * (1 - np.cos(0.43 * np.pi)), rel=1e-4)
    assert gd / gg == pytest.approx(0.5, abs=1e-3)


# drive mapping ---------------------------------------------------------------


@pytest.fixture(scope="module")
def model():
    p = dev.reference_device()
    phi = dev.flux_for_effective_coupling(p, G, 0.1)
    return dev.InteractionFrameModel.from_device(p, dev.FluxDrive(phi, 0.1)), phi


def test_longitude_drive_is_resonant(model):
    m, phi = model
    sch = synthesize(Scheme.SNGQC, np.pi, g_e=G)
    drv = drive_schedule(sch, m.delta12_phi, m.alpha2, phi, 0.1)
    carrier = m.delta12_phi - m.alpha2
    assert drv[0].delta == 0.0
    assert drv[0].omega_phi == carrier
    assert drv[0].drive_phase == pytest.approx(np.pi / 2)


def test_dynamical_drive_is_resonant(model):
    m, phi = model
    sch = synthesize(Scheme.DYNAMICAL, np.pi, g_e=G)
    assert all(d.delta == 0.0 for d in drive_schedule(sch, m.delta12_phi, m.alpha2, phi, 0.1))


def test_latitude_drive_detuning(model):
    m, phi = model
    sch = quiet_synth(Scheme.UNGQC, np.pi, chi=0.43 * np.pi, eta=0.5, g_e=G)
    lat = sch.segments[1]
    drv = drive_schedule(sch, m.delta12_phi, m.alpha2, phi, 0.1)[1]
    assert drv.delta == pytest.approx(lat.phi_b + lat.delta_e)
    assert drv.delta == pytest.approx(-G / np.tan(0.43 * np.pi))
    assert drv.omega_phi == pytest.approx(m.delta12_phi - m.alpha2 + drv.delta)


def test_regime_violation(model):
    m, phi = model
    sch = quiet_synth(Scheme.UNGQC, np.pi, chi=0.1 * np.pi, eta=0.5, g_e=G)
    with pytest.raises(RegimeViolationError):
        drive_schedule(sch, dev.mhz(50.0), 0.0, phi, 0.1)
