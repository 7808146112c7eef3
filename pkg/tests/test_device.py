import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from geogate import device as dev
from geogate import qmath
from geogate.geopath import PulseSegment

from conftest import omega_c_at


# coupler tuning ------------------------------------------------------------


def test_coupler_frequency_examples(params):
    assert dev.coupler_frequency(params, 0.0) == pytest.approx(dev.mhz(7500))
    assert dev.coupler_frequency(params, 0.25) == pytest.approx(
        params.omega_c0 * np.cos(np.pi / 4) ** 0.5)


def test_coupler_frequency_half_flux_warns(params):
    with pytest.warns(UserWarning):
        assert dev.coupler_frequency(params, 0.5) == 0.0


def test_flux_inverse_examples(params):
    assert dev.flux_for_coupler_frequency(params, params.omega_c0) == 0.0
    w = params.omega_c0 * np.cos(np.pi / 4) ** 0.5
    assert dev.flux_for_coupler_frequency(params, w) == pytest.approx(0.25, abs=1e-12)


def test_flux_inverse_unreachable(params):
    with pytest.raises(dev.UnreachableFrequencyError):
        dev.flux_for_coupler_frequency(params, 1.01 * params.omega_c0)


@given(st.floats(0.05, 1.0))
def test_flux_round_trip_against_bisection(params, frac):
    target = frac * params.omega_c0
    phi = dev.flux_for_coupler_frequency(params, target)
    assert abs(dev.coupler_frequency(params, phi) - target) / target < 1e-10
    if frac < 0.999:
        # the flux is ill-conditioned right at the sweet spot, so compare away from it
        ref = brentq(lambda p: dev.coupler_frequency(params, p) - target, 0.0, 0.5 - 1e-12,
                     xtol=1e-15)
        assert phi == pytest.approx(ref, abs=1e-9)


# Hamiltonian ---------------------------------------------------------------


def test_decoupled_hamiltonian_is_diagonal():
    p = dev.DeviceParams.from_mhz(g1=0, g2=0, g12=0)
    h = dev.full_system_hamiltonian(p, dev.mhz(7000))
    assert np.allclose(h, np.diag(np.diag(h)))
    i = qmath.basis_index((1, 1, 0), qmath.DEFAULT_DIMS)
    assert h[i, i].real == pytest.approx(p.omega1 + p.omega2)


def test_two_photon_level(params):
    h0, _ = dev.hamiltonian_parts(params, dev.mhz(7000))
    i = qmath.basis_index((0, 2, 0), qmath.DEFAULT_DIMS)
    assert h0[i, i].real == pytest.approx(2 * params.omega2 + params.alpha2)


def test_hamiltonian_hermitian(params):
    h = dev.full_system_hamiltonian(params, dev.mhz(6500))
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_units_single_conversion_site():
    p = dev.DeviceParams.from_mhz(omega1=4321.0)
    assert p.omega1 == pytest.approx(2 * np.pi * 4321.0)
    assert p.to_mhz()["omega1"] == pytest.approx(4321.0)


def test_positive_anharmonicity_rejected():
    with pytest.raises(dev.DeviceError):
        dev.DeviceParams.from_mhz(alpha1=200.0)


# Schrieffer-Wolff ----------------------------------------------------------


def test_sw_direct_coupling_limit():
    p = dev.DeviceParams.from_mhz(g1=0, g2=0)
    w1, w2, g = dev.sw_transformed(p, dev.mhz(6000))
    assert (w1, w2, g) == (p.omega1, p.omega2, p.g12)


def test_sw_sign(params):
    _, _, g = dev.sw_transformed(params, omega_c_at(params, 1500))
    assert g < params.g12


def test_sw_resonant_coupler(params):
    with pytest.raises(dev.ResonantCouplerError):
        dev.sw_transformed(params, params.omega1)


def test_dispersive_warning(params):
    with pytest.warns(UserWarning, match="dispersive"):
        dev.sw_transformed(params, params.omega1 + dev.mhz(300))


def _single_excitation_splitting(params, wc):
    h = dev.full_system_hamiltonian(params, wc)
    idx = [qmath.basis_index(s, qmath.DEFAULT_DIMS) for s in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
    ev = np.linalg.eigvalsh(h[np.ix_(idx, idx)])
    return ev[1] - ev[0]


@pytest.mark.parametrize("det", np.linspace(1000, 3000, 9))
def test_sw_splitting_matches_exact(params, det):
    wc = omega_c_at(params, det)
    w1, w2, g = dev.sw_transformed(params, wc)
    sw = 2 * np.sqrt(g**2 + ((w1 - w2) / 2) ** 2)
    exact = _single_excitation_splitting(params, wc)
    assert abs(sw - exact) / exact < 0.05


# flux derivatives ----------------------------------------------------------


def test_dgtilde_flat_point(params):
    assert abs(dev.dgtilde_dphi(params, 1e-6)) < 1e-3 * abs(dev.dgtilde_dphi(params, 0.3))


def test_dgtilde_matches_finite_difference(params):
    h = 1e-5
    g = lambda p: dev._sw_of_flux(params, p)[2]
    fd = (g(0.3 + h) - g(0.3 - h)) / (2 * h)
    assert dev.dgtilde_dphi(params, 0.3) == pytest.approx(fd, rel=1e-6)


@given(st.floats(0.05, 0.4))
def test_dgtilde_finite_difference_property(params, phi):
    h = 1e-6
    g = lambda p: dev._sw_of_flux(params, p)[2]
    fd = (g(phi + h) - g(phi - h)) / (2 * h)
    assert dev.dgtilde_dphi(params, phi) == pytest.approx(fd, rel=1e-5)


def test_dgtilde_independent_of_direct_coupling(params):
    other = dev.DeviceParams.from_mhz(g12=-13.0)
    assert dev.dgtilde_dphi(params, 0.3) == dev.dgtilde_dphi(other, 0.3)


def test_dgtilde_singular_at_branch_edge(params):
    with pytest.raises(dev.SingularDerivativeError):
        dev.dgtilde_dphi(params, 0.5)


def test_second_derivative_exact_on_quadratic(params):
    quad = lambda p: np.array([3.0 * p**2 - p, -2.0 * p**2, 7.5 * p**2 + 1.0])
    d2 = dev.second_derivatives(params, 0.3, func=quad)
    assert np.allclose(d2, [6.0, -4.0, 15.0], atol=1e-8)


def test_second_derivative_consistent_with_slope(params):
    h = 1e-5
    fd = (dev.dgtilde_dphi(params, 0.3 + h) - dev.dgtilde_dphi(params, 0.3 - h)) / (2 * h)
    assert dev.second_derivatives(params, 0.3)[2] == pytest.approx(fd, rel=1e-4)


def test_second_derivatives_share_sign(params):
    d2 = dev.second_derivatives(params, 0.3)
    assert np.sign(d2[0]) == np.sign(d2[1])


def test_second_derivative_edge_warns(params):
    with pytest.warns(UserWarning, match="edge"):
        dev.second_derivatives(params, 2e-4)


# drive-derived quantities --------------------------------------------------


def test_modulation_detuning_limits(params):
    w1, w2, _ = dev.sw_transformed(params, dev.coupler_frequency(params, 0.2))
    assert dev.modulation_detuning(params, dev.FluxDrive(0.2, 0.0)) == pytest.approx(w1 - w2)
    bare = dev.DeviceParams.from_mhz(g1=0, g2=0)
    assert dev.modulation_detuning(bare, dev.FluxDrive(0.2, 0.0)) == pytest.approx(dev.mhz(500))


def test_modulation_correction_small(params):
    drive = dev.FluxDrive(0.25, 0.1)
    w1, w2, _ = dev.sw_transformed(params, dev.coupler_frequency(params, 0.25))
    corr = dev.modulation_detuning(params, drive) - (w1 - w2)
    assert abs(corr) < 0.02 * abs(w1 - w2)


def test_effective_coupling_definition(params):
    assert dev.effective_coupling(params, dev.FluxDrive(0.25, 0.0)) == 0.0
    drive = dev.FluxDrive(0.25, 0.1)
    assert dev.effective_coupling(params, drive) == pytest.approx(
        np.sqrt(2) * 0.1 * dev.dgtilde_dphi(params, 0.25), rel=1e-15)


def test_effective_coupling_decreases_with_coupler_frequency(params):
    dets = np.linspace(1000, 3000, 41)
    g = []
    for d in dets:
        phi = dev.flux_for_coupler_frequency(params, omega_c_at(params, d))
        g.append(abs(dev.effective_coupling(params, dev.FluxDrive(phi, 0.1))))
    assert np.all(np.diff(g) < 0)


def test_flux_for_target_coupling_root(params):
    phi = dev.flux_for_effective_coupling(params, dev.mhz(2.0), 0.1)
    g = dev.effective_coupling(params, dev.FluxDrive(phi, 0.1))
    assert abs(g) == pytest.approx(dev.mhz(2.0), rel=1e-10)
    assert 0.2 < phi < 0.26


def test_flux_drive_validation():
    with pytest.raises(dev.DeviceError):
        dev.FluxDrive(0.6)
    with pytest.raises(dev.DeviceError):
        dev.FluxDrive(0.2, 0.2)


# generators ----------------------------------------------------------------


def test_interaction_generator_zero_without_coupling():
    p = dev.DeviceParams.from_mhz(g1=0, g2=0, g12=0)
    drive = dev.FluxDrive(0.2, 0.0, omega_phi=dev.mhz(700))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        h = dev.interaction_frame_generator(p, drive, 0.0, 0.123)
    assert np.allclose(h, 0)


def test_interaction_generator_needs_frequency(params):
    with pytest.raises(dev.MissingDriveParameterError):
        dev.interaction_frame_generator(params, dev.FluxDrive(0.2), 0.0, 0.0)


def test_interaction_generator_hermitian(params):
    model = dev.InteractionFrameModel.from_device(params, dev.FluxDrive(0.23, 0.1))
    w = model.resonant_drive_frequency(0.0)
    t = np.linspace(0, 1.0, 1000)
    h = model.batch(t, w, 0.3)
    assert np.max(np.abs(h - np.conj(np.swapaxes(h, 1, 2)))) < 1e-12


def test_block_mode_keeps_one_channel(params):
    model = dev.InteractionFrameModel.from_device(params, dev.FluxDrive(0.23, 0.1), block=True)
    h = model(0.01, model.resonant_drive_frequency(0.0), 0.0)
    nz = set(zip(*np.nonzero(h)))
    assert nz == {(dev.I11, dev.I02), (dev.I02, dev.I11)}


def test_rotating_wave_average(params):
    """Averaging the |11><02| coefficient over the slow frame isolates the g_e/2 term."""
    model = dev.InteractionFrameModel.from_device(params, dev.FluxDrive(0.23, 0.1))
    delta, phase = dev.mhz(1.0), 0.4
    w = model.resonant_drive_frequency(delta)
    period = 2 * np.pi / w
    n = 400
    t = np.linspace(0, 50 * period, 50 * n, endpoint=False)
    coeff = model.batch(t, w, phase)[:, dev.I11, dev.I02]
    # undo the slow rotation so the resonant piece is constant
    slow = coeff * np.exp(1j * (delta * t + phase))
    avg = slow.mean()
    assert avg.real == pytest.approx(model.g_e / 2, rel=2e-3)
    assert abs(avg.imag) < 2e-3 * abs(model.g_e)


def test_effective_generator_examples():
    seg = PulseSegment(1.0, 0.0, 0.0, 0.0, 3.0)
    assert np.allclose(dev.effective_generator(seg, 0.2), np.diag([-1.5, 1.5]))
    seg = PulseSegment(1.0, 2.0, 0.0)
    assert np.allclose(dev.effective_generator(seg, 0.2), [[0, 1], [1, 0]])
    seg = PulseSegment(1.0, 2.0, 0.7, 0.0, 1.5)
    ev = np.linalg.eigvalsh(dev.effective_generator(seg, 0.3))
    assert np.allclose(ev, [-0.5 * np.hypot(1.5, 2.0), 0.5 * np.hypot(1.5, 2.0)])
