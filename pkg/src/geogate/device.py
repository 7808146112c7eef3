"""Two transmons coupled through a flux-tunable coupler.

All frequencies are angular and measured in rad/us; flux is in units of the
flux quantum. ``DeviceParams.from_mhz`` is the single place where ordinary
MHz numbers are turned into angular frequencies.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import qmath

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
FD_STEP = 1e-4
DISPERSIVE_LIMIT = 0.15
PHI_AC_MAX = 0.15


def mhz(value):
    """Convert a frequency in MHz (scalar or array) to rad/us."""
    v = np.asarray(value, dtype=float)
    return float(TWO_PI * v) if v.ndim == 0 else TWO_PI * v


class DeviceError(ValueError):
    pass


class ResonantCouplerError(DeviceError):
    pass


class UnreachableFrequencyError(DeviceError):
    pass


class SingularDerivativeError(DeviceError):
    pass


class MissingDriveParameterError(DeviceError):
    pass


@dataclass(frozen=True)
class DeviceParams:
    """Static circuit parameters, angular frequencies in rad/us."""

    omega1: float
    omega2: float
    omega_c0: float
    alpha1: float
    alpha2: float
    alpha_c: float
    g1: float
    g2: float
    g12: float

    def __post_init__(self):
        if self.alpha1 >= 0 or self.alpha2 >= 0:
            raise DeviceError("transmon anharmonicities must be negative")

    @classmethod
    def from_mhz(
        cls,
        omega1=4500.0,
        omega2=4000.0,
        omega_c0=7500.0,
        alpha1=-200.0,
        alpha2=-200.0,
        alpha_c=-200.0,
        g1=86.0,
        g2=86.0,
        g12=5.0,
    ) -> "DeviceParams":
        return cls(
            omega1=mhz(omega1),
            omega2=mhz(omega2),
            omega_c0=mhz(omega_c0),
            alpha1=mhz(alpha1),
            alpha2=mhz(alpha2),
            alpha_c=mhz(alpha_c),
            g1=mhz(g1),
            g2=mhz(g2),
            g12=mhz(g12),
        )

    def to_mhz(self) -> dict[str, float]:
        return {k: v / TWO_PI for k, v in self.__dict__.items()}

    def scaled_couplings(self, lam: float) -> "DeviceParams":
        return replace(self, g1=lam * self.g1, g2=lam * self.g2, g12=lam * self.g12)

    @property
    def delta12(self) -> float:
        return self.omega1 - self.omega2


def reference_device() -> DeviceParams:
    """Default parameter set: 0.5 GHz qubit detuning, 7.5 GHz coupler sweet spot."""
    return DeviceParams.from_mhz()


@dataclass(frozen=True)
class FluxDrive:
    """Coupler flux ``phi_dc + phi_ac * cos(omega_phi * t + phase)``."""

    phi_dc: float
    phi_ac: float = 0.1
    omega_phi: float | None = None
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.phi_dc < 0.5:
            raise DeviceError(f"phi_dc={self.phi_dc} outside [0, 0.5)")
        if not 0.0 <= self.phi_ac <= PHI_AC_MAX:
            raise DeviceError(f"phi_ac={self.phi_ac} outside [0, {PHI_AC_MAX}]")


@dataclass(frozen=True)
class EffectiveParams:
    omega1_t: float
    omega2_t: float
    g_t: float
    delta12_phi: float
    g_e: float


# ---------------------------------------------------------------------------
# coupler tuning
# ---------------------------------------------------------------------------


def coupler_frequency(params: DeviceParams, phi: float) -> float:
    """``omega_c0 * sqrt(|cos(pi*phi)|)``."""
    c = np.cos(np.pi * phi)
    if abs(abs(phi) - 0.5) < 1e-15 or abs(c) < 1e-15:
        warnings.warn("coupler biased at half flux quantum: frequency is zero")
        return 0.0
    if abs(phi) > 0.5:
        raise DeviceError(f"|phi|={abs(phi)} beyond the first branch")
    return params.omega_c0 * np.sqrt(abs(c))


def flux_for_coupler_frequency(params: DeviceParams, omega_target: float) -> float:
    """Inverse of :func:`coupler_frequency` on the branch ``[0, 0.5)``."""
    if omega_target > params.omega_c0 * (1 + 1e-14):
        raise UnreachableFrequencyError(
            f"coupler cannot reach {omega_target / TWO_PI:.1f} MHz "
            f"(max {params.omega_c0 / TWO_PI:.1f} MHz)"
        )
    if omega_target <= 0:
        raise UnreachableFrequencyError("target coupler frequency must be positive")
    ratio = min(omega_target / params.omega_c0, 1.0)
    return float(np.arccos(ratio**2) / np.pi)


def check_dispersive(params: DeviceParams, omega_c: float) -> None:
    for k, (g, w) in enumerate(((params.g1, params.omega1), (params.g2, params.omega2)), 1):
        if abs(g) / abs(w - omega_c) >= DISPERSIVE_LIMIT:
            warnings.warn(
                f"qubit {k} not dispersive: g/|Delta| = {abs(g) / abs(w - omega_c):.3f}"
            )


# ---------------------------------------------------------------------------
# full Hamiltonian and Schrieffer-Wolff quantities
# ---------------------------------------------------------------------------


def hamiltonian_parts(params: DeviceParams, omega_c: float, dims=qmath.DEFAULT_DIMS):
    """Return ``(H0, V)`` for the three-mode circuit (Q1, Q2, coupler)."""
    dims = qmath.check_dims(dims)
    if len(dims) != 3:
        raise qmath.DimensionError("the circuit model has exactly three modes")
    a = [qmath.embed(qmath.ladder(d), m, dims) for m, d in enumerate(dims)]
    ad = [qmath.dag(x) for x in a]
    freqs = (params.omega1, params.omega2, omega_c)
    anh = (params.alpha1, params.alpha2, params.alpha_c)
    h0 = sum(w * ad[i] @ a[i] + 0.5 * al * ad[i] @ ad[i] @ a[i] @ a[i]
             for i, (w, al) in enumerate(zip(freqs, anh)))
    v = (
        params.g1 * (ad[0] @ a[2] + a[0] @ ad[2])
        + params.g2 * (ad[1] @ a[2] + a[1] @ ad[2])
        + params.g12 * (ad[0] @ a[1] + a[0] @ ad[1])
    )
    return h0, v


def full_system_hamiltonian(params: DeviceParams, omega_c: float, dims=qmath.DEFAULT_DIMS):
    h0, v = hamiltonian_parts(params, omega_c, dims)
    return h0 + v


def sw_transformed(params: DeviceParams, omega_c: float) -> tuple[float, float, float]:
    """Second-order dressed qubit frequencies and qubit-qubit coupling."""
    d1 = params.omega1 - omega_c
    d2 = params.omega2 - omega_c
    if abs(d1) < 1e-12 or abs(d2) < 1e-12:
        raise ResonantCouplerError("coupler resonant with a qubit")
    check_dispersive(params, omega_c)
    w1 = params.omega1 + params.g1**2 / d1
    w2 = params.omega2 + params.g2**2 / d2
    g = params.g12 + params.g1 * params.g2 * 0.5 * (1.0 / d1 + 1.0 / d2)
    return w1, w2, g


def _sw_of_flux(params: DeviceParams, phi: float) -> np.ndarray:
    wc = params.omega_c0 * np.sqrt(np.cos(np.pi * phi))
    d1 = params.omega1 - wc
    d2 = params.omega2 - wc
    return np.array([
        params.omega1 + params.g1**2 / d1,
        params.omega2 + params.g2**2 / d2,
        params.g12 + params.g1 * params.g2 * 0.5 * (1.0 / d1 + 1.0 / d2),
    ])


def detuning_rate(params: DeviceParams, phi: float) -> float:
    """d(omega_k - omega_c)/dphi, identical for both qubits."""
    c = np.cos(np.pi * phi)
    if c <= 0:
        raise SingularDerivativeError(f"derivative diverges at phi={phi}")
    return 0.5 * np.pi * params.omega_c0 * np.sin(np.pi * phi) / np.sqrt(c)


def dgtilde_dphi(params: DeviceParams, phi: float) -> float:
    """Flux slope of the dressed coupling, closed form."""
    if not 0.0 <= phi < 0.5 or 0.5 - phi < 1e-9:
        raise SingularDerivativeError(f"phi={phi} outside (0, 0.5)")
    wc = coupler_frequency(params, phi)
    d1 = params.omega1 - wc
    d2 = params.omega2 - wc
    dd = detuning_rate(params, phi)
    if d1 == 0.0 or d2 == 0.0 or d1 + d2 == 0.0:
        raise SingularDerivativeError(f"degenerate coupler detuning at phi={phi}")
    delta = 2.0 * d1 * d2 / (d1 + d2)
    return (
        -2.0 * params.g1 * params.g2 * (dd * d2**2 + d1**2 * dd)
        / (delta**2 * (d1 + d2) ** 2)
    )


def _second_difference(f: Callable[[float], np.ndarray], x: float, h: float) -> np.ndarray:
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / h**2


def second_derivatives(
    params: DeviceParams, phi: float, func: Callable[[float], np.ndarray] | None = None
) -> np.ndarray:
    """``[d2w1/dphi2, d2w2/dphi2, d2g/dphi2]`` by central differences.

    ``func`` replaces the dressed-quantity map, which is only useful in tests.
    """
    f = func or (lambda p: _sw_of_flux(params, p))
    h = FD_STEP
    margin = min(phi, 0.5 - phi)
    if margin <= 0:
        raise SingularDerivativeError(f"phi={phi} at the branch edge")
    if margin < 10 * h:
        h = margin / 10
        warnings.warn(f"phi={phi} near branch edge; finite-difference step shrunk to {h:.1e}")
    coarse = _second_difference(f, phi, h)
    fine = _second_difference(f, phi, h / 2)
    scale = np.maximum(np.abs(fine), 1e-300)
    if np.any(np.abs(coarse - fine) / scale > 1e-5):
        log.warning("second derivative at phi=%g not converged in step size", phi)
    return np.atleast_1d(fine)


def modulation_detuning(params: DeviceParams, drive: FluxDrive) -> float:
    w1, w2, _ = _sw_of_flux(params, drive.phi_dc)
    if drive.phi_ac == 0:
        return float(w1 - w2)
    d2 = second_derivatives(params, drive.phi_dc)
    return float(w1 - w2 + drive.phi_ac**2 / 4.0 * (d2[0] - d2[1]))


def effective_coupling(params: DeviceParams, drive: FluxDrive) -> float:
    """Signed effective exchange rate on {|11>, |02>}."""
    if drive.phi_ac == 0:
        return 0.0
    return float(np.sqrt(2.0) * drive.phi_ac * dgtilde_dphi(params, drive.phi_dc))


def effective_params(params: DeviceParams, drive: FluxDrive) -> EffectiveParams:
    w1, w2, g = _sw_of_flux(params, drive.phi_dc)
    return EffectiveParams(
        omega1_t=float(w1),
        omega2_t=float(w2),
        g_t=float(g),
        delta12_phi=modulation_detuning(params, drive),
        g_e=effective_coupling(params, drive),
    )


def flux_for_effective_coupling(
    params: DeviceParams, g_target: float, phi_ac: float = 0.1, phi_max: float = 0.45
) -> float:
    """DC bias on ``(0, phi_max]`` where ``|g_e| = g_target``.

    ``|g_e|`` grows monotonically with ``phi_dc`` as the coupler approaches
    the qubits, so the root is unique when it exists.
    """

    def resid(p):
        return abs(effective_coupling(params, FluxDrive(p, phi_ac))) - g_target

    lo, hi = 1e-9, phi_max
    if resid(hi) < 0:
        raise UnreachableFrequencyError(
            f"|g_e| = {g_target / TWO_PI:.3f} MHz not reachable below phi_dc={phi_max}"
        )
    return float(brentq(resid, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

# two-transmon space, index 3*n1 + n2
I00, I01, I02, I10, I11, I20 = 0, 1, 2, 3, 4, 6


@dataclass(frozen=True)
class InteractionFrameModel:
    """Exchange Hamiltonian in the frame rotating at the dressed qubit frequencies.

    Keeps the three exchange channels |10><01|, |11><02|, |20><11| with the full
    flux-modulated coupling ``g'(t)`` (all fast-oscillating terms retained).
    ``block=True`` keeps only the |11><02| channel.
    """

    g_t: float
    dg: float
    d2g: float
    delta12_phi: float
    alpha1: float
    alpha2: float
    phi_ac: float
    block: bool = False

    @classmethod
    def from_device(cls, params: DeviceParams, drive: FluxDrive, block: bool = False):
        w = _sw_of_flux(params, drive.phi_dc)
        d2 = second_derivatives(params, drive.phi_dc) if drive.phi_ac else np.zeros(3)
        dg = dgtilde_dphi(params, drive.phi_dc) if drive.phi_ac else 0.0
        return cls(
            g_t=float(w[2]),
            dg=float(dg),
            d2g=float(d2[2]),
            delta12_phi=modulation_detuning(params, drive),
            alpha1=params.alpha1,
            alpha2=params.alpha2,
            phi_ac=drive.phi_ac,
            block=block,
        )

    @property
    def g_e(self) -> float:
        return np.sqrt(2.0) * self.phi_ac * self.dg

    def resonant_drive_frequency(self, delta: float) -> float:
        return self.delta12_phi - self.alpha2 + delta

    def coupling(self, t, omega_phi: float, phase: float):
        """Modulated coupling ``g'(t)``."""
        x = omega_phi * np.asarray(t) + phase
        a2 = self.phi_ac**2 / 4.0
        return (self.g_t + a2 * self.d2g) + self.phi_ac * self.dg * np.cos(x) + a2 * self.d2g * np.cos(2 * x)

    def batch(self, t, omega_phi: float, phase: float) -> np.ndarray:
        """``H'(t)`` for an array of times, shape ``(len(t), 9, 9)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        gp = self.coupling(t, omega_phi, phase)
        h = np.zeros((t.size, 9, 9), dtype=complex)
        c = gp * np.sqrt(2.0) * np.exp(1j * (self.delta12_phi - self.alpha2) * t)
        h[:, I11, I02] = c
        h[:, I02, I11] = c.conj()
        if not self.block:
            c = gp * np.exp(1j * self.delta12_phi * t)
            h[:, I10, I01] = c
            h[:, I01, I10] = c.conj()
            c = gp * np.sqrt(2.0) * np.exp(1j * (self.delta12_phi + self.alpha1) * t)
            h[:, I20, I11] = c
            h[:, I11, I20] = c.conj()
        return h

    def __call__(self, t: float, omega_phi: float, phase: float) -> np.ndarray:
        return self.batch([t], omega_phi, phase)[0]


def interaction_frame_generator(
    params: DeviceParams, drive: FluxDrive, delta: float, t: float, block: bool = False
) -> np.ndarray:
    """``H'(t)`` (9x9) for a drive tuned to ``omega_phi = Delta12phi - alpha2 + delta``."""
    if drive.omega_phi is None:
        raise MissingDriveParameterError("drive has no modulation frequency configured")
    model = InteractionFrameModel.from_device(params, drive, block=block)
    expected = model.resonant_drive_frequency(delta)
    if not np.isclose(drive.omega_phi, expected, rtol=1e-12, atol=1e-9):
        warnings.warn(
            "drive frequency differs from Delta12phi - alpha2 + delta; using drive value"
        )
    return model(t, drive.omega_phi, drive.phase)


def effective_generator(segment, t: float) -> np.ndarray:
    """2x2 effective Hamiltonian on (|11>, |02>) for a schedule segment.

    ``t`` is measured from the start of the segment.
    """
    phi_e = segment.phi_a + segment.phi_b * t
    off = 0.5 * segment.g_e * np.exp(-1j * phi_e)
    return np.array(
        [[-0.5 * segment.delta_e, off], [np.conj(off), 0.5 * segment.delta_e]],
        dtype=complex,
    )
