"""Pulse schedules for controlled-phase gates on the {|11>, |02>} transition.

Three constructions share the same segment format:

* ``SNGQC`` -- orange-slice loop: down a meridian to the south pole and back
  up a second meridian; purely geometric phase.
* ``UNGQC`` -- triangle cap: meridian down to polar angle ``chi``, a latitude
  arc, meridian back up.  Dynamical and geometric phases stay in a fixed ratio
  ``eta``.
* ``DYNAMICAL`` -- resonant composite pulse (pi/2, theta_z, pi/2).

Angles follow the Bloch sphere of ``cos(chi/2)|11> + sin(chi/2) e^{i xi}|02>``.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

POLE_ZONE = 1e-4
MIN_SAMPLES = 2000


class Scheme(str, enum.Enum):
    SNGQC = "SNGQC"
    UNGQC = "UNGQC"
    DYNAMICAL = "DYNAMICAL"


class SingularTrajectoryError(ValueError):
    pass


class RegimeViolationError(ValueError):
    pass


class InvalidPathError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PulseSegment:
    """Constant ``g_e``, ``delta_e`` and a linear phase ``phi_a + phi_b * t_local``."""

    duration: float
    g_e: float
    phi_a: float
    phi_b: float = 0.0
    delta_e: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")

    def phi_e(self, t_local):
        return self.phi_a + self.phi_b * np.asarray(t_local)


@dataclass(frozen=True)
class PulseSchedule:
    segments: tuple[PulseSegment, ...]
    scheme: Scheme
    gamma_target: float
    chi: float | None = None
    eta: float | None = None
    xi1: float = 0.0
    gamma: float | None = None  # phase actually encoded (may differ from target by 2*pi)

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])[:-1]])

    @property
    def g_e(self) -> float:
        return max(s.g_e for s in self.segments)

    def frame_angle(self, t=None) -> float:
        """Accumulated ``integral(delta_e dt)`` up to ``t`` (whole gate by default)."""
        if t is None:
            return float(sum(s.delta_e * s.duration for s in self.segments))
        total = 0.0
        for s, t0 in zip(self.segments, self.starts):
            total += s.delta_e * float(np.clip(t - t0, 0.0, s.duration))
        return total

    def segment_at(self, t: float) -> tuple[int, float]:
        """Index of the segment containing ``t`` and the local time within it."""
        starts = self.starts
        i = int(np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1))
        return i, t - starts[i]


@dataclass(frozen=True)
class DriveSegment:
    """Flux-drive settings realizing one schedule segment.

    ``drive_phase`` is referenced to the gate start, i.e. the flux is
    ``phi_dc + phi_ac * cos(omega_phi * t + drive_phase)`` with global ``t``.
    """

    duration: float
    omega_phi: float
    delta: float
    drive_phase: float
    phi_ac: float
    phi_dc: float


@dataclass(frozen=True)
class PathSample:
    t: float
    chi: float
    xi: float
    segment: int = field(default=0, compare=False)


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def _sngqc(gamma: float, g_e: float, xi1: float):
    xi2 = xi1 - gamma
    tau = np.pi / g_e
    return (
        PulseSegment(tau, g_e, xi1 + np.pi / 2),
        PulseSegment(tau, g_e, xi2 - np.pi / 2),
    )


def latitude_parameters(gamma: float, chi: float, eta: float, g_e: float):
    """Signed latitude duration, phase slope and detuning of the triangle cap."""
    k = (1 + eta) * np.cos(chi) - eta
    s = np.sin(chi)
    if abs(k) < 1e-12 or abs(s * k) < 1e-15:
        raise SingularTrajectoryError(
            f"(1+eta)cos(chi) - eta vanishes at chi={chi / np.pi:.6f}pi, eta={eta}"
        )
    duration = 2 * gamma * s * k / ((1 + eta) * (1 - np.cos(chi))) / g_e
    slope = -g_e / (s * k)
    detuning = g_e / (s * k) - g_e / np.tan(chi)
    return duration, slope, detuning


def synthesize(
    scheme,
    gamma_target: float,
    chi: float | None = None,
    eta: float = 0.5,
    g_e: float = 2 * np.pi * 2.0,
    xi1: float = 0.0,
) -> PulseSchedule:
    """Compile ``diag(1, 1, 1, exp(i*gamma_target))`` into a segment list."""
    scheme = Scheme(scheme)
    if not -2 * np.pi < gamma_target < 2 * np.pi or gamma_target == 0:
        raise ValueError(f"target phase {gamma_target} outside (-2pi, 2pi) \\ {{0}}")
    if not g_e > 0:
        raise ValueError("effective coupling must be positive")

    if scheme is Scheme.SNGQC:
        return PulseSchedule(_sngqc(gamma_target, g_e, xi1), scheme, gamma_target,
                             chi=np.pi, xi1=xi1, gamma=gamma_target)

    if scheme is Scheme.DYNAMICAL:
        # U(pi/2, pi) U(theta, +-pi/2) U(pi/2, 0) = exp(+-i theta/2 sigma_z) on (|11>, |02>)
        theta = 2 * abs(gamma_target)
        mid = np.sign(gamma_target) * np.pi / 2
        segs = (
            PulseSegment(0.5 * np.pi / g_e, g_e, 0.0),
            PulseSegment(theta / g_e, g_e, mid),
            PulseSegment(0.5 * np.pi / g_e, g_e, np.pi),
        )
        return PulseSchedule(segs, scheme, gamma_target, gamma=gamma_target)

    if chi is None or not 0 < chi <= np.pi:
        raise ValueError(f"chi must lie in (0, pi], got {chi}")
    if eta in (0, -1):
        raise ValueError("eta must differ from 0 and -1")
    if np.isclose(chi, np.pi, rtol=0, atol=1e-12):
        segs = _sngqc(gamma_target, g_e, xi1)
        return PulseSchedule(segs, scheme, gamma_target, chi=np.pi, eta=eta, xi1=xi1,
                             gamma=gamma_target)

    gamma = gamma_target
    t_lat, slope, det = latitude_parameters(gamma, chi, eta, g_e)
    if t_lat < 0:
        gamma = gamma - 2 * np.pi * np.sign(gamma)
        warnings.warn(
            f"latitude duration negative at chi={chi / np.pi:.3f}pi; "
            f"encoding gamma={gamma:.4f} instead (same gate mod 2pi)"
        )
        t_lat, slope, det = latitude_parameters(gamma, chi, eta, g_e)
    t_lon = chi / g_e
    xi2 = xi1 + slope * t_lat
    segs = [PulseSegment(t_lon, g_e, xi1 + np.pi / 2)]
    if t_lat > 1e-15:
        segs.append(PulseSegment(t_lat, g_e, xi1, slope, det))
    segs.append(PulseSegment(t_lon, g_e, xi2 - np.pi / 2))
    return PulseSchedule(tuple(segs), scheme, gamma_target, chi=chi, eta=eta, xi1=xi1,
                         gamma=gamma)


def drive_schedule(
    schedule: PulseSchedule,
    delta12_phi: float,
    alpha2: float,
    phi_dc: float,
    phi_ac: float,
    g_e_sign: float = 1.0,
) -> list[DriveSegment]:
    """Map effective-frame segments onto flux-drive frequency and phase.

    The effective frame differs from the qubit frame by ``exp(-i theta(t) sigma_z/2)``
    with ``theta`` the running integral of ``delta_e``; the drive phase absorbs
    the accumulated ``theta`` so consecutive segments stay continuous.  A
    negative physical ``g_e`` is absorbed as an extra ``pi`` of drive phase.
    """
    carrier = delta12_phi - alpha2
    out = []
    theta = 0.0
    for seg, t0 in zip(schedule.segments, schedule.starts):
        delta = seg.phi_b + seg.delta_e
        if abs(delta) >= 0.1 * abs(carrier):
            raise RegimeViolationError(
                f"|delta|={abs(delta):.3g} rad/us not small against {abs(carrier):.3g} rad/us"
            )
        phase = seg.phi_a + theta - delta * t0
        if g_e_sign < 0:
            phase += np.pi
        out.append(DriveSegment(seg.duration, carrier + delta, delta,
                                float(np.angle(np.exp(1j * phase))), phi_ac, phi_dc))
        theta += seg.delta_e * seg.duration
    return out


def ideal_gate(gamma: float) -> np.ndarray:
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * gamma)]).astype(complex)


# ---------------------------------------------------------------------------
# Bloch-sphere trajectory and phase bookkeeping
# ---------------------------------------------------------------------------


def _rates(chi, xi, phi_e, g_e, delta_e):
    d = phi_e - xi
    chi_dot = g_e * np.sin(d)
    c = np.cos(d)
    if c == 0.0 or abs(c) < 1e-15:
        xi_dot = -delta_e
    else:
        xi_dot = -delta_e - g_e * c / np.tan(chi)
    return chi_dot, xi_dot


def _near_pole(chi: float) -> bool:
    return chi < POLE_ZONE or chi > np.pi - POLE_ZONE


def integrate_path(schedule: PulseSchedule, samples_per_segment: int = MIN_SAMPLES,
                   xi0: float | None = None) -> list[PathSample]:
    """Fixed-step RK4 solution of the polar/azimuth equations of motion.

    Starting at the north pole. Inside ``POLE_ZONE`` of either pole the azimuth
    is undefined, so steps there follow the exact meridian solution and the
    azimuth is re-seated to the one selected by the segment phase. A re-seat
    appears as two samples sharing the same ``t``.
    """
    n = max(int(samples_per_segment), MIN_SAMPLES)
    chi = 0.0
    xi = schedule.xi1 if xi0 is None else xi0
    t = 0.0
    out = [PathSample(t, chi, xi, 0)]
    for k, seg in enumerate(schedule.segments):
        h = seg.duration / n
        if _near_pole(chi) and seg.phi_b == 0 and seg.delta_e == 0:
            # meridian leaving a pole: azimuth set by the drive phase
            direction = 1.0 if chi < np.pi / 2 else -1.0
            new_xi = seg.phi_a - direction * np.pi / 2
            if not np.isclose(np.angle(np.exp(1j * (new_xi - xi))), 0.0, atol=1e-12):
                xi = new_xi
                out.append(PathSample(t, chi, xi, k))
            else:
                xi = new_xi
        for i in range(n):
            tl = i * h
            if _near_pole(chi):
                chi_dot, _ = _rates(chi, xi, seg.phi_e(tl), seg.g_e, 0.0)
                chi_new = chi + chi_dot * h
                xi_new = xi
            else:
                def f(tt, y):
                    return np.array(_rates(y[0], y[1], seg.phi_e(tt), seg.g_e, seg.delta_e))

                y = np.array([chi, xi])
                k1 = f(tl, y)
                k2 = f(tl + h / 2, y + h / 2 * k1)
                k3 = f(tl + h / 2, y + h / 2 * k2)
                k4 = f(tl + h, y + h * k3)
                chi_new, xi_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not -1e-6 <= chi_new <= np.pi + 1e-6:
                raise IntegrationError(f"polar angle left [0, pi] at t={t + tl:.6g}")
            chi, xi = float(np.clip(chi_new, 0.0, np.pi)), float(xi_new)
            out.append(PathSample(t + (i + 1) * h, chi, xi, k))
        t += seg.duration
    return out


def _ratio(num: float, den: float, tol: float = 1e-12) -> float:
    # numerator first: 0/0 on meridians through the equator contributes nothing
    if abs(num) < tol:
        return 0.0
    if abs(den) < 1e-12:
        raise InvalidPathError("phase integrand diverges where cos(chi) = 0")
    return num / den


def phase_accounting(samples: list[PathSample], schedule: PulseSchedule):
    """Total, dynamical and geometric phase ``(gamma, gamma_d, gamma_g)``.

    Trapezoid rule in time on each segment; azimuth re-seats at a pole enter
    as Stieltjes increments.
    """
    gamma = gamma_d = gamma_g = 0.0
    for a, b in zip(samples[:-1], samples[1:]):
        seg = schedule.segments[b.segment]
        dt = b.t - a.t
        if dt == 0.0:
            dxi = b.xi - a.xi
            c = np.cos(0.5 * (a.chi + b.chi))
            gamma += _ratio((1 - c) * dxi, 2 * c)
            gamma_d += _ratio((1 - c * c) * dxi, 2 * c)
            gamma_g += -0.5 * (1 - c) * dxi
            continue
        t0 = schedule.starts[b.segment]
        vals = []
        for s in (a, b):
            if _near_pole(s.chi):
                xi_dot = 0.0 if seg.delta_e == 0 else -seg.delta_e
            else:
                _, xi_dot = _rates(s.chi, s.xi, seg.phi_e(s.t - t0), seg.g_e, seg.delta_e)
            c = np.cos(s.chi)
            vals.append((
                _ratio(xi_dot * (1 - c) + seg.delta_e, 2 * c),
                _ratio(xi_dot * (1 - c * c) + seg.delta_e, 2 * c),
                -0.5 * xi_dot * (1 - c),
            ))
        gamma += 0.5 * dt * (vals[0][0] + vals[1][0])
        gamma_d += 0.5 * dt * (vals[0][1] + vals[1][1])
        gamma_g += 0.5 * dt * (vals[0][2] + vals[1][2])
    if abs(gamma - gamma_d - gamma_g) > 1e-6:
        raise InvalidPathError(
            f"phase ledger does not close: {gamma:.9f} != {gamma_d:.9f} + {gamma_g:.9f}"
        )
    return gamma, gamma_d, gamma_g
