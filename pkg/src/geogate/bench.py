"""Gate fidelities and the robustness / decoherence / landscape scans.

Two simulation levels are provided:

* the effective two-level model on ``{|00>, |01>, |10>, |11>, |02>}`` (5 dims),
  optionally with a ZZ or qubit-drift diagonal added;
* the modulated exchange model on the two-transmon 9-dim space, which keeps
  every fast-oscillating term of the flux modulation.

Propagators from the modulated model are reported in the effective frame,
i.e. multiplied by ``exp(+i theta(t) sigma_z / 2)`` on ``(|11>, |02>)``
where ``theta`` is the accumulated effective detuning of the schedule.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import device as dev
from . import qmath
from .dynamics import (
    LindbladConfig,
    TimeGrid,
    lindblad_operators,
    propagate_lindblad,
    propagate_unitary,
)
from .geopath import PulseSchedule, Scheme, drive_schedule, ideal_gate, synthesize

log = logging.getLogger(__name__)

# index maps
EFF_DIM = 5
EFF_COMP = (0, 1, 2, 3)
EFF_11, EFF_02 = 3, 4
# 5-dim states as (n1, n2) levels, used to restrict two-transmon operators
EFF_LEVELS = ((0, 0), (0, 1), (1, 0), (1, 1), (0, 2))
EFF_IN_9 = tuple(3 * n1 + n2 for n1, n2 in EFF_LEVELS)
FULL_COMP = (dev.I00, dev.I01, dev.I10, dev.I11)

SAMPLES_PER_SEGMENT = 2000
SAMPLES_PER_PERIOD = 50
MIN_QUADRATURE = 8


class QuadratureError(ValueError):
    pass


@dataclass
class ScanResult:
    """Tabular sweep output: ordered axes plus one or more value grids."""

    axes: list[tuple[str, np.ndarray]]
    values: dict[str, np.ndarray]
    scheme: str = ""
    device: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(len(v) for _, v in self.axes)
        for name, grid in self.values.items():
            if np.shape(grid) != shape:
                raise ValueError(f"column {name} has shape {np.shape(grid)}, axes need {shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v) for _, v in self.axes)

    def rows(self):
        """Row-major iteration: ``(axis values..., column values...)``."""
        names = list(self.values)
        for idx in np.ndindex(*self.shape):
            coords = [float(ax[i]) for (_, ax), i in zip(self.axes, idx)]
            yield coords + [self.values[n][idx] for n in names]

    @property
    def header(self) -> list[str]:
        return [n for n, _ in self.axes] + list(self.values)


# ---------------------------------------------------------------------------
# fidelity
# ---------------------------------------------------------------------------


def gate_fidelity(u: np.ndarray, u_ideal: np.ndarray) -> float:
    """``|Tr(U_ideal^dag U)| / Tr(U_ideal^dag U_ideal)``; global phase drops out."""
    num = np.trace(u_ideal.conj().T @ u)
    den = np.trace(u_ideal.conj().T @ u_ideal).real
    return float(abs(num) / den)


def product_states(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform ``n x n`` grid of ``(cos t1|0>+sin t1|1>) x (cos t2|0>+sin t2|1>)``.

    Returns ``(thetas, states)`` with ``states`` of shape ``(n*n, 4)`` in the
    ``|00>, |01>, |10>, |11>`` basis, ordered row-major over ``(t1, t2)``.
    """
    if n < MIN_QUADRATURE:
        raise QuadratureError(f"need at least {MIN_QUADRATURE} nodes per angle, got {n}")
    th = 2 * np.pi * np.arange(n) / n
    q1 = np.stack([np.cos(th), np.sin(th)], axis=1)
    psi = np.einsum("ai,bj->abij", q1, q1).reshape(n * n, 4)
    return th, psi


def embed_states(psi4: np.ndarray, dim: int, comp: Sequence[int]) -> np.ndarray:
    out = np.zeros(psi4.shape[:-1] + (dim,), dtype=complex)
    out[..., list(comp)] = psi4
    return out


def average_state_fidelity(rho_traj: np.ndarray, u_ideal: np.ndarray, n: int,
                           comp: Sequence[int] = EFF_COMP) -> np.ndarray:
    """Average of ``<psi_ideal|rho(t)|psi_ideal>`` over the product-state grid.

    ``rho_traj`` has shape ``(n_times, n*n, d, d)`` (or ``(n*n, d, d)``) with
    the batch axis ordered as :func:`product_states`.
    """
    _, psi0 = product_states(n)
    rho_traj = np.asarray(rho_traj)
    single = rho_traj.ndim == 3
    if single:
        rho_traj = rho_traj[None]
    target = embed_states(psi0 @ u_ideal.T, rho_traj.shape[-1], comp)
    f = np.einsum("bi,tbij,bj->t", target.conj(), rho_traj, target).real / (n * n)
    return f[0] if single else f


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


class EffectiveGenerator:
    """One schedule segment on the 5-dim space, time measured globally."""

    def __init__(self, seg, t0: float, extra_diag=None):
        self.seg = seg
        self.t0 = t0
        self.extra = np.zeros(EFF_DIM) if extra_diag is None else np.asarray(extra_diag, float)

    def batch(self, t):
        t = np.atleast_1d(t) - self.t0
        h = np.zeros((t.size, EFF_DIM, EFF_DIM), dtype=complex)
        h[:, range(EFF_DIM), range(EFF_DIM)] = self.extra
        h[:, EFF_11, EFF_11] += -0.5 * self.seg.delta_e
        h[:, EFF_02, EFF_02] += 0.5 * self.seg.delta_e
        off = 0.5 * self.seg.g_e * np.exp(-1j * self.seg.phi_e(t))
        h[:, EFF_11, EFF_02] = off
        h[:, EFF_02, EFF_11] = off.conj()
        return h

    def __call__(self, t):
        return self.batch([t])[0]


class ModulatedGenerator:
    """Exchange Hamiltonian in the qubit frame for one drive segment."""

    def __init__(self, model: dev.InteractionFrameModel, drive, extra_diag=None):
        self.model = model
        self.drive = drive
        self.extra = extra_diag

    def batch(self, t):
        h = self.model.batch(t, self.drive.omega_phi, self.drive.drive_phase)
        if self.extra is not None:
            h[:, range(9), range(9)] += self.extra
        return h

    def __call__(self, t):
        return self.batch([t])[0]


def effective_step(seg) -> float:
    fastest = max(abs(seg.phi_b), abs(seg.delta_e), seg.g_e) / (2 * np.pi)
    return min(seg.duration / SAMPLES_PER_SEGMENT, 1.0 / (SAMPLES_PER_PERIOD * fastest))


def modulated_step(seg, drive) -> float:
    fastest = 3 * abs(drive.omega_phi) / (2 * np.pi)
    return min(seg.duration / SAMPLES_PER_SEGMENT, 1.0 / (SAMPLES_PER_PERIOD * fastest))


def _segment_grids(schedule: PulseSchedule, steps, refine: int = 1):
    for seg, t0, h in zip(schedule.segments, schedule.starts, steps):
        yield seg, t0, TimeGrid.covering(t0, t0 + seg.duration, h / refine)


def zz_diagonal(xi: float) -> np.ndarray:
    """``xi * sigma_z x sigma_z`` on the 5-dim space; zero on |02>."""
    return xi * np.array([1.0, -1.0, -1.0, 1.0, 0.0])


def drift_diagonal(d1: float, d2: float, g_e: float) -> np.ndarray:
    """Qubit frequency shifts ``(d1 n1 + d2 n2) g_e`` on the 5-dim space."""
    n1 = np.array([n for n, _ in EFF_LEVELS], float)
    n2 = np.array([m for _, m in EFF_LEVELS], float)
    return g_e * (d1 * n1 + d2 * n2)


def effective_propagator(schedule: PulseSchedule, extra_diag=None, refine: int = 1) -> np.ndarray:
    """5x5 propagator of the effective model over the whole schedule."""
    u = np.eye(EFF_DIM, dtype=complex)
    steps = [effective_step(s) for s in schedule.segments]
    for seg, t0, grid in _segment_grids(schedule, steps, refine):
        u = propagate_unitary(EffectiveGenerator(seg, t0, extra_diag), grid) @ u
    return u


def frame_alignment(theta: float, dim: int, i11: int, i02: int) -> np.ndarray:
    """Diagonal ``V(theta)^dag`` taking qubit-frame states into the effective frame."""
    v = np.ones(dim, dtype=complex)
    v[i11] = np.exp(0.5j * theta)
    v[i02] = np.exp(-0.5j * theta)
    return np.diag(v)


@dataclass(frozen=True)
class ModulatedSetup:
    """Device bias and exchange model for a target effective coupling."""

    params: dev.DeviceParams
    phi_dc: float
    phi_ac: float
    model: dev.InteractionFrameModel

    @classmethod
    def for_coupling(cls, params: dev.DeviceParams, g_e: float, phi_ac: float = 0.1,
                     block: bool = False) -> "ModulatedSetup":
        phi_dc = dev.flux_for_effective_coupling(params, g_e, phi_ac)
        drive = dev.FluxDrive(phi_dc, phi_ac)
        return cls(params, phi_dc, phi_ac, dev.InteractionFrameModel.from_device(params, drive, block))

    def drives(self, schedule: PulseSchedule):
        return drive_schedule(schedule, self.model.delta12_phi, self.model.alpha2,
                              self.phi_dc, self.phi_ac, np.sign(self.model.g_e))


def modulated_propagator(schedule: PulseSchedule, setup: ModulatedSetup, refine: int = 1,
                         extra_diag=None) -> np.ndarray:
    """9x9 propagator of the modulated model, expressed in the effective frame."""
    drives = setup.drives(schedule)
    u = np.eye(9, dtype=complex)
    steps = [modulated_step(s, d) for s, d in zip(schedule.segments, drives)]
    for (seg, t0, grid), drv in zip(_segment_grids(schedule, steps, refine), drives):
        u = propagate_unitary(ModulatedGenerator(setup.model, drv, extra_diag), grid) @ u
    return frame_alignment(schedule.frame_angle(), 9, dev.I11, dev.I02) @ u


def project(u: np.ndarray, comp: Sequence[int]) -> np.ndarray:
    idx = list(comp)
    return u[np.ix_(idx, idx)]


def effective_gate_fidelity(schedule: PulseSchedule, extra_diag=None, refine: int = 1) -> float:
    u = effective_propagator(schedule, extra_diag, refine)
    return gate_fidelity(project(u, EFF_COMP), ideal_gate(schedule.gamma_target))


def modulated_gate_fidelity(schedule: PulseSchedule, setup: ModulatedSetup, refine: int = 1) -> float:
    u = modulated_propagator(schedule, setup, refine)
    return gate_fidelity(project(u, FULL_COMP), ideal_gate(schedule.gamma_target))


# ---------------------------------------------------------------------------
# open-system evolution
# ---------------------------------------------------------------------------


def _lindblad_over_schedule(schedule, generators, steps, rho0, ops, rates, samples, refine=1):
    """Run the master equation segment by segment; returns ``(t, rho_traj)``."""
    ts, trajs = [], []
    rho = rho0
    for (seg, t0, grid), gen in zip(_segment_grids(schedule, steps, refine), generators):
        every = max(grid.steps // samples, 1) if samples else 0
        t, traj = propagate_lindblad(gen, rho, ops, rates, grid, sample_every=every)
        rho = traj[-1]
        if samples:
            # keep the segment start so boundary discontinuities are visible
            ts.append(t)
            trajs.append(traj)
    if not samples:
        return np.array([schedule.duration]), rho[None]
    return np.concatenate(ts), np.concatenate(trajs)


def effective_lindblad(schedule: PulseSchedule, kappa: float, n: int = 16,
                       samples: int = 0, extra_diag=None, refine: int = 1):
    """``(t, rho)`` for every product input state under the effective model."""
    cfg = LindbladConfig(kappa, kappa, (0, 1))
    ops, rates = lindblad_operators(cfg, (3, 3), subspace=EFF_IN_9)
    _, psi4 = product_states(n)
    psi = embed_states(psi4, EFF_DIM, EFF_COMP)
    rho0 = np.einsum("bi,bj->bij", psi, psi.conj())
    gens = [EffectiveGenerator(s, t0, extra_diag) for s, t0 in zip(schedule.segments, schedule.starts)]
    steps = [effective_step(s) for s in schedule.segments]
    return _lindblad_over_schedule(schedule, gens, steps, rho0, ops, rates, samples, refine)


def effective_decoherence(schedule: PulseSchedule, kappa: float, n: int = 16,
                          samples: int = 0, extra_diag=None, refine: int = 1):
    """``(t, F_dec(t))`` of the effective model with uniform decay and dephasing."""
    t, traj = effective_lindblad(schedule, kappa, n, samples, extra_diag, refine)
    return t, average_state_fidelity(traj, ideal_gate(schedule.gamma_target), n, EFF_COMP)


def modulated_decoherence(schedule: PulseSchedule, setup: ModulatedSetup, kappa: float,
                          n: int = 16, samples: int = 0, refine: int = 1):
    """``(t, F_dec(t))`` of the modulated 9-dim model with decoherence on both qubits."""
    cfg = LindbladConfig(kappa, kappa, (0, 1))
    ops, rates = lindblad_operators(cfg, (3, 3))
    _, psi4 = product_states(n)
    psi = embed_states(psi4, 9, FULL_COMP)
    rho0 = np.einsum("bi,bj->bij", psi, psi.conj())
    drives = setup.drives(schedule)
    gens = [ModulatedGenerator(setup.model, d) for d in drives]
    steps = [modulated_step(s, d) for s, d in zip(schedule.segments, drives)]
    t, traj = _lindblad_over_schedule(schedule, gens, steps, rho0, ops, rates, samples, refine)
    # rotate every sample into the effective frame
    v = np.stack([np.diag(frame_alignment(schedule.frame_angle(tt), 9, dev.I11, dev.I02))
                  for tt in t])
    traj = v[:, None, :, None] * traj * v.conj()[:, None, None, :]
    return t, average_state_fidelity(traj, ideal_gate(schedule.gamma_target), n, FULL_COMP)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------


def _quiet_synthesize(*args, **kwargs) -> PulseSchedule:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return synthesize(*args, **kwargs)


def _map(func, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))  # map preserves submission order


def default_threads() -> int:
    return max(1, min(os.cpu_count() or 1, 8))


def _landscape_cell(args):
    params, gamma, chi, g_e, eta, phi_ac, block = args
    try:
        setup = ModulatedSetup.for_coupling(params, g_e, phi_ac, block)
        sch = _quiet_synthesize(Scheme.UNGQC, gamma, chi=chi, eta=eta, g_e=g_e)
        return modulated_gate_fidelity(sch, setup)
    except (dev.DeviceError, ValueError) as exc:
        log.info("landscape cell chi=%.4f g_e=%.4f skipped: %s", chi, g_e, exc)
        return np.nan


def landscape_scan(gamma: float, chis, g_es, params: dev.DeviceParams | None = None,
                   eta: float = 0.5, phi_ac: float = 0.1, threads: int = 1,
                   block: bool = False) -> ScanResult:
    """UNGQC fidelity under the modulated model over a ``(chi, g_e)`` grid.

    Unrealizable cells are NaN.
    """
    params = params or dev.reference_device()
    chis, g_es = np.asarray(chis, float), np.asarray(g_es, float)
    cells = [(params, gamma, c, g, eta, phi_ac, block) for c in chis for g in g_es]
    f = np.array(_map(_landscape_cell, cells, threads)).reshape(len(chis), len(g_es))
    return ScanResult(
        axes=[("chi_rad", chis), ("g_e_rad_per_us", g_es)],
        values={"fidelity": f},
        scheme=Scheme.UNGQC.value,
        device=params.to_mhz(),
        meta={"gamma": gamma, "eta": eta, "phi_ac": phi_ac, "model": "modulated"},
    )


def robust_schedule(scheme, gamma, chi, eta, g_e) -> PulseSchedule:
    return _quiet_synthesize(scheme, gamma, chi=chi, eta=eta, g_e=g_e)


def _zz_cell(args):
    sch, xi = args
    return 1.0 - effective_gate_fidelity(sch, zz_diagonal(xi))


def zz_robustness_scan(gamma: float, scheme, chi: float = 0.43 * np.pi, eta: float = 0.5,
                       g_e: float = dev.mhz(2.0), xis=None, threads: int = 1) -> ScanResult:
    """Infidelity versus static ZZ strength (default ``[-0.1, 0.1] g_e``, 41 points)."""
    xis = np.linspace(-0.1, 0.1, 41) * g_e if xis is None else np.asarray(xis, float)
    sch = robust_schedule(scheme, gamma, chi, eta, g_e)
    inf = np.array(_map(_zz_cell, [(sch, x) for x in xis], threads))
    return ScanResult(
        axes=[("xi_zz_rad_per_us", xis)],
        values={"infidelity": inf},
        scheme=Scheme(scheme).value,
        schedule=schedule_snapshot(sch),
        meta={"gamma": gamma, "g_e": g_e},
    )


def _drift_cell(args):
    sch, d1, d2, g_e = args
    return 1.0 - effective_gate_fidelity(sch, drift_diagonal(d1, d2, g_e))


def drift_robustness_scan(gamma: float, scheme, chi: float = 0.43 * np.pi, eta: float = 0.5,
                          g_e: float = dev.mhz(2.0), d1s=None, d2s=None,
                          threads: int = 1) -> ScanResult:
    """Infidelity over relative qubit drifts ``(d1, d2)`` in units of ``g_e``."""
    d1s = np.linspace(-0.1, 0.1, 41) if d1s is None else np.asarray(d1s, float)
    d2s = np.linspace(-0.1, 0.1, 41) if d2s is None else np.asarray(d2s, float)
    sch = robust_schedule(scheme, gamma, chi, eta, g_e)
    cells = [(sch, a, b, g_e) for a in d1s for b in d2s]
    inf = np.array(_map(_drift_cell, cells, threads)).reshape(len(d1s), len(d2s))
    return ScanResult(
        axes=[("delta1", d1s), ("delta2", d2s)],
        values={"infidelity": inf},
        scheme=Scheme(scheme).value,
        schedule=schedule_snapshot(sch),
        meta={"gamma": gamma, "g_e": g_e},
    )


def _decoherence_cell(args):
    sch, kappa, n = args
    return effective_decoherence(sch, kappa, n)[1][-1]


def decoherence_scan(gamma: float, schemes=tuple(Scheme), g_e: float = dev.mhz(2.0),
                     kappas=None, chi: float = 0.43 * np.pi, eta: float = 0.5,
                     n: int = 16, threads: int = 1) -> ScanResult:
    """Final averaged fidelity versus ``kappa = kappa_minus = kappa_z`` (effective model)."""
    kappas = np.linspace(0.0, g_e / 250, 11) if kappas is None else np.asarray(kappas, float)
    schemes = [Scheme(s) for s in schemes]
    values = {}
    for s in schemes:
        sch = robust_schedule(s, gamma, chi, eta, g_e)
        values[f"F_{s.value}"] = np.array(
            _map(_decoherence_cell, [(sch, k, n) for k in kappas], threads))
    return ScanResult(axes=[("kappa_rad_per_us", kappas)], values=values,
                      meta={"gamma": gamma, "g_e": g_e, "chi": chi, "eta": eta, "n": n})


def time_resolved(gamma: float, scheme, kappa: float, g_e: float = dev.mhz(2.0),
                  chi: float = 0.43 * np.pi, eta: float = 0.5, n: int = 16, samples: int = 200,
                  params: dev.DeviceParams | None = None, model: str = "effective",
                  phi_ac: float = 0.1) -> ScanResult:
    """``F_dec(t)`` along the gate. ``model='modulated'`` keeps all fast terms."""
    sch = robust_schedule(scheme, gamma, chi, eta, g_e)
    if model == "effective":
        t, f = effective_decoherence(sch, kappa, n, samples=samples)
    elif model == "modulated":
        setup = ModulatedSetup.for_coupling(params or dev.reference_device(), g_e, phi_ac)
        t, f = modulated_decoherence(sch, setup, kappa, n, samples=samples)
    else:
        raise ValueError(f"unknown model {model!r}")
    return ScanResult(axes=[("t_us", t)], values={"F_dec": f}, scheme=Scheme(scheme).value,
                      schedule=schedule_snapshot(sch),
                      meta={"gamma": gamma, "kappa": kappa, "model": model})


def _gsweep_cell(args):
    params, gamma, scheme, g_e, kappa, chi, eta, n, phi_ac = args
    sch = robust_schedule(scheme, gamma, chi, eta, g_e)
    setup = ModulatedSetup.for_coupling(params, g_e, phi_ac)
    return modulated_decoherence(sch, setup, kappa, n)[1][-1]


def coupling_sweep(gamma: float, scheme, g_es, kappa: float = dev.mhz(2e-3),
                   params: dev.DeviceParams | None = None, chi: float = 0.43 * np.pi,
                   eta: float = 0.5, n: int = 16, phi_ac: float = 0.1,
                   threads: int = 1) -> ScanResult:
    """Final fidelity of the modulated model with decoherence versus ``g_e``."""
    params = params or dev.reference_device()
    g_es = np.asarray(g_es, float)
    cells = [(params, gamma, scheme, g, kappa, chi, eta, n, phi_ac) for g in g_es]
    f = np.array(_map(_gsweep_cell, cells, threads))
    return ScanResult(axes=[("g_e_rad_per_us", g_es)], values={"F_dec": f},
                      scheme=Scheme(scheme).value, device=params.to_mhz(),
                      meta={"gamma": gamma, "kappa": kappa, "chi": chi, "eta": eta, "n": n})


def fig1_scan(params: dev.DeviceParams | None = None, phi_ac: float = 0.1,
              detunings=None) -> ScanResult:
    """``|g_e|`` and ``|xi_ZZ|`` (closed form, perturbative sums, exact) versus ``omega_c - omega_1``."""
    from . import zzcalc

    params = params or dev.reference_device()
    detunings = (np.linspace(dev.mhz(1000), dev.mhz(3000), 41)
                 if detunings is None else np.asarray(detunings, float))
    cols = {k: np.full(len(detunings), np.nan)
            for k in ("g_e_abs", "xi_closed_abs", "xi_perturbative_abs", "xi_exact_abs", "flag")}
    for i, d in enumerate(detunings):
        wc = params.omega1 + d
        try:
            phi = dev.flux_for_coupler_frequency(params, wc)
            cols["g_e_abs"][i] = abs(dev.effective_coupling(params, dev.FluxDrive(phi, phi_ac)))
            cols["xi_closed_abs"][i] = abs(zzcalc.zz_closed_form(params, wc).total)
            cols["xi_perturbative_abs"][i] = abs(zzcalc.zz_perturbative(params, wc).total)
            cols["xi_exact_abs"][i] = abs(zzcalc.zz_exact(params, wc))
            cols["flag"][i] = 0
        except (dev.DeviceError, zzcalc.DegenerateLevelError, zzcalc.HybridizationError) as exc:
            log.warning("fig1 row %d flagged: %s", i, exc)
            cols["flag"][i] = 1
    return ScanResult(axes=[("omega_c_minus_omega_1_rad_per_us", detunings)], values=cols,
                      device=params.to_mhz(), meta={"phi_ac": phi_ac})


def schedule_snapshot(sch: PulseSchedule) -> dict:
    return {
        "scheme": sch.scheme.value,
        "gamma_target": sch.gamma_target,
        "gamma": sch.gamma,
        "chi": sch.chi,
        "eta": sch.eta,
        "xi1": sch.xi1,
        "segments": [asdict(s) for s in sch.segments],
    }


# ---------------------------------------------------------------------------
# three-mode lab-frame reference
# ---------------------------------------------------------------------------

LAB_LABELS = ((0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0))
LAB_SAMPLES_PER_PERIOD = 500


class LabFrameGenerator:
    """Full circuit Hamiltonian with a modulated coupler, in the frame of ``diag(H0(phi_dc))``."""

    def __init__(self, params: dev.DeviceParams, drive, phi_dc: float):
        self.params = params
        self.drive = drive
        self.phi_dc = phi_dc
        wc0 = dev.coupler_frequency(params, phi_dc)
        h0, v = dev.hamiltonian_parts(params, wc0)
        self.e_ref = np.real(np.diag(h0))
        self.nc = np.real(np.diag(qmath.embed(qmath.number(3), 2, qmath.DEFAULT_DIMS)))
        self.wc0 = wc0
        rows, cols = np.nonzero(v)
        self.rows, self.cols = rows, cols
        self.vals = v[rows, cols]
        self.freqs = self.e_ref[rows] - self.e_ref[cols]

    def batch(self, t):
        t = np.atleast_1d(np.asarray(t, float))
        phi = self.phi_dc + self.drive.phi_ac * np.cos(self.drive.omega_phi * t + self.drive.drive_phase)
        wc = self.params.omega_c0 * np.sqrt(np.abs(np.cos(np.pi * phi)))
        h = np.zeros((t.size, 27, 27), dtype=complex)
        h[:, range(27), range(27)] = (wc - self.wc0)[:, None] * self.nc
        h[:, self.rows, self.cols] = self.vals * np.exp(1j * np.outer(t, self.freqs))
        return h

    def __call__(self, t):
        return self.batch([t])[0]


def lab_step(seg, gen: LabFrameGenerator) -> float:
    fastest = max(np.max(np.abs(gen.freqs)), abs(gen.drive.omega_phi)) / (2 * np.pi)
    return min(seg.duration / SAMPLES_PER_SEGMENT, 1.0 / (LAB_SAMPLES_PER_PERIOD * fastest))


def lab_frame_propagator(schedule: PulseSchedule, setup: ModulatedSetup, refine: int = 1) -> np.ndarray:
    """4x4 computational block of the three-mode propagator in the dressed qubit frame.

    The dressed frame rotates each computational state at ``E10 n1 + E01 n2``
    (energies measured from ``E00``), so any conditional phase, including the
    static ZZ of the circuit, remains visible.
    """
    from . import zzcalc

    drives = setup.drives(schedule)
    u = np.eye(27, dtype=complex)
    for seg, t0, drv in zip(schedule.segments, schedule.starts, drives):
        gen = LabFrameGenerator(setup.params, drv, setup.phi_dc)
        grid = TimeGrid.covering(t0, t0 + seg.duration, lab_step(seg, gen) / refine)
        u = propagate_unitary(gen, grid) @ u
    tau = schedule.duration
    u = np.exp(-1j * gen.e_ref * tau)[:, None] * u
    h_dc = dev.full_system_hamiltonian(setup.params, gen.wc0)
    dressed = zzcalc.dressed_energies(h_dc, LAB_LABELS)
    w = np.stack([dressed[lbl][1] for lbl in LAB_LABELS], axis=1)
    e = {lbl: dressed[lbl][0] for lbl in LAB_LABELS}
    e00 = e[(0, 0, 0)]
    f2, f1 = e[(0, 1, 0)] - e00, e[(1, 0, 0)] - e00
    frame = np.exp(1j * np.array([0.0, f2, f1, f1 + f2]) * tau)
    return frame[:, None] * (w.conj().T @ u @ w)


def local_z_fidelity(u4: np.ndarray, u_ideal: np.ndarray) -> float:
    """Gate fidelity maximized over single-qubit Z rotations applied after ``u4``."""
    from scipy.optimize import minimize

    d = np.diag(u_ideal).conj() * np.diag(u4)
    n1 = np.array([0, 0, 1, 1])
    n2 = np.array([0, 1, 0, 1])

    def neg(x):
        return -abs(np.sum(d * np.exp(1j * (x[0] * n1 + x[1] * n2)))) / 4

    starts = [(a, b) for a in np.linspace(-np.pi, np.pi, 8, endpoint=False)
              for b in np.linspace(-np.pi, np.pi, 8, endpoint=False)]
    x0 = min(starts, key=neg)
    res = minimize(neg, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    return float(-res.fun)


@dataclass(frozen=True)
class HierarchyCheck:
    f_modulated: float
    f_lab: float
    f_modulated_raw: float
    f_lab_raw: float

    @property
    def gap(self) -> float:
        return abs(self.f_modulated - self.f_lab)


def model_hierarchy(gamma: float = np.pi, chi: float = 0.43 * np.pi, eta: float = 0.5,
                    g_e: float = dev.mhz(2.0), params: dev.DeviceParams | None = None,
                    phi_ac: float = 0.1, refine: int = 1) -> HierarchyCheck:
    """Compare the modulated exchange model with the three-mode circuit on one UNGQC gate."""
    params = params or dev.reference_device()
    setup = ModulatedSetup.for_coupling(params, g_e, phi_ac)
    sch = robust_schedule(Scheme.UNGQC, gamma, chi, eta, g_e)
    target = ideal_gate(gamma)
    u_mod = project(modulated_propagator(sch, setup, refine), FULL_COMP)
    u_lab = lab_frame_propagator(sch, setup, refine)
    return HierarchyCheck(
        f_modulated=local_z_fidelity(u_mod, target),
        f_lab=local_z_fidelity(u_lab, target),
        f_modulated_raw=gate_fidelity(u_mod, target),
        f_lab_raw=gate_fidelity(u_lab, target),
    )
