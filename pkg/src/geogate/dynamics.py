"""Fixed-step RK4 propagation: unitary and Lindblad.

Generators are callables ``H(t) -> (d, d) array``. When the generator also
has a ``batch(times) -> (n, d, d)`` method the unitary propagator evaluates
all RK4 stages at once and folds the per-step maps with a pairwise product,
which is much faster than a Python loop over steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import qmath

CHUNK = 4096
UNITARITY_TOL = 1e-8
TRACE_TOL = 1e-6


class StepSizeError(RuntimeError):
    pass


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("a time grid needs at least one step")

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.steps + 1)

    @classmethod
    def covering(cls, t0: float, t1: float, h_max: float, min_steps: int = 1) -> "TimeGrid":
        steps = max(int(np.ceil((t1 - t0) / h_max - 1e-9)), min_steps)
        return cls(t0, t1, steps)


@dataclass(frozen=True)
class LindbladConfig:
    kappa_minus: float = 0.0
    kappa_z: float = 0.0
    modes: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        if self.kappa_minus < 0 or self.kappa_z < 0:
            raise ValueError("decoherence rates must be non-negative")


def collapse_operators(dims: Sequence[int], mode: int) -> tuple[np.ndarray, np.ndarray]:
    """Decay ``|0><1| + sqrt2 |1><2|`` and dephasing ``|1><1| + 2|2><2|`` on ``mode``."""
    dims = tuple(dims)
    if dims[mode] != 3:
        raise qmath.DimensionError(f"collapse operators need a 3-level mode, got {dims[mode]}")
    d_minus = qmath.ladder(3)
    d_z = np.diag([0.0, 1.0, 2.0]).astype(complex)
    return qmath.embed(d_minus, mode, dims), qmath.embed(d_z, mode, dims)


# ---------------------------------------------------------------------------
# unitary
# ---------------------------------------------------------------------------


def _stage_hamiltonians(generator, times: np.ndarray) -> np.ndarray:
    if hasattr(generator, "batch"):
        return np.asarray(generator.batch(times), dtype=complex)
    return np.array([generator(t) for t in times], dtype=complex)


def _rk4_maps(h1: np.ndarray, h2: np.ndarray, h3: np.ndarray, h: float) -> np.ndarray:
    """Per-step RK4 propagators for ``dU/dt = -i H(t) U``."""
    a1, a2, a3 = -1j * h1, -1j * h2, -1j * h3
    eye = np.eye(h1.shape[-1], dtype=complex)
    k1 = a1
    k2 = a2 @ (eye + 0.5 * h * k1)
    k3 = a2 @ (eye + 0.5 * h * k2)
    k4 = a3 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _ordered_product(maps: np.ndarray) -> np.ndarray:
    """``maps[n-1] @ ... @ maps[0]`` by pairwise reduction."""
    while maps.shape[0] > 1:
        if maps.shape[0] % 2:
            maps = np.concatenate([maps, np.eye(maps.shape[-1], dtype=complex)[None]], axis=0)
        maps = maps[1::2] @ maps[0::2]
    return maps[0]


def propagate_unitary(generator: Callable[[float], np.ndarray], grid: TimeGrid,
                      check: bool = True) -> np.ndarray:
    """``U(t1)`` solving ``i dU/dt = H(t) U`` with ``U(t0) = I``."""
    h = grid.h
    u = None
    for start in range(0, grid.steps, CHUNK):
        n = min(CHUNK, grid.steps - start)
        t = grid.t0 + h * np.arange(start, start + n)
        stages = _stage_hamiltonians(generator, np.concatenate([t, t + 0.5 * h, t + h]))
        maps = _rk4_maps(stages[:n], stages[n:2 * n], stages[2 * n:], h)
        block = _ordered_product(maps)
        u = block if u is None else block @ u
    if check:
        defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
        if defect > UNITARITY_TOL:
            raise StepSizeError(
                f"unitarity defect {defect:.2e} exceeds {UNITARITY_TOL:.0e}; refine the time step"
            )
    return u


def propagate_piecewise(pieces, check: bool = True) -> np.ndarray:
    """Compose ``propagate_unitary`` over ``[(generator, grid), ...]`` in time order."""
    u = None
    for gen, grid in pieces:
        step = propagate_unitary(gen, grid, check=False)
        u = step if u is None else step @ u
    if check:
        defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
        if defect > UNITARITY_TOL:
            raise StepSizeError(f"unitarity defect {defect:.2e}; refine the time step")
    return u


# ---------------------------------------------------------------------------
# Lindblad
# ---------------------------------------------------------------------------


class _Dissipator:
    def __init__(self, ops: Sequence[np.ndarray], rates: Sequence[float]):
        self.terms = [(0.5 * r, d, d.conj().T, d.conj().T @ d)
                      for d, r in zip(ops, rates) if r > 0]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho)
        for half_rate, d, dd, ddd in self.terms:
            out += half_rate * (2 * d @ rho @ dd - ddd @ rho - rho @ ddd)
        return out


def lindblad_operators(cfg: LindbladConfig, dims: Sequence[int], subspace=None):
    """Collapse operators and rates, optionally restricted to ``subspace`` indices."""
    ops, rates = [], []
    for m in cfg.modes:
        dm, dz = collapse_operators(dims, m)
        if subspace is not None:
            idx = np.asarray(subspace)
            dm, dz = dm[np.ix_(idx, idx)], dz[np.ix_(idx, idx)]
        ops += [dm, dz]
        rates += [cfg.kappa_minus, cfg.kappa_z]
    return ops, rates


def propagate_lindblad(
    generator: Callable[[float], np.ndarray],
    rho0: np.ndarray,
    ops: Sequence[np.ndarray],
    rates: Sequence[float],
    grid: TimeGrid,
    sample_every: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """RK4 integration of the master equation.

    ``rho0`` may carry leading batch axes, e.g. ``(n_states, d, d)``. The
    right-hand side is evaluated directly; no superoperator is formed. Returns
    ``(times, trajectory)`` with the trajectory stacked along axis 0; only the
    final state is kept when ``sample_every`` is 0.
    """
    diss = _Dissipator(ops, rates)
    rho = np.array(rho0, dtype=complex)
    tr0 = np.trace(rho, axis1=-2, axis2=-1)
    h = grid.h

    def rhs(hm, r):
        return -1j * (hm @ r - r @ hm) + diss(r)

    times, traj = [grid.t0], [rho.copy()]
    for start in range(0, grid.steps, CHUNK):
        n = min(CHUNK, grid.steps - start)
        t = grid.t0 + h * np.arange(start, start + n)
        stages = _stage_hamiltonians(generator, np.concatenate([t, t + 0.5 * h, t + h]))
        for i in range(n):
            h1, h2, h3 = stages[i], stages[n + i], stages[2 * n + i]
            k1 = rhs(h1, rho)
            k2 = rhs(h2, rho + 0.5 * h * k1)
            k3 = rhs(h2, rho + 0.5 * h * k2)
            k4 = rhs(h3, rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            step = start + i + 1
            if sample_every and (step % sample_every == 0 or step == grid.steps):
                times.append(grid.t0 + h * step)
                traj.append(rho.copy())
    drift = np.max(np.abs(np.trace(rho, axis1=-2, axis2=-1) - tr0))
    if drift > TRACE_TOL:
        raise IntegrationError(f"trace drifted by {drift:.2e}")
    if not sample_every:
        times.append(grid.t1)
        traj.append(rho)
    return np.asarray(times), np.stack(traj)
