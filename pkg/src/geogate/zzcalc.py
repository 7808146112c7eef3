"""Static ZZ crosstalk of the coupler circuit.

Three routes to the same quantity ``E11 - E10 - E01 + E00``:

* ``zz_perturbative`` -- Rayleigh-Schroedinger sums over the low-excitation
  product states, order by order up to fourth order;
* ``zz_closed_form`` -- the approximate analytic expressions per order;
* ``zz_exact`` -- exact diagonalization with maximum-overlap labelling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmath
from .device import DeviceParams, hamiltonian_parts

DEGENERACY_TOL = 1e-6  # rad/us
TIE_TOL = 1e-3

# |Q1 Q2, C> labels of every product state with at most two excitations
BASIS_LABELS = (
    (0, 0, 0),
    (0, 1, 0),
    (1, 0, 0),
    (1, 1, 0),
    (0, 1, 1),
    (1, 0, 1),
    (0, 2, 0),
    (2, 0, 0),
    (0, 0, 2),
    (0, 0, 1),
)
S_STATES = {"00": (0, 0, 0), "01": (0, 1, 0), "10": (1, 0, 0), "11": (1, 1, 0)}


class DegenerateLevelError(ValueError):
    pass


class HybridizationError(ValueError):
    pass


@dataclass(frozen=True)
class ZZDecomposition:
    xi0: float
    xi1: float
    xi2: float
    xi3: float
    xi4: float

    @property
    def total(self) -> float:
        return self.xi0 + self.xi1 + self.xi2 + self.xi3 + self.xi4

    @property
    def orders(self) -> tuple[float, ...]:
        return (self.xi0, self.xi1, self.xi2, self.xi3, self.xi4)

    def as_pauli_coefficient(self) -> float:
        """Coefficient of sigma_z x sigma_z that produces the same energy combination."""
        return self.total / 4.0


def _label(state) -> str:
    return "|%d%d,%d>" % tuple(state)


class PerturbationBasis:
    """Diagonal energies and couplings restricted to ``BASIS_LABELS``."""

    def __init__(self, params: DeviceParams, omega_c: float):
        dims = qmath.DEFAULT_DIMS
        h0, v = hamiltonian_parts(params, omega_c, dims)
        idx = [qmath.basis_index(lbl, dims) for lbl in BASIS_LABELS]
        self.labels = BASIS_LABELS
        self.e0 = np.real(np.diag(h0))[idx]
        self.v = v[np.ix_(idx, idx)]

    def position(self, state) -> int:
        return self.labels.index(tuple(state))

    def denominators(self, s: int) -> np.ndarray:
        """``E_s - E_j`` with ``inf`` at ``j == s`` so that ``1/E`` drops the term."""
        d = self.e0[s] - self.e0
        d[s] = np.inf
        bad = np.flatnonzero(np.abs(d) < DEGENERACY_TOL)
        if bad.size:
            j = bad[0]
            raise DegenerateLevelError(
                f"{_label(self.labels[s])} and {_label(self.labels[j])} are degenerate"
            )
        return d

    def energy(self, s: int, order: int) -> float:
        e0, v = self.e0, self.v
        if order == 0:
            return float(e0[s])
        if order == 1:
            return float(np.real(v[s, s]))
        inv = 1.0 / self.denominators(s)
        # w[j] = V_sj / E_sj over intermediate states j != s
        w = v[s, :] * inv
        vs = v[:, s]
        m = v.copy()
        m[s, :] = 0.0
        m[:, s] = 0.0
        if order == 2:
            return float(np.real(np.sum(v[s, :] * vs * inv)))
        if order == 3:
            return float(np.real(w @ m @ (vs * inv)))
        if order == 4:
            e2 = np.real(np.sum(np.abs(v[s, :]) ** 2 * inv))
            # sum_{j,h,l} V_sj V_jh V_hl V_ls / (E_sj E_sh E_sl)
            loop = (w @ m * inv) @ m @ (vs * inv)
            renorm = e2 * np.sum(np.abs(v[s, :]) ** 2 * inv**2)
            return float(np.real(loop) - renorm)
        raise ValueError(f"order {order} not in 0..4")


def perturbation_energies(params: DeviceParams, omega_c: float, s, order: int) -> float:
    """``E_s^(order)`` for a computational product state ``s`` ('00', '01', '10', '11')."""
    label = S_STATES[s] if isinstance(s, str) else tuple(s)
    if label not in S_STATES.values():
        raise ValueError(f"{label} is not a computational state")
    basis = PerturbationBasis(params, omega_c)
    return basis.energy(basis.position(label), order)


def zz_perturbative(params: DeviceParams, omega_c: float) -> ZZDecomposition:
    basis = PerturbationBasis(params, omega_c)
    signs = {"11": 1.0, "10": -1.0, "01": -1.0, "00": 1.0}
    xi = []
    for order in range(5):
        xi.append(
            sum(sgn * basis.energy(basis.position(S_STATES[k]), order) for k, sgn in signs.items())
        )
    return ZZDecomposition(*xi)


def _guard(*dens: float) -> None:
    for d in dens:
        if abs(d) < DEGENERACY_TOL:
            raise DegenerateLevelError("closed-form ZZ denominator vanishes")


def zz_closed_form(params: DeviceParams, omega_c: float) -> ZZDecomposition:
    p = params
    d1 = p.omega1 - omega_c
    d2 = p.omega2 - omega_c
    d12 = p.delta12
    a1, a2, ac = p.alpha1, p.alpha2, p.alpha_c
    _guard(d1, d2, d12, d12 + a1, d12 - a2, d1 + d2 - ac)
    xi2 = 2 * p.g12**2 * (a1 + a2) / ((d12 + a1) * (d12 - a2))
    xi3 = 2 * p.g12 * p.g1 * p.g2 * (
        (2 / (d12 - a2) - 1 / d12) / d1 - (2 / (d12 + a1) - 1 / d12) / d2
    )
    gg = p.g1**2 * p.g2**2
    xi4 = (
        2 * gg / (d1 + d2 - ac) * (1 / d1 + 1 / d2) ** 2
        + gg / d1**2 * (2 / (d12 - a2) - 1 / d12 - 1 / d2)
        + gg / d2**2 * (-2 / (d12 + a1) + 1 / d12 - 1 / d1)
    )
    return ZZDecomposition(0.0, 0.0, xi2, xi3, xi4)


def dressed_energies(h: np.ndarray, labels, dims=qmath.DEFAULT_DIMS) -> dict:
    """Eigenvalues of ``h`` assigned to product-state labels by maximum overlap."""
    evals, evecs = np.linalg.eigh(h)
    out = {}
    for lbl in labels:
        overlaps = np.abs(evecs[qmath.basis_index(lbl, dims), :]) ** 2
        order = np.argsort(overlaps)[::-1]
        if overlaps[order[0]] - overlaps[order[1]] < TIE_TOL:
            raise HybridizationError(f"{_label(lbl)} is strongly hybridized")
        out[tuple(lbl)] = (float(evals[order[0]]), evecs[:, order[0]])
    return out


def zz_exact(params: DeviceParams, omega_c: float, shift: float = 0.0) -> float:
    """``E11 - E10 - E01 + E00`` of the dressed levels of the full circuit."""
    h = hamiltonian_parts(params, omega_c)
    h = h[0] + h[1] + shift * np.eye(h[0].shape[0])
    e = dressed_energies(h, S_STATES.values())
    return (
        e[S_STATES["11"]][0] - e[S_STATES["10"]][0] - e[S_STATES["01"]][0] + e[S_STATES["00"]][0]
    )
