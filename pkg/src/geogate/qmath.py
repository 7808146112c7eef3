"""Dense operator helpers for a few truncated bosonic modes.

Everything here is plain ``numpy.ndarray`` of ``complex128``; Hilbert spaces
never exceed 27 dimensions so no sparse machinery is used.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

DEFAULT_DIMS = (3, 3, 3)  # Q1, Q2, coupler


class DimensionError(ValueError):
    """Operator or state has the wrong shape for the requested operation."""


def ladder(dim: int) -> np.ndarray:
    """Lowering operator ``a`` truncated to ``dim`` levels."""
    if dim < 2:
        raise DimensionError(f"ladder needs dim >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def number(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def dag(op: np.ndarray) -> np.ndarray:
    return op.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_hermitian(op: np.ndarray, atol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(op - dag(op)), initial=0.0) < atol)


def check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 3 for d in dims):
        raise DimensionError(f"every mode needs at least 3 levels, got {dims}")
    return dims


def embed(op: np.ndarray, mode: int, dims: Sequence[int]) -> np.ndarray:
    """Place a single-mode operator at position ``mode`` of a tensor product."""
    dims = tuple(dims)
    if not 0 <= mode < len(dims):
        raise IndexError(f"mode {mode} out of range for {len(dims)} modes")
    op = np.asarray(op, dtype=complex)
    if op.shape != (dims[mode], dims[mode]):
        raise DimensionError(
            f"operator shape {op.shape} does not match mode dimension {dims[mode]}"
        )
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[mode] = op
    return reduce(np.kron, factors)


def basis_index(levels: Sequence[int], dims: Sequence[int]) -> int:
    """Row-major index of the product state ``|levels[0], levels[1], ...>``."""
    if len(levels) != len(dims):
        raise DimensionError("levels and dims differ in length")
    idx = 0
    for n, d in zip(levels, dims):
        if not 0 <= n < d:
            raise IndexError(f"level {n} outside mode of dimension {d}")
        idx = idx * d + n
    return idx


def basis_state(levels: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    psi = np.zeros(int(np.prod(dims)), dtype=complex)
    psi[basis_index(levels, dims)] = 1.0
    return psi


def expectation(state: np.ndarray, op: np.ndarray) -> complex:
    """``<psi|op|psi>``."""
    state = np.asarray(state)
    if op.shape != (state.size, state.size):
        raise DimensionError(f"state of size {state.size} vs operator {op.shape}")
    return complex(np.vdot(state, op @ state))


def ket2dm(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def check_density_matrix(rho: np.ndarray, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8):
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix."""
    if np.max(np.abs(rho - dag(rho))) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.3e} != 1")
    if np.linalg.eigvalsh(0.5 * (rho + dag(rho))).min() < -eig_tol:
        raise ValueError("density matrix has negative eigenvalues")
