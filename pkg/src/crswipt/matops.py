"""Dense Hermitian linear-algebra kernels shared by the solvers.

Eigenvalues are always returned in descending order so that "the first
``n`` eigenvectors" is a well defined notion everywhere in the package.
Inside a cluster of tied eigenvalues the basis is whatever LAPACK returns.
"""

from typing import NamedTuple

import numpy as np

from .errors import InfeasibleError, SingularMatrixError

__all__ = ['EigDecomposition', 'herm_eig', 'inv_sqrt', 'null_space_basis',
           'dft_matrix', 'pos_part_diag', 'RANK_RTOL']

#: Relative singular-value cutoff used for numerical rank decisions.
RANK_RTOL = 1e-10


class EigDecomposition(NamedTuple):
    """``A = V @ diag(phi) @ V^H`` with ``phi`` sorted descending."""
    V: np.ndarray
    phi: np.ndarray


def _check_finite(A: np.ndarray, name: str = "A") -> None:
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")


def _hermitian_part(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    _check_finite(A)
    return 0.5 * (A + A.conj().T)


def herm_eig(A: np.ndarray) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    The input is symmetrized as ``(A + A^H) / 2`` before decomposition, so
    small asymmetries from round-off are harmless.

    Parameters
    ----------
    A : np.ndarray
        Square complex (or real) matrix, Hermitian up to round-off.

    Returns
    -------
    EigDecomposition
        Unitary ``V`` and real ``phi`` sorted from largest to smallest.
    """
    phi, V = np.linalg.eigh(_hermitian_part(A))
    return EigDecomposition(V[:, ::-1], phi[::-1])


def inv_sqrt(A: np.ndarray, min_eig: float = 1e-12) -> np.ndarray:
    """Hermitian inverse square root ``B`` with ``B A B = I``.

    Raises
    ------
    SingularMatrixError
        If the smallest eigenvalue of ``A`` does not exceed ``min_eig``.
    """
    V, phi = herm_eig(A)
    if phi[-1] <= min_eig:
        raise SingularMatrixError(
            f"matrix is not safely positive definite: delta_min = {phi[-1]:.3e}"
            f" <= {min_eig:.1e}")
    return (V * phi ** -0.5) @ V.conj().T


def null_space_basis(T_stack: np.ndarray) -> np.ndarray:
    """Orthonormal basis ``U`` of the null space of ``T_stack``.

    The rank is decided with singular values above
    ``RANK_RTOL * s_max``.

    Returns
    -------
    np.ndarray
        ``M x (M - rank)`` matrix with ``T_stack @ U ~ 0`` and
        ``U^H U = I``.

    Raises
    ------
    InfeasibleError
        If the null space is empty (``rank == M``).
    """
    T_stack = np.atleast_2d(np.asarray(T_stack))
    _check_finite(T_stack, "T_stack")
    M = T_stack.shape[1]
    if T_stack.shape[0] == 0:
        return np.eye(M, dtype=complex)
    _, s, Vh = np.linalg.svd(T_stack)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
    if rank >= M:
        raise InfeasibleError(
            f"stacked channel has full column rank {rank} = M; no null space"
            f" (rank cutoff {RANK_RTOL:g} x largest singular value)")
    return Vh[rank:].conj().T


def dft_matrix(N: int) -> np.ndarray:
    """Unitary DFT matrix with entries ``exp(-2j pi j k / N) / sqrt(N)``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    jk = np.outer(np.arange(N), np.arange(N))
    return np.exp(-2j * np.pi * jk / N) / np.sqrt(N)


def pos_part_diag(d) -> np.ndarray:
    """Elementwise ``max(d_i, 0)``."""
    return np.maximum(np.asarray(d, dtype=float), 0.0)
