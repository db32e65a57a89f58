"""Dense generalized Hermitian eigensolver with kernel deflation, resolvent,
contour-quadrature spectral projectors, subspace gaps and clustering."""

from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.linalg as sla

from .errors import ContourError, ContractViolationError, NearSingularError, PencilError
from .fem_common import Pencil

DEFAULT_KERNEL_TOL = 1e-8
DEFAULT_CLUSTER_TOL = 1e-6


@dataclass
class EigenDecomposition:
    """Positive spectrum after deflating near-zero modes.

    ``eigenvalues`` ascending; ``eigenvectors`` columns M-orthonormal;
    ``kernel_dim`` counts the deflated modes. Index k in the paper's
    1-based numbering is ``eigenvalues[k-1]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kernel_dim: int


@dataclass
class EigenCluster:
    """Consecutive near-degenerate eigenvalues with their eigenvector block."""

    indices: np.ndarray          # 0-based positions in the deflated spectrum
    lambda_bar: float
    vectors: np.ndarray          # (ndof, m), M-orthonormal
    width: float

    @property
    def multiplicity(self) -> int:
        return len(self.indices)


def _check_mass(M: np.ndarray):
    try:
        sla.cholesky(M, lower=True)
    except sla.LinAlgError:
        raise PencilError("mass matrix is not positive-definite")


def solve_pencil(pencil: Pencil, kernel_tol: float = DEFAULT_KERNEL_TOL) -> EigenDecomposition:
    """Full dense solve of K v = lambda M v with near-zero-mode deflation.

    Eigenvalues below kernel_tol * trace(K)/trace(M) are reported as kernel
    and removed from the indexed spectrum.
    """
    _check_mass(pencil.M)
    vals, vecs = sla.eigh(pencil.K, pencil.M)
    cut = kernel_tol * pencil.lambda_scale()
    keep = vals >= cut
    return EigenDecomposition(
        eigenvalues=vals[keep],
        eigenvectors=vecs[:, keep],
        kernel_dim=int(np.sum(~keep)),
    )


def _cached_eigenvalues(pencil: Pencil) -> np.ndarray:
    vals = getattr(pencil, "_eigvals_cache", None)
    if vals is None:
        _check_mass(pencil.M)
        vals = sla.eigh(pencil.K, pencil.M, eigvals_only=True)
        pencil._eigvals_cache = vals
    return vals


def resolvent_apply(pencil: Pencil, zeta: complex, b: np.ndarray) -> np.ndarray:
    """x = (K - zeta M)^-1 M b; b may be a vector or a block of columns."""
    vals = _cached_eigenvalues(pencil)
    scale = abs(pencil.lambda_scale())
    if np.min(np.abs(vals - zeta)) <= 1e-12 * scale:
        raise NearSingularError(
            f"shift {zeta} within 1e-12*lambda_scale of the spectrum"
        )
    A = pencil.K - zeta * pencil.M
    return sla.solve(A, pencil.M @ b)


def riesz_projector(
    pencil: Pencil, center: float, radius: float, nquad: int = 64
) -> np.ndarray:
    """Contour-quadrature spectral projector onto eigenvalues inside the circle.

    Trapezoidal rule on the circle; converges exponentially since the
    resolvent is analytic along the contour. The result is the M-orthogonal
    projector onto the enclosed invariant subspace.
    """
    vals = _cached_eigenvalues(pencil)
    if np.min(np.abs(np.abs(vals - center) - radius)) <= 1e-8 * radius:
        raise ContourError("an eigenvalue lies on (or too close to) the contour")
    n = pencil.size
    P = np.zeros((n, n), dtype=complex)
    theta = 2.0 * np.pi * np.arange(nquad) / nquad
    for t in theta:
        zeta = center + radius * np.exp(1j * t)
        A = pencil.K.astype(complex) - zeta * pencil.M
        P += np.exp(1j * t) * sla.solve(A, pencil.M.astype(complex))
    P *= -radius / nquad
    return P.real


def subspace_gap(U: np.ndarray, V: np.ndarray, M: np.ndarray = None) -> float:
    """Symmetric gap between the column spans of two M-orthonormal blocks."""
    if U.ndim == 1:
        U = U[:, None]
    if V.ndim == 1:
        V = V[:, None]
    if M is None:
        M = np.eye(U.shape[0])
    for B, name in ((U, "first"), (V, "second")):
        G = B.T @ M @ B
        if np.max(np.abs(G - np.eye(B.shape[1]))) > 1e-8:
            raise ContractViolationError(f"{name} block is not M-orthonormal")

    def delta(A, B):
        C = A.T @ M @ B
        s = sla.eigvalsh(C @ C.T)
        return float(np.sqrt(max(0.0, 1.0 - s.min())))

    return max(delta(U, V), delta(V, U))


def cluster_spectrum(
    decomposition: EigenDecomposition, cluster_tol: float = DEFAULT_CLUSTER_TOL
) -> List[EigenCluster]:
    """Maximal groups of consecutive eigenvalues with relative gap <= tol."""
    vals = decomposition.eigenvalues
    clusters = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or (
            vals[i] - vals[i - 1] > cluster_tol * max(abs(vals[i - 1]), 1e-300)
        ):
            idx = np.arange(start, i)
            block = decomposition.eigenvectors[:, idx]
            clusters.append(
                EigenCluster(
                    indices=idx,
                    lambda_bar=float(vals[idx].mean()),
                    vectors=block,
                    width=float(vals[idx].max() - vals[idx].min()),
                )
            )
            start = i
    return clusters
