"""Shared finite element plumbing: element geometry, pencils, scatter."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .geometry import Mesh, QuadratureRule, tet_quadrature
from .transforms import AffineFamily, ConstantMatrixCoefficient, ConstantScalarCoefficient


@dataclass
class Pencil:
    """Hermitian stiffness/mass pair over the free degrees of freedom.

    ``free_entities`` maps matrix index -> mesh entity id (vertex index for
    Lagrange dofs, edge index for edge dofs).
    """

    K: np.ndarray
    M: np.ndarray
    free_entities: np.ndarray
    problem_tag: str
    mesh: Optional[Mesh] = None
    quad_order: int = 2

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def lambda_scale(self) -> float:
        return float(np.trace(self.K) / np.trace(self.M))


@dataclass
class PencilDerivative:
    """Directional derivatives of the pencil matrices at a fixed parameter."""

    dK: np.ndarray
    dM: np.ndarray
    problem_tag: str


def tet_p1_data(mesh: Mesh):
    """Per-tet volumes and constant barycentric gradients.

    Returns (vols (nt,), grads (nt,4,3)) with grads[t, i] = grad lambda_i.
    """
    v = mesh.vertices[mesh.tets]                      # (nt, 4, 3)
    A = np.concatenate([np.ones((len(v), 4, 1)), v], axis=2)  # rows [1, x]
    C = np.linalg.inv(A)                              # lambda_i = C[0,i] + C[1:,i].x
    grads = np.swapaxes(C[:, 1:, :], 1, 2)            # (nt, 4, 3)
    vols = mesh.tet_volumes()
    return vols, grads


def physical_quad_points(mesh: Mesh, rule: QuadratureRule):
    """Quadrature points and weights on every tet.

    Returns (points (nt, nq, 3), weights (nt, nq)); weights integrate over
    the tet (reference weights rescaled by 6*vol).
    """
    v = mesh.vertices[mesh.tets]
    pts = np.einsum("qa,nak->nqk", rule.points, v)
    w = 6.0 * mesh.tet_volumes()[:, None] * rule.weights[None, :]
    return pts, w


def scatter_symmetric(local: np.ndarray, gdofs: np.ndarray, ndof: int) -> np.ndarray:
    """Accumulate per-element blocks into a dense symmetric global matrix.

    local: (nt, k, k); gdofs: (nt, k) with -1 marking constrained entries.
    """
    nt, k, _ = local.shape
    rows = np.repeat(gdofs, k, axis=1).ravel()
    cols = np.tile(gdofs, (1, k)).ravel()
    data = local.reshape(nt, k * k).ravel()
    keep = (rows >= 0) & (cols >= 0)
    A = sp.coo_matrix(
        (data[keep], (rows[keep], cols[keep])), shape=(ndof, ndof)
    ).toarray()
    return 0.5 * (A + A.T)


def default_quad_order(family, *coefficients) -> int:
    """Order 2 when everything is affine/constant, order 4 otherwise."""
    if not isinstance(family, AffineFamily):
        return 4
    for c in coefficients:
        if not isinstance(c, (ConstantMatrixCoefficient, ConstantScalarCoefficient)):
            return 4
    return 2


def export_coordinate_format(A: np.ndarray, path: str):
    """Write a matrix as `i j value` lines (debugging aid)."""
    with open(path, "w") as f:
        for i, j in zip(*np.nonzero(A)):
            f.write(f"{i} {j} {A[i, j]!r}\n")
