"""Periodic cell problems, correctors and the effective diffusion tensor.

For a Z^N-periodic base tensor, each of the n*N cell problems asks for a
zero-mean periodic corrector whose corrected flux is divergence free; the
effective tensor is the cell average of the corrected flux.  In one space
dimension the correctors are bypassed entirely: the effective matrix is the
inverse of the cell average of the inverse coefficient matrix.

The singular constant mode of the periodic systems is removed by pinning one
vertex, solving, and subtracting the component means afterwards, so the same
sparse LU path serves every solve in the toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeff import HomogenizedTensor, TensorField, sample_grid
from .fem import (DiscreteField, FemSpace, assemble_diffusion,
                  assemble_divergence_load, lu_factor)
from .mesh import Mesh

__all__ = [
    "CorrectorSet",
    "solve_cell_problems",
    "homogenized_tensor",
    "homogenized_tensor_1d",
]

MEAN_TOL = 1e-10
RESIDUAL_TOL = 1e-10


@dataclass
class CorrectorSet:
    """Correctors indexed by (gradient direction j, trial component beta).

    Attributes
    ----------
    space : FemSpace
        Unconstrained periodic space the correctors live on.
    fields : list of list of DiscreteField
        ``fields[j][beta]`` is the n-component corrector for direction j and
        component beta.
    means : ndarray, shape (N, n, n)
        Cell means of every corrector component after centering (certificate;
        all below the mean tolerance).
    residuals : ndarray, shape (N, n)
        Max-norm residuals of the discrete periodic equations.
    """

    space: FemSpace
    fields: list
    means: np.ndarray
    residuals: np.ndarray

    @property
    def max_abs(self) -> float:
        return max(float(np.max(np.abs(f.values)))
                   for row in self.fields for f in row)


def _component_means(space: FemSpace, values: np.ndarray) -> np.ndarray:
    """Exact cell means of each component of a P1 field (unit cell volume)."""
    cellwise = values[space.cell_dofs]                # (nc, nv, n)
    avg = cellwise.mean(axis=1)                       # linear: mean of vertices
    return np.einsum("c,ca->a", space.mesh.cell_measures, avg)


def solve_cell_problems(base: TensorField, cellmesh: Mesh) -> CorrectorSet:
    """Solve the n*N periodic cell problems for the given base tensor.

    The mesh must be periodic; the tensor is evaluated unscaled on the unit
    cell.  Every returned corrector has component means at most 1e-10 and a
    discrete residual at most 1e-10.
    """
    if not cellmesh.is_periodic:
        raise ValueError("cell problems need a periodic mesh")
    if base.epsilon is not None:
        raise ValueError("cell problems use the unscaled base tensor")
    if base.defect is not None:
        raise ValueError("cell problems use the defect-free base; strip the "
                         "defect first (the averaged formula never sees it)")
    base.require_elliptic()

    n, dim = base.n, base.dim
    space = FemSpace(cellmesh, n, constrain_boundary=False)
    A = assemble_diffusion(space, base)

    # pin the first independent vertex to remove the constant kernel
    pinned = space.dof_index(int(space.indep_vertices[0]))
    free = np.setdiff1d(np.arange(space.num_dofs),
                        np.arange(pinned, pinned + n))
    try:
        lu = lu_factor(_submatrix(A.matrix, free))
    except Exception as exc:
        raise RuntimeError(f"singular periodic cell system: {exc}") from exc

    nc, nq = space.quad_points.shape[:2]
    a_qp = base.evaluate(space.quad_points.reshape(nc * nq, dim))
    a_qp = a_qp.reshape(nc, nq, n, n, dim, dim)

    fields, means, residuals = [], np.empty((dim, n, n)), np.empty((dim, n))
    for j in range(dim):
        row = []
        for beta in range(n):
            load = assemble_divergence_load(space, a_qp[:, :, :, beta, :, j])
            rhs = -load.vector[free]
            v = np.zeros(space.num_dofs)
            v[free] = lu.solve(rhs)
            v = v.reshape(-1, n)
            v -= _component_means(space, v.ravel())[None, :]
            v = v.ravel()
            res = A.matrix @ v + load.vector
            residuals[j, beta] = float(np.max(np.abs(res)))
            means[j, beta] = _component_means(space, v)
            row.append(DiscreteField(space, v))
        fields.append(row)

    if np.max(np.abs(means)) > MEAN_TOL:
        raise RuntimeError(f"corrector means exceed {MEAN_TOL}")
    if residuals.max() > RESIDUAL_TOL:
        raise RuntimeError(
            f"cell-problem residual {residuals.max():.3e} exceeds "
            f"{RESIDUAL_TOL}")
    return CorrectorSet(space, fields, means, residuals)


def _submatrix(matrix, keep):
    return matrix.tocsr()[keep][:, keep].tocsc()


def homogenized_tensor(base: TensorField, correctors: CorrectorSet,
                       cellmesh: Mesh) -> HomogenizedTensor:
    """Cell average of the corrected flux, entrywise.

    Raises if the result loses the ellipticity margin, which signals an
    under-resolved cell mesh.
    """
    space = correctors.space
    if space.mesh is not cellmesh:
        raise ValueError("correctors were computed on a different mesh")
    n, dim = base.n, base.dim
    nc, nq = space.quad_points.shape[:2]
    a_qp = base.evaluate(space.quad_points.reshape(nc * nq, dim))
    a_qp = a_qp.reshape(nc, nq, n, n, dim, dim)

    ahat = np.einsum("cq,cqabij->abij", space.quad_weights, a_qp)
    for j in range(dim):
        for beta in range(n):
            grad = space.gradients_on_cells(correctors.fields[j][beta].values)
            # flux correction: mean of a_{ik}^{ag} d_k v^g
            corr = np.einsum("cq,cqagik,cgk->ai", space.quad_weights,
                             a_qp, grad)
            ahat[:, beta, :, j] += corr
    return HomogenizedTensor(ahat)


def homogenized_tensor_1d(base: TensorField, quadrature: int = 4096) -> HomogenizedTensor:
    """One-dimensional shortcut: invert the cell average of the inverse.

    For piecewise-constant tables the average is computed exactly from the
    table; otherwise composite midpoint quadrature with ``quadrature``
    subintervals is used.  Fails if the coefficient matrix is singular at a
    quadrature point.
    """
    if base.dim != 1:
        raise ValueError("the inverse-average formula needs N == 1")
    if base.epsilon is not None:
        raise ValueError("pass the unscaled base tensor")
    if base.defect is not None:
        raise ValueError("pass the defect-free base; the inverse-average "
                         "formula never sees the defect")
    n = base.n
    entries = base.base
    if getattr(entries, "kind", None) == "piecewise":
        k = entries.grid[0]
        pts = (np.arange(k)[:, None] + 0.5) / k
        weights = np.full(k, 1.0 / k)
    else:
        pts = sample_grid(1, quadrature)
        weights = np.full(quadrature, 1.0 / quadrature)
    mats = base.evaluate(pts)[:, :, :, 0, 0]  # (m, n, n)
    try:
        invs = np.linalg.inv(mats)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"coefficient matrix singular on the cell: {exc}") from exc
    mean_inv = np.einsum("m,mab->ab", weights, invs)
    ahat = np.linalg.inv(mean_inv)
    return HomogenizedTensor(ahat.reshape(n, n, 1, 1))
