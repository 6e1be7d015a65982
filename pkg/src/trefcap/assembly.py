"""Quadrature assembly of the boundary operators H and G and the boundary
capacitance matrix C = G^-1 H.

H and G collect, per weighting function i and per field node (j, nu), the
element integrals of phi_nu q*_i J and phi_nu u*_i J over the local
coordinate.  For a pure Dirichlet problem the nodal fluxes follow from the
nodal potentials as q = C u; C is therefore a discrete
Dirichlet-to-Neumann map.  C is observed to be independent of domain
position and of the weighting-function policy, and scales exactly as 1/s
under uniform domain scaling; raw H and G have neither property.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from . import basis as basis_mod
from .basis import BasisSet, default_basis, q_star, u_star
from .errors import DegenerateBcError, InvalidGeometryError, QuadratureWarning, SingularSystemError
from .geometry import BoundaryMesh, normalize, transformed

__all__ = [
    "QuadratureRule",
    "Bcm",
    "assemble_H",
    "assemble_G",
    "compute_bcm",
    "solve_mixed",
    "condition_estimate",
    "default_quadrature_order",
]

# Reciprocal condition estimate below which a dense solve is refused.
RCOND_FLOOR = 1e-15
# Floor for boundary-condition block pivots in solve_mixed.
BC_RCOND_FLOOR = 1e-14


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre points/weights on [-1, 1]; exact for polynomials up to
    degree 2*order - 1."""

    order: int
    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss_legendre(cls, order: int) -> "QuadratureRule":
        if order < 1:
            raise ValueError(f"quadrature order must be >= 1, got {order}")
        pts, wts = np.polynomial.legendre.leggauss(order)
        return cls(order, pts, wts)


def default_quadrature_order(mesh: BoundaryMesh, basis: BasisSet) -> int:
    """Point count that keeps straight-element integrands exactly integrated
    with margin: max radial order + geometry degree + field degree + 2."""
    gd = max(e.geometry_degree for e in mesh.elements)
    fd = max(e.field_degree for e in mesh.elements)
    return basis.max_order + gd + fd + 2


def _minimum_order(mesh: BoundaryMesh, basis: BasisSet) -> int:
    gd = max(e.geometry_degree for e in mesh.elements)
    fd = max(e.field_degree for e in mesh.elements)
    return math.ceil((basis.max_order + gd + fd + 1) / 2)


def _check_quadrature(mesh, basis, quad, strict):
    needed = _minimum_order(mesh, basis)
    if quad.order < needed:
        msg = (
            f"quadrature order {quad.order} is below the exactness bound {needed} "
            f"for max basis order {basis.max_order}"
        )
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, QuadratureWarning, stacklevel=3)


def _element_tables(mesh: BoundaryMesh, quad: QuadratureRule):
    """Per-element quadrature data shared by all matrix rows."""
    tables = []
    col = 0
    for e in mesh.elements:
        pts = e.points_at(quad.points)
        der = e.derivs_at(quad.points)
        jac = np.hypot(der[:, 0], der[:, 1])
        if np.any(jac <= 0.0):
            raise InvalidGeometryError("element with non-positive Jacobian in assembly")
        rho = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        alpha = np.arctan2(der[:, 0], der[:, 1])
        # (n_field_nodes, n_quad): phi_nu(xi) * w * J, ready to dot with
        # kernel values.
        base = e.field_shape_at(quad.points) * (quad.weights * jac)
        tables.append((col, base, rho, theta, alpha))
        col += e.field_node_count
    return tables, col


def _assemble(mesh, basis, quad, kernel, workers=1):
    if len(basis) != mesh.field_node_count:
        raise ValueError(
            f"basis size {len(basis)} must equal field node count {mesh.field_node_count}"
        )
    tables, ncols = _element_tables(mesh, quad)
    out = np.zeros((len(basis), ncols))

    def fill_row(i):
        f = basis.functions[i]
        for col, base, rho, theta, alpha in tables:
            if kernel == "q":
                vals = q_star(f, rho, theta, alpha)
            else:
                vals = u_star(f, rho, theta)
            out[i, col : col + base.shape[0]] = base @ vals

    if workers > 1:
        # Rows are disjoint, so concurrent writers never collide.
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill_row, range(len(basis))))
    else:
        for i in range(len(basis)):
            fill_row(i)
    return out


def assemble_H(
    mesh: BoundaryMesh,
    basis: BasisSet,
    quad: QuadratureRule | None = None,
    *,
    strict_quadrature: bool = False,
    workers: int = 1,
) -> np.ndarray:
    """Flux-side operator: H[i, (j, nu)] = integral of phi_nu q*_i J.

    The row of the constant weighting function is identically zero (its
    normal derivative vanishes)."""
    quad = quad or QuadratureRule.gauss_legendre(default_quadrature_order(mesh, basis))
    _check_quadrature(mesh, basis, quad, strict_quadrature)
    return _assemble(mesh, basis, quad, "q", workers)


def assemble_G(
    mesh: BoundaryMesh,
    basis: BasisSet,
    quad: QuadratureRule | None = None,
    *,
    strict_quadrature: bool = False,
    workers: int = 1,
) -> np.ndarray:
    """Potential-side operator: G[i, (j, nu)] = integral of phi_nu u*_i J."""
    quad = quad or QuadratureRule.gauss_legendre(default_quadrature_order(mesh, basis))
    _check_quadrature(mesh, basis, quad, strict_quadrature)
    return _assemble(mesh, basis, quad, "u", workers)


def _rcond_from_lu(lu, anorm) -> float:
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0:
        raise SingularSystemError(f"condition estimation failed (info={info})")
    return float(rcond)


def condition_estimate(G: np.ndarray) -> float:
    """1-norm condition estimate of a square matrix from its LU factors.

    Diagnostic only; returns inf for numerically singular input."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {G.shape}")
    anorm = np.linalg.norm(G, 1)
    if anorm == 0.0:
        return math.inf
    try:
        lu, _ = lu_factor(G)
    except Exception:
        return math.inf
    rcond = _rcond_from_lu(lu, anorm)
    return math.inf if rcond == 0.0 else 1.0 / rcond


@dataclass
class Bcm:
    """Boundary capacitance matrix of one mesh: nodal potentials in, nodal
    outward fluxes out, plus the node metadata needed downstream.

    node_element_lengths holds the integration weight of every field node
    (the element length for constant elements).  Treated as immutable after
    construction.
    """

    matrix: np.ndarray
    node_points: np.ndarray
    node_element_lengths: np.ndarray
    basis_policy_id: int
    cond_estimate_G: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def row_sum_defect(self) -> float:
        """max |C 1| relative to max |C|; ought to be ~0 since a uniform
        Dirichlet potential induces zero flux."""
        scale = np.abs(self.matrix).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.matrix.sum(axis=1)).max() / scale)


# A boundary capacitance matrix whose row sums exceed this (relative to its
# largest entry) is numerical garbage: a uniform potential must map to zero
# flux.
_ROW_SUM_GARBAGE = 1e-6


def _solve_bcm(work_mesh, basis_policy, quad, strict_quadrature, workers):
    basis = default_basis(work_mesh.field_node_count, policy=basis_policy)
    rule = quad or QuadratureRule.gauss_legendre(default_quadrature_order(work_mesh, basis))
    H = assemble_H(work_mesh, basis, rule, strict_quadrature=strict_quadrature, workers=workers)
    G = assemble_G(work_mesh, basis, rule, strict_quadrature=strict_quadrature, workers=workers)

    # Row equilibration: rows of G (and H) shrink together like rho^m for
    # high orders; scaling them out changes nothing mathematically but keeps
    # the factorization honest about actual solvability.
    row_max = np.abs(G).max(axis=1)
    if np.any(row_max == 0.0):
        raise SingularSystemError("G has an identically zero row", rcond=0.0)
    d = 1.0 / row_max
    lu_piv = lu_factor(G * d[:, None])
    rcond = _rcond_from_lu(lu_piv[0], np.linalg.norm(G * d[:, None], 1))
    if rcond < RCOND_FLOOR:
        raise SingularSystemError(
            f"G is numerically singular (reciprocal condition estimate {rcond:.3e})",
            rcond=rcond,
        )
    C = lu_solve(lu_piv, H * d[:, None])
    scale = np.abs(C).max()
    defect = np.abs(C.sum(axis=1)).max() / scale if scale > 0 else 0.0
    if defect > _ROW_SUM_GARBAGE:
        # A symmetry of the mesh about the expansion centre can zero out a
        # weighting-function row exactly (e.g. 2xy over a centred square);
        # equilibration then amplifies roundoff into a random row that the
        # condition estimate cannot see, but the zero-row-sum identity can.
        raise SingularSystemError(
            f"G is effectively singular: uniform-potential residual {defect:.3e}",
            rcond=rcond,
        )
    return C, rcond


def compute_bcm(
    mesh: BoundaryMesh,
    basis_policy: int = basis_mod.POLICY_DEFAULT,
    *,
    normalized: bool = True,
    quad: QuadratureRule | None = None,
    strict_quadrature: bool = False,
    workers: int = 1,
) -> Bcm:
    """Assemble H, G and solve G C = H column-wise through an LU
    factorization (the inverse is never formed).

    With normalized=True (the default) the assembly runs on the
    centroid-centred, radius-one copy of the mesh and the result is divided
    by the normalization scale, which is exact for this operator and keeps
    the rho^m terms of high-order weighting functions well-behaved for
    large or remote domains.  If the centred expansion happens to make G
    singular (symmetric shapes can annihilate a weighting-function row,
    notably under the skip-constant policy), the expansion centre is
    shifted deterministically and the assembly retried; the operator itself
    does not depend on the centre.
    """
    if normalized:
        work_mesh, scale, _ = normalize(mesh)
        try:
            C, rcond = _solve_bcm(work_mesh, basis_policy, quad, strict_quadrature, workers)
        except SingularSystemError:
            shifted = transformed(work_mesh, offset=(0.37, 0.21))
            C, rcond = _solve_bcm(shifted, basis_policy, quad, strict_quadrature, workers)
        C = C / scale
    else:
        C, rcond = _solve_bcm(mesh, basis_policy, quad, strict_quadrature, workers)
    return Bcm(
        matrix=C,
        node_points=mesh.field_points(),
        node_element_lengths=mesh.field_node_weights(),
        basis_policy_id=basis_policy,
        cond_estimate_G=math.inf if rcond == 0.0 else 1.0 / rcond,
    )


def solve_mixed(bcm: Bcm, dirichlet: dict, neumann: dict) -> tuple[np.ndarray, np.ndarray]:
    """Solve the nodal system under mixed boundary conditions.

    Every node index must appear in exactly one of the two maps.  Known
    potentials u_D and known fluxes q_N determine the rest through the
    block split of q = C u:

        u_N = (C_NN)^-1 (q_N - C_ND u_D),   then   q = C u.

    A pure Dirichlet input reduces to q = C u directly.
    """
    n = bcm.size
    d_idx = sorted(dirichlet)
    n_idx = sorted(neumann)
    if sorted(d_idx + n_idx) != list(range(n)):
        raise ValueError("dirichlet/neumann maps must partition the node indices exactly")
    u = np.zeros(n)
    u[d_idx] = [dirichlet[i] for i in d_idx]
    if n_idx:
        C = bcm.matrix
        Cnn = C[np.ix_(n_idx, n_idx)]
        Cnd = C[np.ix_(n_idx, d_idx)]
        rhs = np.array([neumann[i] for i in n_idx]) - Cnd @ u[d_idx]
        anorm = np.linalg.norm(Cnn, 1)
        try:
            lu_piv = lu_factor(Cnn)
        except Exception as exc:
            raise DegenerateBcError(f"flux-prescribed block is singular: {exc}") from exc
        rcond = _rcond_from_lu(lu_piv[0], anorm) if anorm > 0 else 0.0
        if rcond < BC_RCOND_FLOOR:
            raise DegenerateBcError(
                "flux-prescribed block is numerically singular "
                f"(rcond {rcond:.3e}); the potential level is undetermined"
            )
        u[n_idx] = lu_solve(lu_piv, rhs)
    q = bcm.matrix @ u
    return u, q
