"""Independent references used to cross-check the solver stack.

Contains closed-form H/G/C matrices for two small rectangle
discretizations (derived symbolically and spot-checked by hand), the
textbook parallel-plate capacitance, and a monolithic coupled solver that
stacks every subdomain's boundary equations plus interface and boundary
constraints into one dense system.  The monolithic solver shares only the
element integrals with the production path; the hierarchical condensation
itself is bypassed entirely, which is what makes it a usable oracle for
the merge machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.constants import epsilon_0
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dgecon as gecon

from .assembly import QuadratureRule, assemble_G, assemble_H, default_quadrature_order
from .basis import POLICY_SKIP_CONSTANT, default_basis
from .decomposition import LayerProblem, Subdomain
from .errors import FlatSingularityError
from .geometry import transformed
from .merge import GeneralizedCapacitanceMatrix, signal_conductor_ids

__all__ = [
    "ClosedFormMatrices",
    "exact_rect4",
    "exact_rect5",
    "parallel_plate_reference",
    "flat_reference",
]


@dataclass(frozen=True)
class ClosedFormMatrices:
    H: np.ndarray
    G: np.ndarray
    C: np.ndarray


def exact_rect4(a: float, b: float, w: float, h: float) -> ClosedFormMatrices:
    """Closed-form H, G, C for the rectangle (a,b)-(a+w,b+h) discretized as
    four constant elements (bottom, right, top, left) weighted with
    {1, x, y, x^2 - y^2}.

    H and G depend on the rectangle position (a, b); C does not.
    """
    if w <= 0 or h <= 0:
        raise ValueError(f"extents must be positive, got w={w}, h={h}")
    H = np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [0.0, h, 0.0, -h],
            [-w, 0.0, w, 0.0],
            [2 * b * w, 2 * h * (a + w), -2 * w * (b + h), -2 * a * h],
        ]
    )
    G = np.array(
        [
            [w, h, w, h],
            [w * w / 2 + a * w, h * (a + w), w * w / 2 + a * w, a * h],
            [b * w, h * h / 2 + b * h, w * (b + h), h * h / 2 + b * h],
            [
                w * (a * a + a * w - b * b + w * w / 3),
                h * ((a + w) ** 2 - b * b - b * h - h * h / 3),
                w * (a * a + a * w - (b + h) ** 2 + w * w / 3),
                h * (a * a - b * b - b * h - h * h / 3),
            ],
        ]
    )
    hw = h * h + w * w
    dh = h * hw  # h^3 + h w^2
    dw = w * hw  # h^2 w + w^3
    C = np.array(
        [
            [(4 * h * h + w * w) / dh, -3 * h / hw, (2 * h * h - w * w) / dh, -3 * h / hw],
            [-3 * w / hw, (h * h + 4 * w * w) / dw, -3 * w / hw, (2 * w * w - h * h) / dw],
            [(2 * h * h - w * w) / dh, -3 * h / hw, (4 * h * h + w * w) / dh, -3 * h / hw],
            [-3 * w / hw, (2 * w * w - h * h) / dw, -3 * w / hw, (h * h + 4 * w * w) / dw],
        ]
    )
    return ClosedFormMatrices(H, G, C)


def exact_rect5(w: float, h: float, corrected: bool = True) -> np.ndarray:
    """Closed-form C for a rectangle whose bottom side is split in two:
    five constant elements (bottom-left, bottom-right, right, top, left)
    weighted with {1, x, y, x^2 - y^2, 2xy}.  Independent of position.

    The corrected=True form (default) is the symbolically derived matrix;
    every row sums to zero.  corrected=False reproduces a legacy variant
    whose entries (3,1), (3,2), (5,1), (5,2) and the (4,4) denominator are
    wrong (rows 3 and 5 then fail the zero-row-sum identity); it is kept
    for reference only.
    """
    if w <= 0 or h <= 0:
        raise ValueError(f"extents must be positive, got w={w}, h={h}")
    hw = h * h + w * w
    dh = h * hw
    dw = w * hw
    d4 = 4 * h * h * hw
    r1 = [
        (6 * h * h + 3 * w * w) / (2 * dh),
        (2 * h * h - w * w) / (2 * dh),
        -3 * h / hw,
        (2 * h * h - w * w) / dh,
        -3 * h / hw,
    ]
    r2 = [r1[1], r1[0], r1[2], r1[3], r1[4]]
    if corrected:
        c31 = w * (w * w - 5 * h * h) / d4
        c32 = -w * (7 * h * h + w * w) / d4
        c44 = (4 * h * h + w * w) / dh
    else:
        c31 = (2 * w**3 - w * h * h) / d4
        c32 = (5 * w * h * h + 2 * w**3) / -d4
        c44 = (4 * h * h + w * w) / (h**3 + h * w)
    r3 = [c31, c32, (h * h + 4 * w * w) / dw, -3 * w / hw, (2 * w * w - h * h) / dw]
    r4 = [
        (2 * h * h - w * w) / (2 * dh),
        (2 * h * h - w * w) / (2 * dh),
        -3 * h / hw,
        c44,
        -3 * h / hw,
    ]
    r5 = [c32, c31, (2 * w * w - h * h) / dw, -3 * w / hw, (h * h + 4 * w * w) / dw]
    return np.array([r1, r2, r3, r4, r5])


def parallel_plate_reference(w: float, h: float, epsilon_r: float) -> float:
    """Per-unit-length capacitance eps0 * eps_r * w / h of an ideal parallel
    plate of width w and gap h (F/m)."""
    if w <= 0 or h <= 0:
        raise ValueError(f"extents must be positive, got w={w}, h={h}")
    return epsilon_0 * epsilon_r * w / h


def _coincidence_pairs(points: np.ndarray, owner: np.ndarray, tol: float):
    """Pairs of global node indices with coincident coordinates belonging to
    different subdomains."""
    seen: dict[tuple[int, int], int] = {}
    pairs = []
    for idx, (x, y) in enumerate(points):
        key = (round(x / tol), round(y / tol))
        if key in seen:
            other = seen[key]
            if owner[other] != owner[idx]:
                pairs.append((other, idx))
            continue
        seen[key] = idx
    return pairs


def flat_reference(
    leaves: Sequence[Subdomain],
    problem: LayerProblem,
    *,
    basis_policy: int = POLICY_SKIP_CONSTANT,
    workers: int = 1,
) -> GeneralizedCapacitanceMatrix:
    """Generalized capacitance matrix from one monolithic dense system.

    Unknowns are every subdomain's nodal potentials and fluxes.  Rows are
    the per-subdomain boundary equations H u = G q, potential continuity
    and permittivity-weighted flux balance on coincident interface nodes,
    prescribed potentials on conductor nodes and zero flux on the outer
    shield.  One factorization serves all conductor excitations.  Intended
    for desk-scale cross-checks (a few thousand unknowns at most).

    The default weighting policy keeps complete cos/sin pairs: on
    symmetric even-count discretizations the constant-plus-incomplete-pair
    family renders the per-leaf equations rank-deficient, which would make
    this reference silently meaningless.
    """
    counts = [leaf.mesh.field_node_count for leaf in leaves]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    n_nodes = int(offsets[-1])
    n_unknowns = 2 * n_nodes  # u block then q block

    points = np.vstack([leaf.mesh.field_points() for leaf in leaves])
    weights = np.concatenate([leaf.mesh.field_node_weights() for leaf in leaves])
    owner = np.concatenate(
        [np.full(c, k, dtype=int) for k, c in enumerate(counts)]
    )
    eps = np.concatenate(
        [np.full(c, leaf.epsilon_r) for leaf, c in zip(leaves, counts)]
    )
    tags = [tag for leaf in leaves for tag in leaf.node_tags]

    A = np.zeros((n_unknowns, n_unknowns))
    row = 0
    for k, leaf in enumerate(leaves):
        # Boundary equations with the expansion centre at the leaf centroid:
        # a pure translation, so the equations stay exact while rho^m terms
        # stay small.
        centroid = leaf.mesh.field_points().mean(axis=0)
        local = transformed(leaf.mesh, offset=(-centroid[0], -centroid[1]))
        nb = default_basis(local.field_node_count, policy=basis_policy)
        quad = QuadratureRule.gauss_legendre(default_quadrature_order(local, nb))
        H = assemble_H(local, nb, quad, workers=workers)
        G = assemble_G(local, nb, quad, workers=workers)
        sl = slice(offsets[k], offsets[k + 1])
        A[row : row + counts[k], sl] = H
        A[row : row + counts[k], n_nodes + offsets[k] : n_nodes + offsets[k + 1]] = -G
        row += counts[k]

    tol = 1e-9 * weights.min()
    pairs = _coincidence_pairs(points, owner, tol)
    paired = set()
    for i, j in pairs:
        ti, tj = tags[i], tags[j]
        if ti.kind == "conductor" or tj.kind == "conductor":
            continue  # conductor nodes keep their own flux (induced charge)
        A[row, i] = 1.0
        A[row, j] = -1.0
        row += 1
        A[row, n_nodes + i] = eps[i]
        A[row, n_nodes + j] = eps[j]
        row += 1
        paired.update((i, j))

    dirichlet_rows = []  # (matrix row, node) pairs for the excitation loop
    for i, tag in enumerate(tags):
        if i in paired:
            continue
        if tag.kind == "conductor":
            A[row, i] = 1.0
            dirichlet_rows.append((row, i))
            row += 1
        elif tag.kind == "outer_neumann":
            A[row, n_nodes + i] = 1.0
            row += 1
        else:
            raise FlatSingularityError(
                f"node {i} tagged {tag.kind} has no coincident partner"
            )
    if row != n_unknowns:
        raise FlatSingularityError(
            f"constraint count {row} does not close the {n_unknowns}-unknown system"
        )

    try:
        lu_piv = lu_factor(A)
    except Exception as exc:
        raise FlatSingularityError(f"monolithic system factorization failed: {exc}") from exc
    if not np.all(np.isfinite(lu_piv[0])):
        raise FlatSingularityError("monolithic system factorization produced non-finite factors")
    rcond, info = gecon(lu_piv[0], np.linalg.norm(A, 1), norm="1")
    if info != 0 or rcond < 1e-14:
        raise FlatSingularityError(
            f"monolithic system is numerically singular (rcond {rcond:.3e})", rcond=rcond
        )

    cids = signal_conductor_ids(
        {tag.ref for tag in tags if tag.kind == "conductor"}, problem.ground
    )
    node_ids = np.array(
        [tag.ref if tag.kind == "conductor" else -1 for tag in tags]
    )
    entries = np.zeros((len(cids), len(cids)))
    for col, drive in enumerate(cids):
        rhs = np.zeros(n_unknowns)
        for r, i in dirichlet_rows:
            rhs[r] = 1.0 if node_ids[i] == drive else 0.0
        sol = lu_solve(lu_piv, rhs)
        q = sol[n_nodes:]
        for rix, cid in enumerate(cids):
            mask = node_ids == cid
            entries[rix, col] = epsilon_0 * float(
                np.sum(eps[mask] * q[mask] * weights[mask])
            )
    return GeneralizedCapacitanceMatrix(entries=entries, conductor_ids=tuple(cids))
