"""Hierarchical condensation of subdomain boundary operators into the
generalized capacitance matrix.

Each subdomain's boundary capacitance matrix is lifted to a
permittivity-weighted flux operator (entries times eps_r * eps0).  Two
operators merge by enforcing potential continuity and weighted flux
balance q_A + q_B = 0 on coincident interface nodes (outward normals are
opposite across a shared edge) and eliminating those potentials exactly
through a Schur complement.  Folding the permittivity in at lift time
lets dielectric interfaces and same-material internal interfaces merge
through one code path.  After eliminating the zero-flux shield nodes the
retained operator acts on conductor nodes only, and driving one
conductor at unit potential yields its column of the capacitance matrix
by charge integration.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.constants import epsilon_0
from scipy.linalg import lapack, lu_factor, lu_solve

from .assembly import Bcm
from .decomposition import GROUND_BOTTOM_PLANE, BOTTOM_PLANE_ID, NodeTag, Subdomain
from .errors import (
    ComparisonError,
    DegenerateBcError,
    MergeSingularityError,
    PairingError,
    UnderdeterminedProblemError,
)
from .scaling import BcmCache

__all__ = [
    "RetainedNode",
    "CondensedOperator",
    "GeneralizedCapacitanceMatrix",
    "RmseReport",
    "lift_bcm",
    "merge_pair",
    "eliminate_neumann",
    "reduce_tree",
    "generalized_capacitance",
    "signal_conductor_ids",
    "rmse",
]

# Reciprocal condition floor for interface Schur pivots.
PIVOT_RCOND_FLOOR = 1e-14
MERGEABLE_KINDS = ("internal_interface", "dielectric_interface")


@dataclass(frozen=True)
class RetainedNode:
    x: float
    y: float
    tag: NodeTag
    weight: float


@dataclass
class CondensedOperator:
    """Dense map from retained-node potentials (V) to permittivity-weighted
    fluxes; summing flux times node weight over a conductor's nodes gives
    its induced charge per unit length (F/m scale once eps0 is folded in)."""

    matrix: np.ndarray
    nodes: tuple[RetainedNode, ...]
    epsilon_applied: bool = True

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def points(self) -> np.ndarray:
        return np.array([[n.x, n.y] for n in self.nodes])

    def null_vector_defect(self) -> float:
        """max |M 1| over max |M|: a uniform potential must drive zero flux."""
        scale = np.abs(self.matrix).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.matrix.sum(axis=1)).max() / scale)


def lift_bcm(bcm: Bcm, subdomain: Subdomain) -> CondensedOperator:
    """Permittivity-weighted operator of one subdomain: eps_r * eps0 * C on
    all of its nodes, with element lengths as integration weights."""
    if bcm.size != len(subdomain.node_tags):
        raise PairingError(
            f"matrix size {bcm.size} does not match the {len(subdomain.node_tags)} "
            f"tagged nodes of leaf {subdomain.index}"
        )
    nodes = tuple(
        RetainedNode(float(p[0]), float(p[1]), tag, float(w))
        for p, tag, w in zip(bcm.node_points, subdomain.node_tags, bcm.node_element_lengths)
    )
    return CondensedOperator(
        matrix=subdomain.epsilon_r * epsilon_0 * bcm.matrix,
        nodes=nodes,
    )


def _pair_tolerance(A: CondensedOperator, B: CondensedOperator) -> float:
    weights = [n.weight for n in A.nodes] + [n.weight for n in B.nodes]
    return 1e-9 * max(min(weights), 1e-300)


def _coincident_pairs(A: CondensedOperator, B: CondensedOperator, tol: float):
    """All (ia, ib) with mergeable tags and coincident coordinates."""
    index: dict[tuple[int, int], int] = {}
    for ia, node in enumerate(A.nodes):
        if node.tag.kind in MERGEABLE_KINDS:
            index[(round(node.x / tol), round(node.y / tol))] = ia
    pairs = []
    for ib, node in enumerate(B.nodes):
        if node.tag.kind not in MERGEABLE_KINDS:
            continue
        ia = index.get((round(node.x / tol), round(node.y / tol)))
        if ia is not None:
            pairs.append((ia, ib))
    return pairs


def merge_pair(
    A: CondensedOperator,
    B: CondensedOperator,
    pairing: Optional[Sequence[tuple[int, int]]] = None,
    *,
    where: str = "",
) -> CondensedOperator:
    """Merge two operators across their shared interface.

    `pairing` lists (node_of_A, node_of_B) index pairs to identify; if
    omitted it is derived from coincident interface-tagged nodes.  Paired
    potentials are equated, their weighted fluxes balanced, and the
    interface unknowns eliminated exactly:

        K = A_ii + B_ii,
        M = blockdiag(A_ee, B_ee) - [A_ei; B_ei] K^-1 [A_ie  B_ie].

    Retains every unpaired node of A and B (A's first).  An empty pairing
    degenerates to the block-diagonal stack.
    """
    if not (A.epsilon_applied and B.epsilon_applied):
        raise PairingError("both operators must be permittivity-weighted before merging")
    tol = _pair_tolerance(A, B)
    auto = _coincident_pairs(A, B, tol)
    if pairing is None:
        pairing = auto
    else:
        pairing = [(int(i), int(j)) for i, j in pairing]
        for ia, ib in pairing:
            na, nb = A.nodes[ia], B.nodes[ib]
            if math.hypot(na.x - nb.x, na.y - nb.y) > tol:
                raise PairingError(
                    f"paired nodes {ia} of A and {ib} of B do not coincide"
                    + (f" ({where})" if where else "")
                )
        missing = set(auto) - set(pairing)
        if missing:
            raise PairingError(
                f"pairing incomplete: coincident interface nodes {sorted(missing)} "
                "left unpaired" + (f" ({where})" if where else "")
            )

    ia_idx = [p[0] for p in pairing]
    ib_idx = [p[1] for p in pairing]
    ea_idx = [i for i in range(A.size) if i not in set(ia_idx)]
    eb_idx = [i for i in range(B.size) if i not in set(ib_idx)]
    nodes = tuple(A.nodes[i] for i in ea_idx) + tuple(B.nodes[i] for i in eb_idx)

    na, nb = len(ea_idx), len(eb_idx)
    M = np.zeros((na + nb, na + nb))
    M[:na, :na] = A.matrix[np.ix_(ea_idx, ea_idx)]
    M[na:, na:] = B.matrix[np.ix_(eb_idx, eb_idx)]
    if pairing:
        K = A.matrix[np.ix_(ia_idx, ia_idx)] + B.matrix[np.ix_(ib_idx, ib_idx)]
        rows_ei = np.vstack(
            [A.matrix[np.ix_(ea_idx, ia_idx)], B.matrix[np.ix_(eb_idx, ib_idx)]]
        )
        cols_ie = np.hstack(
            [A.matrix[np.ix_(ia_idx, ea_idx)], B.matrix[np.ix_(ib_idx, eb_idx)]]
        )
        anorm = np.linalg.norm(K, 1)
        try:
            lu_piv = lu_factor(K)
        except Exception as exc:
            raise MergeSingularityError(
                f"interface pivot factorization failed{f' ({where})' if where else ''}: {exc}"
            ) from exc
        rcond, info = lapack.dgecon(lu_piv[0], anorm, norm="1")
        if info != 0 or rcond < PIVOT_RCOND_FLOOR:
            raise MergeSingularityError(
                f"singular interface pivot (rcond {rcond:.3e})"
                + (f" at {where}" if where else ""),
                rcond=rcond,
            )
        M -= rows_ei @ lu_solve(lu_piv, cols_ie)
    return CondensedOperator(matrix=M, nodes=nodes)


def eliminate_neumann(op: CondensedOperator, node_indices: Iterable[int]) -> CondensedOperator:
    """Impose zero weighted flux on the given nodes and eliminate their
    potentials: retained = C_DD - C_DN (C_NN)^-1 C_ND."""
    n_idx = sorted(set(int(i) for i in node_indices))
    if not n_idx:
        return CondensedOperator(op.matrix.copy(), op.nodes, op.epsilon_applied)
    d_idx = [i for i in range(op.size) if i not in set(n_idx)]
    Cnn = op.matrix[np.ix_(n_idx, n_idx)]
    anorm = np.linalg.norm(Cnn, 1)
    try:
        lu_piv = lu_factor(Cnn)
    except Exception as exc:
        raise DegenerateBcError(f"zero-flux block is singular: {exc}") from exc
    rcond, info = lapack.dgecon(lu_piv[0], anorm, norm="1") if anorm > 0 else (0.0, 0)
    if info != 0 or rcond < PIVOT_RCOND_FLOOR:
        raise DegenerateBcError(
            f"zero-flux block is numerically singular (rcond {rcond:.3e}); "
            "the potential level is undetermined"
        )
    M = op.matrix[np.ix_(d_idx, d_idx)] - op.matrix[np.ix_(d_idx, n_idx)] @ lu_solve(
        lu_piv, op.matrix[np.ix_(n_idx, d_idx)]
    )
    return CondensedOperator(matrix=M, nodes=tuple(op.nodes[i] for i in d_idx))


def reduce_tree(
    leaves: Sequence[Subdomain],
    cache: BcmCache,
    *,
    basis_policy: int = 0,
    workers: int = 1,
    collect: Optional[dict] = None,
    **bcm_kwargs,
) -> CondensedOperator:
    """Condense all leaves down to the conductor nodes.

    Leaf matrices come through the cache (in parallel when workers > 1),
    are lifted by their layer permittivity, merged leaf by leaf within
    each layer, then layer by layer across the dielectric interfaces;
    finally the outer zero-flux nodes are eliminated.  `collect`, when
    given, receives diagnostics (max leaf condition estimate).
    """
    if not leaves:
        raise PairingError("no leaves to reduce")

    def fetch(leaf: Subdomain) -> tuple[Bcm, CondensedOperator]:
        bcm = cache.get_or_compute(leaf.mesh, basis_policy, **bcm_kwargs)
        return bcm, lift_bcm(bcm, leaf)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fetched = list(pool.map(fetch, leaves))
    else:
        fetched = [fetch(leaf) for leaf in leaves]
    ops = [op for _, op in fetched]
    if collect is not None:
        collect["cond_max_G"] = max(bcm.cond_estimate_G for bcm, _ in fetched)
        collect["leaf_nodes"] = [leaf.mesh.field_node_count for leaf in leaves]

    by_layer: dict[int, list[tuple[Subdomain, CondensedOperator]]] = {}
    for leaf, op in zip(leaves, ops):
        by_layer.setdefault(leaf.layer_index, []).append((leaf, op))

    layer_ops: list[CondensedOperator] = []
    for layer_idx in sorted(by_layer):
        acc: Optional[CondensedOperator] = None
        for leaf, op in by_layer[layer_idx]:
            if acc is None:
                acc = op
            else:
                acc = merge_pair(acc, op, where=f"layer {layer_idx}, leaf {leaf.index}")
        layer_ops.append(acc)

    total = layer_ops[0]
    for k, op in enumerate(layer_ops[1:], start=1):
        total = merge_pair(total, op, where=f"interface below layer {k}")

    leftover = [n.tag for n in total.nodes if n.tag.kind in MERGEABLE_KINDS]
    if leftover:
        raise PairingError(
            f"{len(leftover)} interface nodes left unpaired after the full reduction "
            f"(first: {leftover[0]})"
        )
    neumann = [i for i, n in enumerate(total.nodes) if n.tag.kind == "outer_neumann"]
    total = eliminate_neumann(total, neumann)
    if any(n.tag.kind != "conductor" for n in total.nodes):
        raise PairingError("reduction finished with non-conductor nodes retained")
    return total


def signal_conductor_ids(ids: Iterable[int], ground: Union[int, str]) -> list[int]:
    """Sorted conductor ids with the ground removed."""
    ids = sorted(set(ids))
    if ground == GROUND_BOTTOM_PLANE:
        ground_id = BOTTOM_PLANE_ID
        if ground_id not in ids:
            raise UnderdeterminedProblemError(
                "bottom-plane ground requested but no grounded bottom edge exists"
            )
    else:
        ground_id = int(ground)
        if ground_id not in ids:
            raise UnderdeterminedProblemError(f"ground conductor {ground_id} has no nodes")
    signals = [i for i in ids if i != ground_id]
    if not signals:
        raise UnderdeterminedProblemError(
            "need at least one signal conductor besides the ground"
        )
    return signals


@dataclass
class GeneralizedCapacitanceMatrix:
    """Per-unit-length capacitance matrix over the signal conductors
    (ground row/column omitted).  Entries in F/m."""

    entries: np.ndarray
    conductor_ids: tuple[int, ...]

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def pf_per_m(self) -> np.ndarray:
        return self.entries * 1e12

    def asymmetry(self) -> float:
        scale = np.abs(self.entries).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.entries - self.entries.T).max() / scale)


@dataclass(frozen=True)
class RmseReport:
    """Root mean square entrywise difference between two capacitance
    matrices, in pF/m."""

    value: float


def generalized_capacitance(
    op: CondensedOperator, ground: Union[int, str]
) -> GeneralizedCapacitanceMatrix:
    """Drive each signal conductor at unit potential (all others grounded)
    and integrate the induced charge on every signal conductor."""
    if any(n.tag.kind != "conductor" for n in op.nodes):
        raise PairingError("operator must be condensed to conductor nodes first")
    ids = [n.tag.ref for n in op.nodes]
    signals = signal_conductor_ids(ids, ground)
    id_arr = np.array(ids)
    weights = np.array([n.weight for n in op.nodes])
    entries = np.zeros((len(signals), len(signals)))
    for col, drive in enumerate(signals):
        u = (id_arr == drive).astype(float)
        q = op.matrix @ u
        for row, cid in enumerate(signals):
            mask = id_arr == cid
            entries[row, col] = float(np.sum(q[mask] * weights[mask]))
    return GeneralizedCapacitanceMatrix(entries=entries, conductor_ids=tuple(signals))


def rmse(got: GeneralizedCapacitanceMatrix, ref: GeneralizedCapacitanceMatrix) -> RmseReport:
    """RMSE between two capacitance matrices of equal size, in pF/m."""
    if got.entries.shape != ref.entries.shape:
        raise ComparisonError(
            f"cannot compare {got.entries.shape} against {ref.entries.shape}"
        )
    diff = got.pf_per_m() - ref.pf_per_m()
    return RmseReport(float(np.sqrt(np.mean(diff**2))))
