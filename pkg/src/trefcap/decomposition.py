"""Hierarchical decomposition of dielectric layers into rectangular
subdomains with refinement toward the conductor-bearing edges.

Each refinement level of a conductor-carrying region peels the strip away
from the conductor edge off as a leaf (half the current height) and
bisects the remaining conductor strip left/right; children that still
carry conductors recurse, children without conductors keep peeling
matching strips (no lateral split) so that facing edges stay conforming.
Every leaf carries a fixed, small element count: strips expose n elements
on their outer edge and 2n on the conductor-side edge (where two children
meet below), uniform leaves n per horizontal and m per vertical edge.
Element pitch therefore halves per level toward the conductors while
per-leaf operator sizes, and with them the conditioning of the
boundary-operator solves, stay bounded; peeled strips of consecutive
levels are exactly similar rectangles and share one shape-cache entry.

Shared edges between neighboring leaves and between layers carry exactly
coincident nodes by construction; hanging nodes cannot occur.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .errors import ConformityError, ProblemFormatError, RefinementError
from .geometry import BoundaryMesh, ShapeSignature, build_rect_mesh, signature as mesh_signature

__all__ = [
    "Rect",
    "Layer",
    "Conductor",
    "LayerProblem",
    "Footprint",
    "TreeNode",
    "NodeTag",
    "Subdomain",
    "decompose_layer",
    "leaf_subdomains",
    "decompose_problem",
    "shape_classes",
]

GROUND_BOTTOM_PLANE = "bottom-plane"
# Conductor id reserved for the grounded bottom edge of the shield box.
BOTTOM_PLANE_ID = 0


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    @property
    def x1(self) -> float:
        return self.x + self.w

    @property
    def y1(self) -> float:
        return self.y + self.h


@dataclass(frozen=True)
class Layer:
    height: float
    epsilon_r: float


@dataclass(frozen=True)
class Conductor:
    """Zero-thickness conducting path on a layer interface.

    interface_index 0 is the bottom of the shield box, k the interface
    between layers k-1 and k, and n_layers the top of the box.
    """

    interface_index: int
    x_offset: float
    width: float
    id: int


@dataclass(frozen=True)
class LayerProblem:
    """Multilayer planar conductor system in a shielded box.

    Lengths in mm; layers are listed bottom-up.  `ground` is either a
    conductor id or "bottom-plane" (the bottom box edge held at zero
    potential)."""

    layers: tuple[Layer, ...]
    box_width: float
    conductors: tuple[Conductor, ...]
    ground: Union[int, str] = GROUND_BOTTOM_PLANE
    mesh_level: int = 1

    def __post_init__(self):
        if not self.layers:
            raise ProblemFormatError("problem needs at least one layer")
        if self.box_width <= 0:
            raise ProblemFormatError(f"box width must be positive, got {self.box_width}")
        for k, layer in enumerate(self.layers):
            if layer.height <= 0:
                raise ProblemFormatError(f"layer {k} height must be positive")
            if layer.epsilon_r <= 0:
                raise ProblemFormatError(f"layer {k} relative permittivity must be positive")
        if self.mesh_level < 0:
            raise ProblemFormatError("mesh_level must be >= 0")
        n_if = len(self.layers)
        by_interface: dict[int, list[Conductor]] = {}
        for c in self.conductors:
            if c.width <= 0:
                raise ProblemFormatError(f"conductor {c.id} width must be positive")
            if not 0 <= c.interface_index <= n_if:
                raise ProblemFormatError(
                    f"conductor {c.id} interface {c.interface_index} outside 0..{n_if}"
                )
            if c.x_offset < 0 or c.x_offset + c.width > self.box_width:
                raise ProblemFormatError(f"conductor {c.id} extends outside the box")
            by_interface.setdefault(c.interface_index, []).append(c)
        for cs in by_interface.values():
            cs = sorted(cs, key=lambda c: c.x_offset)
            for a, b in zip(cs, cs[1:]):
                if a.x_offset + a.width > b.x_offset:
                    raise ProblemFormatError(
                        f"conductors {a.id} and {b.id} overlap on interface {a.interface_index}"
                    )
        if isinstance(self.ground, str):
            if self.ground != GROUND_BOTTOM_PLANE:
                raise ProblemFormatError(f"unknown ground specifier {self.ground!r}")
        else:
            if self.ground not in {c.id for c in self.conductors}:
                raise ProblemFormatError(f"ground conductor id {self.ground} does not exist")

    @property
    def n_interfaces(self) -> int:
        return len(self.layers) + 1

    def interface_y(self, k: int) -> float:
        return float(sum(l.height for l in self.layers[:k]))

    @property
    def box_height(self) -> float:
        return self.interface_y(len(self.layers))


@dataclass(frozen=True)
class Footprint:
    """Conductor extent on one horizontal edge of a rectangle being split."""

    x0: float
    x1: float
    conductor_id: int
    edge: str  # "bottom" | "top"


@dataclass
class TreeNode:
    """Binary decomposition tree; leaves carry their Subdomain once meshed.

    On leaves, fine_edge names the horizontal edge that carries doubled
    element counts (the conductor-side edge of a peeled strip above a
    lateral split), or None for a uniformly discretized leaf.
    """

    rect: Rect
    children: tuple["TreeNode", "TreeNode"] | tuple = ()
    split: Optional[str] = None  # "ns" | "we"
    fine_edge: Optional[str] = None
    subdomain: Optional["Subdomain"] = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def iter_leaves(self):
        if self.is_leaf:
            yield self
        else:
            for child in self.children:
                yield from child.iter_leaves()

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.depth() for c in self.children)


def _overlapping(fps: Iterable[Footprint], rect: Rect, tol: float):
    out = []
    for f in fps:
        if min(f.x1, rect.x1) - max(f.x0, rect.x) > tol:
            out.append(f)
    return out


def decompose_layer(rect: Rect, footprints: Sequence[Footprint], mesh_level: int) -> TreeNode:
    """Decomposition tree of one layer rectangle.

    Footprints sit on the bottom and/or top edge of `rect`.  When both
    edges carry conductors the rectangle is first halved horizontally and
    each half is refined toward its own conductor edge with the full
    depth.  Raises RefinementError when the depth cannot separate two
    distinct conductors into different leaves.
    """
    if mesh_level < 0:
        raise RefinementError("mesh_level must be >= 0")
    tol = 1e-12 * max(rect.w, rect.h)
    bottom = [f for f in footprints if f.edge == "bottom"]
    top = [f for f in footprints if f.edge == "top"]
    if not _overlapping(footprints, rect, tol):
        return TreeNode(rect)
    if bottom and top:
        ymid = rect.y + rect.h / 2
        lower = Rect(rect.x, rect.y, rect.w, rect.h / 2)
        upper = Rect(rect.x, ymid, rect.w, rect.h / 2)
        return TreeNode(
            rect,
            (
                _refine(lower, bottom, "bottom", mesh_level, tol),
                _refine(upper, top, "top", mesh_level, tol),
            ),
            "ns",
        )
    if top:
        return _refine(rect, top, "top", mesh_level, tol)
    return _refine(rect, bottom, "bottom", mesh_level, tol)


def _check_separated(rect: Rect, fps: Sequence[Footprint]) -> None:
    ids = sorted({f.conductor_id for f in fps})
    if len(ids) > 1:
        raise RefinementError(
            f"mesh level exhausted with conductors {ids} still sharing the "
            f"leaf at x in [{rect.x:g}, {rect.x1:g}]"
        )


def _refine(rect: Rect, fps: Sequence[Footprint], edge: str, depth: int, tol: float) -> TreeNode:
    """Refine toward `edge`.  Conductor-free regions keep peeling strips
    (without lateral splits) so their facing edges match the graded stacks
    of their conductor-carrying siblings."""
    inside = _overlapping(fps, rect, tol)
    if depth == 0:
        _check_separated(rect, inside)
        return TreeNode(rect)
    half = rect.h / 2
    if edge == "bottom":
        strip_rect = Rect(rect.x, rect.y, rect.w, half)
        away = Rect(rect.x, rect.y + half, rect.w, half)
    else:
        strip_rect = Rect(rect.x, rect.y + half, rect.w, half)
        away = Rect(rect.x, rect.y, rect.w, half)
    if inside:
        # Peeled strip sees two children below its conductor-side edge.
        away_leaf = TreeNode(away, fine_edge="bottom" if edge == "bottom" else "top")
        west = Rect(strip_rect.x, strip_rect.y, strip_rect.w / 2, strip_rect.h)
        east = Rect(strip_rect.x + strip_rect.w / 2, strip_rect.y, strip_rect.w / 2, strip_rect.h)
        strip_node = TreeNode(
            strip_rect,
            (
                _refine(west, inside, edge, depth - 1, tol),
                _refine(east, inside, edge, depth - 1, tol),
            ),
            "we",
        )
    else:
        # Conductor-free: continue the stack without widening the pitch.
        away_leaf = TreeNode(away)
        strip_node = _refine(strip_rect, inside, edge, depth - 1, tol)
    if edge == "bottom":
        return TreeNode(rect, (strip_node, away_leaf), "ns")
    return TreeNode(rect, (away_leaf, strip_node), "ns")


@dataclass(frozen=True)
class NodeTag:
    """Role of one field node: conductor surface (ref = conductor id), outer
    shield edge with zero flux, interface between two dielectric layers
    (ref = layer pair), or an interface internal to one layer (ref =
    neighbor leaf index)."""

    kind: str  # "conductor" | "outer_neumann" | "dielectric_interface" | "internal_interface"
    ref: Union[int, tuple[int, int], None] = None


@dataclass
class Subdomain:
    """Meshed leaf rectangle with per-node roles; immutable once built."""

    mesh: BoundaryMesh
    epsilon_r: float
    node_tags: tuple[NodeTag, ...]
    rect: Rect
    layer_index: int
    index: int


def _layer_index_of(problem: LayerProblem, rect: Rect) -> int:
    tol = 1e-9 * max(problem.box_width, problem.box_height)
    for k in range(len(problem.layers)):
        if abs(rect.y - problem.interface_y(k)) <= tol and abs(
            rect.h - problem.layers[k].height
        ) <= tol:
            return k
    raise ConformityError(f"tree rectangle {rect} is not a layer of the problem")


def _conductor_at(problem: LayerProblem, interface: int, x: float, tol: float):
    """Conductor owning the element whose midpoint is x, if any.

    Strict containment: an element whose midpoint falls exactly on a
    footprint edge is NOT claimed, so a conductor can never silently
    swallow the dielectric gap next to it; the discrete footprint is
    narrower by at most half an element per side and converges with
    refinement."""
    for c in problem.conductors:
        if c.interface_index == interface and c.x_offset + tol < x < c.x_offset + c.width - tol:
            return c.id
    return None


def leaf_subdomains(
    tree: TreeNode,
    problem: LayerProblem,
    density: int = 1,
    *,
    index_base: int = 0,
) -> list[Subdomain]:
    """Mesh the leaves of one layer tree with constant elements and tag
    every field node by its geometric role.

    Every leaf edge carries 2**density elements, doubled on a strip's
    conductor-side (fine) edge; that fixed structure is what keeps
    neighboring leaves and neighboring layers node-conforming.  Raises
    ConformityError if an interface node ends up without a coincident
    partner.
    """
    if density < 0:
        raise ConformityError("density must be >= 0")
    n_side = 2**density
    layer_idx = _layer_index_of(problem, tree.rect)
    box_w, box_h = problem.box_width, problem.box_height
    geo_tol = 1e-9 * max(box_w, box_h)
    interface_ys = [problem.interface_y(k) for k in range(problem.n_interfaces)]

    leaves = list(tree.iter_leaves())
    subdomains: list[Subdomain] = []
    provisional: list[list] = []
    for offset, leaf in enumerate(leaves):
        r = leaf.rect
        splits = [n_side, n_side, n_side, n_side]  # bottom, right, top, left
        if leaf.fine_edge == "bottom":
            splits[0] = 2 * n_side
        elif leaf.fine_edge == "top":
            splits[2] = 2 * n_side
        mesh = build_rect_mesh(r.x, r.y, r.w, r.h, splits=splits, field_degree=0)
        kinds: list = []
        for px, py in mesh.field_points():
            on_left = abs(px - r.x) <= geo_tol
            on_right = abs(px - r.x1) <= geo_tol
            if on_left or on_right:
                if abs(px - 0.0) <= geo_tol or abs(px - box_w) <= geo_tol:
                    kinds.append(NodeTag("outer_neumann"))
                else:
                    kinds.append(NodeTag("internal_interface"))
                continue
            iface = next(
                (k for k, yk in enumerate(interface_ys) if abs(py - yk) <= geo_tol), None
            )
            if iface is None:
                kinds.append(NodeTag("internal_interface"))
                continue
            cid = _conductor_at(problem, iface, px, geo_tol)
            if cid is not None:
                kinds.append(NodeTag("conductor", cid))
            elif iface == 0:
                if problem.ground == GROUND_BOTTOM_PLANE:
                    kinds.append(NodeTag("conductor", BOTTOM_PLANE_ID))
                else:
                    kinds.append(NodeTag("outer_neumann"))
            elif iface == len(problem.layers):
                kinds.append(NodeTag("outer_neumann"))
            else:
                kinds.append(NodeTag("dielectric_interface", (iface - 1, iface)))
        provisional.append(kinds)
        subdomains.append(
            Subdomain(
                mesh=mesh,
                epsilon_r=problem.layers[layer_idx].epsilon_r,
                node_tags=(),
                rect=r,
                layer_index=layer_idx,
                index=index_base + offset,
            )
        )

    # Resolve internal-interface neighbors by exact node coincidence.
    min_len = min(sd.mesh.element_lengths().min() for sd in subdomains)
    tol = 1e-9 * min_len
    registry: dict[tuple[int, int], tuple[int, int]] = {}
    for si, sd in enumerate(subdomains):
        for ni, (tag, (px, py)) in enumerate(zip(provisional[si], sd.mesh.field_points())):
            if tag.kind != "internal_interface":
                continue
            key = (round(px / tol), round(py / tol))
            if key in registry:
                oi, oni = registry.pop(key)
                provisional[si][ni] = NodeTag("internal_interface", subdomains[oi].index)
                provisional[oi][oni] = NodeTag("internal_interface", sd.index)
            else:
                registry[key] = (si, ni)
    if registry:
        (si, ni) = next(iter(registry.values()))
        px, py = subdomains[si].mesh.field_points()[ni]
        raise ConformityError(
            f"internal node at ({px:g}, {py:g}) of leaf {subdomains[si].index} "
            "has no coincident partner"
        )
    for sd, kinds, leaf in zip(subdomains, provisional, leaves):
        sd.node_tags = tuple(kinds)
        leaf.subdomain = sd
    return subdomains


def _problem_footprints(problem: LayerProblem, layer_idx: int) -> list[Footprint]:
    fps = []
    for c in problem.conductors:
        if c.interface_index == layer_idx:
            fps.append(Footprint(c.x_offset, c.x_offset + c.width, c.id, "bottom"))
        elif c.interface_index == layer_idx + 1:
            fps.append(Footprint(c.x_offset, c.x_offset + c.width, c.id, "top"))
    return fps


def decompose_problem(
    problem: LayerProblem,
    mesh_level: Optional[int] = None,
    density: int = 1,
) -> tuple[list[TreeNode], list[Subdomain]]:
    """Decompose every layer of the problem and mesh all leaves with
    conforming discretizations."""
    level = problem.mesh_level if mesh_level is None else mesh_level
    trees: list[TreeNode] = []
    leaves: list[Subdomain] = []
    for k in range(len(problem.layers)):
        rect = Rect(0.0, problem.interface_y(k), problem.box_width, problem.layers[k].height)
        tree = decompose_layer(rect, _problem_footprints(problem, k), level)
        trees.append(tree)
        leaves.extend(
            leaf_subdomains(tree, problem, density, index_base=len(leaves))
        )
    tagged = {
        tag.ref for sd in leaves for tag in sd.node_tags if tag.kind == "conductor"
    }
    missing = sorted({c.id for c in problem.conductors} - tagged)
    if missing:
        raise RefinementError(
            f"mesh level {level} leaves conductor(s) {missing} without a single "
            "field node; increase mesh_level or density"
        )
    return trees, leaves


def shape_classes(leaves: Sequence[Subdomain], basis_policy: int = 0) -> dict[ShapeSignature, int]:
    """Histogram of shape signatures over the leaf meshes; predicts how many
    distinct assemblies the cache will perform."""
    counts: Counter = Counter(mesh_signature(sd.mesh, basis_policy) for sd in leaves)
    return dict(counts)
