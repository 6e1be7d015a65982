"""Boundary discretization for interior 2D potential problems.

A closed boundary is split into elements parametrized by a local coordinate
xi in [-1, 1].  Element geometry is interpolated with Lagrange polynomials on
equispaced local nodes; the field (potential / flux) is interpolated per
element with its own polynomial degree, degree 0 meaning one node at the
element midpoint (constant elements).  Meshes are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidGeometryError

__all__ = [
    "Point2",
    "BoundaryElement",
    "FrameData",
    "BoundaryMesh",
    "ShapeSignature",
    "build_rect_mesh",
    "build_closed_curve_mesh",
    "frame_at",
    "normalize",
    "transformed",
    "signature",
]

# Relative quantum used when fingerprinting normalized coordinates: below the
# assembly tolerances, above accumulated floating noise.
SIGNATURE_QUANTUM = 1e-9

_CLOSURE_RTOL = 1e-9


@dataclass(frozen=True)
class Point2:
    """Cartesian point, lengths in mm."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidGeometryError(f"non-finite point ({self.x}, {self.y})")


def _equispaced_locals(n: int) -> np.ndarray:
    """n interpolation abscissae in [-1, 1]; a single node sits at 0."""
    if n == 1:
        return np.array([0.0])
    return np.linspace(-1.0, 1.0, n)


def _lagrange_values(nodes: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Lagrange basis values, shape (len(nodes), len(xi))."""
    n = len(nodes)
    out = np.ones((n, len(xi)))
    for k in range(n):
        for j in range(n):
            if j != k:
                out[k] *= (xi - nodes[j]) / (nodes[k] - nodes[j])
    return out


def _lagrange_derivs(nodes: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Lagrange basis first derivatives, shape (len(nodes), len(xi))."""
    n = len(nodes)
    out = np.zeros((n, len(xi)))
    for k in range(n):
        for m in range(n):
            if m == k:
                continue
            term = np.ones(len(xi)) / (nodes[k] - nodes[m])
            for j in range(n):
                if j != k and j != m:
                    term *= (xi - nodes[j]) / (nodes[k] - nodes[j])
            out[k] += term
    return out


@dataclass(frozen=True)
class BoundaryElement:
    """One boundary element.

    geometry_nodes fix the shape (2 nodes = straight segment, 3 = quadratic
    arc, ...); field_degree fixes the per-element interpolation of potential
    and flux.  Field nodes sit at equispaced local coordinates, or at xi = 0
    for constant elements.
    """

    geometry_nodes: tuple[Point2, ...]
    field_degree: int = 0

    def __post_init__(self):
        if len(self.geometry_nodes) < 2:
            raise InvalidGeometryError("element needs at least two geometry nodes")
        if self.field_degree < 0:
            raise InvalidGeometryError("field degree must be >= 0")

    @property
    def geometry_degree(self) -> int:
        return len(self.geometry_nodes) - 1

    @property
    def field_node_locals(self) -> np.ndarray:
        return _equispaced_locals(self.field_degree + 1)

    @property
    def field_node_count(self) -> int:
        return self.field_degree + 1

    def _coords(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.geometry_nodes])

    def points_at(self, xi) -> np.ndarray:
        """Element points at local coordinates xi, shape (len(xi), 2)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        shp = _lagrange_values(_equispaced_locals(len(self.geometry_nodes)), xi)
        return shp.T @ self._coords()

    def derivs_at(self, xi) -> np.ndarray:
        """d(x, y)/dxi at local coordinates xi, shape (len(xi), 2)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        der = _lagrange_derivs(_equispaced_locals(len(self.geometry_nodes)), xi)
        return der.T @ self._coords()

    def jacobians_at(self, xi) -> np.ndarray:
        d = self.derivs_at(xi)
        return np.hypot(d[:, 0], d[:, 1])

    def field_shape_at(self, xi) -> np.ndarray:
        """Field interpolation polynomial values, shape (n_field_nodes, len(xi))."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.field_degree == 0:
            return np.ones((1, len(xi)))
        return _lagrange_values(self.field_node_locals, xi)

    def field_points(self) -> np.ndarray:
        return self.points_at(self.field_node_locals)

    def length(self) -> float:
        xi, w = np.polynomial.legendre.leggauss(self.geometry_degree + 2)
        return float(w @ self.jacobians_at(xi))

    def field_node_weights(self) -> np.ndarray:
        """Integration weight of each field node: integral of its shape
        polynomial times the Jacobian.  Equals the element length for
        constant elements."""
        order = self.geometry_degree + self.field_degree + 2
        xi, w = np.polynomial.legendre.leggauss(order)
        phi = self.field_shape_at(xi)
        return phi @ (w * self.jacobians_at(xi))


@dataclass(frozen=True)
class FrameData:
    """Local frame of a boundary point: polar coordinates about the origin,
    the corner angle alpha fixing the outward normal (cos(alpha) = dy/dG,
    sin(alpha) = dx/dG along the oriented boundary), and the Jacobian."""

    point: Point2
    rho: float
    theta: float
    alpha: float
    jacobian: float


def frame_at(element: BoundaryElement, xi: float) -> FrameData:
    """Frame of `element` at local coordinate xi in [-1, 1]."""
    if not -1.0 <= xi <= 1.0:
        raise ValueError(f"xi={xi} outside [-1, 1]")
    p = element.points_at([xi])[0]
    d = element.derivs_at([xi])[0]
    jac = math.hypot(d[0], d[1])
    if jac <= 0.0 or not math.isfinite(jac):
        raise InvalidGeometryError(f"degenerate element: Jacobian {jac} at xi={xi}")
    rho = math.hypot(p[0], p[1])
    theta = math.atan2(p[1], p[0])
    alpha = math.atan2(d[0], d[1])
    return FrameData(Point2(float(p[0]), float(p[1])), rho, theta, alpha, jac)


class BoundaryMesh:
    """Closed, counter-clockwise discretized boundary.

    Element endpoints must chain into a closed curve; the outward normal of
    element j is (dy, -dx)/J along its orientation.
    """

    def __init__(self, elements: Iterable[BoundaryElement]):
        elements = tuple(elements)
        if not elements:
            raise InvalidGeometryError("mesh has no elements")
        self.elements = elements
        self._lengths = np.array([e.length() for e in elements])
        self._validate()
        self._field_points = np.vstack([e.field_points() for e in elements])
        self._field_weights = np.concatenate(
            [e.field_node_weights() for e in elements]
        )

    def _validate(self):
        perimeter = float(self._lengths.sum())
        if perimeter <= 0.0:
            raise InvalidGeometryError("mesh has zero perimeter")
        ends = np.array([e.points_at([1.0])[0] for e in self.elements])
        starts = np.array([e.points_at([-1.0])[0] for e in self.elements])
        gaps = np.hypot(*(ends - np.roll(starts, -1, axis=0)).T)
        if np.any(gaps > _CLOSURE_RTOL * perimeter):
            raise InvalidGeometryError(
                f"boundary not closed: max endpoint gap {gaps.max():.3e} "
                f"(perimeter {perimeter:.3e})"
            )
        # Jacobian positivity, sampled.
        xi = np.linspace(-1.0, 1.0, 7)
        for k, e in enumerate(self.elements):
            if np.any(e.jacobians_at(xi) <= 0.0):
                raise InvalidGeometryError(f"element {k} has non-positive Jacobian")
        # Counter-clockwise orientation: signed area 0.5 * closed integral of
        # (x dy - y dx) must be positive.
        order = max(4, 2 * max(e.geometry_degree for e in self.elements))
        q, w = np.polynomial.legendre.leggauss(order)
        area = 0.0
        for e in self.elements:
            pts = e.points_at(q)
            der = e.derivs_at(q)
            area += 0.5 * float(w @ (pts[:, 0] * der[:, 1] - pts[:, 1] * der[:, 0]))
        if area <= 0.0:
            raise InvalidGeometryError(
                f"mesh orientation is not counter-clockwise (signed area {area:.3e})"
            )

    @property
    def field_node_count(self) -> int:
        return len(self._field_points)

    def field_points(self) -> np.ndarray:
        """All field node coordinates in element order, shape (N_t, 2)."""
        return self._field_points.copy()

    def field_node_weights(self) -> np.ndarray:
        """Integration weight of every field node, shape (N_t,)."""
        return self._field_weights.copy()

    def element_lengths(self) -> np.ndarray:
        return self._lengths.copy()

    @property
    def perimeter(self) -> float:
        return float(self._lengths.sum())

    def geometry_points(self) -> np.ndarray:
        return np.array([[p.x, p.y] for e in self.elements for p in e.geometry_nodes])


def build_rect_mesh(
    a: float,
    b: float,
    w: float,
    h: float,
    splits: Sequence[int] = (1, 1, 1, 1),
    field_degree: int = 0,
) -> BoundaryMesh:
    """Rectangle (a, b)-(a+w, b+h) as straight elements, counter-clockwise.

    Sides are emitted in the order bottom, right, top, left; `splits` gives
    the element count per side in that order.
    """
    if w <= 0 or h <= 0:
        raise InvalidGeometryError(f"rectangle needs positive extents, got w={w}, h={h}")
    splits = tuple(int(s) for s in splits)
    if len(splits) != 4 or any(s < 1 for s in splits):
        raise InvalidGeometryError(f"splits must be four counts >= 1, got {splits}")
    corners = [(a, b), (a + w, b), (a + w, b + h), (a, b + h)]
    elements = []
    for side in range(4):
        p0 = np.array(corners[side])
        p1 = np.array(corners[(side + 1) % 4])
        n = splits[side]
        for k in range(n):
            q0 = p0 + (p1 - p0) * (k / n)
            q1 = p0 + (p1 - p0) * ((k + 1) / n)
            elements.append(
                BoundaryElement(
                    (Point2(*q0), Point2(*q1)),
                    field_degree=field_degree,
                )
            )
    return BoundaryMesh(elements)


def build_closed_curve_mesh(
    curve: Callable[[float], tuple[float, float]],
    n_elements: int,
    geometry_degree: int = 2,
    field_degree: int = 0,
) -> BoundaryMesh:
    """Sample a closed parametric curve t in [0, 1) into elements of the given
    geometry degree.  The curve must be traversed counter-clockwise."""
    if n_elements < 3:
        raise InvalidGeometryError("need at least 3 elements for a closed curve")
    elements = []
    for k in range(n_elements):
        ts = k / n_elements + np.linspace(0.0, 1.0, geometry_degree + 1) / n_elements
        pts = [Point2(*curve(t % 1.0)) for t in ts]
        elements.append(BoundaryElement(tuple(pts), field_degree=field_degree))
    return BoundaryMesh(elements)


def transformed(mesh: BoundaryMesh, scale: float = 1.0, offset=(0.0, 0.0)) -> BoundaryMesh:
    """New mesh with every geometry node mapped to node * scale + offset."""
    if scale <= 0:
        raise InvalidGeometryError(f"scale must be positive, got {scale}")
    ox, oy = offset
    elements = [
        BoundaryElement(
            tuple(Point2(p.x * scale + ox, p.y * scale + oy) for p in e.geometry_nodes),
            field_degree=e.field_degree,
        )
        for e in mesh.elements
    ]
    return BoundaryMesh(elements)


def normalize(mesh: BoundaryMesh) -> tuple[BoundaryMesh, float, Point2]:
    """Translate the field-node centroid to the origin and rescale so the
    maximum node radius is one.

    Returns (normalized, scale, offset) with
    original = normalized * scale + offset.
    """
    fp = mesh.field_points()
    centroid = fp.mean(axis=0)
    all_nodes = np.vstack([fp, mesh.geometry_points()])
    radius = float(np.hypot(*(all_nodes - centroid).T).max())
    if radius <= 0.0 or not math.isfinite(radius):
        raise InvalidGeometryError("mesh has zero extent, cannot normalize")
    normalized = transformed(mesh, scale=1.0 / radius, offset=(-centroid[0] / radius, -centroid[1] / radius))
    return normalized, radius, Point2(float(centroid[0]), float(centroid[1]))


@dataclass(frozen=True)
class ShapeSignature:
    """Translation- and scale-invariant fingerprint of a discretized boundary.

    Equal signatures mean: same per-element structure, same normalized node
    coordinates after quantization, and same weighting-function policy.
    """

    quantized_coords: tuple[int, ...]
    structure: tuple[tuple[int, int], ...]
    basis_policy_id: int


def signature(mesh: BoundaryMesh, basis_policy: int = 0) -> ShapeSignature:
    """Fingerprint of `mesh`, invariant under translation and uniform scaling."""
    normalized, _, _ = normalize(mesh)
    coords = normalized.geometry_points()
    quantized = tuple(int(v) for v in np.round(coords.ravel() / SIGNATURE_QUANTUM))
    structure = tuple(
        (len(e.geometry_nodes), e.field_degree) for e in normalized.elements
    )
    return ShapeSignature(quantized, structure, int(basis_policy))
