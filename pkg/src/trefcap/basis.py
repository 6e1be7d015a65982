"""T-complete weighting functions for the interior 2D Laplace equation.

The family {1, rho^m cos(m theta), rho^m sin(m theta)} is harmonic and
complete for interior problems.  Normal derivatives along a boundary with
corner angle alpha collapse to {0, m rho^(m-1) cos((m-1) theta - alpha),
m rho^(m-1) sin((m-1) theta - alpha)}.  Both families factor into a radial
part R(rho) and an angular part T, which is what makes the boundary
operators of uniformly scaled domains differ only by diagonal scale
matrices.  All functions here are stateless and vectorize over numpy
arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidBasisError

__all__ = [
    "Kind",
    "TrefftzFunction",
    "BasisSet",
    "POLICY_DEFAULT",
    "POLICY_SKIP_CONSTANT",
    "u_star",
    "q_star",
    "u_star_cartesian",
    "radial_factor_u",
    "radial_factor_q",
    "angular_factor_u",
    "angular_factor_q",
    "default_basis",
]

POLICY_DEFAULT = 0
POLICY_SKIP_CONSTANT = 1


class Kind(enum.Enum):
    CONSTANT = "constant"
    COS = "cos"
    SIN = "sin"


@dataclass(frozen=True)
class TrefftzFunction:
    kind: Kind
    order: int

    def __post_init__(self):
        if self.kind is Kind.CONSTANT and self.order != 0:
            raise InvalidBasisError("constant function has order 0")
        if self.kind is not Kind.CONSTANT and self.order < 1:
            raise InvalidBasisError(f"{self.kind.value} function needs order >= 1")


def u_star(f: TrefftzFunction, rho, theta):
    """Weighting function value at polar (rho, theta)."""
    if f.kind is Kind.CONSTANT:
        return np.ones_like(np.asarray(rho, dtype=float))
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    radial = rho**f.order
    if f.kind is Kind.COS:
        return radial * np.cos(f.order * theta)
    return radial * np.sin(f.order * theta)


def q_star(f: TrefftzFunction, rho, theta, alpha):
    """Outward normal derivative of the weighting function.

    Well defined everywhere: for order 1 the radial factor is rho^0 = 1,
    for order >= 2 it vanishes at rho = 0.
    """
    if f.kind is Kind.CONSTANT:
        return np.zeros_like(np.asarray(rho, dtype=float))
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    m = f.order
    radial = m * rho ** (m - 1)
    angle = (m - 1) * theta - alpha
    if f.kind is Kind.COS:
        return radial * np.cos(angle)
    return radial * np.sin(angle)


def u_star_cartesian(f: TrefftzFunction, x, y):
    """Same function as u_star, evaluated as the harmonic polynomial
    Re (x + iy)^m or Im (x + iy)^m.  Used for cross-checks only."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if f.kind is Kind.CONSTANT:
        return np.ones_like(x)
    z = (x + 1j * y) ** f.order
    return z.real if f.kind is Kind.COS else z.imag


def radial_factor_u(f: TrefftzFunction, rho):
    """R^u(rho): 1 for the constant function, rho^m otherwise."""
    rho = np.asarray(rho, dtype=float)
    if f.kind is Kind.CONSTANT:
        return np.ones_like(rho)
    return rho**f.order


def radial_factor_q(f: TrefftzFunction, rho):
    """R^q(rho): 0 for the constant function, rho^(m-1) otherwise.

    R^q(s) / R^u(s) = 1/s for every non-constant member, which is the root
    of the 1/s law for the boundary capacitance matrix.
    """
    rho = np.asarray(rho, dtype=float)
    if f.kind is Kind.CONSTANT:
        return np.zeros_like(rho)
    return rho ** (f.order - 1)


def angular_factor_u(f: TrefftzFunction, theta):
    theta = np.asarray(theta, dtype=float)
    if f.kind is Kind.CONSTANT:
        return np.ones_like(theta)
    if f.kind is Kind.COS:
        return np.cos(f.order * theta)
    return np.sin(f.order * theta)


def angular_factor_q(f: TrefftzFunction, theta, alpha):
    theta = np.asarray(theta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if f.kind is Kind.CONSTANT:
        return np.zeros_like(theta)
    m = f.order
    angle = (m - 1) * theta - alpha
    if f.kind is Kind.COS:
        return m * np.cos(angle)
    return m * np.sin(angle)


@dataclass(frozen=True)
class BasisSet:
    """Ordered weighting functions; the count must match the number of field
    nodes of the mesh it is paired with."""

    functions: tuple[TrefftzFunction, ...]
    policy_id: int

    def __post_init__(self):
        if len(set(self.functions)) != len(self.functions):
            raise InvalidBasisError("weighting functions must be pairwise distinct")

    @property
    def max_order(self) -> int:
        return max(f.order for f in self.functions)

    def __len__(self) -> int:
        return len(self.functions)


def _canonical_sequence(skip_constant: bool):
    if not skip_constant:
        yield TrefftzFunction(Kind.CONSTANT, 0)
    m = 1
    while True:
        yield TrefftzFunction(Kind.COS, m)
        yield TrefftzFunction(Kind.SIN, m)
        m += 1


def default_basis(n: int, policy: int = POLICY_DEFAULT) -> BasisSet:
    """First n functions of the canonical ordering.

    Policy 0 starts at the constant function, then cos/sin pairs by
    ascending order (cos first when n cuts a pair).  Policy 1 skips the
    constant function.  The boundary capacitance matrix is observed to be
    independent of this choice; the raw H and G operators are not, so the
    policy id participates in cache keys.
    """
    if n < 1:
        raise InvalidBasisError(f"basis size must be >= 1, got {n}")
    if policy not in (POLICY_DEFAULT, POLICY_SKIP_CONSTANT):
        raise InvalidBasisError(f"unknown basis policy {policy}")
    gen = _canonical_sequence(skip_constant=policy == POLICY_SKIP_CONSTANT)
    functions = tuple(next(gen) for _ in range(n))
    return BasisSet(functions, policy)
