"""Built-in cross-check suite behind the `verify` CLI verb.

Each check compares an independently derived value (closed forms, the 1/s
scaling law, analytic parallel-plate capacitance, the monolithic coupled
solve) against the production path and prints one PASS/FAIL line.
"""

from __future__ import annotations

import math

import numpy as np

from .assembly import assemble_G, assemble_H, compute_bcm
from .basis import POLICY_SKIP_CONSTANT, default_basis
from .decomposition import Conductor, Layer, LayerProblem, decompose_problem
from .geometry import build_closed_curve_mesh, build_rect_mesh, transformed
from .merge import generalized_capacitance, reduce_tree
from .oracle import exact_rect4, exact_rect5, flat_reference, parallel_plate_reference
from .scaling import BcmCache

__all__ = ["run_verification"]


def _blob(t: float) -> tuple[float, float]:
    phi = 2 * math.pi * t
    r = 1.0 + 0.25 * math.cos(2 * phi) + 0.15 * math.sin(3 * phi)
    return (0.3 + r * math.cos(phi), -0.2 + r * math.sin(phi))


def run_verification(echo=print, quick: bool = False) -> bool:
    checks: list[tuple[str, bool, str]] = []

    def record(name, passed, detail):
        checks.append((name, passed, detail))
        echo(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")

    rng = np.random.default_rng(2024)
    draws = 20 if quick else 200

    # closed-form assembly
    worst_h = worst_g = 0.0
    for _ in range(draws):
        a, b = rng.uniform(-5, 5, 2)
        w, h = rng.uniform(0.1, 10, 2)
        mesh = build_rect_mesh(a, b, w, h)
        basis = default_basis(4)
        ref = exact_rect4(a, b, w, h)
        worst_h = max(worst_h, np.abs(assemble_H(mesh, basis) - ref.H).max() / np.abs(ref.H).max())
        worst_g = max(worst_g, np.abs(assemble_G(mesh, basis) - ref.G).max() / np.abs(ref.G).max())
    record("closed-form H and G", worst_h < 1e-12 and worst_g < 1e-12,
           f"max rel err H {worst_h:.2e}, G {worst_g:.2e} over {draws} draws")

    # closed-form matrix, translation and policy independence
    mesh = build_rect_mesh(0, 0, 1, 1)
    c0 = compute_bcm(mesh).matrix
    ref4 = exact_rect4(0, 0, 1, 1).C
    scale = np.abs(ref4).max()
    e_base = np.abs(c0 - ref4).max() / scale
    e_tr = max(
        np.abs(compute_bcm(build_rect_mesh(*sh, 1, 1)).matrix - c0).max() / scale
        for sh in ((7.0, -2.0), (100.0, 100.0), (-3.5, 0.25))
    )
    e_pol = np.abs(compute_bcm(mesh, POLICY_SKIP_CONSTANT).matrix - c0).max() / scale
    record("unit-square matrix, translation + policy invariance",
           e_base < 1e-10 and e_tr < 1e-10 and e_pol < 1e-10,
           f"closed-form {e_base:.2e}, translation {e_tr:.2e}, policy {e_pol:.2e}")

    # split-bottom closed form
    mesh5 = build_rect_mesh(0, 0, 1, 1, splits=(2, 1, 1, 1))
    e5 = np.abs(compute_bcm(mesh5).matrix - exact_rect5(1, 1)).max()
    record("split-bottom closed form", e5 < 1e-10, f"max abs err {e5:.2e}")

    # scaling law on three mesh families
    worst = 0.0
    for m in (
        build_rect_mesh(0, 0, 1, 1),
        build_rect_mesh(-1.0, -0.65, 2.0, 1.3, splits=(7, 5, 7, 5)),
        build_closed_curve_mesh(_blob, 13, geometry_degree=2),
    ):
        base = compute_bcm(m, normalized=False).matrix
        for s in (0.5, 2.0, 10.0, 100.0):
            got = compute_bcm(transformed(m, scale=s), normalized=False).matrix
            worst = max(worst, np.abs(got - base / s).max() / np.abs(base / s).max())
    record("1/s scaling law", worst < 1e-10, f"worst rel err {worst:.2e}")

    # zero row sums
    defect = max(
        compute_bcm(m).row_sum_defect()
        for m in (mesh, mesh5, build_closed_curve_mesh(_blob, 13, geometry_degree=2))
    )
    record("uniform potential maps to zero flux", defect < 1e-9, f"worst defect {defect:.2e}")

    # cache accounting on three similar meshes
    cache = BcmCache()
    for s, off in ((1.0, (0, 0)), (0.5, (3, 3)), (0.25, (-2, 5))):
        cache.get_or_compute(build_rect_mesh(off[0], off[1], 2 * s, s, splits=(2, 1, 2, 1)))
    st = cache.stats()
    record("shape cache reuse", st.assemblies == 1 and st.hits == 2,
           f"assemblies {st.assemblies}, hits {st.hits}")

    # parallel plate through the full pipeline
    prob = LayerProblem(
        layers=(Layer(1.0, 1.0),),
        box_width=1.0,
        conductors=(Conductor(0, 0.0, 1.0, 1), Conductor(1, 0.0, 1.0, 2)),
        ground=1,
        mesh_level=0,
    )
    _, leaves = decompose_problem(prob, mesh_level=0, density=1)
    op = reduce_tree(leaves, BcmCache(), basis_policy=POLICY_SKIP_CONSTANT)
    got = generalized_capacitance(op, prob.ground).entries[0, 0]
    ref = parallel_plate_reference(1.0, 1.0, 1.0)
    e_pp = abs(got - ref) / ref
    record("parallel-plate capacitance", e_pp < 1e-6, f"rel err {e_pp:.2e}")

    # hierarchical vs monolithic on a two-layer, two-conductor system
    prob2 = LayerProblem(
        layers=(Layer(1.0, 4.0), Layer(1.0, 1.0)),
        box_width=2.0,
        conductors=(Conductor(1, 0.3, 0.5, 1), Conductor(1, 1.2, 0.5, 2)),
        ground="bottom-plane",
        mesh_level=1,
    )
    _, leaves2 = decompose_problem(prob2, mesh_level=1, density=1)
    op2 = reduce_tree(leaves2, BcmCache(), basis_policy=POLICY_SKIP_CONSTANT)
    tree_cg = generalized_capacitance(op2, prob2.ground)
    flat_cg = flat_reference(leaves2, prob2)
    e_flat = np.abs(tree_cg.entries - flat_cg.entries).max() / np.abs(flat_cg.entries).max()
    record("hierarchical vs monolithic", e_flat < 1e-8, f"rel err {e_flat:.2e}")

    failed = [c for c in checks if not c[1]]
    echo(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return not failed
