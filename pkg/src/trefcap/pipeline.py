"""Extraction pipeline driver and benchmark reporting.

run_extract wires decomposition, cached subdomain assembly, hierarchical
condensation and charge integration together and times the whole
reduction with the shape cache enabled and disabled on identical inputs.
bench sweeps refinement levels and emits a plot-ready convergence table.
Wall-clock speedups from caching are reported, never asserted: they
depend on the machine and on how many shape classes the decomposition
repeats.
"""

from __future__ import annotations

import logging
import statistics
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .basis import POLICY_SKIP_CONSTANT
from .decomposition import LayerProblem, decompose_problem, shape_classes
from .errors import TrefcapError
from .matio import import_matrix
from .merge import (
    GeneralizedCapacitanceMatrix,
    RmseReport,
    generalized_capacitance,
    reduce_tree,
    rmse,
)
from .scaling import BcmCache, CacheStats

__all__ = ["RunReport", "run_extract", "bench", "build_reference"]

logger = logging.getLogger(__name__)


@dataclass
class RunReport:
    """One extraction run: sizes, result, accuracy and timing diagnostics."""

    mesh_level: int
    density: int
    conductor_nodes: int
    total_nodes: int
    leaf_count: int
    shape_class_count: int
    c_g: GeneralizedCapacitanceMatrix
    rmse: Optional[RmseReport]
    time_with_cache_s: float
    time_without_cache_s: float
    cache_stats: CacheStats
    cond_max_G: float

    def table_block(self) -> str:
        """Fixed-width block in the classic benchmark-table layout: node
        counts, capacitance matrix in pF/m, RMSE and both timings."""
        lines = [
            f"N_n        {self.conductor_nodes} ({self.total_nodes})",
            "C_G [pF/m]",
        ]
        for row in self.c_g.pf_per_m():
            lines.append("   " + "  ".join(f"{v:10.4f}" for v in row))
        lines.append(f"E          {self.rmse.value:.4f}" if self.rmse else "E          n/a")
        lines.append(f"t_o [s]    {self.time_without_cache_s:.4f}")
        lines.append(f"t_n [s]    {self.time_with_cache_s:.4f}")
        return "\n".join(lines)


def build_reference(ref: Union[str, np.ndarray, GeneralizedCapacitanceMatrix, None],
                    ids: Sequence[int]):
    if ref is None:
        return None
    if isinstance(ref, GeneralizedCapacitanceMatrix):
        return ref
    if isinstance(ref, np.ndarray):
        entries = ref
    else:
        entries = import_matrix(ref)
    # Reference files carry pF/m (the reporting unit).
    return GeneralizedCapacitanceMatrix(entries=entries * 1e-12, conductor_ids=tuple(ids))


def _timed_reduction(leaves, cache_factory, repeats, basis_policy, workers, collect=None):
    times = []
    result = None
    for _ in range(max(1, repeats)):
        cache = cache_factory()
        t0 = time.perf_counter()
        op = reduce_tree(
            leaves, cache, basis_policy=basis_policy, workers=workers, collect=collect
        )
        times.append(time.perf_counter() - t0)
        result = (op, cache)
        collect = None  # diagnostics only needed once
    return statistics.median(times), result


def run_extract(
    problem: LayerProblem,
    *,
    mesh_level: Optional[int] = None,
    density: int = 1,
    use_cache: bool = True,
    compare_ref=None,
    timing_repeats: int = 3,
    basis_policy: int = POLICY_SKIP_CONSTANT,
    workers: int = 1,
) -> RunReport:
    """Full extraction of one problem at one refinement level.

    Both cache-on and cache-off reductions run on identical inputs (each
    timed as the median of `timing_repeats` runs); the returned matrix
    comes from the mode selected by use_cache.
    """
    level = problem.mesh_level if mesh_level is None else mesh_level
    try:
        trees, leaves = decompose_problem(problem, mesh_level=level, density=density)
    except TrefcapError as exc:
        logger.error("extraction failed during decomposition: %s", exc)
        raise
    diagnostics: dict = {}

    try:
        t_cache, (op_cached, cache) = _timed_reduction(
            leaves, BcmCache, timing_repeats, basis_policy, workers, collect=diagnostics
        )
        t_plain, (op_plain, _) = _timed_reduction(
            leaves, lambda: BcmCache(enabled=False), timing_repeats, basis_policy, workers
        )
    except TrefcapError as exc:
        logger.error("extraction failed during condensation: %s", exc)
        raise
    op = op_cached if use_cache else op_plain
    try:
        c_g = generalized_capacitance(op, problem.ground)
    except TrefcapError as exc:
        logger.error("extraction failed during charge integration: %s", exc)
        raise

    reference = build_reference(compare_ref, c_g.conductor_ids)
    report = RunReport(
        mesh_level=level,
        density=density,
        conductor_nodes=sum(
            1 for leaf in leaves for tag in leaf.node_tags if tag.kind == "conductor"
        ),
        total_nodes=sum(leaf.mesh.field_node_count for leaf in leaves),
        leaf_count=len(leaves),
        shape_class_count=len(shape_classes(leaves, basis_policy)),
        c_g=c_g,
        rmse=rmse(c_g, reference) if reference is not None else None,
        time_with_cache_s=t_cache,
        time_without_cache_s=t_plain,
        cache_stats=cache.stats(),
        cond_max_G=diagnostics.get("cond_max_G", float("nan")),
    )
    logger.info(
        "extract level=%d: %d leaves, %d shape classes, %d/%d assemblies/lookups, "
        "t_cache=%.4fs t_plain=%.4fs cond_max=%.2e",
        level,
        report.leaf_count,
        report.shape_class_count,
        report.cache_stats.assemblies,
        report.cache_stats.lookups,
        t_cache,
        t_plain,
        report.cond_max_G,
    )
    return report


def bench(
    problem: LayerProblem,
    mesh_levels: Sequence[int],
    *,
    density: int = 1,
    compare_ref=None,
    timing_repeats: int = 3,
    basis_policy: int = POLICY_SKIP_CONSTANT,
    workers: int = 1,
) -> list[RunReport]:
    """One extraction per refinement level; failures are logged and the
    remaining levels still run."""
    if not mesh_levels:
        raise ValueError("bench needs at least one mesh level")
    reports: list[RunReport] = []
    for level in mesh_levels:
        try:
            reports.append(
                run_extract(
                    problem,
                    mesh_level=level,
                    density=density,
                    compare_ref=compare_ref,
                    timing_repeats=timing_repeats,
                    basis_policy=basis_policy,
                    workers=workers,
                )
            )
        except TrefcapError as exc:
            logger.error("bench level %d failed: %s", level, exc)
    if not reports:
        raise TrefcapError("every bench level failed")
    return reports


def bench_table(reports: Sequence[RunReport]) -> str:
    """Plot-ready CSV table: level, node counts, RMSE and both timings."""
    lines = ["level,conductor_nodes,total_nodes,leaves,shape_classes,rmse_pf_per_m,"
             "t_cache_s,t_nocache_s,assemblies,hits,cond_max_G"]
    for r in reports:
        rm = f"{r.rmse.value:.6g}" if r.rmse else ""
        lines.append(
            f"{r.mesh_level},{r.conductor_nodes},{r.total_nodes},{r.leaf_count},"
            f"{r.shape_class_count},{rm},{r.time_with_cache_s:.6g},"
            f"{r.time_without_cache_s:.6g},{r.cache_stats.assemblies},"
            f"{r.cache_stats.hits},{r.cond_max_G:.6g}"
        )
    return "\n".join(lines) + "\n"
