"""Command line interface.

Verbs: solve (boundary capacitance matrix of one mesh), extract (full
capacitance extraction of a problem file), bench (refinement sweep with
table and figures), verify (built-in cross-check suite).

Exit codes: 0 success, 2 problem/mesh parse error, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .assembly import compute_bcm
from .decomposition import decompose_problem
from .errors import ProblemFormatError, TrefcapError
from .geometry import BoundaryElement, BoundaryMesh, Point2, build_rect_mesh
from .matio import export_matrix
from .pipeline import bench as run_bench, bench_table, run_extract
from .problems import parse_problem

EXIT_PARSE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

logger = logging.getLogger("trefcap")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_mesh_file(path) -> tuple[BoundaryMesh, dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_PARSE, f"{path}: invalid JSON: {exc}")
    try:
        if "rect" in spec:
            a, b, w, h = spec["rect"]
            mesh = build_rect_mesh(
                a, b, w, h,
                splits=spec.get("splits", (1, 1, 1, 1)),
                field_degree=spec.get("field_degree", 0),
            )
        elif "elements" in spec:
            elements = [
                BoundaryElement(
                    tuple(Point2(float(x), float(y)) for x, y in e["nodes"]),
                    field_degree=int(e.get("field_degree", 0)),
                )
                for e in spec["elements"]
            ]
            mesh = BoundaryMesh(elements)
        else:
            raise KeyError("mesh file needs a 'rect' or 'elements' entry")
        return mesh, spec
    except (KeyError, TypeError, ValueError) as exc:
        _fail(EXIT_PARSE, f"{path}: {exc}")
    except TrefcapError as exc:
        _fail(EXIT_PARSE, f"{path}: {exc}")


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
def main(verbose):
    """Boundary solver for interior 2D Laplace problems and hierarchical
    capacitance extraction of multilayer planar conductors."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.argument("mesh_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None,
              help="Write the matrix here (default: <mesh_file>.bcm.csv).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--policy", type=int, default=0, show_default=True,
              help="Weighting-function policy (0 = constant first, 1 = skip constant).")
@click.option("--raw", is_flag=True,
              help="Assemble on the mesh as-is instead of the normalized copy.")
@click.option("--report-cond", is_flag=True, help="Print the condition estimate of G.")
def solve(mesh_file, output, fmt, policy, raw, report_cond):
    """Boundary capacitance matrix of a single mesh (JSON mesh file with a
    'rect' [a, b, w, h] plus 'splits', or an explicit 'elements' list)."""
    mesh, _ = _load_mesh_file(mesh_file)
    try:
        bcm = compute_bcm(mesh, policy, normalized=not raw)
    except TrefcapError as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    out = Path(output) if output else Path(mesh_file).with_suffix(".bcm." + fmt)
    try:
        export_matrix(bcm.matrix, out, fmt)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {out}: {exc}")
    click.echo(f"{bcm.size} nodes; matrix written to {out}")
    if report_cond:
        click.echo(f"cond(G) estimate: {bcm.cond_estimate_G:.3e}")


def _write_figures(out_dir, problem, leaves, reports):
    from .plots import save_convergence_figure, save_geometry_figure, save_timing_figure

    made = []
    if leaves is not None:
        p = out_dir / "geometry.png"
        save_geometry_figure(problem, leaves, p)
        made.append(p)
    if reports:
        p = out_dir / "convergence.png"
        save_convergence_figure(reports, p)
        made.append(p)
        p = out_dir / "timings.png"
        save_timing_figure(reports, p)
        made.append(p)
    return made


@main.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--mesh-level", type=int, default=None,
              help="Override the mesh_level from the problem file.")
@click.option("--density", type=int, default=1, show_default=True,
              help="Per-edge element exponent (2**density elements per leaf edge).")
@click.option("--no-cache", is_flag=True, help="Report the cache-off result.")
@click.option("--ref", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Reference capacitance matrix (pF/m, csv/json) for RMSE.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--out-dir", default=".", show_default=True,
              help="Directory for matrices, tables and figures.")
@click.option("--plot/--no-plot", default=True, show_default=True,
              help="Render the geometry figure next to the matrix.")
@click.option("--repeats", type=int, default=3, show_default=True,
              help="Timing repeats per cache mode (median is reported).")
@click.option("--report-cond", is_flag=True,
              help="Print the worst leaf condition estimate.")
def extract(problem_file, mesh_level, density, no_cache, ref, fmt, out_dir, plot,
            repeats, report_cond):
    """Extract the generalized capacitance matrix of a problem file."""
    try:
        problem = parse_problem(problem_file)
    except ProblemFormatError as exc:
        _fail(EXIT_PARSE, f"{problem_file}: {exc}")
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {problem_file}: {exc}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot create {out}: {exc}")
    try:
        report = run_extract(
            problem,
            mesh_level=mesh_level,
            density=density,
            use_cache=not no_cache,
            compare_ref=ref,
            timing_repeats=repeats,
        )
    except TrefcapError as exc:
        _fail(EXIT_NUMERICAL, str(exc))

    matrix_path = out / f"capacitance.{fmt}"
    try:
        export_matrix(report.c_g.pf_per_m(), matrix_path, fmt)
        figures = []
        if plot:
            _, leaves = decompose_problem(
                problem, mesh_level=report.mesh_level, density=density
            )
            figures = _write_figures(out, problem, leaves, None)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write results: {exc}")

    click.echo(report.table_block())
    click.echo(f"cache: {report.cache_stats.assemblies} assemblies, "
               f"{report.cache_stats.hits} hits over {report.leaf_count} leaves "
               f"({report.shape_class_count} shape classes)")
    if report_cond:
        click.echo(f"max leaf cond(G) estimate: {report.cond_max_G:.3e}")
    click.echo(f"matrix (pF/m) written to {matrix_path}")
    for p in figures:
        click.echo(f"figure written to {p}")


@main.command("bench")
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--mesh-levels", default="0,1,2", show_default=True,
              help="Comma-separated refinement levels.")
@click.option("--density", type=int, default=1, show_default=True)
@click.option("--ref", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Reference capacitance matrix (pF/m) for RMSE per level.")
@click.option("--out-dir", default=".", show_default=True,
              help="Directory for matrices, tables and figures.")
@click.option("--repeats", type=int, default=3, show_default=True)
def bench_cmd(problem_file, mesh_levels, density, ref, out_dir, repeats):
    """Refinement sweep: per-level report blocks, a CSV table and
    convergence/timing figures."""
    try:
        problem = parse_problem(problem_file)
        levels = [int(v) for v in mesh_levels.split(",") if v.strip()]
    except ProblemFormatError as exc:
        _fail(EXIT_PARSE, f"{problem_file}: {exc}")
    except ValueError as exc:
        _fail(EXIT_PARSE, f"--mesh-levels: {exc}")
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {problem_file}: {exc}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot create {out}: {exc}")
    try:
        reports = run_bench(
            problem, levels, density=density, compare_ref=ref, timing_repeats=repeats
        )
    except TrefcapError as exc:
        _fail(EXIT_NUMERICAL, str(exc))

    for r in reports:
        click.echo(f"--- mesh level {r.mesh_level} ---")
        click.echo(r.table_block())
    try:
        table_path = out / "bench.csv"
        table_path.write_text(bench_table(reports), encoding="utf-8")
        _, leaves = decompose_problem(
            problem, mesh_level=reports[-1].mesh_level, density=density
        )
        figures = _write_figures(out, problem, leaves, reports)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write results: {exc}")
    click.echo(f"table written to {table_path}")
    for p in figures:
        click.echo(f"figure written to {p}")


@main.command()
@click.option("--quick", is_flag=True, help="Fewer random draws.")
def verify(quick):
    """Run the built-in cross-check suite (closed forms, scaling law,
    cache accounting, hierarchical-vs-monolithic agreement)."""
    from .verification import run_verification

    ok = run_verification(echo=click.echo, quick=quick)
    if not ok:
        sys.exit(EXIT_NUMERICAL)


if __name__ == "__main__":
    main()
