"""Matplotlib figures rendered to files next to the delimited reports."""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .decomposition import LayerProblem, Subdomain
from .pipeline import RunReport

__all__ = ["save_convergence_figure", "save_timing_figure", "save_geometry_figure"]


def save_convergence_figure(reports: Sequence[RunReport], path) -> None:
    """Node count and (when a reference was given) RMSE against the
    refinement level."""
    levels = [r.mesh_level for r in reports]
    fig, ax1 = plt.subplots(figsize=(6.0, 4.0))
    ax1.plot(levels, [r.total_nodes for r in reports], "o-", color="tab:blue",
             label="total nodes")
    ax1.plot(levels, [r.conductor_nodes for r in reports], "s--", color="tab:cyan",
             label="conductor nodes")
    ax1.set_xlabel("mesh level")
    ax1.set_ylabel("node count")
    ax1.set_yscale("log")
    ax1.grid(True, alpha=0.3)
    handles, labels = ax1.get_legend_handles_labels()
    if any(r.rmse for r in reports):
        ax2 = ax1.twinx()
        pts = [(l, r.rmse.value) for l, r in zip(levels, reports) if r.rmse]
        ax2.plot(*zip(*pts), "d-", color="tab:red", label="RMSE [pF/m]")
        ax2.set_ylabel("RMSE [pF/m]")
        ax2.set_yscale("log")
        h2, l2 = ax2.get_legend_handles_labels()
        handles += h2
        labels += l2
    ax1.legend(handles, labels, loc="best", fontsize=9)
    ax1.set_title("refinement sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_timing_figure(reports: Sequence[RunReport], path) -> None:
    """Reduction wall time with and without the shape cache per level."""
    levels = [r.mesh_level for r in reports]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(levels, [r.time_without_cache_s for r in reports], "o-", label="no cache (t_o)")
    ax.plot(levels, [r.time_with_cache_s for r in reports], "s-", label="with cache (t_n)")
    ax.set_xlabel("mesh level")
    ax.set_ylabel("wall time [s]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    ax.set_title("reduction timing")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_geometry_figure(
    problem: LayerProblem,
    leaves: Optional[Sequence[Subdomain]] = None,
    path="geometry.png",
) -> None:
    """Layer stack, conductors and (optionally) the leaf decomposition."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    cmap = plt.get_cmap("Pastel1")
    for k, layer in enumerate(problem.layers):
        y0 = problem.interface_y(k)
        ax.add_patch(
            Rectangle(
                (0, y0), problem.box_width, layer.height,
                facecolor=cmap(k % 9), edgecolor="none",
            )
        )
        ax.text(
            problem.box_width * 1.01, y0 + layer.height / 2,
            f"eps_r={layer.epsilon_r:g}", va="center", fontsize=8,
        )
    if leaves:
        for sd in leaves:
            r = sd.rect
            ax.add_patch(
                Rectangle((r.x, r.y), r.w, r.h, fill=False,
                          edgecolor="gray", linewidth=0.5)
            )
    for c in problem.conductors:
        y = problem.interface_y(c.interface_index)
        ax.plot([c.x_offset, c.x_offset + c.width], [y, y],
                color="black", linewidth=3, solid_capstyle="butt")
        ax.annotate(str(c.id), (c.x_offset + c.width / 2, y),
                    textcoords="offset points", xytext=(0, 4),
                    ha="center", fontsize=8)
    if problem.ground == "bottom-plane":
        ax.plot([0, problem.box_width], [0, 0], color="black", linewidth=2,
                linestyle=(0, (2, 1)))
    ax.set_xlim(-0.02 * problem.box_width, 1.14 * problem.box_width)
    ax.set_ylim(-0.05 * problem.box_height, 1.05 * problem.box_height)
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    ax.set_title("problem geometry")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
