"""Problem-file parsing and serialization.

Line-oriented sections with key = value pairs:

    [options]
    box_width = 4.0          # mm
    ground = bottom-plane    # or a conductor number
    mesh_level = 2

    [layer]                  # listed bottom-up
    height = 1.0             # mm
    epsilon_r = 4.2

    [conductor]
    interface = 1            # 0 = box bottom, k = between layers k-1 and k
    x_offset = 1.0           # mm, from the left box wall
    width = 0.8              # mm

'#' and ';' start comments.  Conductors are renumbered 1..N left-to-right,
bottom-to-top regardless of file order; a numeric `ground` refers to that
final numbering.
"""

from __future__ import annotations

import io

from .decomposition import Conductor, Layer, LayerProblem
from .errors import ProblemFormatError

__all__ = ["parse_problem", "parse_problem_text", "serialize_problem"]

_SECTION_KEYS = {
    "options": {"box_width", "ground", "mesh_level"},
    "layer": {"height", "epsilon_r"},
    "conductor": {"interface", "x_offset", "width"},
}


def _parse_value(section, key, raw, line_no):
    if section == "options" and key == "ground":
        if raw == "bottom-plane":
            return raw
        try:
            return int(raw)
        except ValueError:
            raise ProblemFormatError(
                f"ground must be 'bottom-plane' or a conductor number, got {raw!r}",
                line=line_no,
            ) from None
    caster = int if key in ("mesh_level", "interface") else float
    try:
        return caster(raw)
    except ValueError:
        raise ProblemFormatError(
            f"{key} expects {'an integer' if caster is int else 'a number'}, got {raw!r}",
            line=line_no,
        ) from None


def parse_problem_text(text: str) -> LayerProblem:
    """Parse problem-file content; see module docstring for the grammar."""
    options: dict = {}
    layers: list[dict] = []
    conductors: list[dict] = []
    section = None
    current: dict | None = None

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ProblemFormatError("unterminated section header", line=line_no,
                                         column=len(raw_line))
            name = line[1:-1].strip().lower()
            if name not in _SECTION_KEYS:
                raise ProblemFormatError(f"unknown section [{name}]", line=line_no)
            section = name
            if name == "layer":
                current = {}
                layers.append(current)
            elif name == "conductor":
                current = {}
                conductors.append(current)
            else:
                current = options
            continue
        if "=" not in line:
            raise ProblemFormatError(
                "expected 'key = value'", line=line_no, column=raw_line.find(line) + 1
            )
        if section is None:
            raise ProblemFormatError("key outside of any section", line=line_no)
        key, _, raw_val = line.partition("=")
        key = key.strip().lower()
        raw_val = raw_val.strip()
        if key not in _SECTION_KEYS[section]:
            raise ProblemFormatError(f"unknown key {key!r} in [{section}]", line=line_no)
        if key in current:
            raise ProblemFormatError(f"duplicate key {key!r}", line=line_no)
        current[key] = _parse_value(section, key, raw_val, line_no)

    if "box_width" not in options:
        raise ProblemFormatError("missing box_width in [options]")
    if not layers:
        raise ProblemFormatError("problem needs at least one [layer]")
    for k, layer in enumerate(layers):
        for key in ("height", "epsilon_r"):
            if key not in layer:
                raise ProblemFormatError(f"[layer] {k + 1} is missing {key}")
    for k, c in enumerate(conductors):
        for key in ("interface", "x_offset", "width"):
            if key not in c:
                raise ProblemFormatError(f"[conductor] {k + 1} is missing {key}")

    # Conductor numbering: left to right, bottom to top, regardless of file order.
    ordered = sorted(conductors, key=lambda c: (c["interface"], c["x_offset"]))
    conductor_objs = tuple(
        Conductor(
            interface_index=c["interface"],
            x_offset=c["x_offset"],
            width=c["width"],
            id=k + 1,
        )
        for k, c in enumerate(ordered)
    )
    return LayerProblem(
        layers=tuple(Layer(l["height"], l["epsilon_r"]) for l in layers),
        box_width=options["box_width"],
        conductors=conductor_objs,
        ground=options.get("ground", "bottom-plane"),
        mesh_level=options.get("mesh_level", 1),
    )


def parse_problem(path) -> LayerProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_problem_text(fh.read())


def serialize_problem(problem: LayerProblem) -> str:
    """Problem-file text that parses back to an identical LayerProblem."""
    out = io.StringIO()
    out.write("[options]\n")
    out.write(f"box_width = {problem.box_width!r}\n")
    out.write(f"ground = {problem.ground}\n")
    out.write(f"mesh_level = {problem.mesh_level}\n")
    for layer in problem.layers:
        out.write("\n[layer]\n")
        out.write(f"height = {layer.height!r}\n")
        out.write(f"epsilon_r = {layer.epsilon_r!r}\n")
    for c in problem.conductors:
        out.write("\n[conductor]\n")
        out.write(f"interface = {c.interface_index}\n")
        out.write(f"x_offset = {c.x_offset!r}\n")
        out.write(f"width = {c.width!r}\n")
    return out.getvalue()
