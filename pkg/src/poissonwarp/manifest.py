"""JSON manifests: charts, scalar fields, Poisson manifolds and warped products.

Tensors are sparse entry lists ``{"i": 0, "j": 1, "expr": "x"}``; indices are
0-based integers or coordinate names. Unlisted entries are zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .expr import ParseError, ScalarField, parse
from .geometry import DEFAULT_BOX, BivectorField, Chart, Cometric, GeometryError
from .warped import PoissonManifold, WarpedSpace, build_warped

COMMANDS = ("validate", "connection", "curvature", "ricci", "scalar", "laplacian", "compat",
            "warp-verify", "einstein", "solve-warp", "solve-scalar")


class ManifestError(Exception):
    """Invalid manifest; ``location`` is a JSON path such as ``manifolds[0].bivector[1]``."""

    def __init__(self, message: str, location: str = "", position: int | None = None):
        self.location = location
        self.position = position
        where = f"{location}: " if location else ""
        at = f" (at character {position})" if position is not None else ""
        super().__init__(f"{where}{message}{at}")
        self.detail = message


@dataclass
class Manifest:
    source: str
    charts: dict[str, Chart] = field(default_factory=dict)
    fields: dict[str, tuple[Chart, ScalarField]] = field(default_factory=dict)
    manifolds: dict[str, PoissonManifold] = field(default_factory=dict)
    warped: dict[str, WarpedSpace] = field(default_factory=dict)
    boxes: dict[str, tuple[float, float]] = field(default_factory=dict)
    tasks: list[dict[str, Any]] = field(default_factory=list)

    def box(self, name: str) -> tuple[float, float]:
        return self.boxes.get(name, DEFAULT_BOX)

    def targets(self) -> list[str]:
        return list(self.manifolds) + list(self.warped)

    def get(self, name: str) -> PoissonManifold | WarpedSpace:
        if name in self.warped:
            return self.warped[name]
        if name in self.manifolds:
            return self.manifolds[name]
        raise ManifestError(f"unknown target {name!r}; known: {', '.join(self.targets())}")


def resolve_path(path: str | Path) -> Path:
    """``path`` itself, or the packaged fixture with the same file name."""
    p = Path(path)
    if p.exists():
        return p
    packaged = resources.files("poissonwarp") / "fixtures" / p.name
    if packaged.is_file():
        return Path(str(packaged))
    raise ManifestError(f"manifest not found: {path}")


def load_manifest(path: str | Path) -> Manifest:
    p = resolve_path(path)
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    return manifest_from_dict(data, str(path))


def _require(obj: dict, key: str, loc: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ManifestError(f"missing key {key!r}", loc)
    return obj[key]


def _expr(text: Any, chart: Chart, loc: str) -> ScalarField:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ManifestError("expression must be a string or a number", loc)
    try:
        return parse(text, chart.coords)
    except ParseError as exc:
        raise ManifestError(str(exc.args[0]), loc, exc.position) from exc


def _index(value: Any, chart: Chart, loc: str) -> int:
    if isinstance(value, str):
        if value not in chart.coords:
            raise ManifestError(f"unknown coordinate {value!r} for chart {chart.name!r}", loc)
        return chart.index(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ManifestError("index must be an integer or a coordinate name", loc)
    if not 0 <= value < chart.dim:
        raise ManifestError(f"index {value} out of range for chart {chart.name!r} of dimension {chart.dim}", loc)
    return value


def _entries(items: Any, chart: Chart, loc: str, strict: bool) -> dict[tuple[int, int], ScalarField]:
    """Parse ``{i, j, expr}`` entries; ``strict`` demands ``i < j`` (bivectors), else ``i <= j``."""
    if items is None:
        return {}
    if not isinstance(items, list):
        raise ManifestError("expected a list of {i, j, expr} entries", loc)
    out: dict[tuple[int, int], ScalarField] = {}
    for k, item in enumerate(items):
        at = f"{loc}[{k}]"
        i = _index(_require(item, "i", at), chart, at)
        j = _index(_require(item, "j", at), chart, at)
        if strict and not i < j:
            raise ManifestError(f"bivector entries need i < j, got ({i}, {j})", at)
        if not strict and not i <= j:
            raise ManifestError(f"cometric entries need i <= j, got ({i}, {j})", at)
        if (i, j) in out:
            raise ManifestError(f"duplicate entry ({i}, {j})", at)
        out[(i, j)] = _expr(_require(item, "expr", at), chart, at)
    return out


def _box(value: Any, loc: str) -> tuple[float, float] | None:
    if value is None:
        return None
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value) or not value[0] < value[1]):
        raise ManifestError("box must be [low, high] with low < high", loc)
    return float(value[0]), float(value[1])


def manifest_from_dict(data: dict, source: str = "<dict>") -> Manifest:
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")
    m = Manifest(source)
    default_box = _box(data.get("box"), "box") or DEFAULT_BOX

    for k, c in enumerate(data.get("charts", [])):
        loc = f"charts[{k}]"
        name = _require(c, "name", loc)
        coords = _require(c, "coords", loc)
        if name in m.charts:
            raise ManifestError(f"duplicate chart {name!r}", loc)
        if not isinstance(coords, list) or not all(isinstance(x, str) for x in coords):
            raise ManifestError("coords must be a list of names", loc)
        try:
            m.charts[name] = Chart(name, tuple(coords))
        except GeometryError as exc:
            raise ManifestError(str(exc), loc) from exc

    def chart_of(name: Any, loc: str) -> Chart:
        if name not in m.charts:
            raise ManifestError(f"unknown chart {name!r}", loc)
        return m.charts[name]

    for k, fdef in enumerate(data.get("fields", [])):
        loc = f"fields[{k}]"
        name = _require(fdef, "name", loc)
        chart = chart_of(_require(fdef, "chart", loc), loc)
        m.fields[name] = (chart, _expr(_require(fdef, "expr", loc), chart, f"{loc}.expr"))

    for k, mdef in enumerate(data.get("manifolds", [])):
        loc = f"manifolds[{k}]"
        name = _require(mdef, "name", loc)
        if name in m.manifolds:
            raise ManifestError(f"duplicate manifold {name!r}", loc)
        chart = chart_of(_require(mdef, "chart", loc), loc)
        upper = _entries(mdef.get("bivector"), chart, f"{loc}.bivector", strict=True)
        entries = _entries(mdef.get("cometric"), chart, f"{loc}.cometric", strict=False)
        exclude = []
        for e, ex in enumerate(mdef.get("exclude", [])):
            at = f"{loc}.exclude[{e}]"
            coord = _require(ex, "coord", at)
            _index(coord, chart, at)
            radius = _require(ex, "radius", at)
            if not isinstance(radius, (int, float)) or radius < 0:
                raise ManifestError("radius must be a nonnegative number", at)
            exclude.append((coord, float(radius)))
        m.manifolds[name] = PoissonManifold(name, BivectorField(chart, upper), Cometric(chart, entries), tuple(exclude))
        m.boxes[name] = _box(mdef.get("box"), f"{loc}.box") or default_box

    for k, wdef in enumerate(data.get("warped_products", [])):
        loc = f"warped_products[{k}]"
        name = _require(wdef, "name", loc)
        if name in m.warped or name in m.manifolds:
            raise ManifestError(f"duplicate target name {name!r}", loc)
        refs = []
        for role in ("base", "fiber"):
            ref = _require(wdef, role, loc)
            if ref not in m.manifolds:
                raise ManifestError(f"unknown {role} manifold {ref!r}", f"{loc}.{role}")
            refs.append(m.manifolds[ref])
        base, fiber = refs
        warp = _require(wdef, "warp", loc)
        if isinstance(warp, dict):
            ref = _require(warp, "field", f"{loc}.warp")
            if ref not in m.fields:
                raise ManifestError(f"unknown field {ref!r}", f"{loc}.warp")
            fchart, f = m.fields[ref]
        else:
            scope = Chart(f"{name}_warp", base.chart.coords + tuple(c for c in fiber.chart.coords
                                                                   if c not in base.chart.coords))
            f = _expr(warp, scope, f"{loc}.warp")
        box = _box(wdef.get("box"), f"{loc}.box") or m.boxes[base.name]
        try:
            m.warped[name] = build_warped(base, fiber, f, name, box=box)
        except GeometryError as exc:
            raise ManifestError(str(exc), loc) from exc
        m.boxes[name] = box

    for k, task in enumerate(data.get("tasks", [])):
        loc = f"tasks[{k}]"
        command = _require(task, "command", loc)
        if command not in COMMANDS:
            raise ManifestError(f"unknown command {command!r}", f"{loc}.command")
        target = task.get("target")
        if target is not None and target not in m.manifolds and target not in m.warped:
            raise ManifestError(f"unknown target {target!r}", f"{loc}.target")
        m.tasks.append(dict(task))
    return m
