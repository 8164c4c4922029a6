"""Fixture manifolds loaded from TOML files.

A fixture declares charts (sampling box and image inequalities), transition
maps as expression vectors, Christoffel fields (closed form, derived from a
metric, or pushed forward from another chart), optional metrics for the
Levi-Civita cross-check and an optional projective tower.  See the files in
``t2m/fixtures`` for complete examples.
"""

from __future__ import annotations

import os
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .atlas import Atlas, Chart, transition_map
from .calculus import SmoothMap2, from_scalar_function
from .connection import ChristoffelField, levi_civita_field, pushforward_christoffel
from .errors import ConfigError
from .expr import ExpressionError, Program, coordinate_names
from .prolim import Tower, TowerChristoffel, level_chart

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_DIR_ENV = "T2M_FIXTURE_DIR"


@dataclass(frozen=True)
class TowerFixture:
    tower: Tower
    gammas: TowerChristoffel
    second_chart: str | None = None
    forward: tuple[SmoothMap2, ...] = ()
    inverse: tuple[SmoothMap2, ...] = ()

    def second_gammas(self) -> TowerChristoffel | None:
        if self.second_chart is None:
            return None
        return TowerChristoffel(
            tuple(
                pushforward_christoffel(g, f, b, chart_id=f"{self.second_chart}{i}")
                for i, (g, f, b) in enumerate(zip(self.gammas.levels, self.forward, self.inverse), start=1)
            )
        )


@dataclass(frozen=True)
class Fixture:
    name: str
    description: str = ""
    atlas: Atlas | None = None
    christoffels: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    tower: TowerFixture | None = None
    source: str = ""


def _positive_predicate(exprs, dim: int, where: str) -> Callable[[np.ndarray], bool]:
    if not exprs:
        return lambda y: True
    prog = _program(exprs, coordinate_names("y", dim), (), where)

    def pred(y) -> bool:
        try:
            return all(float(v) > 0 for v in prog(list(np.asarray(y, dtype=float))))
        except (ValueError, ZeroDivisionError, OverflowError):
            return False

    return pred


def _program(outputs, names, lets, where: str) -> Program:
    if isinstance(outputs, str):
        outputs = [outputs]
    try:
        return Program(list(outputs), names, list(lets))
    except ExpressionError as exc:
        raise ConfigError(f"{where}: {exc}", exc.line, exc.column) from None


def _vector_map(exprs, dim_in: int, dim_out: int, lets, where: str, domain, name: str) -> SmoothMap2:
    if len(exprs) != dim_out:
        raise ConfigError(f"{where}: expected {dim_out} expressions, got {len(exprs)}")
    prog = _program(exprs, coordinate_names("y", dim_in), lets, where)
    return from_scalar_function(prog, dim_in, dim_out, domain, name)


def _action_field(chart_id: str, dim: int, exprs, lets, domain, where: str) -> ChristoffelField:
    if len(exprs) != dim:
        raise ConfigError(f"{where}: expected {dim} action expressions, got {len(exprs)}")
    names = coordinate_names("y", dim) + coordinate_names("u", dim) + coordinate_names("v", dim)
    prog = _program(exprs, names, lets, where)

    def action(y, u, v):
        return np.array([float(x) for x in prog([*y, *u, *v])])

    return ChristoffelField(chart_id, dim, action, domain, f"{where}")


def _metric_function(rows, dim: int, lets, where: str):
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise ConfigError(f"{where}: metric must be a {dim}x{dim} array of expressions")
    prog = _program([e for r in rows for e in r], coordinate_names("y", dim), lets, where)

    def metric(y):
        return np.array([float(x) for x in prog(list(y))]).reshape(dim, dim)

    return metric


def _box(spec, dim: int, where: str):
    if spec is None:
        return None
    try:
        lo, hi = spec
        lo, hi = tuple(float(x) for x in lo), tuple(float(x) for x in hi)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: box must be [[low...], [high...]]") from None
    if len(lo) != dim or len(hi) != dim:
        raise ConfigError(f"{where}: box corners must have {dim} entries")
    return lo, hi


def _locate(text: str, message: str) -> int | None:
    """Best-effort line of an error: the quoted text inside the named table."""
    lines = text.splitlines()
    start = 0
    table = re.match(r"([a-z]+\.[\w-]+)", message)
    if table:
        header = f"[{table.group(1)}]"
        start = next((k for k, line in enumerate(lines) if line.strip() == header), 0)
    for needle in re.findall(r"'([^']+)'", message):
        for k in range(start, len(lines)):
            if needle in lines[k]:
                return k + 1
    return start + 1 if table and start else None


def parse_fixture(text: str, source: str = "<string>") -> Fixture:
    """Parse fixture TOML text.  Errors carry line and column where known."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ConfigError(f"{source}: {exc}", line, col) from None
    try:
        return _build_fixture(doc, source)
    except ConfigError as exc:
        if exc.line is None:
            line = _locate(text, str(exc))
            if line is not None:
                raise ConfigError(str(exc), line, exc.column) from None
        raise


def _build_fixture(doc: dict, source: str) -> Fixture:
    meta = doc.get("fixture")
    if not isinstance(meta, dict) or "name" not in meta:
        raise ConfigError(f"{source}: missing [fixture] table with a name")
    name = str(meta["name"])
    description = str(meta.get("description", ""))
    atlas = None
    christoffels: dict[str, ChristoffelField] = {}
    metrics: dict[str, Callable] = {}
    if "charts" in doc:
        dim = int(meta.get("dim", 0))
        if dim < 1:
            raise ConfigError(f"{source}: fixture with charts needs a positive 'dim'")
        atlas = _build_atlas(doc, dim, name)
        christoffels = _build_christoffels(doc, atlas, dim)
        for cid, spec in doc.get("metric", {}).items():
            atlas.chart(cid)
            metrics[cid] = _metric_function(spec.get("g"), dim, spec.get("let", []), f"metric.{cid}")
    tower = _build_tower(doc["tower"]) if "tower" in doc else None
    if atlas is None and tower is None:
        raise ConfigError(f"{source}: fixture {name!r} declares neither charts nor a tower")
    return Fixture(name, description, atlas, christoffels, metrics, tower, source)


def _build_atlas(doc: dict, dim: int, name: str) -> Atlas:
    charts = {}
    for cid, spec in doc["charts"].items():
        where = f"charts.{cid}"
        charts[cid] = Chart(
            cid, dim, _positive_predicate(spec.get("positive", []), dim, where), _box(spec.get("box"), dim, where)
        )
    transitions, samples = {}, {}
    for k, spec in enumerate(doc.get("transitions", [])):
        try:
            src, dst = spec["from"], spec["to"]
        except KeyError:
            raise ConfigError(f"transitions[{k}] needs 'from' and 'to'") from None
        for cid in (src, dst):
            if cid not in charts:
                raise ConfigError(f"transitions[{k}] refers to unknown chart {cid!r}")
        where = f"transition {dst}<-{src}"
        own = _positive_predicate(spec.get("positive", []), dim, where)
        image = charts[src].contains

        def domain(y, own=own, image=image):
            return image(y) and own(y)

        transitions[(dst, src)] = _vector_map(spec.get("map", []), dim, dim, spec.get("let", []), where, domain, f"sigma[{dst},{src}]")
        pts = [np.asarray(p, dtype=float) for p in spec.get("samples", [])]
        for p in pts:
            if p.shape != (dim,) or not domain(p):
                raise ConfigError(f"{where}: sample point {p.tolist()} is not in the overlap")
        samples[(dst, src)] = pts
    return Atlas(charts, transitions, samples, name)


def _build_christoffels(doc: dict, atlas: Atlas, dim: int) -> dict[str, ChristoffelField]:
    specs = doc.get("christoffel", {})
    out: dict[str, ChristoffelField] = {}
    pending = dict(specs)
    for cid in specs:
        if cid not in atlas.charts:
            _raise(f"christoffel entry for unknown chart {cid!r}")
    while pending:
        progressed = False
        for cid, spec in list(pending.items()):
            where = f"christoffel.{cid}"
            domain = atlas.charts[cid].contains
            if "action" in spec:
                out[cid] = _action_field(cid, dim, spec["action"], spec.get("let", []), domain, where)
            elif "metric" in spec:
                g = _metric_function(spec["metric"], dim, spec.get("let", []), where)
                out[cid] = levi_civita_field(cid, dim, g, domain)
            elif "pushforward" in spec:
                src = spec["pushforward"]
                if src not in out:
                    if src not in pending:
                        _raise(f"{where}: cannot push forward from chart {src!r} without a field")
                    continue
                if (cid, src) not in atlas.transitions or (src, cid) not in atlas.transitions:
                    _raise(f"{where}: pushforward needs transitions both ways between {src!r} and {cid!r}")
                out[cid] = pushforward_christoffel(
                    out[src], transition_map(atlas, cid, src), transition_map(atlas, src, cid), chart_id=cid
                )
            else:
                _raise(f"{where}: needs one of 'action', 'metric', 'pushforward'")
            del pending[cid]
            progressed = True
        if not progressed:
            _raise(f"cyclic pushforward entries: {sorted(pending)}")
    return out


def _raise(msg: str):
    raise ConfigError(msg)


def _build_tower(spec: dict) -> TowerFixture:
    dims = [int(d) for d in spec.get("dims", [])]
    if not dims:
        raise ConfigError("tower: 'dims' is required")
    rho = spec.get("rho", "truncation")
    if rho == "truncation":
        tower = Tower.truncation(dims)
    elif isinstance(rho, list):
        tower = Tower.from_adjacent(dims, [np.asarray(m, dtype=float) for m in rho])
    else:
        raise ConfigError("tower: 'rho' must be \"truncation\" or a list of adjacent matrices")
    gamma_specs = spec.get("gamma")
    if gamma_specs is None:
        levels = tuple(ChristoffelField.zero(level_chart(i), d) for i, d in enumerate(dims, start=1))
    else:
        if len(gamma_specs) != len(dims):
            raise ConfigError(f"tower: need {len(dims)} gamma levels, got {len(gamma_specs)}")
        levels = tuple(
            _action_field(level_chart(i), d, g, spec.get("let", []), lambda y: True, f"tower.gamma[{i}]")
            for i, (d, g) in enumerate(zip(dims, gamma_specs), start=1)
        )
    second = spec.get("chart")
    if second is None:
        return TowerFixture(tower, TowerChristoffel(levels))
    cid = str(second.get("id", "alt"))
    fwd, inv = second.get("map", []), second.get("inverse", [])
    if len(fwd) != len(dims) or len(inv) != len(dims):
        raise ConfigError("tower.chart: need one 'map' and one 'inverse' entry per level")
    forward, inverse = [], []
    for i, d in enumerate(dims, start=1):
        f = _vector_map(fwd[i - 1], d, d, [], f"tower.chart.map[{i}]", lambda y: True, f"{cid}<-level{i}")
        b = _vector_map(inv[i - 1], d, d, [], f"tower.chart.inverse[{i}]", lambda y: True, f"level{i}<-{cid}")
        forward.append(f.with_labels(level_chart(i), f"{cid}{i}"))
        inverse.append(b.with_labels(f"{cid}{i}", level_chart(i)))
    return TowerFixture(tower, TowerChristoffel(levels), cid, tuple(forward), tuple(inverse))


def load_fixture(path: str | os.PathLike) -> Fixture:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_fixture(text, str(path))


def builtin_fixture_paths() -> dict[str, Path]:
    root = resources.files("t2m") / "fixtures"
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".toml")}


def user_fixture_paths(config_dir: str | os.PathLike | None = None) -> dict[str, Path]:
    config_dir = config_dir or os.environ.get(CONFIG_DIR_ENV)
    if not config_dir:
        return {}
    d = Path(config_dir)
    if not d.is_dir():
        return {}
    return {p.stem: p for p in sorted(d.glob("*.toml"))}


def fixture_catalog(config_dir=None) -> dict[str, Path]:
    """Built-in fixtures plus ``*.toml`` files from ``config_dir`` (or ``$T2M_FIXTURE_DIR``)."""
    out = dict(sorted(builtin_fixture_paths().items()))
    out.update(user_fixture_paths(config_dir))
    return out


def resolve_fixture(ref: str, config_dir=None) -> Fixture:
    """Load ``ref`` as a path if it exists, else as a catalog name."""
    p = Path(ref)
    if p.suffix == ".toml" or p.exists():
        return load_fixture(p)
    catalog = fixture_catalog(config_dir)
    if ref not in catalog:
        raise ConfigError(f"unknown fixture {ref!r}; known: {', '.join(sorted(catalog))}")
    return load_fixture(catalog[ref])
