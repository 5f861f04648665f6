"""YAML suite configuration with line-numbered validation errors.

A config holds ``runs``: a list of named runs, each with an optional problem
(``operator``, ``domain``, ``grid``, ``data``, ``solver``, ``psor``), a list of
``checks`` and a ``seed``. Data functions are expression strings (see
:mod:`degenpar.expr`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .expr import ExpressionError, compile_expression
from .fd import SolverConfig
from .geometry import DomainSpec
from .obstacle import ObstacleData, PsorConfig
from .operator import BUILTIN_DESCRIPTIONS, HestonParams, make_constant, make_heston
from .suites import SUITES

RUN_CHECKS = ("monotone", "fichera", "ghost_data", "obstacle_complementarity", "weak_max")
BUILTINS = tuple(BUILTIN_DESCRIPTIONS) + ("constant", "degenerate-1d")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        loc = ":".join(str(p) for p in (path, line) if p is not None)
        super().__init__(f"{loc}: {message}" if loc else message)


class LineDict(dict):
    """Mapping that remembers the source line (1-based) of each key."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.lines: dict = {}
        self.line: int | None = None

    def line_of(self, key) -> int | None:
        return self.lines.get(key, self.line)


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = LineDict()
    out.line = node.start_mark.line + 1
    for k_node, v_node in node.value:
        key = loader.construct_object(k_node, deep=True)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", k_node.start_mark.line + 1)
        out[key] = loader.construct_object(v_node, deep=True)
        out.lines[key] = k_node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def load_yaml(text: str, path: str | None = None):
    try:
        return yaml.load(text, Loader=_Loader)
    except ConfigError as exc:
        raise ConfigError(str(exc), exc.line, path) from None
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML parse error: {exc.problem or exc.context}",
                          mark.line + 1 if mark else None, path) from None


@dataclass
class RunConfig:
    name: str
    seed: int = 0
    operator: dict | None = None
    domain: DomainSpec | None = None
    shape: tuple | int | None = None
    n_levels: int | None = None
    data: dict = field(default_factory=dict)  # raw expression strings
    solver: SolverConfig = field(default_factory=SolverConfig)
    psor: PsorConfig = field(default_factory=PsorConfig)
    checks: list = field(default_factory=list)  # str or {"suite": name, ...options}
    output: str | None = None

    @property
    def has_problem(self) -> bool:
        return self.operator is not None

    @property
    def is_heston(self) -> bool:
        return bool(self.operator) and self.operator.get("builtin") == "heston"

    def build_operator(self):
        spec = dict(self.operator)
        name = spec.pop("builtin")
        if name == "heston":
            return make_heston(HestonParams(**spec))
        if name == "identity-laplacian":
            dim = spec.get("dim", self.domain.dim)
            return make_constant(np.eye(dim), np.zeros(dim), 0.0, name="identity-laplacian")
        if name == "constant":
            return make_constant(spec["a"], spec["b"], spec.get("c", 0.0))
        if name == "degenerate-1d":
            from .harness import degenerate_1d
            return degenerate_1d(spec.get("s", 1.0), spec.get("b0", 1.0), spec.get("b1", 0.0), spec.get("c", 0.0))
        raise ConfigError(f"unknown builtin {name!r}")

    def heston_params(self) -> HestonParams:
        spec = dict(self.operator)
        spec.pop("builtin")
        return HestonParams(**spec)

    def build_data(self) -> ObstacleData:
        d = self.domain.dim
        f = compile_expression(self.data.get("f", 0.0), d)
        g = compile_expression(self.data.get("g", 0.0), d)
        term = compile_expression(self.data["terminal"], d) if "terminal" in self.data else None
        psi = compile_expression(self.data["psi"], d) if "psi" in self.data else None
        return ObstacleData(f=f, g=g, terminal=term, psi=psi)


@dataclass
class SuiteConfig:
    runs: list
    jobs: int = 1
    path: str | None = None

    def run(self, name: str) -> RunConfig:
        for r in self.runs:
            if r.name == name:
                return r
        raise KeyError(name)


def _need(m: LineDict, key, path, kind=None):
    if key not in m:
        raise ConfigError(f"missing required key {key!r}", getattr(m, "line", None), path)
    v = m[key]
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(f"{key!r} must be {getattr(kind, '__name__', kind)}", m.line_of(key), path)
    return v


def _only(m: LineDict, allowed, path, where):
    for k in m:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} in {where}; allowed: {sorted(allowed)}", m.line_of(k), path)


def _parse_run(m, path, dim_hint=None) -> RunConfig:
    if not isinstance(m, LineDict):
        raise ConfigError("each run must be a mapping", None, path)
    _only(m, {"name", "seed", "operator", "domain", "grid", "data", "solver", "psor", "checks", "output"},
          path, "run")
    name = _need(m, "name", path, str)
    run = RunConfig(name=name, seed=int(m.get("seed", 0)), output=m.get("output"))
    if "operator" in m:
        op = m["operator"]
        if not isinstance(op, LineDict) or "builtin" not in op:
            raise ConfigError("operator needs a 'builtin' name", m.line_of("operator"), path)
        if op["builtin"] not in BUILTINS:
            raise ConfigError(f"unknown builtin {op['builtin']!r}; known: {list(BUILTINS)}", op.line_of("builtin"), path)
        run.operator = dict(op)
        dm = _need(m, "domain", path, LineDict)
        try:
            box = tuple(tuple(float(v) for v in side) for side in _need(dm, "box", path, list))
            run.domain = DomainSpec(T=float(dm.get("T", 1.0)), box=box,
                                    truncated_faces=frozenset(dm.get("truncated_faces", ())))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad domain: {exc}", dm.line, path) from None
        gm = _need(m, "grid", path, LineDict)
        shape = _need(gm, "shape", path)
        run.shape = tuple(int(s) for s in shape) if isinstance(shape, list) else int(shape)
        run.n_levels = int(_need(gm, "levels", path))
        dd = m.get("data", LineDict())
        if not isinstance(dd, LineDict):
            raise ConfigError("data must be a mapping of expressions", m.line_of("data"), path)
        _only(dd, {"f", "g", "terminal", "psi"}, path, "data")
        for k, v in dd.items():
            try:
                compile_expression(v, run.domain.dim)
            except ExpressionError as exc:
                raise ConfigError(str(exc), dd.line_of(k), path) from None
        run.data = dict(dd)
        try:
            run.build_operator()
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad operator parameters: {exc}", m.line_of("operator"), path) from None
    for key, cls in (("solver", SolverConfig), ("psor", PsorConfig)):
        if key in m:
            try:
                setattr(run, key, cls(**dict(m[key])))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad {key} settings: {exc}", m.line_of(key), path) from None
    checks = m.get("checks", [])
    if not isinstance(checks, list):
        raise ConfigError("checks must be a list", m.line_of("checks"), path)
    for c in checks:
        if isinstance(c, str):
            if c not in RUN_CHECKS:
                raise ConfigError(f"unknown check {c!r}; known: {list(RUN_CHECKS)} or {{suite: name}}",
                                  m.line_of("checks"), path)
            if not run.has_problem:
                raise ConfigError(f"check {c!r} needs a problem (operator, domain, grid)", m.line_of("checks"), path)
            if c == "fichera" and not run.is_heston:
                raise ConfigError("the fichera check needs the heston builtin", m.line_of("checks"), path)
        elif isinstance(c, LineDict):
            if c.get("suite") not in SUITES:
                raise ConfigError(f"unknown suite {c.get('suite')!r}; known: {sorted(SUITES)}", c.line, path)
        else:
            raise ConfigError("a check is a name or a {suite: ...} mapping", m.line_of("checks"), path)
    run.checks = list(checks)
    return run


def parse_config(text: str, path: str | None = None) -> SuiteConfig:
    doc = load_yaml(text, path)
    if not isinstance(doc, LineDict):
        raise ConfigError("config must be a mapping with a 'runs' list", 1, path)
    _only(doc, {"runs", "jobs"}, path, "config")
    runs = _need(doc, "runs", path, list)
    if not runs:
        raise ConfigError("'runs' must list at least one run", doc.line_of("runs"), path)
    parsed, seen = [], {}
    for m in runs:
        r = _parse_run(m, path)
        if r.name in seen:
            raise ConfigError(f"duplicate run name {r.name!r} (first at line {seen[r.name]})", m.line_of("name"), path)
        seen[r.name] = m.line_of("name")
        parsed.append(r)
    return SuiteConfig(parsed, int(doc.get("jobs", 1)), path)


def load_config(path) -> SuiteConfig:
    p = Path(path)
    return parse_config(p.read_text(), str(p))
