"""Scenario configuration: JSON files mapped onto nested dataclasses.

Unknown keys and invalid values raise :class:`ConfigurationError` naming the
dotted key path. :func:`load_config` also applies module validation rules
(grid shape, truncation range, sectoriality, nonlinearity parameters).
"""
from __future__ import annotations

import dataclasses
import json
import os
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bloch import SampledFunction, SpatialGrid, fourier_mode, random_band_limited
from .errors import ConfigurationError, ShapeError
from .operators import (Nonlinearity, PeriodicCoefficient, PeriodicOperator,
                        kdvks_operator)

OUTPUT_ENV = "BLOCH_INSTAB_OUT"


@dataclass
class ModeSpec:
    kind: str = "reaction_diffusion"
    beta: float | None = None
    phi_modes: list = field(default_factory=list)


@dataclass
class TermSpec:
    order: int
    modes: list
    row: int = 0
    col: int = 0


@dataclass
class OperatorSpec:
    components: int = 1
    terms: list = field(default_factory=list)


@dataclass
class NonlinearitySpec:
    kind: str = "none"
    p: float = 2.0
    scale: float = 1.0


@dataclass
class GridSpec:
    periods: int = 32
    points_per_period: int = 32
    truncation: int | None = None
    n_xi: int | None = None


@dataclass
class ProjectionSpec:
    tau_act: float | None = None
    eps_gap: float = 1e-6
    n_contour: int = 128
    p: float | None = None


@dataclass
class InitialSpec:
    kind: str = "prepared"
    branch: typing.Any = "max"
    xi: float | None = None
    width: int = 3
    real: bool = True
    k: int = 0
    m: int = 0
    amplitude: float = 1.0
    component: int = 0
    bandwidth: float = 2.0
    seed: int = 0
    path: str | None = None


@dataclass
class ExperimentSpec:
    eta: float = 0.05
    deltas: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    omega_offset: float = 0.05
    horizon: float = 60.0
    dt: float = 0.05
    n_samples: int = 200
    theta: float = 0.1
    snapshot_stride: int = 50
    lambda_m: float | None = None
    refine: bool = False
    damping_delta: float = 1e-2
    damping_horizon: float = 10.0
    damping_cap: float = 1e6


@dataclass
class OutputSpec:
    dir: str | None = None


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    mode: ModeSpec = field(default_factory=ModeSpec)
    operator: OperatorSpec = field(default_factory=OperatorSpec)
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    grid: GridSpec = field(default_factory=GridSpec)
    projection: ProjectionSpec = field(default_factory=ProjectionSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int | None = None

    def to_dict(self):
        return dataclasses.asdict(self)

    @property
    def truncation(self):
        if self.grid.truncation is not None:
            return self.grid.truncation
        return self.grid.points_per_period // 2 - 1

    @property
    def n_xi(self):
        return self.grid.n_xi or self.grid.periods

    @property
    def p(self):
        return self.projection.p or self.nonlinearity.p

    def spatial_grid(self) -> SpatialGrid:
        return SpatialGrid(self.grid.periods, self.grid.points_per_period)

    def build_operator(self) -> PeriodicOperator:
        if self.mode.kind == "kdvks":
            phi = PeriodicCoefficient.from_triples(self.mode.phi_modes) if self.mode.phi_modes else None
            return kdvks_operator(self.mode.beta, phi)
        d = self.operator.components
        grouped = {}
        for term in self.operator.terms:
            coeff = PeriodicCoefficient.from_triples(term.modes, is_real=False)
            block = {k: np.zeros((d, d), dtype=complex) for k in coeff.modes}
            for k, a in coeff.modes.items():
                block[k][term.row, term.col] = a[0, 0]
            grouped.setdefault(term.order, []).append(block)
        terms = {}
        for order, blocks in grouped.items():
            modes = {}
            for block in blocks:
                for k, a in block.items():
                    modes[k] = modes.get(k, 0) + a
            real = all(np.allclose(modes.get(-k, 0), np.conj(a)) for k, a in modes.items())
            terms[order] = PeriodicCoefficient(modes, is_real=real)
        return PeriodicOperator(terms, d)

    def build_nonlinearity(self) -> Nonlinearity:
        n = self.nonlinearity
        return Nonlinearity(n.kind, n.p, n.scale)


def _is_dataclass_type(tp):
    return isinstance(tp, type) and dataclasses.is_dataclass(tp)


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigurationError(f"unknown config key '{where}{unknown[0]}'")
    kwargs = {}
    for key, value in data.items():
        tp = hints[key]
        sub = f"{path}.{key}" if path else key
        if _is_dataclass_type(tp):
            kwargs[key] = _build(tp, value, sub)
        elif cls is OperatorSpec and key == "terms":
            if not isinstance(value, list):
                raise ConfigurationError(f"{sub}: expected a list of terms")
            kwargs[key] = [_build(TermSpec, t, f"{sub}[{i}]") for i, t in enumerate(value)]
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{path or 'config'}: {exc}") from exc


def _require(cond, key, rule):
    if not cond:
        raise ConfigurationError(f"{key}: {rule}")


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Apply every module rule that can be checked before running."""
    _require(cfg.mode.kind in ("reaction_diffusion", "kdvks"), "mode.kind",
             "must be reaction_diffusion or kdvks")
    if cfg.mode.kind == "kdvks":
        _require(isinstance(cfg.mode.beta, (int, float)) and cfg.mode.beta > 0, "mode.beta",
                 "KdV-KS needs beta > 0")
        _require(not cfg.operator.terms, "operator.terms", "must be empty in kdvks mode")
    else:
        _require(bool(cfg.operator.terms), "operator.terms", "at least one term is required")
        for i, t in enumerate(cfg.operator.terms):
            d = cfg.operator.components
            _require(0 <= t.row < d and 0 <= t.col < d, f"operator.terms[{i}]",
                     f"row/col must lie in [0, {d})")
    try:
        grid = cfg.spatial_grid()
    except ConfigurationError as exc:
        raise ConfigurationError(f"grid: {exc}") from exc
    try:
        op = cfg.build_operator().validate()
    except ConfigurationError as exc:
        raise ConfigurationError(f"operator: {exc}") from exc
    M = cfg.truncation
    _require(op.bandwidth <= M <= grid.points_per_period // 2 - 1, "grid.truncation",
             f"must lie in [{op.bandwidth}, {grid.points_per_period // 2 - 1}] "
             "(coefficient bandwidth .. points_per_period/2 - 1)")
    _require(cfg.n_xi >= 1, "grid.n_xi", "must be positive")
    try:
        cfg.build_nonlinearity()
    except ConfigurationError as exc:
        raise ConfigurationError(f"nonlinearity: {exc}") from exc
    _require(cfg.p > 1, "projection.p", "must exceed 1")
    _require(cfg.projection.n_contour >= 64, "projection.n_contour", "must be >= 64")
    _require(cfg.projection.eps_gap > 0, "projection.eps_gap", "must be positive")
    ex = cfg.experiment
    _require(ex.eta > 0, "experiment.eta", "must be positive")
    _require(len(ex.deltas) > 0 and all(0 < d < 2 * ex.eta for d in ex.deltas),
             "experiment.deltas", "each delta must satisfy 0 < delta < 2*eta")
    _require(ex.dt > 0 and ex.horizon > 0, "experiment.dt", "dt and horizon must be positive")
    _require(ex.n_samples >= 10, "experiment.n_samples", "must be >= 10")
    _require(ex.theta > 0, "experiment.theta", "must be positive")
    _require(ex.snapshot_stride >= 1, "experiment.snapshot_stride", "must be >= 1")
    _require(cfg.initial.kind in ("prepared", "mode", "random", "samples"), "initial.kind",
             "must be prepared, mode, random or samples")
    if cfg.initial.kind == "samples":
        _require(cfg.initial.path is not None, "initial.path", "required for samples recipes")
    return cfg


def apply_override(raw: dict, assignment: str):
    """Set ``a.b.c=VALUE`` in ``raw``; VALUE is parsed as JSON, else kept as text."""
    if "=" not in assignment:
        raise ConfigurationError(f"override {assignment!r} must look like KEY=VALUE")
    key, text = assignment.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    parts = key.strip().split(".")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"override key '{key}' walks into a non-object")
    node[parts[-1]] = value
    return raw


def bundled_scenarios():
    root = resources.files("bloch_instability") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read_raw(source) -> dict:
    """Parse a config path, or the name of a bundled scenario."""
    path = Path(source)
    if path.suffix == "" and not path.exists():
        res = resources.files("bloch_instability") / "scenarios" / f"{source}.json"
        if not res.is_file():
            raise ConfigurationError(
                f"no config file or bundled scenario named {source!r}; "
                f"bundled: {', '.join(bundled_scenarios())}")
        return json.loads(res.read_text())
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file {source} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {source} is not valid JSON: {exc}") from exc


def load_config(source, overrides=()) -> ScenarioConfig:
    raw = read_raw(source) if not isinstance(source, dict) else json.loads(json.dumps(source))
    for item in overrides:
        apply_override(raw, item)
    return validate(_build(ScenarioConfig, raw, ""))


def output_root(cfg: ScenarioConfig, flag=None) -> Path:
    return Path(flag or cfg.output.dir or os.environ.get(OUTPUT_ENV) or "bloch_out")


def load_initial_perturbation(cfg: ScenarioConfig, grid: SpatialGrid, sampling=None, op=None,
                              seed=None) -> SampledFunction:
    """Build ``u0`` from the scenario's initial recipe."""
    spec = cfg.initial
    d = op.components if op is not None else cfg.operator.components
    if spec.kind == "mode":
        _require(0 <= spec.m < grid.periods, "initial.m", f"xi bin must lie in [0, {grid.periods})")
        return fourier_mode(grid, spec.k, spec.m, spec.amplitude, d, spec.component)
    if spec.kind == "random":
        s = spec.seed if seed is None else seed
        return random_band_limited(grid, spec.bandwidth, s, d, real=spec.real)
    if spec.kind == "samples":
        return read_samples(spec.path, grid, d)
    from .projections import prepared_initial_data
    from .spectra import lambda0

    if sampling is None:
        raise ConfigurationError("prepared recipes need the Bloch spectrum of the operator")
    if spec.xi is None:
        top = lambda0(sampling)
        center = top.xi_index
        branch = sampling.branches[top.branch_id] if spec.branch == "max" else sampling.branches[int(spec.branch)]
    else:
        center = int(np.argmin(np.abs(sampling.xi - spec.xi)))
        if spec.branch == "max":
            branch = next(b for b in sampling.branches if b.indices[center] == 0)
        else:
            branch = sampling.branches[int(spec.branch)]
    _require(spec.width >= 1, "initial.width", "must be >= 1")
    start = max(0, center - (spec.width - 1) // 2)
    stop = min(sampling.xi_grid.count, start + spec.width)
    return prepared_initial_data(op, sampling, branch, (start, stop), grid=grid, real=spec.real)


def read_samples(path, grid, components=1) -> SampledFunction:
    """Samples from ``.npy`` or text (one column real, or two columns re/im per point)."""
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"initial.path: file {path} not found")
    if p.suffix == ".npy":
        arr = np.load(p)
    else:
        arr = np.loadtxt(p, delimiter="," if p.suffix == ".csv" else None, ndmin=2)
        arr = arr[:, 0] + 1j * arr[:, 1] if arr.shape[1] == 2 else arr[:, 0]
    arr = np.asarray(arr).reshape(-1)
    if arr.size != components * grid.n_points:
        raise ShapeError(f"samples file has {arr.size} values; grid needs {components * grid.n_points}")
    return SampledFunction(grid, arr.reshape(components, grid.n_points))
