"""Run configuration: one YAML or JSON document per experiment.

Relative paths inside a config file are resolved against the file's own
directory, so a config and its data can be moved together.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .baselines import ParamGrid
from .dataset import CsvSchema, read_header
from .errors import ConfigError
from .logistic import DEFAULT_RIDGE
from .multiclass import MODES
from .railway import SimConfig
from .terms import LagSpec

BASELINES = ("random_forest", "knn")

# columns written by ``simulate`` that are not sensor channels
NON_INPUT_COLUMNS = ("relief", "lv", "section")


@dataclass
class DataConfig:
    path: str | None = None
    label: str = "criticality"
    inputs: list[str] | None = None  # None: every column except label/load/exclude
    load_state: str | None = "load_state"
    classes: list[str] | None = None
    exclude: list[str] = field(default_factory=lambda: list(NON_INPUT_COLUMNS))
    delimiter: str = ","

    def schema(self, path=None) -> CsvSchema:
        path = path or self.path
        inputs = self.inputs
        header = read_header(path, self.delimiter) if path and Path(path).exists() else []
        load_state = self.load_state
        if load_state and header and load_state not in header:
            load_state = None
        if inputs is None:
            if not header:
                raise ConfigError("data.inputs is not set and no readable data file to infer it from")
            skip = {self.label, load_state, *self.exclude}
            inputs = [c for c in header if c not in skip]
        return CsvSchema(self.label, tuple(inputs), load_state,
                         tuple(self.classes) if self.classes else None, self.delimiter)


@dataclass
class ModelConfig:
    degree: int = 2
    n_y: int = 0
    n_u: int | list[int] = 0
    allow_lag_zero_inputs: bool = True
    k_max: int = 10
    mode: str = "pooled"
    size_rule: str | int = "one-se"
    ridge: float = DEFAULT_RIDGE

    def lag_spec(self, n_inputs: int) -> LagSpec:
        n_u = self.n_u if isinstance(self.n_u, int) else tuple(self.n_u)
        return LagSpec(self.degree, self.n_y, n_u, n_inputs, self.allow_lag_zero_inputs)

    def validate(self):
        if self.k_max < 1:
            raise ConfigError("model.k_max must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"model.mode must be one of {MODES}")
        if self.ridge < 0:
            raise ConfigError("model.ridge must be >= 0")
        if not (self.size_rule in ("one-se", "all") or (isinstance(self.size_rule, int) and self.size_rule >= 1)):
            raise ConfigError("model.size_rule must be 'one-se', 'all' or a positive integer")
        self.lag_spec(1 if isinstance(self.n_u, int) else len(self.n_u))


@dataclass
class SplitConfig:
    train_fraction: float = 0.8
    n_folds: int = 5
    seed: int = 0

    def validate(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("split.train_fraction must lie in (0, 1)")
        if self.n_folds < 2:
            raise ConfigError("split.n_folds must be >= 2")


@dataclass
class BaselineConfig:
    names: list[str] = field(default_factory=lambda: list(BASELINES))
    knn_k: int = 5
    grid: dict = field(default_factory=lambda: {
        "n_trees": [50], "max_depth": [None, 8], "min_leaf": [1, 5], "max_features": ["sqrt"],
    })
    seed: int = 0

    def param_grid(self) -> ParamGrid:
        try:
            return ParamGrid.from_dict(self.grid)
        except TypeError as exc:
            raise ConfigError(f"baselines.grid: {exc}") from None

    def validate(self):
        bad = [n for n in self.names if n not in BASELINES]
        if bad:
            raise ConfigError(f"unknown baselines {bad}; choose from {BASELINES}")
        if self.knn_k < 1:
            raise ConfigError("baselines.knn_k must be >= 1")
        self.param_grid()


@dataclass
class OutputConfig:
    dataset: str = "data.csv"
    model: str = "model.json"
    train_report: str = "train_report.json"
    evaluation: str = "evaluation.json"
    reduced: str = "reduced.csv"
    predictions: str = "predictions.csv"


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    simulate: dict = field(default_factory=dict)
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "RunConfig":
        self.model.validate()
        self.split.validate()
        self.baselines.validate()
        self.sim_config()
        return self

    def sim_config(self) -> SimConfig:
        try:
            return SimConfig(**self.simulate)
        except TypeError as exc:
            raise ConfigError(f"simulate: {exc}") from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hashable(self) -> dict:
        """Settings that influence results (paths excluded)."""
        d = self.to_dict()
        d.pop("outputs")
        d["data"].pop("path")
        return d

    @classmethod
    def from_dict(cls, d: dict | None, base_dir: Path | None = None) -> "RunConfig":
        d = dict(d or {})
        sections = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = set(d) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        kw = {}
        for name, typ in (("data", DataConfig), ("model", ModelConfig), ("split", SplitConfig),
                          ("baselines", BaselineConfig), ("outputs", OutputConfig)):
            sub = d.get(name) or {}
            if not isinstance(sub, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            try:
                kw[name] = typ(**sub)
            except TypeError as exc:
                raise ConfigError(f"section {name!r}: {exc}") from None
        kw["simulate"] = dict(d.get("simulate") or {})
        cfg = cls(**kw)
        if base_dir is not None:
            cfg.resolve_paths(base_dir)
        return cfg

    def resolve_paths(self, base_dir: Path):
        def res(p):
            return None if p is None else str(Path(base_dir, p)) if not Path(p).is_absolute() else p

        self.data.path = res(self.data.path)
        for f in dataclasses.fields(self.outputs):
            setattr(self.outputs, f.name, res(getattr(self.outputs, f.name)))


def load_config(path=None) -> RunConfig:
    """Read ``path`` (YAML or JSON); defaults when ``path`` is None."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse config ({exc})") from None
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return RunConfig.from_dict(doc, path.parent)
