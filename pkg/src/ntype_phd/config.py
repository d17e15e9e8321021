"""Run configuration: YAML in, validated dataclasses out, and back."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .phd import FilterConfig
from .sim import Region, Scenario, TargetSpec, preset_scenarios

MODES = ("ntype", "independent", "detections", "compare")
FORMATS = ("sim_csv", "mot")


# filter settings a preset needs beyond what its scenario implies
PRESET_MODEL_OVERRIDES = {
    # wide KITTI-sized box: with 1e-4 a single clutter detection already crosses the extraction threshold
    "urban2": {"birth_weight": [1e-5, 1e-5]},
}


class ConfigError(ValueError):
    pass


@dataclass
class ModelParams:
    """Serializable filter parameters for the box-tracking model."""

    n_types: int
    sigma_v: list[float]
    sigma_r: list[list[float]]
    p_D: list[list[float]]
    lambda_c: list[float]
    region: Region = field(default_factory=Region)
    p_S: list[float] | None = None
    birth_weight: list[float] | None = None
    birth_cov_diag: list[float] = field(default_factory=lambda: [100.0, 100.0, 25.0, 25.0, 20.0, 20.0])
    prune_T: float = 1e-5
    merge_U: float = 4.0
    extract_threshold: float = 0.5
    max_components: int = 100
    dt: float = 1.0

    def __post_init__(self):
        if self.p_S is None:
            self.p_S = [0.99] * self.n_types
        if self.birth_weight is None:
            self.birth_weight = [1e-4] * self.n_types

    @classmethod
    def from_scenario(cls, scn: Scenario, **overrides) -> ModelParams:
        return cls(
            n_types=scn.n_types,
            sigma_v=list(scn.sigma_v),
            sigma_r=[list(r) for r in scn.sigma_r],
            p_D=[list(r) for r in scn.p_D],
            lambda_c=list(scn.lambda_c),
            region=dataclasses.replace(scn.region),
            **overrides,
        )

    def to_filter_config(self, confusion: bool = True) -> FilterConfig:
        p_D = np.asarray(self.p_D, dtype=float)
        if not confusion:
            p_D = np.diag(np.diag(p_D))
        return FilterConfig.constant_velocity(
            self.n_types,
            sigma_v=self.sigma_v,
            sigma_r=self.sigma_r,
            p_D=p_D,
            p_S=self.p_S,
            lambda_c=self.lambda_c,
            clutter_box=self.region.box(),
            birth_weight=self.birth_weight,
            birth_cov_diag=self.birth_cov_diag,
            dt=self.dt,
            prune_T=self.prune_T,
            merge_U=self.merge_U,
            extract_threshold=self.extract_threshold,
            max_components=self.max_components,
        )


@dataclass
class MetricSettings:
    p: float = 1.0
    c: float = 100.0
    gate: float = 50.0  # discrimination gate, pixels
    label_gate: float = 50.0  # track association gate, pixels


@dataclass
class RunConfig:
    preset: str | None = None
    scenario: Scenario | None = None
    model: ModelParams | None = None
    detections: str | None = None
    detections_format: str = "sim_csv"
    truth: str | None = None
    metrics: MetricSettings = field(default_factory=MetricSettings)
    out: str = "runs/out"
    seed: int = 0
    mode: str = "ntype"
    replicates: int = 1


# -- strict dict -> dataclass ------------------------------------------------


def _take(data, cls, where: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    return dict(data)


def _region(data, where) -> Region:
    d = _take(data, Region, where)
    try:
        return Region(**{k: float(v) for k, v in d.items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def _model(data, where) -> ModelParams:
    d = _take(data, ModelParams, where)
    if "region" in d:
        d["region"] = _region(d["region"], f"{where}.region")
    try:
        return ModelParams(**d)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None


def _scenario(data, where) -> Scenario:
    d = _take(data, Scenario, where)
    if "region" in d:
        d["region"] = _region(d["region"], f"{where}.region")
    if "targets" in d:
        d["targets"] = [TargetSpec(**_take(t, TargetSpec, f"{where}.targets[{k}]")) for k, t in enumerate(d["targets"])]
    try:
        return Scenario(**d)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None


def _merge(base, override: dict, builder, where):
    """Field-level override of a preset-derived dataclass."""
    merged = to_plain(base)
    for k, v in override.items():
        merged[k] = v
    return builder(merged, where)


def _check_prob_matrix(name: str, values, shape) -> None:
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        raise ConfigError(f"{name}: expected shape {shape}, got {arr.shape}")
    for idx in np.ndindex(arr.shape):
        if not 0.0 <= arr[idx] <= 1.0:
            raise ConfigError(f"{name}{''.join(f'[{k}]' for k in idx)} = {arr[idx]} outside [0, 1]")


def validate_model(m: ModelParams, where: str = "model") -> None:
    N = m.n_types
    if not isinstance(N, int) or N < 1:
        raise ConfigError(f"{where}.n_types must be a positive integer")
    _check_prob_matrix(f"{where}.p_D", m.p_D, (N, N))
    _check_prob_matrix(f"{where}.p_S", m.p_S, (N,))
    for name, shape in (("sigma_v", (N,)), ("sigma_r", (N, N)), ("lambda_c", (N,)), ("birth_weight", (N,)), ("birth_cov_diag", (6,))):
        arr = np.asarray(getattr(m, name), dtype=float)
        if arr.shape != shape:
            raise ConfigError(f"{where}.{name}: expected shape {shape}, got {arr.shape}")
        if np.any(arr < 0):
            raise ConfigError(f"{where}.{name}: entries must be nonnegative")
    if np.any(np.asarray(m.birth_cov_diag) <= 0):
        raise ConfigError(f"{where}.birth_cov_diag: entries must be positive")
    if not m.prune_T > 0:
        raise ConfigError(f"{where}.prune_T must be > 0")
    if not m.merge_U > 0:
        raise ConfigError(f"{where}.merge_U must be > 0")
    if not (isinstance(m.max_components, int) and m.max_components >= 1):
        raise ConfigError(f"{where}.max_components must be an integer >= 1")
    try:
        m.to_filter_config()
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from None


def config_from_dict(data: dict, base_dir: Path | None = None, check_files: bool = True) -> RunConfig:
    d = _take(data or {}, RunConfig, "config")
    cfg = RunConfig()
    for key in ("preset", "detections", "detections_format", "truth", "out", "mode"):
        if key in d and d[key] is not None:
            setattr(cfg, key, str(d[key]))
    for key in ("seed", "replicates"):
        if key in d:
            if not isinstance(d[key], int) or d[key] < 0:
                raise ConfigError(f"config.{key} must be a nonnegative integer")
            setattr(cfg, key, d[key])
    if "metrics" in d:
        try:
            cfg.metrics = MetricSettings(**{k: float(v) for k, v in _take(d["metrics"], MetricSettings, "metrics").items()})
        except ValueError as e:
            raise ConfigError(f"metrics: {e}") from None

    if cfg.preset is not None:
        presets = preset_scenarios()
        if cfg.preset not in presets:
            raise ConfigError(f"preset: unknown preset {cfg.preset!r} (known: {', '.join(presets)})")
        base = presets[cfg.preset]
        cfg.scenario = _merge(base, d.get("scenario") or {}, _scenario, "scenario")
        model_over = {**PRESET_MODEL_OVERRIDES.get(cfg.preset, {}), **(d.get("model") or {})}
        cfg.model = _merge(ModelParams.from_scenario(cfg.scenario), model_over, _model, "model")
    else:
        if d.get("scenario") is not None:
            cfg.scenario = _scenario(d["scenario"], "scenario")
        if d.get("model") is not None:
            cfg.model = _model(d["model"], "model")
        elif cfg.scenario is not None:
            cfg.model = ModelParams.from_scenario(cfg.scenario)
    if cfg.scenario is not None:
        cfg.scenario.seed = cfg.seed

    validate_run(cfg, base_dir, check_files)
    return cfg


def validate_run(cfg: RunConfig, base_dir: Path | None = None, check_files: bool = True) -> None:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: {cfg.mode!r} not one of {', '.join(MODES)}")
    if cfg.detections_format not in FORMATS:
        raise ConfigError(f"detections_format: {cfg.detections_format!r} not one of {', '.join(FORMATS)}")
    if cfg.replicates < 1:
        raise ConfigError("replicates must be >= 1")
    m = cfg.metrics
    if m.p < 1 or m.c <= 0 or m.gate <= 0 or m.label_gate <= 0:
        raise ConfigError("metrics: need p >= 1 and positive c, gate, label_gate")
    if cfg.model is None:
        raise ConfigError("model: no filter model given (set a preset, a scenario or a model section)")
    validate_model(cfg.model)
    if cfg.scenario is not None:
        try:
            cfg.scenario.validate()
        except ValueError as e:
            raise ConfigError(f"scenario: {e}") from None
        if cfg.scenario.n_types != cfg.model.n_types:
            raise ConfigError("scenario.n_types and model.n_types differ")
    if cfg.detections is None and cfg.scenario is None:
        raise ConfigError("need either a detections file or a scenario/preset to simulate")
    if check_files:
        for key in ("detections", "truth"):
            p = getattr(cfg, key)
            if p is not None:
                path = Path(p) if base_dir is None or Path(p).is_absolute() else base_dir / p
                if not path.exists():
                    raise ConfigError(f"{key}: file {path} does not exist")
                setattr(cfg, key, str(path))


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML ({e})") from None
    return config_from_dict(data or {}, base_dir=path.parent)


def to_plain(obj):
    """Dataclasses/arrays to plain YAML-safe python."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_plain(cfg), sort_keys=False)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(dump_config(cfg))
