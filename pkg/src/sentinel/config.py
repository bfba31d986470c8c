"""Pipeline configuration: YAML schema, validation, and typed settings.

Every stage of the pipeline reads the same config file. Unknown or invalid
keys are reported with file and line so a typo in a long config is easy to
find. All randomness in a run flows from the single top-level seed through
named substreams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .bazin import SamplerConfig
from .lightcurve import TIME_MAX, TIME_MIN
from .synthgen import SHAPES, TEMPLATE_PARAMS, ClassTemplate, GenSpec


class ConfigError(Exception):
    def __init__(self, msg: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        loc = f"{path}:{line}: " if line else (f"{path}: " if path else "")
        super().__init__(f"{loc}{msg}")


def _line_of(node, path: tuple) -> int | None:
    """Walk a composed YAML node tree to the line of the value at `path`."""
    if node is None:
        return None
    if not path:
        return node.start_mark.line + 1
    head, rest = path[0], path[1:]
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            if k.value == str(head):
                if not rest:
                    return k.start_mark.line + 1
                return _line_of(v, rest)
    elif isinstance(node, yaml.SequenceNode):
        try:
            return _line_of(node.value[int(head)], rest)
        except (ValueError, IndexError):
            return node.start_mark.line + 1
    return node.start_mark.line + 1


class _Validator:
    def __init__(self, data: Any, tree, source: str):
        self.data = data
        self.tree = tree
        self.source = source

    def fail(self, msg: str, *path) -> ConfigError:
        return ConfigError(msg, self.source, _line_of(self.tree, path))

    def section(self, data: Mapping, known: Sequence[str], *path) -> None:
        if not isinstance(data, Mapping):
            raise self.fail(f"expected a mapping at {'.'.join(map(str, path)) or 'top level'}", *path)
        for key in data:
            if key not in known:
                raise self.fail(f"unknown key {key!r} (expected one of {sorted(known)})",
                                *path, key)

    def require(self, data: Mapping, key: str, *path):
        if key not in data:
            raise self.fail(f"missing required key {key!r}", *path)
        return data[key]


@dataclass(frozen=True)
class ExternalModelSpec:
    model_class: str
    predictions_path: Path


@dataclass(frozen=True)
class ScoringSettings:
    horizon_days: float = 3.0
    match_window_days: float = 0.5
    min_fit_observations: int = 3
    external: tuple[ExternalModelSpec, ...] = ()


@dataclass(frozen=True)
class EvalSettings:
    auc_time_grid: tuple[float, float, float] = (-70.0, 80.0, 10.0)
    muspe_time_slices: tuple[tuple[float, float], ...] = ((-70.0, 0.0), (0.0, 30.0), (30.0, 80.0))

    def grid(self) -> np.ndarray:
        start, stop, step = self.auc_time_grid
        return np.arange(start, stop + 1e-9, step)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    output_dir: Path
    trained_classes: tuple[str, ...]
    gen: GenSpec
    sampler: SamplerConfig
    scoring: ScoringSettings = field(default_factory=ScoringSettings)
    evaluation: EvalSettings = field(default_factory=EvalSettings)
    train_fraction: float = 0.8
    source_path: Path | None = None

    @property
    def train_csv(self) -> Path:
        return self.output_dir / "train.csv"

    @property
    def test_csv(self) -> Path:
        return self.output_dir / "test.csv"

    @property
    def null_csv(self) -> Path:
        return self.output_dir / "null.csv"

    def prior_path(self, class_name: str) -> Path:
        return self.output_dir / "priors" / f"prior_{class_name}.json"

    def scores_dir(self, model: str) -> Path:
        return self.output_dir / "scores" / model

    def metrics_dir(self, model: str) -> Path:
        return self.output_dir / "metrics" / model


def _parse_template(v: _Validator, td: Mapping, i: int) -> ClassTemplate:
    path = ("gen", "templates", i)
    v.section(td, ["name", "shape", "cadence_days", "noise_floor", "noise_scale",
                   "param_mean", "param_cov", "param_std", "shape_params"], *path)
    name = str(v.require(td, "name", *path))
    shape = str(v.require(td, "shape", *path))
    if shape not in SHAPES:
        raise v.fail(f"shape {shape!r} not one of {SHAPES}", *path, "shape")
    pm = v.require(td, "param_mean", *path)
    if not isinstance(pm, Mapping) or set(pm) != {"g", "r"}:
        raise v.fail("param_mean must map both passbands 'g' and 'r' to "
                     f"{len(TEMPLATE_PARAMS)}-vectors ({', '.join(TEMPLATE_PARAMS)})",
                     *path, "param_mean")
    mean = {}
    for band, vec in pm.items():
        if not isinstance(vec, Sequence) or len(vec) != len(TEMPLATE_PARAMS):
            raise v.fail(f"param_mean.{band} must be a {len(TEMPLATE_PARAMS)}-vector",
                         *path, "param_mean", band)
        mean[band] = np.asarray(vec, dtype=float)
    if "param_cov" in td and "param_std" in td:
        raise v.fail("give param_cov or param_std, not both", *path, "param_cov")
    if "param_cov" in td:
        cov = np.asarray(td["param_cov"], dtype=float)
    elif "param_std" in td:
        std = np.asarray(td["param_std"], dtype=float)
        if std.shape != (len(TEMPLATE_PARAMS),):
            raise v.fail(f"param_std must be a {len(TEMPLATE_PARAMS)}-vector",
                         *path, "param_std")
        cov = np.diag(std**2)
    else:
        raise v.fail("template needs param_cov or param_std", *path)
    try:
        return ClassTemplate(
            name=name, shape=shape, param_mean=mean, param_cov=cov,
            cadence_days=float(td.get("cadence_days", 3.0)),
            noise_floor=float(td.get("noise_floor", 1.0)),
            noise_scale=float(td.get("noise_scale", 0.02)),
            shape_params={str(k): float(x) for k, x in (td.get("shape_params") or {}).items()},
        )
    except Exception as err:
        raise v.fail(str(err), *path) from None


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a pipeline config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file not found", str(path))
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
        tree = yaml.compose(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(err, 'problem', err)}",
                          str(path), mark.line + 1 if mark else None) from None
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a mapping", str(path), 1)
    v = _Validator(data, tree, str(path))
    v.section(data, ["seed", "output_dir", "trained_classes", "train_fraction",
                     "gen", "sampler", "scoring", "evaluation", "tcn"])

    seed = v.require(data, "seed")
    if not isinstance(seed, int) or seed < 0:
        raise v.fail("seed must be a non-negative integer", "seed")
    out_dir = Path(str(v.require(data, "output_dir")))
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir

    gen_d = v.require(data, "gen")
    v.section(gen_d, ["n_per_class", "n_null_per_class", "dropout_prob",
                      "time_window", "templates"], "gen")
    templates_d = v.require(gen_d, "templates", "gen")
    if not isinstance(templates_d, Sequence) or not templates_d:
        raise v.fail("gen.templates must be a non-empty list", "gen", "templates")
    templates = tuple(_parse_template(v, td, i) for i, td in enumerate(templates_d))
    window = tuple(float(x) for x in gen_d.get("time_window", (TIME_MIN, TIME_MAX)))
    try:
        gen = GenSpec(templates=templates,
                      n_per_class=int(v.require(gen_d, "n_per_class", "gen")),
                      seed=seed,
                      time_window=window,
                      dropout_prob=float(gen_d.get("dropout_prob", 0.1)),
                      n_null_per_class=int(gen_d.get("n_null_per_class", 0)))
    except Exception as err:
        raise v.fail(str(err), "gen") from None

    trained = tuple(str(c) for c in v.require(data, "trained_classes"))
    names = {t.name for t in templates}
    for ci, c in enumerate(trained):
        if c not in names:
            raise v.fail(f"trained class {c!r} has no template", "trained_classes", ci)

    sampler_d = data.get("sampler", {}) or {}
    v.section(sampler_d, ["n_chains", "n_draws", "burn_in", "warm_burn_in", "thin"], "sampler")
    try:
        sampler = SamplerConfig(**{k: int(x) for k, x in sampler_d.items()})
    except Exception as err:
        raise v.fail(str(err), "sampler") from None

    scoring_d = data.get("scoring", {}) or {}
    v.section(scoring_d, ["horizon_days", "match_window_days", "min_fit_observations",
                          "external"], "scoring")
    external = []
    for ei, ed in enumerate(scoring_d.get("external", []) or []):
        v.section(ed, ["model_class", "predictions"], "scoring", "external", ei)
        ppath = Path(str(v.require(ed, "predictions", "scoring", "external", ei)))
        if not ppath.is_absolute():
            ppath = path.parent / ppath
        external.append(ExternalModelSpec(
            model_class=str(v.require(ed, "model_class", "scoring", "external", ei)),
            predictions_path=ppath))
    scoring = ScoringSettings(
        horizon_days=float(scoring_d.get("horizon_days", 3.0)),
        match_window_days=float(scoring_d.get("match_window_days", 0.5)),
        min_fit_observations=int(scoring_d.get("min_fit_observations", 3)),
        external=tuple(external))
    if scoring.horizon_days <= 0:
        raise v.fail("scoring.horizon_days must be > 0", "scoring", "horizon_days")

    eval_d = data.get("evaluation", {}) or {}
    v.section(eval_d, ["auc_time_grid", "muspe_time_slices"], "evaluation")
    grid_d = eval_d.get("auc_time_grid", {}) or {}
    if grid_d:
        v.section(grid_d, ["start", "stop", "step"], "evaluation", "auc_time_grid")
    slices = eval_d.get("muspe_time_slices")
    evaluation = EvalSettings(
        auc_time_grid=(float(grid_d.get("start", -70.0)), float(grid_d.get("stop", 80.0)),
                       float(grid_d.get("step", 10.0))),
        muspe_time_slices=tuple((float(lo), float(hi)) for lo, hi in slices)
        if slices else EvalSettings.muspe_time_slices,
    )

    train_fraction = float(data.get("train_fraction", 0.8))
    if not (0 < train_fraction < 1):
        raise v.fail("train_fraction must be in (0, 1)", "train_fraction")

    return PipelineConfig(seed=seed, output_dir=out_dir, trained_classes=trained,
                          gen=gen, sampler=sampler, scoring=scoring,
                          evaluation=evaluation, train_fraction=train_fraction,
                          source_path=path)
