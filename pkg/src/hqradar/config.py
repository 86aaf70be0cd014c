"""Experiment configuration: JSON document validated against a strict schema."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .dataset import CLASSIFICATION, DETECTION, GeometrySampler, split_counts
from .errors import ConfigError, ParameterError
from .models import ArchitectureSpec
from .radar import RadarConfig
from .training import TrainConfig

_num = {"type": "number"}
_int = {"type": "integer"}
_interval = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


SCHEMA = _obj(
    {
        "radar": _obj({"wavelength": _num, "f_c": _num, "prf": _num, "duration": _num}),
        "sampler": _obj(
            {
                "theta_range": _interval,
                "phi_p_range": _interval,
                "range_interval": _interval,
                "v_rad_range": _interval,
                "amplitude": _num,
            }
        ),
        "dataset": _obj(
            {
                "task": {"enum": [DETECTION, CLASSIFICATION]},
                "snr_db": _num,
                "n_examples": {"type": "integer", "minimum": 1},
                "counts": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
                "seed": _int,
                "window": {"type": "integer", "minimum": 2},
                "hop": {"type": "integer", "minimum": 1},
            },
            required=("task",),
        ),
        "architecture": _obj(
            {
                "kind": {"enum": ["cnn", "hqnn"]},
                "n_classes": {"enum": [2, 5]},
                "channels": {"type": "array", "items": _int, "minItems": 3, "maxItems": 3},
                "kernel": _int,
                "fc_widths": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
                "hqnn_fc_widths": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
                "n_circuits": {"type": "integer", "minimum": 1},
                "depth": {"type": "integer", "minimum": 1},
                "dropout": _num,
                "init_seed": _int,
            }
        ),
        "training": _obj(
            {
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
                "learning_rate": _num,
                "loss_stop": _num,
                "seed": _int,
                "max_epochs": {"type": ["integer", "null"]},
                "max_cpu_seconds": {"type": ["number", "null"]},
                "clip_norm": {"type": ["number", "null"]},
            }
        ),
        "evaluation": _obj(
            {
                "snr_db": {"type": "array", "items": _num, "minItems": 1},
                "repeats": {"type": "integer", "minimum": 1},
                "n_test": {"type": "integer", "minimum": 2},
                "seeds": {"type": "array", "items": _int},
            }
        ),
    },
    required=("dataset",),
)


def _error_key(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return ".".join(filter(None, [path, extra[0] if extra else ""]))
    if err.validator == "required":
        missing = [r for r in err.validator_value if r not in err.instance]
        return ".".join(filter(None, [path, missing[0] if missing else ""]))
    return path or "<root>"


@dataclass
class ExperimentConfig:
    task: str
    snr_db: float = -5.0
    counts: dict = field(default_factory=dict)
    dataset_seed: int = 0
    window: int = 16
    hop: int = 8
    radar: RadarConfig = field(default_factory=RadarConfig)
    sampler: GeometrySampler = field(default_factory=GeometrySampler)
    architecture: ArchitectureSpec = field(default_factory=ArchitectureSpec)
    training: TrainConfig = field(default_factory=TrainConfig)
    eval_snrs: list = field(default_factory=lambda: [-5.0, -10.0, -15.0, -20.0])
    eval_repeats: int = 3
    eval_n_test: int = 400
    eval_seeds: list | None = None
    raw: dict = field(default_factory=dict)

    @property
    def model_name(self) -> str:
        return f"{self.architecture.kind}_{'detector' if self.task == DETECTION else 'classifier'}"


def parse(doc: dict) -> ExperimentConfig:
    """Validate ``doc`` and build typed config objects; raises ConfigError naming the key."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        key = _error_key(err)
        raise ConfigError(f"config error at '{key}': {err.message}", key)

    ds = doc["dataset"]
    task = ds["task"]
    try:
        if "counts" in ds:
            counts = dict(ds["counts"])
        else:
            counts = split_counts(ds.get("n_examples", 2000 if task == DETECTION else 1000), task)
        arch = dict(doc.get("architecture", {}))
        arch.setdefault("n_classes", 2 if task == DETECTION else 5)
        expected_k = 2 if task == DETECTION else 5
        if arch["n_classes"] != expected_k:
            raise ConfigError(f"config error at 'architecture.n_classes': {task} needs {expected_k}", "architecture.n_classes")
        radar = RadarConfig(**doc.get("radar", {}))
        window, hop = ds.get("window", 16), ds.get("hop", 8)
        bins_frames = (window, 1 + (radar.n_samples - window) // hop)
        arch["input_shape"] = (2, *bins_frames)
        ev = doc.get("evaluation", {})
        cfg = ExperimentConfig(
            task=task,
            snr_db=float(ds.get("snr_db", -5.0 if task == DETECTION else 5.0)),
            counts=counts,
            dataset_seed=int(ds.get("seed", 0)),
            window=window,
            hop=hop,
            radar=radar,
            sampler=GeometrySampler.from_dict(doc.get("sampler", {})),
            architecture=ArchitectureSpec.from_dict(arch),
            training=TrainConfig(**doc.get("training", {})),
            eval_snrs=[float(s) for s in ev.get("snr_db", [-5, -10, -15, -20] if task == DETECTION else [20, 15, 10, 5, 0, -5])],
            eval_repeats=int(ev.get("repeats", 3)),
            eval_n_test=int(ev.get("n_test", 400)),
            eval_seeds=ev.get("seeds"),
            raw=doc,
        )
    except ConfigError:
        raise
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"config error: {exc}") from exc
    if cfg.eval_seeds is not None and len(cfg.eval_seeds) != cfg.eval_repeats:
        raise ConfigError("config error at 'evaluation.seeds': need one seed per repeat", "evaluation.seeds")
    return cfg


def load(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(doc)
