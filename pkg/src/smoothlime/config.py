"""JSON run-config schema and loaders shared by the CLI commands."""

import json
from dataclasses import fields

import jsonschema

from .datasets import generate_simulated, load_csv, split_and_normalize
from .experiments import ExperimentConfig
from .model import TrainConfig

_num = {"type": "number"}
_count = {"type": "integer", "minimum": 1}
_seed = {"type": "integer", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}

DATASET_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "simulated"}, "n": {"type": "integer", "minimum": 2},
                           "seed": _seed},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "csv"}, "path": {"type": "string"},
                           "target": {"type": "string"},
                           "drop": {"type": "array", "items": {"type": "string"}}},
            "required": ["kind", "path", "target"],
            "additionalProperties": False,
        },
    ]
}

SPLIT_SCHEMA = {
    "type": "object",
    "properties": {"train_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                   "seed": _seed, "normalize": {"type": "boolean"}},
    "additionalProperties": False,
}

TRAIN_SCHEMA = {
    "type": "object",
    "properties": {"epochs": _count, "learning_rate": _pos, "adam_beta1": _num,
                   "adam_beta2": _num, "adam_eps": _pos, "batch_size": _count, "seed": _seed,
                   "hidden": {"type": "array", "items": _count, "minItems": 1}},
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "sigma2": _pos, "n_grid": {"type": "array", "items": _count, "minItems": 1},
        "neighbor_sigma2": _pos, "neighbors_per_point": _count, "test_subset_size": _count,
        "base_seed": _seed, "norm": {"enum": ["L1", "L2"]},
        "epochs_list": {"type": "array", "items": _count, "minItems": 1},
        "sigma2_list": {"type": "array", "items": _pos, "minItems": 1},
        "convergence_grid": {"type": "array", "items": _count, "minItems": 1},
        "oracle_n": _count, "convergence_norm": {"enum": ["L1", "L2"]},
        "repetitions": _count, "n_jobs": {"type": "integer"},
    },
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "type": "object",
    "properties": {
        "dataset": DATASET_SCHEMA,
        "split": SPLIT_SCHEMA,
        "train": TRAIN_SCHEMA,
        "model": {"type": "string"},
        "experiment": EXPERIMENT_SCHEMA,
        "out": {"type": "string"},
    },
    "additionalProperties": False,
}

COMMAND_REQUIRED = {
    "train": ["dataset"],
    "experiment": ["dataset"],
    "explain": ["dataset"],
}


class ConfigError(ValueError):
    pass


def load_config(path, command):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    validate_config(doc, command, path)
    return doc


def validate_config(doc, command, source="config"):
    schema = dict(RUN_SCHEMA, required=COMMAND_REQUIRED[command])
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: {where}: {exc.message}") from None


def build_dataset(doc):
    src = doc["dataset"]
    if src["kind"] == "simulated":
        data = generate_simulated(src.get("n", 1000), src.get("seed", 0))
    else:
        data = load_csv(src["path"], src["target"], src.get("drop", ()))
    split = doc.get("split", {})
    # the simulated clusters are already on a unit scale; real data gets standardized
    normalize = split.get("normalize", src["kind"] == "csv")
    return split_and_normalize(data, split.get("train_fraction", 0.8), split.get("seed", 0),
                               normalize)


def _dataclass_from(cls, values):
    names = {f.name for f in fields(cls)}
    return cls(**{k: (tuple(v) if isinstance(v, list) else v)
                  for k, v in values.items() if k in names})


def train_config(doc):
    return _dataclass_from(TrainConfig, doc.get("train", {}))


def experiment_config(doc):
    return _dataclass_from(ExperimentConfig, doc.get("experiment", {}))
