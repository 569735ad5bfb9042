"""Run configuration: one INI-style file, flat sections, flags on top.

Sections:
  [paths]  terms, edges, sentences, embeddings, checkpoint, report,
           split_dir, trainlog
  [run]    mode, variant, seed, ks, dim, max_paths, mrr_mode, top_k
  [train]  any TrainConfig field (lr, batch_size, negatives, ...)
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields

from .trainer import TrainConfig

PATH_KEYS = ("terms", "edges", "sentences", "embeddings", "checkpoint",
             "report", "split_dir", "trainlog")


@dataclass
class RunConfig:
    paths: dict[str, str] = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    mode: str = "completion"
    variant: str = "full"
    seed: int = 0
    ks: tuple[int, ...] = (1, 5, 10)
    dim: int = 64
    max_paths: int = 32
    mrr_mode: str = "bucket"
    top_k: int = 5
    threads: int = 1

    def path(self, key: str, required: bool = True) -> str:
        value = self.paths.get(key, "")
        if required and not value:
            raise FileNotFoundError(f"config has no [paths] {key}")
        return value

    def require_input(self, key: str) -> str:
        value = self.path(key)
        if not os.path.exists(value):
            raise FileNotFoundError(f"missing {key} file: {value}")
        return value


def _coerce(value: str, target_type):
    if target_type is float:
        return float(value)
    if target_type is int:
        return int(value)
    if target_type is str:
        return value
    if target_type is tuple:
        return tuple(float(v) if "." in v else int(v)
                     for v in value.replace(",", " ").split())
    raise TypeError(f"cannot coerce config value to {target_type}")


def load_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    cfg = RunConfig()
    if parser.has_section("paths"):
        for key, value in parser.items("paths"):
            if key not in PATH_KEYS:
                raise ValueError(f"unknown [paths] key {key!r}")
            cfg.paths[key] = value
    if parser.has_section("run"):
        for key, value in parser.items("run"):
            if key == "ks":
                cfg.ks = tuple(int(v) for v in value.replace(",", " ").split())
            elif key in ("seed", "dim", "max_paths", "top_k", "threads"):
                setattr(cfg, key, int(value))
            elif key in ("mode", "variant", "mrr_mode"):
                setattr(cfg, key, value)
            else:
                raise ValueError(f"unknown [run] key {key!r}")
    train_kwargs = {}
    if parser.has_section("train"):
        train_fields = {f.name: f.type for f in fields(TrainConfig)}
        type_map = {f.name: type(getattr(TrainConfig(), f.name))
                    for f in fields(TrainConfig)}
        for key, value in parser.items("train"):
            if key not in train_fields:
                raise ValueError(f"unknown [train] key {key!r}")
            train_kwargs[key] = _coerce(value, type_map[key])
    cfg.train = TrainConfig(**train_kwargs)
    # single source of truth for randomness and model variant
    cfg.train.seed = cfg.seed if "seed" not in train_kwargs else cfg.train.seed
    cfg.train.variant = (cfg.variant if "variant" not in train_kwargs
                         else cfg.train.variant)
    cfg.train.max_paths = (cfg.max_paths if "max_paths" not in train_kwargs
                           else cfg.train.max_paths)
    if list(cfg.ks) != sorted(cfg.ks):
        raise ValueError("ks must be sorted ascending")
    return cfg
