"""Experiment configuration: one JSON document drives the whole pipeline.

Defaults are data, not code: the co-occurrence regularities (kitchen-dining,
garage-outdoor, bathroom-bedroom high) live in DEFAULT_CONFIG and can be
overridden field by field from a user config file.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .agents import AgentConfig
from .evaluate import EvalProtocol
from .vocab import DEFAULT_ROOM_SIGNALS, SignalVocabulary
from .world import ExtractorNoise, GeneratorConfig, SubPolicyProfile


class ConfigError(Exception):
    """Invalid or missing configuration; the message names the field."""


DEFAULT_CONFIG: dict = {
    "seed": 0,
    "signals": {
        "rooms": list(DEFAULT_ROOM_SIGNALS),
        "objects": [],
    },
    "generator": {
        "room_count": [11, 17],
        "untyped_rate": 0.12,
        "untyped_adjacency": 0.03,
        "extra_edge_scale": 0.02,
        "type_weights": {
            "kitchen": 1.0,
            "living_room": 1.1,
            "dining_room": 0.9,
            "bedroom": 1.3,
            "bathroom": 1.1,
            "office": 0.7,
            "garage": 0.55,
            "outdoor": 0.7,
        },
        # public -> service -> social -> private gradient: adjacent ranks
        # connect often, rank-2 pairs occasionally, everything else rarely
        "co_occurrence": {
            "base": 0.015,
            "pairs": {
                "outdoor:garage": 0.75,
                "garage:kitchen": 0.75,
                "kitchen:dining_room": 0.75,
                "dining_room:living_room": 0.75,
                "living_room:office": 0.75,
                "office:bedroom": 0.75,
                "bedroom:bathroom": 0.75,
                "outdoor:kitchen": 0.06,
                "garage:dining_room": 0.06,
                "kitchen:living_room": 0.06,
                "dining_room:office": 0.06,
                "living_room:bedroom": 0.06,
                "office:bathroom": 0.06,
                "bedroom:bedroom": 0.25,
            },
        },
        "object_propensity": {
            "base": 0.0,
            "pairs": {},
        },
    },
    "subpolicy": {
        "p_adj": 0.75,
        "steps_per_move": 25,
        "lateral_stay": 0.4,
        "drift_bias": 0.3,
        "drift_range": 2,
        "undirected_stay": 0.85,
    },
    "extractor_noise": None,
    "model": {
        "psi_obs_0": 0.001,
        "psi_obs_1": 0.15,
        "smoothing": 1.0,
        "explore_steps": 300,
        "samples_per_edge": 50,
    },
    "obs_grid": [
        [a, b] for a in (0.001, 0.01, 0.05) for b in (0.05, 0.15, 0.30)
    ],
    "tune": {"episodes": 300, "horizon": 500},
    "corpus": {"train": 200, "valid": 20, "test": 50},
    "protocol": {
        "base_episodes": 5000,
        "stratum_floor": 500,
        "max_stratum": 5,
        "horizons": [300, 500, 1000],
        "agents": ["leaps", "pure_subpolicy", "random", "oracle_graph"],
        "goal_kind": "room",
    },
    "replan_interval": 30,
    "negatives": "xor",
}


def _deep_merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None = None, overrides: Mapping | None = None) -> dict:
    """Defaults merged with an optional JSON file and optional overrides."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config document must be a JSON object")
        cfg = _deep_merge(cfg, user)
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def _require(cfg: Mapping, field: str, kind, path: str):
    if field not in cfg:
        raise ConfigError(f"missing config field: {path}{field}")
    value = cfg[field]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"config field {path}{field} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"config field {path}{field} must be {kind.__name__}")
    return value


def validate_config(cfg: Mapping) -> None:
    signals = _require(cfg, "signals", dict, "")
    rooms = _require(signals, "rooms", list, "signals.")
    if len(rooms) < 2:
        raise ConfigError("config field signals.rooms needs at least 2 room types")
    _require(signals, "objects", list, "signals.")
    gen = _require(cfg, "generator", dict, "")
    rc = _require(gen, "room_count", list, "generator.")
    if len(rc) != 2 or not all(isinstance(x, int) for x in rc) or not 1 <= rc[0] <= rc[1]:
        raise ConfigError("config field generator.room_count must be [lo, hi] with 1 <= lo <= hi")
    for name in ("untyped_rate", "untyped_adjacency", "extra_edge_scale"):
        v = _require(gen, name, float, "generator.")
        if not 0 <= v <= 1:
            raise ConfigError(f"config field generator.{name} must be in [0, 1]")
    tw = gen.get("type_weights")
    if tw is not None:
        if not isinstance(tw, Mapping):
            raise ConfigError("config field generator.type_weights must be an object")
        for name, w in tw.items():
            if name not in rooms:
                raise ConfigError(f"config field generator.type_weights has unknown type {name!r}")
            if not isinstance(w, (int, float)) or w < 0:
                raise ConfigError(f"config field generator.type_weights[{name!r}] must be >= 0")
    co = _require(gen, "co_occurrence", dict, "generator.")
    _check_pair_map(co, "generator.co_occurrence", rooms, rooms)
    if signals["objects"]:
        prop = _require(gen, "object_propensity", dict, "generator.")
        _check_pair_map(prop, "generator.object_propensity", rooms, signals["objects"])
    sub = _require(cfg, "subpolicy", dict, "")
    p_adj = _require(sub, "p_adj", float, "subpolicy.")
    if not 0 <= p_adj <= 1:
        raise ConfigError("config field subpolicy.p_adj must be in [0, 1]")
    spm = _require(sub, "steps_per_move", int, "subpolicy.")
    if spm < 1:
        raise ConfigError("config field subpolicy.steps_per_move must be >= 1")
    stay = _require(sub, "lateral_stay", float, "subpolicy.")
    if not 0 <= stay < 1:
        raise ConfigError("config field subpolicy.lateral_stay must be in [0, 1)")
    drift = _require(sub, "drift_bias", float, "subpolicy.")
    if not 0 <= drift <= 1:
        raise ConfigError("config field subpolicy.drift_bias must be in [0, 1]")
    if _require(sub, "drift_range", int, "subpolicy.") < 1:
        raise ConfigError("config field subpolicy.drift_range must be >= 1")
    undirected = _require(sub, "undirected_stay", float, "subpolicy.")
    if not 0 <= undirected < 1:
        raise ConfigError("config field subpolicy.undirected_stay must be in [0, 1)")
    noise = cfg.get("extractor_noise")
    if noise is not None:
        if not isinstance(noise, dict):
            raise ConfigError("config field extractor_noise must be null or an object")
        for name in ("false_positive", "false_negative"):
            v = _require(noise, name, float, "extractor_noise.")
            if not 0 <= v < 1:
                raise ConfigError(f"config field extractor_noise.{name} must be in [0, 1)")
        if _require(noise, "window", int, "extractor_noise.") < 1:
            raise ConfigError("config field extractor_noise.window must be >= 1")
    mdl = _require(cfg, "model", dict, "")
    for name in ("psi_obs_0", "psi_obs_1"):
        v = _require(mdl, name, float, "model.")
        if not 0 <= v <= 1:
            raise ConfigError(f"config field model.{name} must be in [0, 1]")
    if _require(mdl, "smoothing", float, "model.") < 0:
        raise ConfigError("config field model.smoothing must be >= 0")
    if _require(mdl, "explore_steps", int, "model.") < 0:
        raise ConfigError("config field model.explore_steps must be >= 0")
    if _require(mdl, "samples_per_edge", int, "model.") < 1:
        raise ConfigError("config field model.samples_per_edge must be >= 1")
    grid = _require(cfg, "obs_grid", list, "")
    for entry in grid:
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not all(isinstance(x, (int, float)) and 0 <= x <= 1 for x in entry)
        ):
            raise ConfigError("config field obs_grid entries must be [psi_obs_0, psi_obs_1] pairs")
    proto = _require(cfg, "protocol", dict, "")
    for name in ("base_episodes", "stratum_floor", "max_stratum"):
        if _require(proto, name, int, "protocol.") < 0:
            raise ConfigError(f"config field protocol.{name} must be non-negative")
    horizons = _require(proto, "horizons", list, "protocol.")
    if not horizons or not all(isinstance(h, int) and h >= 1 for h in horizons):
        raise ConfigError("config field protocol.horizons must be a list of positive ints")
    agents = _require(proto, "agents", list, "protocol.")
    from .agents import AGENT_KINDS

    for a in agents:
        if a not in AGENT_KINDS:
            raise ConfigError(f"config field protocol.agents contains unknown kind {a!r}")
    goal_kind = _require(proto, "goal_kind", str, "protocol.")
    if goal_kind not in ("room", "object"):
        raise ConfigError("config field protocol.goal_kind must be 'room' or 'object'")
    if goal_kind == "object" and not signals["objects"]:
        raise ConfigError("config field protocol.goal_kind is 'object' but signals.objects is empty")
    corpus = _require(cfg, "corpus", dict, "")
    for name in ("train", "valid", "test"):
        if _require(corpus, name, int, "corpus.") < 1:
            raise ConfigError(f"config field corpus.{name} must be >= 1")
    ri = _require(cfg, "replan_interval", int, "")
    if ri < 1:
        raise ConfigError("config field replan_interval must be >= 1")
    if ri > min(horizons):
        raise ConfigError("config field replan_interval must not exceed the smallest horizon")
    if _require(cfg, "negatives", str, "") not in ("xor", "all"):
        raise ConfigError("config field negatives must be 'xor' or 'all'")
    tune = _require(cfg, "tune", dict, "")
    if _require(tune, "episodes", int, "tune.") < 1:
        raise ConfigError("config field tune.episodes must be >= 1")
    if _require(tune, "horizon", int, "tune.") < 1:
        raise ConfigError("config field tune.horizon must be >= 1")
    if not isinstance(cfg.get("seed"), int):
        raise ConfigError("config field seed must be an integer")


def _check_pair_map(spec: Mapping, path: str, rows: list, cols: list) -> None:
    base = spec.get("base", 0.0)
    if not isinstance(base, (int, float)) or not 0 <= base <= 1:
        raise ConfigError(f"config field {path}.base must be a probability")
    pairs = spec.get("pairs", {})
    if not isinstance(pairs, Mapping):
        raise ConfigError(f"config field {path}.pairs must be an object")
    for key, value in pairs.items():
        parts = key.split(":")
        if len(parts) != 2 or parts[0] not in rows or parts[1] not in cols:
            raise ConfigError(f"config field {path}.pairs has unknown pair {key!r}")
        if not isinstance(value, (int, float)) or not 0 <= value <= 1:
            raise ConfigError(f"config field {path}.pairs[{key!r}] must be a probability")


def _pair_matrix(spec: Mapping, rows: list[str], cols: list[str], symmetric: bool) -> np.ndarray:
    m = np.full((len(rows), len(cols)), float(spec.get("base", 0.0)))
    row_index = {name: i for i, name in enumerate(rows)}
    col_index = {name: i for i, name in enumerate(cols)}
    for key, value in spec.get("pairs", {}).items():
        a, b = key.split(":")
        if symmetric:
            i, j = row_index[a], col_index[b]
            m[i, j] = m[j, i] = float(value)
        else:
            m[row_index[a], col_index[b]] = float(value)
    return m


def make_vocab(cfg: Mapping) -> SignalVocabulary:
    return SignalVocabulary(
        tuple(cfg["signals"]["rooms"]), object_signals=tuple(cfg["signals"]["objects"])
    )


def make_generator_config(cfg: Mapping) -> GeneratorConfig:
    rooms = list(cfg["signals"]["rooms"])
    objects = list(cfg["signals"]["objects"])
    gen = cfg["generator"]
    co = _pair_matrix(gen["co_occurrence"], rooms, rooms, symmetric=True)
    prop = None
    if objects:
        prop = _pair_matrix(gen["object_propensity"], rooms, objects, symmetric=False)
    tw = gen.get("type_weights")
    weights = None if tw is None else tuple(float(tw.get(name, 1.0)) for name in rooms)
    return GeneratorConfig(
        n_room_types=len(rooms),
        room_count=tuple(gen["room_count"]),
        co_occurrence=co,
        object_propensity=prop,
        untyped_rate=float(gen["untyped_rate"]),
        untyped_adjacency=float(gen["untyped_adjacency"]),
        extra_edge_scale=float(gen["extra_edge_scale"]),
        type_weights=weights,
        seed=int(cfg["seed"]),
    )


def make_profile(cfg: Mapping) -> SubPolicyProfile:
    sub = cfg["subpolicy"]
    return SubPolicyProfile(
        p_adj=float(sub["p_adj"]),
        steps_per_move=int(sub["steps_per_move"]),
        lateral_stay=float(sub["lateral_stay"]),
        drift_bias=float(sub["drift_bias"]),
        drift_range=int(sub["drift_range"]),
        undirected_stay=float(sub["undirected_stay"]),
    )


def make_noise(cfg: Mapping) -> ExtractorNoise | None:
    noise = cfg.get("extractor_noise")
    if noise is None:
        return None
    return ExtractorNoise(
        false_positive=float(noise["false_positive"]),
        false_negative=float(noise["false_negative"]),
        window=int(noise["window"]),
    )


def make_protocol(cfg: Mapping) -> EvalProtocol:
    proto = cfg["protocol"]
    return EvalProtocol(
        base_episodes=int(proto["base_episodes"]),
        stratum_floor=int(proto["stratum_floor"]),
        max_stratum=int(proto["max_stratum"]),
        horizons=tuple(proto["horizons"]),
        agents=tuple(proto["agents"]),
        seed=int(cfg["seed"]),
        goal_kind=proto["goal_kind"],
    )


def make_agent_base(cfg: Mapping, kind: str = "leaps", horizon: int | None = None) -> AgentConfig:
    horizons = cfg["protocol"]["horizons"]
    return AgentConfig(
        kind=kind,
        replan_interval=int(cfg["replan_interval"]),
        horizon=int(horizon if horizon is not None else max(horizons)),
        profile=make_profile(cfg),
        noise=make_noise(cfg),
        negatives=cfg["negatives"],
    )
