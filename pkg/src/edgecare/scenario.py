"""Scenario configuration: schema, defaults and validation.

A scenario file (JSON or YAML) fully determines a run together with its
seed.  Every field has a default, unknown keys are rejected, and all
violations name the dotted field path.  The resolved (fully defaulted)
configuration is written next to each run's trace so a run directory is
self-describing.
"""

from __future__ import annotations

import json
from pathlib import Path

import yaml

from .protocol import SENSOR_KINDS, STAGES


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


DEFAULT_PATIENT = {
    "patient_id": "p1",
    "stage": "Entry",
    "engagement": 0.7,
    "cooperation_bias": 0.8,
    "demands": {"bandwidth_kbps": 500, "compute_units": 2},
}

DEFAULTS = {
    "seed": 42,
    "duration_ms": 600000,
    "links": {
        "edge_cloud": {"latency_ms": 20, "bandwidth_kbps": 1000,
                       "network_type": "5G"},
    },
    "sensors": {
        "profiles": {},      # kind -> partial profile override
        "anomalies": {},     # patient_id -> [ {kind, onset_ms, duration_ms, delta} ]
    },
    "edge": {
        "fusion_window_ms": 10000,
        "beat_ms": 3000,
        "first_session_ms": 5000,
        "session_gap_ms": 5000,
        "asset_size_bytes": 120000,
        "emergency_rules": [
            {"kind": "SpO2", "lower": 90.0},
            {"kind": "Heartbeat", "lower": 50.0, "upper": 120.0},
            {"kind": "SystolicPressure", "lower": 80.0, "upper": 180.0},
            {"kind": "BodyTemp", "lower": 35.0, "upper": 39.5},
        ],
    },
    "cloud": {
        "risk_rules": [
            {"kind": "SpO2", "lower": 90.0, "weight": 4},
            {"kind": "Heartbeat", "lower": 50.0, "upper": 120.0, "weight": 2},
            {"kind": "SystolicPressure", "lower": 80.0, "upper": 180.0, "weight": 2},
            {"kind": "BodyTemp", "lower": 35.0, "upper": 39.5, "weight": 2},
            {"kind": "Respiration", "lower": 8.0, "upper": 30.0, "weight": 1},
        ],
        "risk_buckets": {"Moderate": 1, "High": 3, "Critical": 6},
        "capacities": {"bandwidth_kbps": 10000, "compute_units": 16},
        "cache_capacity_bytes": 300000,
        "epoch_ms": 30000,
        "load_penalty_ms": 5,
        "dossier_depth": 32,
        "offload": {"edge_capacity": 2, "cloud_capacity": 8, "task_cycles": 500},
    },
    "patients": [DEFAULT_PATIENT],
    "expert": {
        "mode": "AutoAdvance",
        "ack_delay_ms": 5000,
        "k_sessions": 3,
        "theta": 0.6,
        "live_ack_timeout_ms": 30000,
    },
    "metrics": {"qoe_w1": 1.0, "qoe_w2": 0.5, "latency_ref_ms": 200},
}

_PROFILE_KEYS = {"baseline", "amplitude", "period_ms", "noise_sd", "sample_period_ms"}


def _reject_unknown(path: str, obj: dict, allowed):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _merged(path: str, defaults: dict, override) -> dict:
    if not isinstance(override, dict):
        raise ConfigError(path, "must be an object")
    _reject_unknown(path, override, defaults.keys())
    out = {}
    for key, default in defaults.items():
        if key not in override:
            out[key] = json.loads(json.dumps(default))  # deep copy
        elif isinstance(default, dict) and key not in ("profiles", "anomalies",
                                                       "risk_buckets", "demands",
                                                       "capacities"):
            out[key] = _merged(f"{path}.{key}" if path else key, default, override[key])
        else:
            out[key] = override[key]
    return out


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(path, message)


def _check_rule_list(path: str, rules, with_weight: bool):
    _require(isinstance(rules, list), path, "must be a list")
    for i, rule in enumerate(rules):
        p = f"{path}[{i}]"
        _require(isinstance(rule, dict), p, "must be an object")
        allowed = {"kind", "lower", "upper"} | ({"weight"} if with_weight else set())
        _reject_unknown(p, rule, allowed)
        _require(rule.get("kind") in SENSOR_KINDS, f"{p}.kind",
                 "must be a sensor kind")
        _require(rule.get("lower") is not None or rule.get("upper") is not None,
                 p, "needs a lower or upper bound")
        for side in ("lower", "upper"):
            if side in rule and rule[side] is not None:
                _require(_is_num(rule[side]), f"{p}.{side}", "must be a number")
        if with_weight:
            _require(_is_int(rule.get("weight")) and rule["weight"] > 0,
                     f"{p}.weight", "must be a positive integer")


def resolve_config(raw: dict) -> dict:
    """Merge over defaults and validate; returns the resolved config."""
    cfg = _merged("", DEFAULTS, raw)

    _require(_is_int(cfg["seed"]) and cfg["seed"] >= 0, "seed",
             "must be a non-negative integer")
    _require(_is_int(cfg["duration_ms"]) and cfg["duration_ms"] > 0,
             "duration_ms", "must be a positive integer")

    link = cfg["links"]["edge_cloud"]
    _require(_is_int(link["latency_ms"]) and link["latency_ms"] >= 0,
             "links.edge_cloud.latency_ms", "must be an integer >= 0")
    _require(_is_int(link["bandwidth_kbps"]) and link["bandwidth_kbps"] > 0,
             "links.edge_cloud.bandwidth_kbps", "must be a positive integer")

    profiles = cfg["sensors"]["profiles"]
    _require(isinstance(profiles, dict), "sensors.profiles", "must be an object")
    for kind, override in profiles.items():
        p = f"sensors.profiles.{kind}"
        _require(kind in SENSOR_KINDS, p, "unknown sensor kind")
        _require(isinstance(override, dict), p, "must be an object")
        _reject_unknown(p, override, _PROFILE_KEYS)
        for key in ("period_ms", "sample_period_ms"):
            if key in override:
                _require(_is_int(override[key]) and override[key] > 0,
                         f"{p}.{key}", "must be a positive integer")
        for key in ("baseline", "amplitude", "noise_sd"):
            if key in override:
                _require(_is_num(override[key]), f"{p}.{key}", "must be a number")

    anomalies = cfg["sensors"]["anomalies"]
    _require(isinstance(anomalies, dict), "sensors.anomalies", "must be an object")
    patient_ids = set()
    for i, patient in enumerate(cfg["patients"]):
        p = f"patients[{i}]"
        _require(isinstance(patient, dict), p, "must be an object")
        merged = _merged(p, DEFAULT_PATIENT, patient)
        _require(isinstance(merged["patient_id"], str) and merged["patient_id"],
                 f"{p}.patient_id", "must be a non-empty string")
        _require(merged["patient_id"] not in patient_ids, f"{p}.patient_id",
                 "duplicate patient id")
        patient_ids.add(merged["patient_id"])
        _require(merged["stage"] in STAGES, f"{p}.stage",
                 "must be one of " + "/".join(STAGES))
        for key in ("engagement", "cooperation_bias"):
            _require(_is_num(merged[key]) and 0.0 <= merged[key] <= 1.0,
                     f"{p}.{key}", "must lie in [0,1]")
        for res in ("bandwidth_kbps", "compute_units"):
            _require(_is_num(merged["demands"].get(res, 0))
                     and merged["demands"].get(res, 0) >= 0,
                     f"{p}.demands.{res}", "must be a number >= 0")
        cfg["patients"][i] = merged
    _require(len(cfg["patients"]) > 0, "patients", "need at least one patient")

    for pid, scripts in anomalies.items():
        p = f"sensors.anomalies.{pid}"
        _require(pid in patient_ids, p, "unknown patient id")
        _require(isinstance(scripts, list), p, "must be a list")
        for j, script in enumerate(scripts):
            sp = f"{p}[{j}]"
            _require(isinstance(script, dict), sp, "must be an object")
            _reject_unknown(sp, script, {"kind", "onset_ms", "duration_ms", "delta"})
            _require(script.get("kind") in SENSOR_KINDS, f"{sp}.kind",
                     "must be a sensor kind")
            _require(_is_int(script.get("onset_ms")) and script["onset_ms"] >= 0,
                     f"{sp}.onset_ms", "must be an integer >= 0")
            _require(_is_int(script.get("duration_ms")) and script["duration_ms"] > 0,
                     f"{sp}.duration_ms", "must be a positive integer")
            _require(_is_num(script.get("delta")), f"{sp}.delta", "must be a number")

    e = cfg["edge"]
    for key in ("fusion_window_ms", "beat_ms", "asset_size_bytes"):
        _require(_is_int(e[key]) and e[key] > 0, f"edge.{key}",
                 "must be a positive integer")
    for key in ("first_session_ms", "session_gap_ms"):
        _require(_is_int(e[key]) and e[key] >= 0, f"edge.{key}",
                 "must be an integer >= 0")
    _check_rule_list("edge.emergency_rules", e["emergency_rules"], with_weight=False)

    c = cfg["cloud"]
    _check_rule_list("cloud.risk_rules", c["risk_rules"], with_weight=True)
    _require(set(c["risk_buckets"].keys()) == {"Moderate", "High", "Critical"},
             "cloud.risk_buckets", "must define Moderate, High and Critical")
    prev = 0
    for name in ("Moderate", "High", "Critical"):
        _require(_is_int(c["risk_buckets"][name]) and c["risk_buckets"][name] > prev,
                 f"cloud.risk_buckets.{name}", "thresholds must increase")
        prev = c["risk_buckets"][name]
    for res in ("bandwidth_kbps", "compute_units"):
        _require(_is_num(c["capacities"].get(res, 0)) and c["capacities"].get(res, 0) >= 0,
                 f"cloud.capacities.{res}", "must be a number >= 0")
    _require(_is_int(c["cache_capacity_bytes"]) and c["cache_capacity_bytes"] >= 0,
             "cloud.cache_capacity_bytes", "must be an integer >= 0")
    _require(_is_int(c["epoch_ms"]) and c["epoch_ms"] > 0, "cloud.epoch_ms",
             "must be a positive integer")
    _require(_is_num(c["load_penalty_ms"]) and c["load_penalty_ms"] >= 0,
             "cloud.load_penalty_ms", "must be a number >= 0")
    _require(_is_int(c["dossier_depth"]) and c["dossier_depth"] > 0,
             "cloud.dossier_depth", "must be a positive integer")
    o = c["offload"]
    for key in ("edge_capacity", "cloud_capacity"):
        _require(_is_num(o[key]) and o[key] > 0, f"cloud.offload.{key}",
                 "must be a number > 0")
    _require(_is_int(o["task_cycles"]) and o["task_cycles"] > 0,
             "cloud.offload.task_cycles", "must be a positive integer")

    x = cfg["expert"]
    _require(x["mode"] in ("AutoAdvance", "Conservative"), "expert.mode",
             "must be AutoAdvance or Conservative")
    for key in ("ack_delay_ms", "live_ack_timeout_ms"):
        _require(_is_int(x[key]) and x[key] >= 0, f"expert.{key}",
                 "must be an integer >= 0")
    _require(_is_int(x["k_sessions"]) and x["k_sessions"] > 0,
             "expert.k_sessions", "must be a positive integer")
    _require(_is_num(x["theta"]) and 0.0 <= x["theta"] <= 1.0,
             "expert.theta", "must lie in [0,1]")

    m = cfg["metrics"]
    for key in ("qoe_w1", "qoe_w2"):
        _require(_is_num(m[key]) and m[key] >= 0, f"metrics.{key}",
                 "must be a number >= 0")
    _require(_is_num(m["latency_ref_ms"]) and m["latency_ref_ms"] > 0,
             "metrics.latency_ref_ms", "must be a number > 0")

    return cfg


def load_config(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix in (".yaml", ".yml"):
            raw = yaml.safe_load(text) or {}
        else:
            raw = json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as err:
        raise ConfigError(str(path), f"not parseable: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(str(path), "top level must be an object")
    return resolve_config(raw)


def canonical_config_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2) + "\n"
