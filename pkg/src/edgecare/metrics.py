"""Run metrics computed purely from the JSONL trace.

The first trace event of every run is a `note.run_config` carrying the
parameters metrics depend on (QoE weights, epoch length, link bandwidth,
patient demands and starting stages), so metrics.json is a function of
trace.jsonl alone: replaying a trace reproduces it byte for byte.

QoE per patient:
    clamp(w1 * mean_over_epochs(min(1, allocated/demanded bandwidth))
          - w2 * (mean uplink latency / latency_ref), 0, 1)
"""

from __future__ import annotations

import json


class CorruptTrace(Exception):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"{message} (line {line_number})")
        self.line_number = line_number


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def metrics_from_lines(lines) -> dict:
    cfg = None
    bytes_moved = 0
    cache = {"hits": 0, "misses": 0}
    cycles = {"Local": 0, "Cloud": 0}
    utilization = []
    uplink: dict[str, list] = {}
    alert_latency: dict[str, list] = {}
    sessions: dict[str, dict] = {}
    timelines: dict[str, list] = {}
    satisfaction: dict[str, list] = {}

    for number, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            ev = json.loads(raw)
        except json.JSONDecodeError as err:
            raise CorruptTrace(f"not parseable: {err.msg}", number) from err
        for key in ("t", "seq", "target", "kind"):
            if key not in ev:
                raise CorruptTrace(f"event missing {key!r}", number)
        kind, payload, t = ev["kind"], ev.get("payload"), ev["t"]

        if kind == "note.run_config":
            cfg = payload
            for p in cfg["patients"]:
                pid = p["patient_id"]
                uplink[pid] = []
                alert_latency[pid] = []
                sessions[pid] = {"Success": 0, "Failure": 0}
                timelines[pid] = [[0, p["stage"]]]
                satisfaction[pid] = []
            continue
        if cfg is None:
            raise CorruptTrace("trace does not begin with a run_config note", number)

        if isinstance(payload, dict) and "size_bytes" in payload and "sent_at" in payload:
            bytes_moved += payload["size_bytes"]
            if kind == "fused_record":
                pid = payload["msg"]["body"]["patient_id"]
                uplink[pid].append(t - payload["sent_at"])
            elif kind == "alert":
                body = payload["msg"]["body"]
                alert_latency[body["patient_id"]].append(t - body["created_at"])
        elif kind == "note.session_closed":
            sessions[payload["patient_id"]][payload["outcome"]] += 1
        elif kind == "note.stage_change":
            timelines[payload["patient_id"]].append([t, payload["stage"]])
        elif kind == "note.cache_access":
            cache["hits" if payload["hit"] else "misses"] += 1
        elif kind == "note.offload":
            cycles[payload["choice"]] += payload["cycles"]
        elif kind == "note.feedback":
            utilization.append({"epoch_start": payload["epoch_start"],
                                "bytes_moved": payload["bytes_moved"],
                                "utilization": payload["utilization"]})
        elif kind == "note.resource_plan":
            allocations = payload["body"]["allocations"]
            demands = payload["demands"]
            for pid, demand in demands.items():
                want = demand.get("bandwidth_kbps", 0)
                got = allocations.get(pid, {}).get("bandwidth_kbps", 0.0)
                satisfaction[pid].append(min(1.0, got / want) if want > 0 else 1.0)

    if cfg is None:
        raise CorruptTrace("trace does not begin with a run_config note", 0)

    total_accesses = cache["hits"] + cache["misses"]
    patients = {}
    for p in cfg["patients"]:
        pid = p["patient_id"]
        latencies = uplink[pid]
        mean_latency = sum(latencies) / len(latencies) if latencies else 0.0
        sat = satisfaction[pid]
        mean_sat = sum(sat) / len(sat) if sat else 1.0
        qoe = _clamp01(cfg["qoe_w1"] * mean_sat
                       - cfg["qoe_w2"] * (mean_latency / cfg["latency_ref_ms"]))
        patients[pid] = {
            "mean_uplink_latency_ms": mean_latency,
            "alert_latency_ms": alert_latency[pid],
            "qoe": qoe,
            "stage_timeline": timelines[pid],
            "sessions": sessions[pid],
        }
    return {
        "global": {
            "bytes_moved": bytes_moved,
            "cache_hit_ratio": cache["hits"] / total_accesses if total_accesses else 0.0,
            "cache": cache,
            "compute_cycles": cycles,
            "allocation_utilization": utilization,
        },
        "patients": patients,
    }


def metrics_json(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True, indent=2) + "\n"
