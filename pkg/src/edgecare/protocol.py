"""Wire-level message vocabulary for the IoT / edge / cloud / gateway paths.

All messages are immutable value objects with one canonical serialization:
key-sorted compact JSON wrapped as {"v": 1, "msg": <tag>, "body": {...}}.
Equal messages therefore encode to identical bytes regardless of how they
were constructed, and encoded length doubles as message size for link-delay
accounting.

validate() returns a (possibly empty) list of violated invariants rather
than raising; encode() refuses to serialize an invalid message.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

WIRE_VERSION = 1

# --- vocabularies ----------------------------------------------------------

MEDICAL_KINDS = ("ECG", "EMG", "Respiration", "Heartbeat", "BodyTemp",
                 "SystolicPressure", "SpO2")
AMBIENT_KINDS = ("AmbientTemp", "Humidity", "AirQuality", "AtmPressure")
SENSOR_KINDS = MEDICAL_KINDS + AMBIENT_KINDS

SENSOR_UNITS = {
    "ECG": "mV", "EMG": "mV", "Respiration": "breaths/min", "Heartbeat": "bpm",
    "BodyTemp": "degC", "SystolicPressure": "mmHg", "SpO2": "%",
    "AmbientTemp": "degC", "Humidity": "%", "AirQuality": "AQI",
    "AtmPressure": "hPa",
}

PATIENT_RESPONSES = ("Laugh", "VerbalReply", "NoResponse", "Withdrawal")
POSITIVE_RESPONSES = ("Laugh", "VerbalReply")
MODALITIES = ("Image", "Voice")

RISK_LEVELS = ("Low", "Moderate", "High", "Critical")
STAGES = ("Entry", "Basic", "Middle", "Advanced")

# one row per therapy stage: humor style, program label, allowed modalities
STAGE_TABLE = {
    "Entry": {"humor_style": "IncongruousActions", "program": "FunnyBehaviors",
              "modalities": ("Image",)},
    "Basic": {"humor_style": "IncongruousEvents", "program": "InterestingExpression",
              "modalities": ("Image", "Voice")},
    "Middle": {"humor_style": "ConceptualIncongruity", "program": "KnockKnockJokes",
               "modalities": ("Image", "Voice")},
    "Advanced": {"humor_style": "MultipleMeanings", "program": "SarcasticJokes",
                 "modalities": ("Image", "Voice")},
}
HUMOR_STYLES = tuple(row["humor_style"] for row in STAGE_TABLE.values())

# built-in therapy program ids per stage; the tree library ships exactly these
STAGE_TREES = {
    "Entry": ("entry_playball", "entry_chasing", "entry_spinning"),
    "Basic": ("basic_aladdin",),
    "Middle": ("middle_knockknock",),
    "Advanced": ("advanced_sarcasm_1", "advanced_sarcasm_2"),
}

RECOMMENDATION_KINDS = ("PrescriptionUpdate", "TherapyStageChange",
                        "Instruction", "EmergencyAck")


def stage_index(stage: str) -> int:
    return STAGES.index(stage)


def next_stage(stage: str) -> str | None:
    i = stage_index(stage)
    return STAGES[i + 1] if i + 1 < len(STAGES) else None


def default_tree_for(stage: str) -> str:
    return STAGE_TREES[stage][0]


# --- physical bounds -------------------------------------------------------

@dataclass(frozen=True)
class Bounds:
    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    def contains(self, value: float) -> bool:
        above = value > self.lo if self.lo_open else value >= self.lo
        below = value < self.hi if self.hi_open else value <= self.hi
        return above and below

    def describe(self) -> str:
        return "%s%g,%g%s" % ("(" if self.lo_open else "[", self.lo,
                              self.hi, ")" if self.hi_open else "]")


# artifact defaults, overridable through scenario config
PHYSICAL_BOUNDS = {
    "ECG": Bounds(-10.0, 10.0),
    "EMG": Bounds(-10.0, 10.0),
    "Respiration": Bounds(0.0, 80.0),
    "Heartbeat": Bounds(0.0, 300.0, lo_open=True, hi_open=True),
    "BodyTemp": Bounds(30.0, 45.0),
    "SystolicPressure": Bounds(50.0, 250.0),
    "SpO2": Bounds(0.0, 100.0),
    "AmbientTemp": Bounds(-40.0, 60.0),
    "Humidity": Bounds(0.0, 100.0),
    "AirQuality": Bounds(0.0, 500.0),
    "AtmPressure": Bounds(850.0, 1100.0),
}


# --- message types ---------------------------------------------------------

@dataclass(frozen=True)
class SensorFrame:
    sensor_id: str
    patient_id: str
    kind: str
    t: int
    value: float
    seq: int


@dataclass(frozen=True)
class InteractionEvent:
    t: int
    session_id: str
    action: str
    patient_response: str
    modality: str


@dataclass(frozen=True)
class KindSummary:
    mean: float
    min: float
    max: float
    count: int


@dataclass(frozen=True)
class FusedRecord:
    patient_id: str
    window: tuple[int, int]          # [t0, t1)
    vitals: dict                     # kind -> KindSummary wire dict
    ambient: dict
    interactions: tuple              # InteractionEvent wire dicts, time order
    network_info: dict               # network_type, service_data_flow_bytes,
                                     # communication_quality


@dataclass(frozen=True)
class RiskAssessment:
    patient_id: str
    level: str
    score: int
    factors: tuple                   # (kind, observed, bound description)
    t: int


@dataclass(frozen=True)
class EmergencyAlert:
    patient_id: str
    cause: dict                      # kind, value, threshold, bound
    created_at: int
    alert_id: str


@dataclass(frozen=True)
class ExpertRecommendation:
    expert_id: str
    patient_id: str
    kind: str
    payload: dict
    issued_at: int


@dataclass(frozen=True)
class TherapyCommand:
    patient_id: str
    stage: str
    tree_id: str
    session_params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ResourcePlan:
    epoch: int
    allocations: dict                # patient -> {bandwidth_kbps, compute_units,
                                     #             cache_quota_bytes}
    capacities: dict


@dataclass(frozen=True)
class SessionRecord:
    session_id: str
    patient_id: str
    tree_id: str
    stage: str
    outcome: str                     # Success | Failure
    event_count: int
    positive_fraction: float
    duration_ms: int
    closed_at: int


@dataclass(frozen=True)
class ProgressSignal:
    patient_id: str
    from_stage: str
    t: int


MESSAGE_TYPES = {
    "sensor_frame": SensorFrame,
    "interaction_event": InteractionEvent,
    "fused_record": FusedRecord,
    "risk_assessment": RiskAssessment,
    "emergency_alert": EmergencyAlert,
    "expert_recommendation": ExpertRecommendation,
    "therapy_command": TherapyCommand,
    "resource_plan": ResourcePlan,
    "session_record": SessionRecord,
    "progress_signal": ProgressSignal,
}
_TAG_BY_TYPE = {cls: tag for tag, cls in MESSAGE_TYPES.items()}


# --- validation ------------------------------------------------------------

def _check_summary(out: list, label: str, kinds: tuple, summaries: dict):
    for kind, s in summaries.items():
        if kind not in kinds:
            out.append(f"{label}.{kind}: not a {label} sensor kind")
            continue
        if s["count"] < 0:
            out.append(f"{label}.{kind}.count: must be >= 0")
        if s["count"] > 0 and not (s["min"] <= s["mean"] <= s["max"]):
            out.append(f"{label}.{kind}: requires min <= mean <= max")


def validate(msg) -> list[str]:
    """Return the list of violated invariants (empty list means valid)."""
    v: list[str] = []
    if isinstance(msg, SensorFrame):
        if msg.kind not in SENSOR_KINDS:
            v.append(f"kind: unknown sensor kind {msg.kind!r}")
        else:
            b = PHYSICAL_BOUNDS[msg.kind]
            if not b.contains(msg.value):
                v.append(f"value: {msg.kind} must lie in {b.describe()} (got {msg.value:g})")
        if msg.t < 0:
            v.append("t: must be >= 0")
        if msg.seq < 0:
            v.append("seq: must be >= 0")
        if not msg.sensor_id or not msg.patient_id:
            v.append("sensor_id/patient_id: must be non-empty")
    elif isinstance(msg, InteractionEvent):
        if msg.patient_response not in PATIENT_RESPONSES:
            v.append(f"patient_response: unknown value {msg.patient_response!r}")
        if msg.modality not in MODALITIES:
            v.append(f"modality: unknown value {msg.modality!r}")
        if msg.t < 0:
            v.append("t: must be >= 0")
        if not msg.session_id:
            v.append("session_id: must be non-empty")
    elif isinstance(msg, FusedRecord):
        t0, t1 = msg.window
        if not t0 < t1:
            v.append(f"window: requires t0 < t1 (got [{t0},{t1}))")
        _check_summary(v, "vitals", MEDICAL_KINDS, msg.vitals)
        _check_summary(v, "ambient", AMBIENT_KINDS, msg.ambient)
        last_t = None
        for ev in msg.interactions:
            if not (t0 <= ev["t"] < t1):
                v.append(f"interactions: event at t={ev['t']} outside [{t0},{t1})")
            if last_t is not None and ev["t"] < last_t:
                v.append("interactions: not in time order")
            last_t = ev["t"]
        ni = msg.network_info
        if ni["service_data_flow_bytes"] < 0:
            v.append("network_info.service_data_flow_bytes: must be >= 0")
        if not 0.0 <= ni["communication_quality"] <= 1.0:
            v.append("network_info.communication_quality: must lie in [0,1]")
    elif isinstance(msg, RiskAssessment):
        if msg.level not in RISK_LEVELS:
            v.append(f"level: unknown risk level {msg.level!r}")
        if msg.score < 0:
            v.append("score: must be >= 0")
        if msg.level in RISK_LEVELS and msg.level != "Low" and not msg.factors:
            v.append("factors: must be non-empty when level > Low")
    elif isinstance(msg, EmergencyAlert):
        c = msg.cause
        if c.get("bound") == "lower":
            if not c["value"] < c["threshold"]:
                v.append("cause: value does not violate the lower threshold")
        elif c.get("bound") == "upper":
            if not c["value"] > c["threshold"]:
                v.append("cause: value does not violate the upper threshold")
        else:
            v.append("cause.bound: must be 'lower' or 'upper'")
        if c.get("kind") not in SENSOR_KINDS:
            v.append("cause.kind: unknown sensor kind")
        if not msg.alert_id:
            v.append("alert_id: must be non-empty")
        if msg.created_at < 0:
            v.append("created_at: must be >= 0")
    elif isinstance(msg, ExpertRecommendation):
        if msg.kind not in RECOMMENDATION_KINDS:
            v.append(f"kind: unknown recommendation kind {msg.kind!r}")
        elif msg.kind == "TherapyStageChange":
            if msg.payload.get("target_stage") not in STAGES:
                v.append("payload.target_stage: must be one of " + "/".join(STAGES))
        elif msg.kind == "EmergencyAck":
            if not msg.payload.get("alert_id"):
                v.append("payload.alert_id: must reference an alert")
        if not msg.expert_id or not msg.patient_id:
            v.append("expert_id/patient_id: must be non-empty")
    elif isinstance(msg, TherapyCommand):
        if msg.stage not in STAGES:
            v.append(f"stage: unknown stage {msg.stage!r}")
        elif msg.tree_id not in STAGE_TREES[msg.stage]:
            v.append(f"tree_id: {msg.tree_id!r} is not a {msg.stage} stage program")
    elif isinstance(msg, ResourcePlan):
        totals: dict[str, float] = {}
        for pid, alloc in msg.allocations.items():
            for res, amount in alloc.items():
                if amount < 0:
                    v.append(f"allocations.{pid}.{res}: must be >= 0")
                totals[res] = totals.get(res, 0.0) + amount
        for res, cap in msg.capacities.items():
            if totals.get(res, 0.0) > cap + 1e-9:
                v.append(f"allocations: sum of {res} exceeds capacity {cap:g}")
    elif isinstance(msg, SessionRecord):
        if msg.outcome not in ("Success", "Failure"):
            v.append(f"outcome: must be Success or Failure (got {msg.outcome!r})")
        if msg.stage not in STAGES:
            v.append(f"stage: unknown stage {msg.stage!r}")
        if msg.event_count < 0 or msg.duration_ms < 0:
            v.append("event_count/duration_ms: must be >= 0")
        if not 0.0 <= msg.positive_fraction <= 1.0:
            v.append("positive_fraction: must lie in [0,1]")
    elif isinstance(msg, ProgressSignal):
        if msg.from_stage not in STAGES:
            v.append(f"from_stage: unknown stage {msg.from_stage!r}")
        elif next_stage(msg.from_stage) is None:
            v.append("from_stage: final stage has no successor")
    else:
        v.append(f"unknown message type {type(msg).__name__}")
    return v


# --- canonical codec --------------------------------------------------------

class DecodeError(Exception):
    """Malformed wire bytes; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def to_wire(msg) -> dict:
    body = asdict(msg)
    # tuples -> lists happen in asdict; keep window/factors/interactions as lists
    return {"v": WIRE_VERSION, "msg": _TAG_BY_TYPE[type(msg)], "body": body}


def from_wire(obj: dict):
    cls = MESSAGE_TYPES[obj["msg"]]
    body = dict(obj["body"])
    if cls is FusedRecord:
        body["window"] = tuple(body["window"])
        body["interactions"] = tuple(body["interactions"])
    elif cls is RiskAssessment:
        body["factors"] = tuple(tuple(f) for f in body["factors"])
    return cls(**body)


def encode(msg) -> bytes:
    violations = validate(msg)
    if violations:
        raise ValueError(f"refusing to encode invalid {type(msg).__name__}: "
                         + "; ".join(violations))
    return json.dumps(to_wire(msg), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True).encode("utf-8")


def decode(data: bytes):
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DecodeError("invalid utf-8", e.start) from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise DecodeError(f"invalid json: {e.msg}", e.pos) from e
    if not isinstance(obj, dict):
        raise DecodeError("top-level value is not an object")
    if obj.get("v") != WIRE_VERSION:
        raise DecodeError(f"unsupported wire version {obj.get('v')!r}")
    if obj.get("msg") not in MESSAGE_TYPES:
        raise DecodeError(f"unknown message tag {obj.get('msg')!r}")
    try:
        return from_wire(obj)
    except (KeyError, TypeError) as e:
        raise DecodeError(f"malformed body: {e}") from e


def encoded_size(msg) -> int:
    return len(encode(msg))
