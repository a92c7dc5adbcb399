"""Cloud-side services: cognitive data handling and resource management.

The cognitive data server ingests fused records, scores patient risk and
routes expert recommendations; the resource manager computes per-epoch
allocations, offload and handover decisions, and runs an LRU content cache.
Risk scoring is threshold-and-weight based and deliberately monotone:
pushing any summarized vital further past its bound can only raise the
score.  Allocation is strict-priority by risk tier with demand-proportional
splits inside a tier, computed in exact rational arithmetic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .protocol import (RISK_LEVELS, FusedRecord, RiskAssessment,
                       EmergencyAlert, ExpertRecommendation, TherapyCommand,
                       ResourcePlan, ProgressSignal, default_tree_for)


class UnknownPatient(Exception):
    pass


class NoCandidates(Exception):
    pass


class AssetTooLarge(Exception):
    pass


class StaleAck(Exception):
    """The referenced alert was already cleared (or never existed)."""


# --- risk scoring -----------------------------------------------------------

@dataclass(frozen=True)
class RiskRule:
    kind: str
    lower: float | None
    upper: float | None
    weight: int


DEFAULT_RISK_RULES = (
    RiskRule("SpO2", 90.0, None, 4),
    RiskRule("Heartbeat", 50.0, 120.0, 2),
    RiskRule("SystolicPressure", 80.0, 180.0, 2),
    RiskRule("BodyTemp", 35.0, 39.5, 2),
    RiskRule("Respiration", 8.0, 30.0, 1),
)

# score -> level buckets; Critical is also forced by any active alert
DEFAULT_BUCKETS = {"Moderate": 1, "High": 3, "Critical": 6}


@dataclass(frozen=True)
class RiskPolicy:
    rules: tuple = DEFAULT_RISK_RULES
    buckets: dict = field(default_factory=lambda: dict(DEFAULT_BUCKETS))

    def bucketize(self, score: int) -> str:
        level = "Low"
        for name in ("Moderate", "High", "Critical"):
            if score >= self.buckets[name]:
                level = name
        return level


def assess_risk(record: FusedRecord, policy: RiskPolicy,
                active_alerts, t: int) -> RiskAssessment:
    """Score one fused record; active alerts force Critical."""
    score = 0
    factors = []
    summaries = dict(record.vitals)
    summaries.update(record.ambient)
    for rule in policy.rules:
        s = summaries.get(rule.kind)
        if not s or s["count"] == 0:
            continue
        if rule.lower is not None and s["min"] < rule.lower:
            score += rule.weight
            factors.append((rule.kind, s["min"], f"min >= {rule.lower:g}"))
        if rule.upper is not None and s["max"] > rule.upper:
            score += rule.weight
            factors.append((rule.kind, s["max"], f"max <= {rule.upper:g}"))
    level = policy.bucketize(score)
    for alert in active_alerts:
        level = "Critical"
        c = alert.cause
        sign = ">=" if c["bound"] == "lower" else "<="
        factors.append((c["kind"], c["value"], f"unacked alert: {sign} {c['threshold']:g}"))
    return RiskAssessment(patient_id=record.patient_id, level=level,
                          score=score, factors=tuple(factors), t=t)


def risk_rank(level: str) -> int:
    return RISK_LEVELS.index(level)


# --- patient dossiers and the cognitive data server --------------------------

@dataclass
class PatientDossier:
    patient_id: str
    stage: str = "Entry"
    records: deque = field(default_factory=lambda: deque(maxlen=32))
    current_risk: RiskAssessment | None = None
    # alert_id -> (EmergencyAlert, notified_at)
    outstanding_alerts: dict = field(default_factory=dict)
    recommendations: list = field(default_factory=list)
    pending_signals: list = field(default_factory=list)
    session_outcomes: dict = field(default_factory=lambda: {"Success": 0, "Failure": 0})
    recent_fractions: deque = field(default_factory=lambda: deque(maxlen=10))

    def active_alerts(self):
        return [alert for alert, _ in self.outstanding_alerts.values()]

    def risk_level(self) -> str:
        return self.current_risk.level if self.current_risk else "Low"


class CognitiveDataServer:
    """Dossier store: ingest, risk evaluation and recommendation routing."""

    def __init__(self, policy: RiskPolicy | None = None, dossier_depth: int = 32):
        self.policy = policy or RiskPolicy()
        self.dossier_depth = dossier_depth
        self.dossiers: dict[str, PatientDossier] = {}

    def register(self, patient_id: str, stage: str = "Entry") -> PatientDossier:
        d = PatientDossier(patient_id=patient_id, stage=stage,
                           records=deque(maxlen=self.dossier_depth))
        self.dossiers[patient_id] = d
        return d

    def dossier(self, patient_id: str) -> PatientDossier:
        try:
            return self.dossiers[patient_id]
        except KeyError:
            raise UnknownPatient(patient_id) from None

    def ingest(self, record: FusedRecord, now: int):
        """Returns (risk, level_changed)."""
        d = self.dossier(record.patient_id)
        d.records.append(record)
        previous = d.risk_level()
        d.current_risk = assess_risk(record, self.policy, d.active_alerts(), now)
        return d.current_risk, d.current_risk.level != previous

    def add_alert(self, alert: EmergencyAlert, now: int):
        d = self.dossier(alert.patient_id)
        d.outstanding_alerts[alert.alert_id] = (alert, now)

    def add_signal(self, signal: ProgressSignal):
        self.dossier(signal.patient_id).pending_signals.append(signal)

    def record_session(self, patient_id: str, outcome: str, fraction: float):
        d = self.dossier(patient_id)
        d.session_outcomes[outcome] = d.session_outcomes.get(outcome, 0) + 1
        d.recent_fractions.append(fraction)

    def consume_signals(self, patient_id: str) -> list:
        d = self.dossier(patient_id)
        signals, d.pending_signals = d.pending_signals, []
        return signals

    def route_recommendation(self, rec: ExpertRecommendation, now: int) -> dict:
        """Apply one recommendation; returns {"command": TherapyCommand|None,
        "cleared": alert_id|None}.  Raises StaleAck / UnknownPatient.
        """
        d = self.dossier(rec.patient_id)
        d.recommendations.append(rec)
        if rec.kind == "TherapyStageChange":
            target = rec.payload["target_stage"]
            d.stage = target
            cmd = TherapyCommand(patient_id=rec.patient_id, stage=target,
                                 tree_id=default_tree_for(target))
            return {"command": cmd, "cleared": None}
        if rec.kind == "EmergencyAck":
            alert_id = rec.payload["alert_id"]
            if alert_id not in d.outstanding_alerts:
                raise StaleAck(alert_id)
            del d.outstanding_alerts[alert_id]
            if d.records:
                d.current_risk = assess_risk(d.records[-1], self.policy,
                                             d.active_alerts(), now)
            return {"command": None, "cleared": alert_id}
        # PrescriptionUpdate / Instruction: dossier log only
        return {"command": None, "cleared": None}


# --- resource management ------------------------------------------------------

def _exact(value) -> Fraction:
    """Fraction of an int or a decimal-literal float, without binary fuzz."""
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


def allocate(demands: dict, capacities: dict, risk_levels: dict,
             epoch: int, cache_capacity_bytes: int = 0) -> ResourcePlan:
    """Strict priority by risk tier, demand-proportional within a tier.

    demands: patient -> {"bandwidth_kbps": d, "compute_units": d}; every
    allocation is capped at demand and per-resource sums never exceed
    capacity.  Exact rational arithmetic, surfaced as floats.
    """
    allocations: dict[str, dict[str, float]] = {
        pid: {} for pid in sorted(demands)}
    for resource in ("bandwidth_kbps", "compute_units"):
        remaining = _exact(capacities.get(resource, 0))
        for level in reversed(RISK_LEVELS):  # Critical first
            tier = sorted(pid for pid in demands
                          if risk_levels.get(pid, "Low") == level)
            wants = {pid: _exact(demands[pid].get(resource, 0)) for pid in tier}
            total = sum(wants.values())
            if total <= 0:
                for pid in tier:
                    allocations[pid][resource] = 0.0
                continue
            ratio = min(Fraction(1), remaining / total)
            granted_total = Fraction(0)
            for pid in tier:
                granted = wants[pid] * ratio
                allocations[pid][resource] = float(granted)
                granted_total += granted
            remaining -= granted_total
    # cache quota: equal split of the content-cache budget
    quota = float(Fraction(cache_capacity_bytes, max(1, len(demands))))
    for pid in allocations:
        allocations[pid]["cache_quota_bytes"] = quota
    caps = dict(capacities)
    caps["cache_quota_bytes"] = float(cache_capacity_bytes)
    return ResourcePlan(epoch=epoch, allocations=allocations, capacities=caps)


@dataclass(frozen=True)
class OffloadTask:
    task_id: str
    cycles: int
    input_bytes: int
    origin: str


def transfer_delay_ms(size_bytes: int, latency_ms: int, bandwidth_kbps: int) -> int:
    """Link delay formula, admitting size 0 (latency-only transfer)."""
    return latency_ms + -(-size_bytes * 8 // bandwidth_kbps)


def offload_decision(task: OffloadTask, edge_capacity: float,
                     cloud_capacity: float, latency_ms: int,
                     bandwidth_kbps: int) -> dict:
    """Pick the strictly cheaper completion time; ties stay Local."""
    local_cost = task.cycles / edge_capacity
    cloud_cost = (task.cycles / cloud_capacity
                  + transfer_delay_ms(task.input_bytes, latency_ms, bandwidth_kbps))
    choice = "Cloud" if cloud_cost < local_cost else "Local"
    return {"task_id": task.task_id, "choice": choice,
            "local_cost_ms": local_cost, "cloud_cost_ms": cloud_cost}


def handover(candidates: list, load_penalty_ms: float) -> str:
    """candidates: (node_id, latency_ms, queue_length); argmin cost, ties
    to the lowest node id."""
    if not candidates:
        raise NoCandidates("empty candidate set")
    return min(candidates,
               key=lambda c: (c[1] + load_penalty_ms * c[2], c[0]))[0]


class LruCache:
    """Byte-budget LRU keyed by asset id; eviction in ascending last-use."""

    def __init__(self, capacity_bytes: int):
        self.capacity = capacity_bytes
        self.entries: dict[str, list] = {}   # asset -> [size, last_used]
        self._tick = 0
        self.hits = 0
        self.misses = 0

    def used_bytes(self) -> int:
        return sum(size for size, _ in self.entries.values())

    def access(self, asset_id: str, size: int):
        """Returns (hit, evicted asset ids, delivery_cost_bytes)."""
        if size > self.capacity:
            raise AssetTooLarge(f"{asset_id} ({size} B > {self.capacity} B)")
        self._tick += 1
        if asset_id in self.entries:
            self.entries[asset_id][1] = self._tick
            self.hits += 1
            return True, [], 0
        evicted = []
        while self.used_bytes() + size > self.capacity:
            victim = min(self.entries, key=lambda a: self.entries[a][1])
            evicted.append(victim)
            del self.entries[victim]
        self.entries[asset_id] = [size, self._tick]
        self.misses += 1
        return False, evicted, size

    def hit_ratio(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0
