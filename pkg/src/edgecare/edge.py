"""Edge robot operations: sensor fusion, emergency monitoring, therapy
session execution and uplink bookkeeping.

The robot fuses everything received in one window [t0, t1) into a single
record (every kind always summarized, count 0 when silent), checks every
arriving frame against the emergency rule set (violations are strict and
bypass all buffering), and drives therapy sessions one behavior-tree tick
per beat.  Therapy updates never abort an in-flight session: they take
effect at the next session boundary.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import bt
from .agents import PatientModel, respond
from .protocol import (PHYSICAL_BOUNDS, SENSOR_KINDS, MEDICAL_KINDS,
                       POSITIVE_RESPONSES, SensorFrame, FusedRecord,
                       EmergencyAlert, TherapyCommand, SessionRecord,
                       STAGE_TREES, to_wire)


class OutOfWindowFrame(Exception):
    pass


class NoActiveSession(Exception):
    pass


class StageTreeMismatch(Exception):
    pass


# --- emergency rules ---------------------------------------------------------

@dataclass(frozen=True)
class EmergencyRule:
    kind: str
    lower: float | None = None
    upper: float | None = None


DEFAULT_EMERGENCY_RULES = (
    EmergencyRule("SpO2", lower=90.0),
    EmergencyRule("Heartbeat", lower=50.0, upper=120.0),
    EmergencyRule("SystolicPressure", lower=80.0, upper=180.0),
    EmergencyRule("BodyTemp", lower=35.0, upper=39.5),
)


def validate_rules(rules) -> list[str]:
    problems = []
    covered = {r.kind for r in rules}
    for required in ("SpO2", "Heartbeat"):
        if required not in covered:
            problems.append(f"rules must cover {required}")
    for r in rules:
        bounds = PHYSICAL_BOUNDS.get(r.kind)
        if bounds is None:
            problems.append(f"{r.kind}: unknown sensor kind")
            continue
        for edge_value in (r.lower, r.upper):
            if edge_value is not None and not bounds.contains(edge_value):
                problems.append(
                    f"{r.kind}: rule bound {edge_value:g} outside {bounds.describe()}")
    return problems


def monitor(frame: SensorFrame, rules, alert_id: str) -> EmergencyAlert | None:
    """Alert iff the frame strictly violates a rule for its kind."""
    for rule in rules:
        if rule.kind != frame.kind:
            continue
        if rule.lower is not None and frame.value < rule.lower:
            cause = {"kind": frame.kind, "value": frame.value,
                     "threshold": rule.lower, "bound": "lower"}
        elif rule.upper is not None and frame.value > rule.upper:
            cause = {"kind": frame.kind, "value": frame.value,
                     "threshold": rule.upper, "bound": "upper"}
        else:
            continue
        return EmergencyAlert(patient_id=frame.patient_id, cause=cause,
                              created_at=frame.t, alert_id=alert_id)
    return None


# --- fusion -------------------------------------------------------------------

def fuse(patient_id: str, frames, interactions, network_info: dict,
         window) -> FusedRecord:
    """Exact per-kind {mean,min,max,count} summaries over one window."""
    t0, t1 = window
    stats = {kind: [0, 0.0, None, None] for kind in SENSOR_KINDS}  # n, sum, mn, mx
    for f in frames:
        if not (t0 <= f.t < t1):
            raise OutOfWindowFrame(f"frame at t={f.t} outside [{t0},{t1})")
        n, total, mn, mx = stats[f.kind]
        stats[f.kind] = [n + 1, total + f.value,
                         f.value if mn is None else min(mn, f.value),
                         f.value if mx is None else max(mx, f.value)]
    vitals, ambient = {}, {}
    for kind in SENSOR_KINDS:
        n, total, mn, mx = stats[kind]
        summary = {"mean": total / n if n else 0.0,
                   "min": mn if mn is not None else 0.0,
                   "max": mx if mx is not None else 0.0,
                   "count": n}
        (vitals if kind in MEDICAL_KINDS else ambient)[kind] = summary
    ordered = sorted(interactions, key=lambda ev: ev.t)
    for ev in ordered:
        if not (t0 <= ev.t < t1):
            raise OutOfWindowFrame(f"interaction at t={ev.t} outside [{t0},{t1})")
    return FusedRecord(patient_id=patient_id,
                       window=(t0, t1),
                       vitals=vitals, ambient=ambient,
                       interactions=tuple(to_wire(ev)["body"] for ev in ordered),
                       network_info=network_info)


# --- sessions ------------------------------------------------------------------

@dataclass
class SessionState:
    session_id: str
    tree: bt.TreeDef
    blackboard: bt.Blackboard
    opened_at: int
    steps: int = 0
    events: list = field(default_factory=list)


@dataclass
class RobotState:
    robot_id: str
    patient_id: str
    active_command: TherapyCommand | None = None
    pending_command: TherapyCommand | None = None
    open_session: SessionState | None = None
    fusion_window_ms: int = 10000
    beat_ms: int = 3000


def apply_update(state: RobotState, cmd: TherapyCommand):
    """Adopt a therapy command: immediately when idle, else at the next
    session boundary.  Raises StageTreeMismatch for an off-catalog pairing."""
    if cmd.tree_id not in STAGE_TREES.get(cmd.stage, ()):
        raise StageTreeMismatch(f"{cmd.tree_id!r} is not a {cmd.stage} program")
    if state.open_session is not None:
        state.pending_command = cmd
    else:
        state.active_command = cmd


def adopt_pending(state: RobotState):
    if state.pending_command is not None:
        state.active_command = state.pending_command
        state.pending_command = None


def open_session(state: RobotState, tree: bt.TreeDef, session_id: str, now: int):
    state.open_session = SessionState(
        session_id=session_id, tree=tree,
        blackboard=bt.Blackboard(session_id=session_id, now=now),
        opened_at=now)


def run_session_step(state: RobotState, responder, now: int):
    """One behavior-tree tick; returns (status, new events, record-or-None).

    On Success/Failure the session closes and a SessionRecord is produced
    with duration = steps * beat_ms exactly.
    """
    session = state.open_session
    if session is None:
        raise NoActiveSession(state.robot_id)
    session.blackboard.now = now
    status, events = bt.tick(session.tree, session.blackboard, responder)
    session.steps += 1
    session.events.extend(events)
    if status == bt.RUNNING:
        return status, events, None
    positive = sum(1 for ev in session.events
                   if ev.patient_response in POSITIVE_RESPONSES)
    total = len(session.events)
    record = SessionRecord(
        session_id=session.session_id, patient_id=state.patient_id,
        tree_id=session.tree.tree_id, stage=session.tree.stage,
        outcome=status, event_count=total,
        positive_fraction=positive / total if total else 0.0,
        duration_ms=session.steps * state.beat_ms, closed_at=now)
    state.open_session = None
    adopt_pending(state)
    return status, events, record


def make_therapy_responder(patient: PatientModel, tree_stage: str,
                           rng: random.Random):
    """Leaf semantics for therapy trees.

    Actions perform the robot behavior, draw the patient's response and
    stash it for following Conditions; 'encourage_retry' actions consume a
    per-leaf budget and restart the tree while budget remains.  Conditions
    expecting 'positive' succeed on Laugh or VerbalReply.
    """
    def responder(node: bt.NodeDef, bb: bt.Blackboard):
        spec = node.action_spec or {}
        if node.kind == "Condition":
            last = bb.data.get("last_response")
            ok = last in POSITIVE_RESPONSES
            return bt.LeafResult(bt.SUCCESS if ok else bt.FAILURE)
        response = respond(patient, tree_stage, rng)
        bb.data["last_response"] = response
        if spec.get("behavior") == "encourage_retry":
            key = f"retry.{node.name}"
            used = bb.data.get(key, 0)
            if used < spec.get("budget", 1):
                bb.data[key] = used + 1
                return bt.LeafResult(bt.RUNNING, response=response, restart=True)
            return bt.LeafResult(bt.FAILURE, response=response)
        return bt.LeafResult(bt.SUCCESS, response=response)

    return responder
