"""Simulated patient agents and the scripted expert policy.

The patient response model is a two-factor Bernoulli: the probability of a
positive response to a therapy action is

    p = engagement * cooperation_bias * match(action_stage, patient_stage)

where match is 1.0 for the patient's own stage, 0.5 one stage above, 0.8
one stage below and 0.2 otherwise.  Positive draws split Laugh 0.6 /
VerbalReply 0.4; negative draws split NoResponse 0.8 / Withdrawal 0.2.
Laugh and VerbalReply nudge engagement up by 0.02, Withdrawal drops it by
0.05, always clamped to [0, 1].

Patients never change their own therapy stage: progression is reported as
a signal and only an applied expert recommendation moves the stage.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .protocol import (ExpertRecommendation, ProgressSignal, stage_index,
                       next_stage)

ENGAGEMENT_GAIN = 0.02
WITHDRAWAL_LOSS = 0.05
P_LAUGH_GIVEN_POSITIVE = 0.6
P_NO_RESPONSE_GIVEN_NEGATIVE = 0.8


@dataclass
class PatientModel:
    patient_id: str
    stage: str = "Entry"
    engagement: float = 0.7
    cooperation_bias: float = 0.8
    # (tree_id, stage, outcome, positive-response fraction), oldest first
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class ProgressionRule:
    k_sessions: int = 3
    theta: float = 0.6


@dataclass(frozen=True)
class ExpertPolicy:
    mode: str = "AutoAdvance"          # AutoAdvance | Conservative
    ack_delay_ms: int = 5000


def stage_match(action_stage: str, patient_stage: str) -> float:
    gap = stage_index(action_stage) - stage_index(patient_stage)
    if gap == 0:
        return 1.0
    if gap == 1:
        return 0.5
    if gap == -1:
        return 0.8
    return 0.2


def positive_probability(patient: PatientModel, action_stage: str) -> float:
    return patient.engagement * patient.cooperation_bias * \
        stage_match(action_stage, patient.stage)


def draw_response(patient: PatientModel, action_stage: str,
                  rng: random.Random) -> str:
    """Pure draw from the response distribution; no state update."""
    p = positive_probability(patient, action_stage)
    if rng.random() < p:
        return "Laugh" if rng.random() < P_LAUGH_GIVEN_POSITIVE else "VerbalReply"
    return "NoResponse" if rng.random() < P_NO_RESPONSE_GIVEN_NEGATIVE else "Withdrawal"


def respond(patient: PatientModel, action_stage: str, rng: random.Random) -> str:
    """Draw a response and apply the engagement update."""
    response = draw_response(patient, action_stage, rng)
    if response in ("Laugh", "VerbalReply"):
        patient.engagement = min(1.0, patient.engagement + ENGAGEMENT_GAIN)
    elif response == "Withdrawal":
        patient.engagement = max(0.0, patient.engagement - WITHDRAWAL_LOSS)
    return response


def record_session(patient: PatientModel, tree_id: str, stage: str,
                   outcome: str, positive_fraction: float):
    patient.history.append((tree_id, stage, outcome, positive_fraction))


def maybe_advance(patient: PatientModel, rule: ProgressionRule,
                  now: int) -> ProgressSignal | None:
    """Mastery signal: last K sessions at the current stage all succeeded
    with positive-response fraction >= theta.  The model itself never moves
    stage; the signal is consumed by the expert policy.
    """
    if next_stage(patient.stage) is None:
        return None
    recent = patient.history[-rule.k_sessions:]
    if len(recent) < rule.k_sessions:
        return None
    for _tree, stage, outcome, fraction in recent:
        if stage != patient.stage or outcome != "Success" or fraction < rule.theta:
            return None
    return ProgressSignal(patient_id=patient.patient_id,
                          from_stage=patient.stage, t=now)


@dataclass
class ExpertAgent:
    """Scripted expert replacing the human console in headless runs."""

    expert_id: str
    policy: ExpertPolicy
    steer_enabled: bool = True          # serve mode hands steering to humans
    # patient -> target stage of an issued, not-yet-applied change
    _in_flight: dict = field(default_factory=dict)
    _acked: set = field(default_factory=set)

    def note_stage_applied(self, patient_id: str, stage: str):
        if self._in_flight.get(patient_id) == stage:
            del self._in_flight[patient_id]

    def step(self, views: dict, signals: list, now: int):
        """One policy evaluation over dossier views and pending signals.

        views: patient_id -> {stage, risk_level, alerts: [(alert_id, notified_at)]}
        Returns (recommendations, deferred signals).  Acks go out for every
        outstanding alert whose notification is at least ack_delay_ms old;
        Conservative mode defers advancement signals while risk > Low so
        they are re-evaluated on the next step.
        """
        recs: list[ExpertRecommendation] = []
        deferred: list = []
        for pid, view in views.items():
            for alert_id, notified_at in view.get("alerts", ()):
                if alert_id in self._acked:
                    continue
                if now - notified_at >= self.policy.ack_delay_ms:
                    self._acked.add(alert_id)
                    recs.append(ExpertRecommendation(
                        expert_id=self.expert_id, patient_id=pid,
                        kind="EmergencyAck", payload={"alert_id": alert_id},
                        issued_at=now))
        if not self.steer_enabled:
            return recs, list(signals)
        for signal in signals:
            view = views.get(signal.patient_id)
            if view is None or view["stage"] != signal.from_stage:
                continue  # stale: stage moved since the signal fired
            if signal.patient_id in self._in_flight:
                continue  # duplicate while a change is being applied
            target = next_stage(signal.from_stage)
            if target is None:
                continue
            if self.policy.mode == "Conservative" and view["risk_level"] != "Low":
                deferred.append(signal)
                continue
            self._in_flight[signal.patient_id] = target
            recs.append(ExpertRecommendation(
                expert_id=self.expert_id, patient_id=signal.patient_id,
                kind="TherapyStageChange", payload={"target_stage": target},
                issued_at=now))
        return recs, deferred
