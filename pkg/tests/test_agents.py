import random

from edgecare.agents import (ExpertAgent, ExpertPolicy, PatientModel,
                             ProgressionRule, draw_response, maybe_advance,
                             positive_probability, record_session, respond,
                             stage_match)
from edgecare.protocol import POSITIVE_RESPONSES


def cooperative(stage="Entry"):
    return PatientModel(patient_id="p1", stage=stage, engagement=1.0,
                        cooperation_bias=1.0)


def test_stage_match_table():
    assert stage_match("Entry", "Entry") == 1.0
    assert stage_match("Basic", "Entry") == 0.5    # one above
    assert stage_match("Entry", "Basic") == 0.8    # one below
    assert stage_match("Advanced", "Entry") == 0.2


def test_zero_engagement_is_always_negative():
    patient = PatientModel(patient_id="p1", engagement=0.0, cooperation_bias=1.0)
    rng = random.Random(5)
    for _ in range(200):
        assert draw_response(patient, "Entry", rng) not in POSITIVE_RESPONSES


def test_full_engagement_matched_stage_is_always_positive():
    patient = cooperative()
    rng = random.Random(5)
    for _ in range(200):
        assert draw_response(patient, "Entry", rng) in POSITIVE_RESPONSES


def test_monte_carlo_rate_tracks_closed_form(rng):
    for _ in range(5):
        patient = PatientModel(patient_id="p1",
                               stage="Basic",
                               engagement=round(rng.uniform(0.2, 1.0), 3),
                               cooperation_bias=round(rng.uniform(0.2, 1.0), 3))
        action_stage = rng.choice(("Entry", "Basic", "Middle", "Advanced"))
        p = positive_probability(patient, action_stage)
        draws = 4000
        hits = sum(draw_response(patient, action_stage, rng) in POSITIVE_RESPONSES
                   for _ in range(draws))
        assert abs(hits / draws - p) < 0.03


def test_engagement_updates_and_clamping():
    patient = PatientModel(patient_id="p1", engagement=0.99, cooperation_bias=1.0)
    rng = random.Random(11)
    for _ in range(500):
        respond(patient, "Entry", rng)
        assert 0.0 <= patient.engagement <= 1.0
    low = PatientModel(patient_id="p2", engagement=0.03, cooperation_bias=0.0)
    for _ in range(500):
        respond(low, "Entry", rng)
        assert 0.0 <= low.engagement <= 1.0


def test_progression_rule_fires_on_three_qualifying_sessions():
    rule = ProgressionRule(k_sessions=3, theta=0.6)
    patient = cooperative()
    for fraction in (0.7, 0.9, 0.6):
        record_session(patient, "entry_playball", "Entry", "Success", fraction)
    signal = maybe_advance(patient, rule, now=50000)
    assert signal is not None
    assert signal.from_stage == "Entry"


def test_progression_blocked_by_failure_or_low_fraction():
    rule = ProgressionRule()
    patient = cooperative()
    record_session(patient, "entry_playball", "Entry", "Success", 1.0)
    record_session(patient, "entry_playball", "Entry", "Failure", 1.0)
    record_session(patient, "entry_playball", "Entry", "Success", 1.0)
    assert maybe_advance(patient, rule, 0) is None

    patient2 = cooperative()
    for fraction in (0.8, 0.59, 0.9):  # strict >= theta
        record_session(patient2, "entry_playball", "Entry", "Success", fraction)
    assert maybe_advance(patient2, rule, 0) is None


def test_progression_requires_sessions_at_current_stage():
    rule = ProgressionRule()
    patient = cooperative(stage="Basic")
    record_session(patient, "entry_playball", "Entry", "Success", 1.0)
    record_session(patient, "entry_playball", "Entry", "Success", 1.0)
    record_session(patient, "basic_aladdin", "Basic", "Success", 1.0)
    assert maybe_advance(patient, rule, 0) is None  # mixed-stage window


def test_no_progression_past_the_final_stage():
    rule = ProgressionRule()
    patient = cooperative(stage="Advanced")
    for _ in range(3):
        record_session(patient, "advanced_sarcasm_1", "Advanced", "Success", 1.0)
    assert maybe_advance(patient, rule, 0) is None


def make_signal(stage="Entry"):
    from edgecare.protocol import ProgressSignal
    return ProgressSignal(patient_id="p1", from_stage=stage, t=1000)


def test_auto_advance_issues_one_stage_change():
    agent = ExpertAgent(expert_id="e", policy=ExpertPolicy(mode="AutoAdvance"))
    views = {"p1": {"stage": "Entry", "risk_level": "Low", "alerts": []}}
    recs, deferred = agent.step(views, [make_signal()], now=1000)
    assert deferred == []
    assert len(recs) == 1
    assert recs[0].kind == "TherapyStageChange"
    assert recs[0].payload["target_stage"] == "Basic"
    # duplicate while in flight is dropped
    recs2, _ = agent.step(views, [make_signal()], now=2000)
    assert recs2 == []
    # once applied, the next stage's signal goes through
    agent.note_stage_applied("p1", "Basic")
    views["p1"]["stage"] = "Basic"
    recs3, _ = agent.step(views, [make_signal("Basic")], now=3000)
    assert recs3[0].payload["target_stage"] == "Middle"


def test_stale_signal_dropped_after_stage_moved():
    agent = ExpertAgent(expert_id="e", policy=ExpertPolicy())
    views = {"p1": {"stage": "Middle", "risk_level": "Low", "alerts": []}}
    recs, deferred = agent.step(views, [make_signal("Entry")], now=0)
    assert recs == [] and deferred == []


def test_conservative_defers_until_risk_low():
    agent = ExpertAgent(expert_id="e", policy=ExpertPolicy(mode="Conservative"))
    views = {"p1": {"stage": "Entry", "risk_level": "High", "alerts": []}}
    recs, deferred = agent.step(views, [make_signal()], now=0)
    assert recs == []
    assert len(deferred) == 1
    views["p1"]["risk_level"] = "Low"
    recs2, deferred2 = agent.step(views, deferred, now=1000)
    assert len(recs2) == 1 and deferred2 == []


def test_acks_fire_after_the_delay_and_only_once():
    agent = ExpertAgent(expert_id="e", policy=ExpertPolicy(ack_delay_ms=5000))
    views = {"p1": {"stage": "Entry", "risk_level": "Critical",
                    "alerts": [("a1", 1000)]}}
    early, _ = agent.step(views, [], now=3000)
    assert early == []
    due, _ = agent.step(views, [], now=6000)
    assert len(due) == 1
    assert due[0].kind == "EmergencyAck"
    assert due[0].payload["alert_id"] == "a1"
    again, _ = agent.step(views, [], now=7000)
    assert again == []


def test_live_mode_disables_steering_but_keeps_acks():
    agent = ExpertAgent(expert_id="e", policy=ExpertPolicy(ack_delay_ms=100),
                        steer_enabled=False)
    views = {"p1": {"stage": "Entry", "risk_level": "Low",
                    "alerts": [("a1", 0)]}}
    recs, _ = agent.step(views, [make_signal()], now=500)
    assert [r.kind for r in recs] == ["EmergencyAck"]
