import random

import pytest

from edgecare import bt
from edgecare.agents import PatientModel
from edgecare.edge import (DEFAULT_EMERGENCY_RULES, EmergencyRule,
                           NoActiveSession, OutOfWindowFrame, RobotState,
                           StageTreeMismatch, apply_update, fuse,
                           make_therapy_responder, monitor, open_session,
                           run_session_step, validate_rules)
from edgecare.protocol import (SENSOR_KINDS, SensorFrame, TherapyCommand,
                               validate)
from edgecare.treelib import builtin_trees

from conftest import make_frame


def frame(kind, value, t=100, patient="p1", seq=1):
    return SensorFrame(sensor_id=f"s:{kind}", patient_id=patient, kind=kind,
                       t=t, value=value, seq=seq)


def net_info(sent=0):
    return {"network_type": "5G", "service_data_flow_bytes": sent,
            "communication_quality": 0.9}


# --- fusion --------------------------------------------------------------------

def test_empty_window_is_legal_all_counts_zero():
    record = fuse("p1", [], [], net_info(), (0, 10000))
    for summary in list(record.vitals.values()) + list(record.ambient.values()):
        assert summary["count"] == 0
    assert validate(record) == []


def test_spo2_summary_hand_example():
    frames = [frame("SpO2", v, t=1000 * (i + 1), seq=i + 1)
              for i, v in enumerate((97.0, 95.0, 96.0))]
    record = fuse("p1", frames, [], net_info(), (0, 10000))
    s = record.vitals["SpO2"]
    assert (s["mean"], s["min"], s["max"], s["count"]) == (96.0, 95.0, 97.0, 3)


def test_out_of_window_frame_rejected():
    with pytest.raises(OutOfWindowFrame):
        fuse("p1", [frame("SpO2", 97.0, t=10000)], [], net_info(), (0, 10000))


def test_summaries_match_single_pass_oracle(rng):
    for _ in range(200):
        window = (rng.randrange(0, 5) * 10000, None)
        window = (window[0], window[0] + 10000)
        frames = []
        per_kind = {}
        for seq in range(rng.randint(0, 40)):
            kind = rng.choice(SENSOR_KINDS)
            f = make_frame(rng, kind=kind, t=rng.randrange(*window), seq=seq + 1)
            frames.append(f)
            per_kind.setdefault(kind, []).append(f.value)
        record = fuse("p1", frames, [], net_info(), window)
        for kind, values in per_kind.items():
            s = (record.vitals | record.ambient)[kind]
            assert s["count"] == len(values)
            assert s["min"] == min(values)
            assert s["max"] == max(values)
            assert s["mean"] == pytest.approx(sum(values) / len(values))
        assert validate(record) == []


# --- emergency monitoring ---------------------------------------------------------

def test_spo2_below_threshold_alerts():
    alert = monitor(frame("SpO2", 85.0), DEFAULT_EMERGENCY_RULES, alert_id="a1")
    assert alert is not None
    assert alert.cause == {"kind": "SpO2", "value": 85.0, "threshold": 90.0,
                           "bound": "lower"}
    assert alert.created_at == 100
    assert validate(alert) == []


def test_boundary_value_does_not_alert():
    assert monitor(frame("SpO2", 90.0), DEFAULT_EMERGENCY_RULES, "a1") is None
    assert monitor(frame("Heartbeat", 120.0), DEFAULT_EMERGENCY_RULES, "a1") is None
    assert monitor(frame("Heartbeat", 120.1), DEFAULT_EMERGENCY_RULES, "a1") is not None


def test_unruled_kind_never_alerts():
    assert monitor(frame("AmbientTemp", 55.0), DEFAULT_EMERGENCY_RULES, "a1") is None


def test_rule_set_validation():
    assert validate_rules(DEFAULT_EMERGENCY_RULES) == []
    missing = (EmergencyRule("SpO2", lower=90.0),)
    assert any("Heartbeat" in p for p in validate_rules(missing))
    outside = DEFAULT_EMERGENCY_RULES + (EmergencyRule("SpO2", lower=-5.0),)
    assert any("outside" in p for p in validate_rules(outside))


# --- sessions ------------------------------------------------------------------------

def scripted_patient(always_positive=True):
    return PatientModel(patient_id="p1", stage="Middle",
                        engagement=1.0 if always_positive else 0.0,
                        cooperation_bias=1.0)


def fresh_robot(tree_id="middle_knockknock", stage="Middle"):
    state = RobotState(robot_id="robot:p1", patient_id="p1", beat_ms=3000)
    state.active_command = TherapyCommand(patient_id="p1", stage=stage,
                                          tree_id=tree_id)
    tree = builtin_trees()[tree_id]
    open_session(state, tree, "p1-s1", now=5000)
    return state, tree


def test_cooperative_knockknock_succeeds_in_one_tick():
    state, tree = fresh_robot()
    patient = scripted_patient(True)
    responder = make_therapy_responder(patient, tree.stage, random.Random(3))
    status, events, record = run_session_step(state, responder, now=8000)
    assert status == bt.SUCCESS
    assert record is not None
    assert record.outcome == "Success"
    assert record.duration_ms == 3000  # 1 step x beat
    assert record.event_count == 3     # the three say/punchline actions
    assert record.positive_fraction == 1.0
    assert state.open_session is None


def test_uncooperative_knockknock_fails_after_retry_budget():
    state, tree = fresh_robot()
    patient = scripted_patient(False)  # never positive
    rng = random.Random(3)
    steps = 0
    record = None
    now = 5000
    while record is None:
        now += 3000
        responder = make_therapy_responder(patient, tree.stage, rng)
        status, events, record = run_session_step(state, responder, now=now)
        steps += 1
        assert steps < 20
    assert record.outcome == "Failure"
    assert steps == 4                         # 3 retries consumed, then closed
    assert record.duration_ms == 4 * 3000     # duration = steps x beat
    # each step runs the opening line plus the re-prompt
    assert record.event_count == 8


def test_session_step_without_open_session_raises():
    state = RobotState(robot_id="r", patient_id="p1")
    with pytest.raises(NoActiveSession):
        run_session_step(state, lambda n, b: bt.SUCCESS, now=0)


def test_apply_update_idle_takes_effect_immediately():
    state = RobotState(robot_id="r", patient_id="p1")
    cmd = TherapyCommand(patient_id="p1", stage="Entry", tree_id="entry_spinning")
    apply_update(state, cmd)
    assert state.active_command is cmd
    assert state.pending_command is None


def test_apply_update_mid_session_waits_for_boundary():
    state, tree = fresh_robot()
    original = state.active_command
    cmd = TherapyCommand(patient_id="p1", stage="Basic", tree_id="basic_aladdin")
    apply_update(state, cmd)
    assert state.active_command is original     # session still in flight
    assert state.pending_command is cmd
    patient = scripted_patient(True)
    responder = make_therapy_responder(patient, tree.stage, random.Random(3))
    _, _, record = run_session_step(state, responder, now=8000)
    assert record is not None                   # session ran to completion
    assert state.active_command is cmd          # adopted at the boundary
    assert state.pending_command is None


def test_apply_update_rejects_stage_tree_mismatch():
    state = RobotState(robot_id="r", patient_id="p1")
    bad = TherapyCommand(patient_id="p1", stage="Entry",
                         tree_id="middle_knockknock")
    with pytest.raises(StageTreeMismatch):
        apply_update(state, bad)


def test_therapy_responder_draws_actions_only(rng):
    tree = builtin_trees()["entry_playball"]
    patient = PatientModel(patient_id="p1", stage="Entry", engagement=1.0,
                           cooperation_bias=1.0)
    responder = make_therapy_responder(patient, tree.stage, rng)
    bb = bt.Blackboard(session_id="s", now=0)
    status, events = bt.tick(tree, bb, responder)
    assert status == bt.SUCCESS
    assert all(ev.modality == "Image" for ev in events)
    assert all(ev.patient_response in ("Laugh", "VerbalReply") for ev in events)
