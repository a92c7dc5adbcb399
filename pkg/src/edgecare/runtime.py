"""Scenario wiring: builds kernel nodes from a resolved config and runs them.

Topology per patient: eleven sensor nodes feed a co-located robot node with
zero-delay frames; the robot talks to the two cloud nodes over the
edge-cloud link.  The scripted expert is co-located with the cognitive
data server (zero-delay exchanges).  Domain milestones (risk changes,
session closures, stage changes, cache accesses, resource plans, feedback)
are logged as zero-delay `note.*` events so the trace alone reproduces
every metric.

External steering (the HTTP gateway) enters through the kernel inbox and is
applied in inbox order one virtual millisecond after injection.
"""

from __future__ import annotations

import json
import threading

from . import edge
from .agents import (ExpertAgent, ExpertPolicy, PatientModel, ProgressionRule,
                     maybe_advance, record_session)
from .cloud import (CognitiveDataServer, LruCache, OffloadTask, RiskPolicy,
                    RiskRule, StaleAck, UnknownPatient, allocate,
                    offload_decision, AssetTooLarge)
from .kernel import LinkModel, Simulator
from .protocol import (SENSOR_KINDS, TherapyCommand, default_tree_for,
                       encoded_size, from_wire, to_wire)
from .sensors import AnomalyScript, SensorProfile, SensorState, default_profiles, generate_frame
from .treelib import builtin_trees

DATA = "cloud:data"
RTM = "cloud:rtm"
EXPERT = "expert:1"

# deliveries carrying real bytes over the edge-cloud link
LINK_KINDS = ("fused_record", "session_record", "alert", "progress_signal",
              "command", "asset_request", "asset")


def _wire_bytes(payload) -> int:
    return len(json.dumps(payload, sort_keys=True, separators=(",", ":")))


class SensorNode:
    def __init__(self, rt: "SimRuntime", patient_id: str, profile: SensorProfile,
                 scripts: list):
        self.rt = rt
        self.node_id = f"sensor:{patient_id}:{profile.kind}"
        self.robot_id = f"robot:{patient_id}"
        self.state = SensorState(sensor_id=self.node_id, patient_id=patient_id,
                                 profile=profile, scripts=scripts)

    def start(self):
        self.rt.sim.schedule(0, self.node_id, "sample")

    def handle(self, sim: Simulator, event):
        if event.kind != "sample":
            return
        frame = generate_frame(self.state, sim.clock, sim.rng(self.node_id))
        sim.schedule(sim.clock, self.robot_id, "frame", to_wire(frame))
        nxt = sim.clock + self.state.profile.sample_period_ms
        if nxt <= self.rt.duration_ms:
            sim.schedule(nxt, self.node_id, "sample")


class RobotNode:
    def __init__(self, rt: "SimRuntime", patient_cfg: dict):
        self.rt = rt
        pid = patient_cfg["patient_id"]
        self.patient_id = pid
        self.node_id = f"robot:{pid}"
        self.patient_node_id = f"patient:{pid}"
        self.patient = PatientModel(patient_id=pid, stage=patient_cfg["stage"],
                                    engagement=patient_cfg["engagement"],
                                    cooperation_bias=patient_cfg["cooperation_bias"])
        e = rt.cfg["edge"]
        self.state = edge.RobotState(robot_id=self.node_id, patient_id=pid,
                                     fusion_window_ms=e["fusion_window_ms"],
                                     beat_ms=e["beat_ms"])
        self.state.active_command = TherapyCommand(
            patient_id=pid, stage=patient_cfg["stage"],
            tree_id=default_tree_for(patient_cfg["stage"]))
        self.rules = tuple(edge.EmergencyRule(r["kind"], r.get("lower"), r.get("upper"))
                           for r in e["emergency_rules"])
        self.progression = ProgressionRule(k_sessions=rt.cfg["expert"]["k_sessions"],
                                           theta=rt.cfg["expert"]["theta"])
        self.window_frames: list = []
        self.window_interactions: list = []
        self.uplink_buffer: list = []
        self.bytes_this_window = 0
        self.session_count = 0
        self.alert_count = 0

    def start(self):
        sim = self.rt.sim
        e = self.rt.cfg["edge"]
        if e["fusion_window_ms"] <= self.rt.duration_ms:
            sim.schedule(e["fusion_window_ms"], self.node_id, "window_close")
        if e["first_session_ms"] <= self.rt.duration_ms:
            sim.schedule(e["first_session_ms"], self.node_id, "session_start")

    # -- uplink helpers ------------------------------------------------------

    def _send(self, to: str, kind: str, msg) -> int:
        payload = to_wire(msg)
        size = encoded_size(msg)
        arrival = self.rt.deliver(self.node_id, to, kind, payload, size)
        self.bytes_this_window += size
        return arrival

    # -- event handling --------------------------------------------------------

    def handle(self, sim: Simulator, event):
        if event.kind == "frame":
            self._on_frame(sim, from_wire(event.payload))
        elif event.kind == "window_close":
            self._on_window_close(sim)
        elif event.kind == "session_start":
            self._on_session_start(sim)
        elif event.kind == "beat":
            self._on_beat(sim)
        elif event.kind == "command":
            self._on_command(sim, from_wire(event.payload["msg"]))
        elif event.kind == "asset":
            pass  # prefetched therapy content; sessions are not gated on it

    def _on_frame(self, sim, frame):
        self.window_frames.append(frame)
        alert = edge.monitor(frame, self.rules,
                             alert_id=f"{self.patient_id}-a{self.alert_count + 1}")
        if alert is None:
            return
        self.alert_count += 1
        # emergencies bypass the fusion buffer: same-tick uplink
        sim.note(self.node_id, "alert_created", to_wire(alert)["body"])
        self._send(DATA, "alert", alert)

    def _on_window_close(self, sim):
        w = self.state.fusion_window_ms
        t1 = sim.clock
        t0 = t1 - w
        link = self.rt.link
        quality = 1.0 - min(1.0, link.latency_ms / self.rt.cfg["metrics"]["latency_ref_ms"])
        net_info = {"network_type": link.network_type,
                    "service_data_flow_bytes": self.bytes_this_window,
                    "communication_quality": quality}
        self.bytes_this_window = 0
        record = edge.fuse(self.patient_id, self.window_frames,
                           self.window_interactions, net_info, (t0, t1))
        self.window_frames = []
        self.window_interactions = []
        self.uplink_buffer.append(record)
        self._flush(sim)
        if t1 + w <= self.rt.duration_ms:
            sim.schedule(t1 + w, self.node_id, "window_close")

    def _flush(self, sim):
        for msg in self.uplink_buffer:
            kind = "fused_record" if msg.__class__.__name__ == "FusedRecord" \
                else "session_record"
            self._send(DATA, kind, msg)
        self.uplink_buffer = []

    def _on_session_start(self, sim):
        if self.state.open_session is not None:
            return
        cmd = self.state.active_command
        tree = self.rt.catalog[cmd.tree_id]
        self.session_count += 1
        session_id = f"{self.patient_id}-s{self.session_count}"
        edge.open_session(self.state, tree, session_id, sim.clock)
        sim.note(self.node_id, "session_opened",
                 {"session_id": session_id, "tree_id": tree.tree_id,
                  "stage": tree.stage, "patient_id": self.patient_id})
        # prefetch stage content through the cloud cache (non-gating)
        request = {"asset_id": tree.tree_id, "patient_id": self.patient_id,
                   "size_bytes": self.rt.cfg["edge"]["asset_size_bytes"]}
        size = _wire_bytes(request)
        self.rt.deliver(self.node_id, RTM, "asset_request", request, size)
        self.bytes_this_window += size
        sim.schedule(sim.clock + self.state.beat_ms, self.node_id, "beat")

    def _on_beat(self, sim):
        session = self.state.open_session
        if session is None:
            return
        responder = edge.make_therapy_responder(
            self.patient, session.tree.stage, sim.rng(self.patient_node_id))
        pending = self.state.pending_command
        status, events, record = edge.run_session_step(self.state, responder, sim.clock)
        self.window_interactions.extend(events)
        if record is None:
            sim.schedule(sim.clock + self.state.beat_ms, self.node_id, "beat")
            return
        if pending is not None and self.state.active_command is pending:
            self._adopt(sim, pending)  # boundary adoption done by the step
        sim.note(self.node_id, "session_closed", to_wire(record)["body"])
        self.uplink_buffer.append(record)
        record_session(self.patient, record.tree_id, record.stage,
                       record.outcome, record.positive_fraction)
        signal = maybe_advance(self.patient, self.progression, sim.clock)
        if signal is not None:
            # progression is control-plane traffic: uplinked immediately
            self._send(DATA, "progress_signal", signal)
        gap = self.rt.cfg["edge"]["session_gap_ms"]
        if sim.clock + gap <= self.rt.duration_ms:
            sim.schedule(sim.clock + gap, self.node_id, "session_start")

    def _on_command(self, sim, cmd: TherapyCommand):
        was_idle = self.state.open_session is None
        edge.apply_update(self.state, cmd)
        if was_idle:
            self._adopt(sim, cmd)

    def _adopt(self, sim, cmd: TherapyCommand):
        if cmd.stage != self.patient.stage:
            self.patient.stage = cmd.stage
            sim.note(self.node_id, "stage_change",
                     {"patient_id": self.patient_id, "stage": cmd.stage,
                      "tree_id": cmd.tree_id})


class DataServerNode:
    def __init__(self, rt: "SimRuntime"):
        self.rt = rt
        c = rt.cfg["cloud"]
        rules = tuple(RiskRule(r["kind"], r.get("lower"), r.get("upper"), r["weight"])
                      for r in c["risk_rules"])
        self.server = CognitiveDataServer(
            policy=RiskPolicy(rules=rules, buckets=dict(c["risk_buckets"])),
            dossier_depth=c["dossier_depth"])
        self.feedback_log: list = []
        self.task_count = 0

    def handle(self, sim: Simulator, event):
        kind = event.kind
        if kind == "fused_record":
            self._on_record(sim, event.payload)
        elif kind == "session_record":
            msg = from_wire(event.payload["msg"])
            self.server.record_session(msg.patient_id, msg.outcome,
                                       msg.positive_fraction)
        elif kind == "alert":
            self._on_alert(sim, from_wire(event.payload["msg"]))
        elif kind == "progress_signal":
            self.server.add_signal(from_wire(event.payload["msg"]))
            sim.schedule(sim.clock, EXPERT, "expert_review")
        elif kind == "recommendation":
            self._on_recommendation(sim, from_wire(event.payload))
        elif kind == "feedback":
            self.feedback_log.append(event.payload)

    def _on_record(self, sim, payload):
        record = from_wire(payload["msg"])
        risk, changed = self.server.ingest(record, sim.clock)
        if changed:
            self._announce_risk(sim, risk)
        self.task_count += 1
        task = {"task_id": f"task-{record.patient_id}-{self.task_count}",
                "cycles": self.rt.cfg["cloud"]["offload"]["task_cycles"],
                "input_bytes": payload["size_bytes"],
                "origin": payload["from"]}
        sim.schedule(sim.clock, RTM, "analysis_task", task)

    def _announce_risk(self, sim, risk):
        sim.note(DATA, "risk_change", to_wire(risk)["body"])
        sim.schedule(sim.clock, RTM, "risk_sync",
                     {"patient_id": risk.patient_id, "level": risk.level})
        sim.schedule(sim.clock, EXPERT, "expert_review")

    def _on_alert(self, sim, alert):
        d = self.server.dossier(alert.patient_id)
        previous = d.risk_level()
        self.server.add_alert(alert, sim.clock)
        if d.records:
            from .cloud import assess_risk
            d.current_risk = assess_risk(d.records[-1], self.server.policy,
                                         d.active_alerts(), sim.clock)
        else:
            from .protocol import RiskAssessment
            c = alert.cause
            sign = ">=" if c["bound"] == "lower" else "<="
            d.current_risk = RiskAssessment(
                patient_id=alert.patient_id, level="Critical", score=0,
                factors=((c["kind"], c["value"],
                          f"unacked alert: {sign} {c['threshold']:g}"),),
                t=sim.clock)
        if d.risk_level() != previous:
            self._announce_risk(sim, d.current_risk)
        else:
            sim.schedule(sim.clock, EXPERT, "expert_review")

    def _on_recommendation(self, sim, rec):
        try:
            outcome = self.server.route_recommendation(rec, sim.clock)
        except StaleAck as err:
            sim.note(DATA, "recommendation_rejected",
                     {"reason": "StaleAck", "alert_id": str(err),
                      "patient_id": rec.patient_id})
            return
        except UnknownPatient as err:
            sim.note(DATA, "recommendation_rejected",
                     {"reason": "UnknownPatient", "patient_id": str(err)})
            return
        sim.note(DATA, "recommendation_applied", to_wire(rec)["body"])
        d = self.server.dossier(rec.patient_id)
        if outcome["command"] is not None:
            cmd = outcome["command"]
            payload = to_wire(cmd)
            self.rt.deliver(DATA, f"robot:{cmd.patient_id}", "command",
                            payload, encoded_size(cmd))
            sim.note(DATA, "command_routed", to_wire(cmd)["body"])
            sim.schedule(sim.clock, EXPERT, "stage_applied",
                         {"patient_id": cmd.patient_id, "stage": cmd.stage})
        if outcome["cleared"] is not None:
            sim.note(DATA, "alert_cleared",
                     {"alert_id": outcome["cleared"], "patient_id": rec.patient_id})
            if d.current_risk is not None:
                self._announce_risk(sim, d.current_risk)


class ExpertNode:
    def __init__(self, rt: "SimRuntime", live: bool = False):
        self.rt = rt
        x = rt.cfg["expert"]
        delay = x["live_ack_timeout_ms"] if live else x["ack_delay_ms"]
        self.agent = ExpertAgent(expert_id=EXPERT,
                                 policy=ExpertPolicy(mode=x["mode"], ack_delay_ms=delay),
                                 steer_enabled=not live)
        self._scheduled_acks: set = set()

    def _views(self) -> dict:
        dossiers = self.rt.data_node.server.dossiers
        views = {}
        for pid in sorted(dossiers):
            d = dossiers[pid]
            views[pid] = {
                "stage": d.stage,
                "risk_level": d.risk_level(),
                "alerts": [(aid, notified) for aid, (alert, notified)
                           in sorted(d.outstanding_alerts.items())],
            }
        return views

    def handle(self, sim: Simulator, event):
        if event.kind == "stage_applied":
            self.agent.note_stage_applied(event.payload["patient_id"],
                                          event.payload["stage"])
            return
        if event.kind not in ("expert_review", "ack_due"):
            return
        views = self._views()
        signals = []
        for pid in sorted(self.rt.data_node.server.dossiers):
            signals.extend(self.rt.data_node.server.consume_signals(pid))
        for pid, view in views.items():
            for alert_id, notified_at in view["alerts"]:
                if alert_id not in self._scheduled_acks:
                    self._scheduled_acks.add(alert_id)
                    sim.schedule(notified_at + self.agent.policy.ack_delay_ms,
                                 EXPERT, "ack_due", {"alert_id": alert_id})
        recs, deferred = self.agent.step(views, signals, sim.clock)
        for signal in deferred:
            self.rt.data_node.server.add_signal(signal)
        for rec in recs:
            sim.schedule(sim.clock, DATA, "recommendation", to_wire(rec))


class ResourceNode:
    def __init__(self, rt: "SimRuntime"):
        self.rt = rt
        c = rt.cfg["cloud"]
        self.cache = LruCache(c["cache_capacity_bytes"])
        self.risk_levels: dict[str, str] = {
            p["patient_id"]: "Low" for p in rt.cfg["patients"]}
        self.demands = {p["patient_id"]: dict(p["demands"])
                        for p in rt.cfg["patients"]}
        self.cycles = {"Local": 0, "Cloud": 0}
        self.epoch_ms = c["epoch_ms"]

    def start(self):
        self.rt.sim.schedule(0, RTM, "epoch")

    def handle(self, sim: Simulator, event):
        kind = event.kind
        if kind == "risk_sync":
            self.risk_levels[event.payload["patient_id"]] = event.payload["level"]
        elif kind == "analysis_task":
            self._on_task(sim, event.payload)
        elif kind == "asset_request":
            self._on_asset(sim, event.payload)
        elif kind == "epoch":
            self._on_epoch(sim)

    def _on_task(self, sim, payload):
        o = self.rt.cfg["cloud"]["offload"]
        task = OffloadTask(task_id=payload["task_id"], cycles=payload["cycles"],
                           input_bytes=payload["input_bytes"],
                           origin=payload["origin"])
        link = self.rt.link
        decision = offload_decision(task, o["edge_capacity"], o["cloud_capacity"],
                                    link.latency_ms, link.bandwidth_kbps)
        self.cycles[decision["choice"]] += task.cycles
        decision["cycles"] = task.cycles
        sim.note(RTM, "offload", decision)

    def _on_asset(self, sim, payload):
        msg = payload["msg"]
        asset_id, size = msg["asset_id"], msg["size_bytes"]
        try:
            hit, evicted, cost = self.cache.access(asset_id, size)
            note = {"asset_id": asset_id, "hit": hit, "evicted": evicted,
                    "delivery_cost_bytes": cost}
        except AssetTooLarge:
            note = {"asset_id": asset_id, "hit": False, "evicted": [],
                    "delivery_cost_bytes": size, "bypass": True}
        sim.note(RTM, "cache_access", note)
        self.rt.deliver(RTM, payload["from"], "asset",
                        {"asset_id": asset_id}, size)

    def _on_epoch(self, sim):
        t = sim.clock
        if t > 0:
            start = t - self.epoch_ms
            bytes_moved = self.rt.epoch_bytes.get(start // self.epoch_ms, 0)
            denominator = self.rt.link.bandwidth_kbps * self.epoch_ms
            feedback = {"epoch_start": start,
                        "bytes_moved": bytes_moved,
                        "utilization": bytes_moved * 8 / denominator,
                        "cache_hit_ratio": self.cache.hit_ratio(),
                        "compute_cycles": dict(self.cycles)}
            sim.note(RTM, "feedback", feedback)
            sim.schedule(t, DATA, "feedback", feedback)
        if t < self.rt.duration_ms:
            plan = allocate(self.demands, self.rt.cfg["cloud"]["capacities"],
                            self.risk_levels, epoch=t,
                            cache_capacity_bytes=self.rt.cfg["cloud"]["cache_capacity_bytes"])
            sim.note(RTM, "resource_plan",
                     {"body": to_wire(plan)["body"], "demands": self.demands})
            nxt = t + self.epoch_ms
            if nxt <= self.rt.duration_ms:
                sim.schedule(nxt, RTM, "epoch")


class SimRuntime:
    """One configured run: nodes, links, trace and published snapshots."""

    def __init__(self, cfg: dict, trace_sink=None, live: bool = False):
        self.cfg = cfg
        self.duration_ms = cfg["duration_ms"]
        self.sim = Simulator(seed=cfg["seed"], trace_sink=trace_sink)
        self.catalog = builtin_trees()
        lk = cfg["links"]["edge_cloud"]
        self.link = LinkModel(latency_ms=lk["latency_ms"],
                              bandwidth_kbps=lk["bandwidth_kbps"],
                              name="edge-cloud", network_type=lk["network_type"])
        self.epoch_bytes: dict[int, int] = {}
        self._lock = threading.Lock()
        self._snapshot: dict = {"roster": [], "alerts": [], "telemetry": {},
                                "trace_len": 0, "clock": 0}

        self.data_node = DataServerNode(self)
        self.rtm_node = ResourceNode(self)
        self.expert_node = ExpertNode(self, live=live)
        self.sim.add_node(DATA, self.data_node.handle)
        self.sim.add_node(RTM, self.rtm_node.handle)
        self.sim.add_node(EXPERT, self.expert_node.handle)

        profiles = default_profiles()
        overrides = cfg["sensors"]["profiles"]
        self.robots: dict[str, RobotNode] = {}
        self.sensor_nodes: list[SensorNode] = []
        for patient_cfg in cfg["patients"]:
            pid = patient_cfg["patient_id"]
            robot = RobotNode(self, patient_cfg)
            self.robots[pid] = robot
            self.sim.add_node(robot.node_id, robot.handle)
            self.sim.add_node(robot.patient_node_id, lambda sim, ev: None)
            self.sim.add_link(robot.node_id, DATA, self.link)
            self.sim.add_link(robot.node_id, RTM, self.link)
            self.data_node.server.register(pid, patient_cfg["stage"])
            scripts = [AnomalyScript(kind=s["kind"], onset=s["onset_ms"],
                                     duration_ms=s["duration_ms"], delta=s["delta"])
                       for s in cfg["sensors"]["anomalies"].get(pid, [])]
            for kind in SENSOR_KINDS:
                profile = profiles[kind]
                if kind in overrides:
                    merged = {**profile.__dict__, **overrides[kind]}
                    profile = SensorProfile(**merged)
                sensor = SensorNode(self, pid, profile,
                                    [s for s in scripts if s.kind == kind])
                self.sensor_nodes.append(sensor)
                self.sim.add_node(sensor.node_id, sensor.handle)

    def deliver(self, from_node: str, to: str, kind: str, payload, size: int) -> int:
        arrival = self.sim.deliver(from_node, to, kind, payload, size)
        epoch = arrival // self.cfg["cloud"]["epoch_ms"]
        self.epoch_bytes[epoch] = self.epoch_bytes.get(epoch, 0) + size
        return arrival

    def _emit_run_config(self):
        m = self.cfg["metrics"]
        self.sim.note("gateway", "run_config", {
            "seed": self.cfg["seed"],
            "duration_ms": self.duration_ms,
            "epoch_ms": self.cfg["cloud"]["epoch_ms"],
            "bandwidth_kbps": self.link.bandwidth_kbps,
            "latency_ms": self.link.latency_ms,
            "qoe_w1": m["qoe_w1"], "qoe_w2": m["qoe_w2"],
            "latency_ref_ms": m["latency_ref_ms"],
            "patients": [{"patient_id": p["patient_id"], "stage": p["stage"],
                          "demands": p["demands"]}
                         for p in self.cfg["patients"]],
        })

    def start(self):
        self._emit_run_config()
        for sensor in self.sensor_nodes:
            sensor.start()
        for robot in self.robots.values():
            robot.start()
        self.rtm_node.start()
        self.publish()

    def run(self, pace: float | None = None):
        self.start()
        if pace is None:
            summary = self.sim.run_until(self.duration_ms)
            self.publish()
            return summary
        # live mode: step in small horizons so snapshots stay fresh
        step = 1000
        horizon = 0
        while horizon < self.duration_ms and not self.sim.stopping:
            horizon = min(horizon + step, self.duration_ms)
            summary = self.sim.run_until(horizon, pace=pace)
            self.publish()
        return summary

    def stop(self):
        self.sim.stopping = True

    # -- published snapshots (copy-on-publish for concurrent readers) --------

    def publish(self):
        roster = []
        alerts = []
        telemetry = {}
        for pid in sorted(self.robots):
            robot = self.robots[pid]
            d = self.data_node.server.dossiers[pid]
            fractions = list(d.recent_fractions)
            roster.append({
                "patient_id": pid,
                "stage": robot.patient.stage,
                "risk_level": d.risk_level(),
                "risk_score": d.current_risk.score if d.current_risk else 0,
                "engagement_proxy": (sum(fractions) / len(fractions)
                                     if fractions else 0.0),
                "outstanding_alerts": len(d.outstanding_alerts),
                "sessions": dict(d.session_outcomes),
            })
            for alert_id, (alert, notified) in sorted(d.outstanding_alerts.items()):
                alerts.append({"alert_id": alert_id, "patient_id": pid,
                               "cause": alert.cause, "created_at": alert.created_at,
                               "notified_at": notified})
            telemetry[pid] = [
                {"window": list(r.window), "vitals": r.vitals, "ambient": r.ambient,
                 "network_info": r.network_info}
                for r in list(d.records)[-30:]]
        snapshot = {"roster": roster, "alerts": alerts, "telemetry": telemetry,
                    "trace_len": len(self.sim.trace_lines),
                    "clock": self.sim.clock}
        with self._lock:
            self._snapshot = snapshot

    def snapshot(self) -> dict:
        with self._lock:
            return self._snapshot

    def inject_recommendation(self, rec_wire: dict):
        self.sim.inbox.put((DATA, "recommendation", rec_wire))
