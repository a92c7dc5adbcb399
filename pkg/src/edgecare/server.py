"""HTTP/JSON + server-push API for live runs.

The kernel loop runs in a background thread with wall-clock pacing; the API
reads published snapshots and tails the trace for the event stream, and
writes only through the kernel inbox (recommendations apply in inbox order,
one virtual millisecond after injection).  Bodies are the canonical JSON
wire encoding.
"""

from __future__ import annotations

import asyncio
import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from . import protocol
from .metrics import metrics_from_lines
from .runtime import SimRuntime

# trace kinds forwarded on /api/stream
STREAM_KINDS = {
    "alert": "alert",
    "note.risk_change": "risk_change",
    "note.session_closed": "session_closed",
    "note.stage_change": "stage_change",
    "note.command_routed": "command_routed",
    "note.alert_cleared": "alert_cleared",
}


def make_app(rt: SimRuntime, pace: float = 10.0,
             console_dir: str | None = None) -> FastAPI:
    worker = threading.Thread(target=lambda: rt.run(pace=pace), daemon=True)

    @asynccontextmanager
    async def lifespan(app):
        worker.start()
        yield
        rt.stop()

    app = FastAPI(title="edgecare gateway", lifespan=lifespan)

    if console_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/console", StaticFiles(directory=console_dir, html=True),
                  name="console")

    @app.get("/api/config")
    def config():
        from .protocol import RISK_LEVELS, STAGES, STAGE_TREES
        return {
            "stages": STAGES,
            "risk_levels": RISK_LEVELS,
            "stage_trees": STAGE_TREES,
            "emergency_rules": rt.cfg["edge"]["emergency_rules"],
            "patients": [p["patient_id"] for p in rt.cfg["patients"]],
            "duration_ms": rt.cfg["duration_ms"],
        }

    @app.get("/api/patients")
    def patients():
        return rt.snapshot()["roster"]

    @app.get("/api/patients/{patient_id}/telemetry")
    def telemetry(patient_id: str, window: int = 30):
        snap = rt.snapshot()
        if patient_id not in snap["telemetry"]:
            return JSONResponse({"error": "unknown patient"}, status_code=404)
        return snap["telemetry"][patient_id][-window:]

    @app.get("/api/alerts")
    def alerts():
        return rt.snapshot()["alerts"]

    @app.get("/api/metrics")
    def metrics():
        lines = rt.sim.trace_lines
        return metrics_from_lines(list(lines[:len(lines)]))

    @app.post("/api/recommendations")
    async def recommend(request: Request):
        raw = await request.body()
        try:
            rec = protocol.decode(raw)
        except protocol.DecodeError as err:
            return JSONResponse({"status": "rejected",
                                 "violations": [str(err)]}, status_code=400)
        if not isinstance(rec, protocol.ExpertRecommendation):
            return JSONResponse({"status": "rejected",
                                 "violations": ["body must be an expert_recommendation"]},
                                status_code=400)
        violations = protocol.validate(rec)
        if violations:
            return JSONResponse({"status": "rejected", "violations": violations},
                                status_code=400)
        snap = rt.snapshot()
        known = {row["patient_id"] for row in snap["roster"]}
        if rec.patient_id not in known:
            return JSONResponse({"status": "rejected",
                                 "violations": ["unknown patient"]}, status_code=404)
        if rec.kind == "EmergencyAck":
            outstanding = {a["alert_id"] for a in snap["alerts"]}
            if rec.payload["alert_id"] not in outstanding:
                return JSONResponse({"status": "rejected",
                                     "violations": ["StaleAck: alert already cleared"]},
                                    status_code=409)
        rt.inject_recommendation(protocol.to_wire(rec))
        return {"status": "accepted", "applies_at": rt.snapshot()["clock"] + 1}

    @app.get("/api/stream")
    async def stream(request: Request):
        async def feed():
            import json as _json
            cursor = 0
            idle = 0.0
            while True:
                if await request.is_disconnected():
                    return
                lines = rt.sim.trace_lines
                end = len(lines)
                emitted = False
                for raw in lines[cursor:end]:
                    ev = _json.loads(raw)
                    name = STREAM_KINDS.get(ev["kind"])
                    if name is None:
                        continue
                    emitted = True
                    yield (f"id: {ev['seq']}\nevent: {name}\n"
                           f"data: {_json.dumps(ev, sort_keys=True, separators=(',', ':'))}\n\n")
                cursor = end
                if emitted:
                    idle = 0.0
                else:
                    idle += 0.2
                    if idle >= 2.0:
                        idle = 0.0
                        yield ": keepalive\n\n"
                await asyncio.sleep(0.2)

        return StreamingResponse(feed(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    @app.get("/healthz")
    def healthz():
        return {"clock": rt.snapshot()["clock"], "running": worker.is_alive()}

    return app
