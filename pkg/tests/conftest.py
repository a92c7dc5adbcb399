import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SCENARIOS = Path(__file__).parent.parent / "scenarios"


@pytest.fixture
def rng():
    return random.Random(0xEDC0DE)


def make_frame(rng, kind="SpO2", patient="p1", t=0, seq=1):
    from edgecare.protocol import PHYSICAL_BOUNDS, SensorFrame
    b = PHYSICAL_BOUNDS[kind]
    lo = b.lo + (0.001 if b.lo_open else 0.0)
    hi = b.hi - (0.001 if b.hi_open else 0.0)
    return SensorFrame(sensor_id=f"sensor:{patient}:{kind}", patient_id=patient,
                       kind=kind, t=t, value=round(rng.uniform(lo, hi), 3), seq=seq)


def make_fused_record(rng, patient="p1", window=(0, 10000)):
    from edgecare import protocol
    from edgecare.edge import fuse
    frames = []
    seqs = {}
    for _ in range(rng.randint(0, 25)):
        kind = rng.choice(protocol.SENSOR_KINDS)
        seqs[kind] = seqs.get(kind, 0) + 1
        frames.append(make_frame(rng, kind=kind, patient=patient,
                                 t=rng.randrange(window[0], window[1]),
                                 seq=seqs[kind]))
    interactions = [
        protocol.InteractionEvent(
            t=rng.randrange(window[0], window[1]), session_id=f"{patient}-s1",
            action=rng.choice(("show_ball", "say_knock_knock")),
            patient_response=rng.choice(protocol.PATIENT_RESPONSES),
            modality=rng.choice(protocol.MODALITIES))
        for _ in range(rng.randint(0, 4))]
    net = {"network_type": "5G",
           "service_data_flow_bytes": rng.randrange(0, 10000),
           "communication_quality": round(rng.random(), 3)}
    return fuse(patient, frames, interactions, net, window)
