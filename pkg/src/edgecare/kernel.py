"""Deterministic discrete-event kernel.

Single-threaded event loop with a virtual millisecond clock, a totally
ordered event queue, per-node seeded RNG sub-streams and a static
point-to-point link model.  The kernel is the only clock authority: node
handlers run to completion per event and may only schedule further events.

Determinism contract: for a fixed (seed, node set, scenario) two runs
produce byte-identical JSONL traces.  Virtual time is integer milliseconds;
simultaneous events are ordered by a global sequence counter assigned at
schedule time.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import queue
import random
import time as _wall
from dataclasses import dataclass, field
from typing import Any, Callable


class SchedulingInPast(Exception):
    """Raised when an event is scheduled before the current clock."""


class NoRoute(Exception):
    """Raised when deliver() is called for a node pair without a link."""


class InvariantViolation(Exception):
    """A kernel or node invariant was broken; runs must fail fast on this."""


def derive_rng(seed: int, stream_id: str) -> random.Random:
    """Split an independent RNG sub-stream from (seed, stream_id).

    Hash-based so that adding or removing nodes never shifts the streams of
    unrelated nodes.
    """
    digest = hashlib.sha256(f"{seed}:{stream_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass(frozen=True)
class LinkModel:
    """Static point-to-point link with fixed latency and bandwidth."""

    latency_ms: int
    bandwidth_kbps: int
    name: str = "link"
    network_type: str = "5G"

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")
        if self.bandwidth_kbps <= 0:
            raise ValueError("bandwidth_kbps must be > 0")

    def delivery_delay_ms(self, size_bytes: int) -> int:
        """latency + transmission time; kbps is kilobits/s == bits/ms."""
        if size_bytes < 1:
            raise ValueError("messages are at least 1 byte")
        bits = size_bytes * 8
        return self.latency_ms + -(-bits // self.bandwidth_kbps)


@dataclass(order=True)
class SimEvent:
    fire_at: int
    seq: int
    target: str = field(compare=False)
    kind: str = field(compare=False)
    payload: Any = field(compare=False, default=None)


@dataclass
class EventTraceSummary:
    events_processed: int
    final_clock: int


# A handler receives (sim, event) and runs to completion.
Handler = Callable[["Simulator", SimEvent], None]

NOTE_PREFIX = "note."


class Simulator:
    """Event loop, clock authority and link registry for one run."""

    def __init__(self, seed: int, trace_sink=None):
        self.seed = seed
        self.clock = 0
        self._seq = 0
        self._queue: list[SimEvent] = []
        self._handlers: dict[str, Handler] = {}
        self._rngs: dict[str, random.Random] = {}
        self._links: dict[tuple[str, str], LinkModel] = {}
        self._trace_sink = trace_sink  # callable(line: str) or None
        self._trace_lines: list[str] = []
        self.inbox: queue.Queue = queue.Queue()
        self.events_processed = 0
        self.stopping = False

    # -- node and link registry ------------------------------------------

    def add_node(self, node_id: str, handler: Handler) -> random.Random:
        if node_id in self._handlers:
            raise ValueError(f"duplicate node id {node_id!r}")
        self._handlers[node_id] = handler
        self._rngs[node_id] = derive_rng(self.seed, node_id)
        return self._rngs[node_id]

    def rng(self, node_id: str) -> random.Random:
        return self._rngs[node_id]

    def add_link(self, a: str, b: str, link: LinkModel):
        """Register a bidirectional link between nodes a and b."""
        self._links[(a, b)] = link
        self._links[(b, a)] = link

    def link_between(self, a: str, b: str) -> LinkModel | None:
        return self._links.get((a, b))

    # -- scheduling --------------------------------------------------------

    def schedule(self, fire_at: int, target: str, kind: str, payload=None) -> SimEvent:
        if fire_at < self.clock:
            raise SchedulingInPast(
                f"cannot schedule {kind!r} at t={fire_at} (now={self.clock})"
            )
        self._seq += 1
        ev = SimEvent(fire_at=fire_at, seq=self._seq, target=target, kind=kind, payload=payload)
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay_ms: int, target: str, kind: str, payload=None) -> SimEvent:
        return self.schedule(self.clock + delay_ms, target, kind, payload)

    def note(self, target: str, kind: str, payload=None) -> SimEvent:
        """Log-only event: appears in the trace this tick, never dispatched."""
        return self.schedule(self.clock, target, NOTE_PREFIX + kind, payload)

    def deliver(self, from_node: str, to_node: str, kind: str, payload,
                size_bytes: int) -> int:
        """Send a message over the configured link; returns the arrival time."""
        link = self.link_between(from_node, to_node)
        if link is None:
            raise NoRoute(f"no link configured between {from_node!r} and {to_node!r}")
        arrival = self.clock + link.delivery_delay_ms(size_bytes)
        self.schedule(arrival, to_node, kind, {
            "from": from_node,
            "sent_at": self.clock,
            "size_bytes": size_bytes,
            "msg": payload,
        })
        return arrival

    # -- loop ---------------------------------------------------------------

    def _drain_inbox(self):
        while True:
            try:
                target, kind, payload = self.inbox.get_nowait()
            except queue.Empty:
                return
            # external injections land one virtual millisecond after "now"
            self.schedule(self.clock + 1, target, kind, payload)

    def _trace(self, ev: SimEvent):
        line = json.dumps(
            {"t": ev.fire_at, "seq": ev.seq, "target": ev.target,
             "kind": ev.kind, "payload": ev.payload},
            sort_keys=True, separators=(",", ":"), ensure_ascii=True)
        self._trace_lines.append(line)
        if self._trace_sink is not None:
            self._trace_sink(line)

    def _dispatch(self, ev: SimEvent):
        self._trace(ev)
        self.events_processed += 1
        if ev.kind.startswith(NOTE_PREFIX):
            return
        handler = self._handlers.get(ev.target)
        if handler is None:
            raise InvariantViolation(f"event targets unknown node {ev.target!r}")
        handler(self, ev)

    def run_until(self, horizon: int, pace: float | None = None) -> EventTraceSummary:
        """Process every event with fire_at <= horizon, in (fire_at, seq) order.

        With `pace` set (virtual ms per wall ms) the loop sleeps so virtual
        time tracks wall time, draining the external inbox while it waits.
        """
        if horizon < self.clock:
            raise SchedulingInPast(f"horizon {horizon} is before now {self.clock}")
        wall_start = _wall.monotonic()
        virt_start = self.clock
        while not self.stopping:
            self._drain_inbox()
            if not self._queue or self._queue[0].fire_at > horizon:
                if pace is None:
                    break
                # live mode: idle until the horizon itself is due
                if self._pace_wait(horizon, virt_start, wall_start, pace):
                    continue
                break
            nxt = self._queue[0]
            if pace is not None and self._pace_wait(nxt.fire_at, virt_start, wall_start, pace):
                continue
            ev = heapq.heappop(self._queue)
            if ev.fire_at < self.clock:
                raise InvariantViolation("event queue produced a past event")
            self.clock = ev.fire_at
            self._dispatch(ev)
        if not self.stopping:
            self.clock = horizon
        return EventTraceSummary(self.events_processed, self.clock)

    def _pace_wait(self, target_virtual: int, virt_start: int, wall_start: float,
                   pace: float) -> bool:
        """Sleep a short slice if target_virtual is still ahead of wall time.

        Returns True if the caller should re-check the inbox/queue (an
        injection may now precede the event it was waiting for).
        """
        due_wall = wall_start + (target_virtual - virt_start) / (1000.0 * pace)
        now_wall = _wall.monotonic()
        if now_wall >= due_wall:
            return False
        _wall.sleep(min(0.005, due_wall - now_wall))
        return True

    # -- trace --------------------------------------------------------------

    @property
    def trace_lines(self) -> list[str]:
        return self._trace_lines

    def trace_hash(self) -> str:
        h = hashlib.sha256()
        for line in self._trace_lines:
            h.update(line.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()
