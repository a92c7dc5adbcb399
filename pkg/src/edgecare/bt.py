"""Behavior-tree engine with Sequence/Selector interior nodes, Action and
Condition leaves, and resume-at-running-child memory.

Tick semantics: a Sequence fails at the first failing child, succeeds when
all children succeed, and returns Running at the first running child; a
Selector is the mirror image.  Interior nodes bookmark their running child
in the blackboard and resume there on the next tick, so completed steps of
a multi-beat interaction are never replayed.  Every executed Action appends
one interaction event; Conditions only query.

Leaves answer through a responder callable.  A responder may request a
restart (used by retry-style leaves): when a restarting leaf leaves the
tree Running, all bookmarks are cleared and the next tick starts again
from the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .protocol import InteractionEvent

SUCCESS = "Success"
FAILURE = "Failure"
RUNNING = "Running"
STATUSES = (SUCCESS, FAILURE, RUNNING)

INTERIOR_KINDS = ("Sequence", "Selector")
LEAF_KINDS = ("Action", "Condition")


class MalformedTree(Exception):
    """Tree structure violates an engine invariant."""


@dataclass(frozen=True)
class NodeDef:
    kind: str
    name: str
    children: tuple = ()
    action_spec: dict | None = None


@dataclass(frozen=True)
class TreeDef:
    tree_id: str
    stage: str
    root: NodeDef
    roles: dict = field(default_factory=dict)


@dataclass
class Blackboard:
    """Per-session execution state; owned by exactly one session."""

    session_id: str = ""
    now: int = 0
    data: dict = field(default_factory=dict)       # counters, last response
    bookmarks: dict = field(default_factory=dict)  # interior name -> child idx


@dataclass(frozen=True)
class LeafResult:
    status: str
    response: str | None = None   # patient response for Action events
    restart: bool = False         # clear all bookmarks if tree stays Running


Responder = Callable[[NodeDef, Blackboard], "LeafResult | str"]


def validate_tree(tree: TreeDef):
    """Raise MalformedTree unless `tree` satisfies all structural invariants."""
    names: set[str] = set()
    seen_ids: set[int] = set()

    def walk(node: NodeDef):
        if id(node) in seen_ids:
            raise MalformedTree(f"node {node.name!r} appears twice (sharing/cycle)")
        seen_ids.add(id(node))
        if node.kind not in INTERIOR_KINDS + LEAF_KINDS:
            raise MalformedTree(f"unknown node kind {node.kind!r}")
        if node.name in names:
            raise MalformedTree(f"duplicate node name {node.name!r}")
        names.add(node.name)
        if node.kind in LEAF_KINDS:
            if node.children:
                raise MalformedTree(f"leaf {node.name!r} must not have children")
        else:
            if not node.children:
                raise MalformedTree(f"{node.kind} {node.name!r} needs >= 1 child")
            if node.action_spec:
                raise MalformedTree(f"interior {node.name!r} must not carry action_spec")
            for child in node.children:
                walk(child)

    walk(tree.root)


def _leaf_modality(node: NodeDef) -> str:
    return (node.action_spec or {}).get("modality", "Image")


def tick(tree: TreeDef, bb: Blackboard, responder: Responder):
    """Run one tick; returns (status, emitted interaction events).

    The blackboard is mutated in place (bookmarks, responder-written keys).
    """
    validate_tree(tree)
    events: list[InteractionEvent] = []
    restart_requested = False

    def ask(node: NodeDef) -> LeafResult:
        result = responder(node, bb)
        if isinstance(result, str):
            result = LeafResult(result)
        if result.status not in STATUSES:
            raise MalformedTree(f"responder returned bad status {result.status!r}")
        return result

    def run(node: NodeDef) -> str:
        nonlocal restart_requested
        if node.kind == "Condition":
            return ask(node).status
        if node.kind == "Action":
            result = ask(node)
            events.append(InteractionEvent(
                t=bb.now, session_id=bb.session_id, action=node.name,
                patient_response=result.response or "NoResponse",
                modality=_leaf_modality(node)))
            if result.restart:
                restart_requested = True
            return result.status
        # interior node: resume at the bookmarked child, if any
        start = bb.bookmarks.get(node.name, 0)
        short_circuit = FAILURE if node.kind == "Sequence" else SUCCESS
        for i in range(start, len(node.children)):
            status = run(node.children[i])
            if status == RUNNING:
                bb.bookmarks[node.name] = i
                return RUNNING
            if status == short_circuit:
                bb.bookmarks.pop(node.name, None)
                return status
        bb.bookmarks.pop(node.name, None)
        return SUCCESS if node.kind == "Sequence" else FAILURE

    status = run(tree.root)
    if status == RUNNING and restart_requested:
        bb.bookmarks.clear()
    return status, events


def scripted_responder(outcomes: dict):
    """Responder answering from a {leaf name: status-or-LeafResult} table."""
    def respond(node: NodeDef, bb: Blackboard):
        try:
            return outcomes[node.name]
        except KeyError:
            raise MalformedTree(f"no scripted outcome for leaf {node.name!r}")
    return respond
