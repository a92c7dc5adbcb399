"""Loading, serializing and cataloguing therapy tree programs.

Trees are plain JSON data files so clinicians can edit the scripts without
touching code.  The built-in catalog ships one file per program id listed
in protocol.STAGE_TREES and is validated on load: structure, stage tag,
and that every leaf's modality is allowed for the tree's stage.
"""

from __future__ import annotations

import json
from importlib import resources

from .bt import NodeDef, TreeDef, MalformedTree, validate_tree
from .protocol import STAGES, STAGE_TABLE, STAGE_TREES


class ParseError(Exception):
    """Definition text is not valid JSON; carries line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class InvariantError(Exception):
    """Parsed tree violates a library rule; the message names the rule."""


def _node_from_obj(obj: dict) -> NodeDef:
    if not isinstance(obj, dict):
        raise InvariantError("node: every node must be a JSON object")
    kind = obj.get("kind")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise InvariantError("node.name: must be a non-empty string")
    children = tuple(_node_from_obj(c) for c in obj.get("children", []))
    spec = obj.get("action_spec")
    return NodeDef(kind=kind, name=name, children=children, action_spec=spec)


def load_tree(text: str) -> TreeDef:
    """Parse a tree definition; raises ParseError / InvariantError / MalformedTree."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno) from e
    if not isinstance(obj, dict):
        raise InvariantError("definition: top level must be an object")
    tree_id = obj.get("tree_id")
    stage = obj.get("stage")
    if not isinstance(tree_id, str) or not tree_id:
        raise InvariantError("tree_id: must be a non-empty string")
    if stage not in STAGES:
        raise InvariantError(f"stage: must be one of {'/'.join(STAGES)}")
    if "root" not in obj:
        raise InvariantError("root: missing")
    tree = TreeDef(tree_id=tree_id, stage=stage, root=_node_from_obj(obj["root"]),
                   roles=obj.get("roles", {}))
    validate_tree(tree)
    _check_modalities(tree)
    return tree


def _check_modalities(tree: TreeDef):
    allowed = STAGE_TABLE[tree.stage]["modalities"]

    def walk(node: NodeDef):
        if node.kind in ("Action", "Condition"):
            modality = (node.action_spec or {}).get("modality", "Image")
            if modality not in allowed:
                raise InvariantError(
                    f"{node.name}: modality {modality!r} not allowed at "
                    f"{tree.stage} stage (allowed: {', '.join(allowed)})")
        for child in node.children:
            walk(child)

    walk(tree.root)


def _node_to_obj(node: NodeDef) -> dict:
    obj: dict = {"kind": node.kind, "name": node.name}
    if node.children:
        obj["children"] = [_node_to_obj(c) for c in node.children]
    if node.action_spec is not None:
        obj["action_spec"] = node.action_spec
    return obj


def serialize_tree(tree: TreeDef) -> str:
    obj: dict = {"tree_id": tree.tree_id, "stage": tree.stage,
                 "root": _node_to_obj(tree.root)}
    if tree.roles:
        obj["roles"] = tree.roles
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


_catalog: dict[str, TreeDef] | None = None


def builtin_trees() -> dict[str, TreeDef]:
    """The shipped catalog, keyed by tree id; exactly the STAGE_TREES set."""
    global _catalog
    if _catalog is None:
        catalog: dict[str, TreeDef] = {}
        root = resources.files("edgecare").joinpath("data/trees")
        for stage, tree_ids in STAGE_TREES.items():
            for tree_id in tree_ids:
                text = root.joinpath(tree_id + ".json").read_text(encoding="utf-8")
                tree = load_tree(text)
                if tree.tree_id != tree_id or tree.stage != stage:
                    raise InvariantError(
                        f"{tree_id}.json: file declares ({tree.tree_id}, {tree.stage})")
                catalog[tree_id] = tree
        _catalog = catalog
    return _catalog


def trees_for_stage(stage: str) -> tuple[TreeDef, ...]:
    return tuple(t for t in builtin_trees().values() if t.stage == stage)
