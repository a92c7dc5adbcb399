import pytest

from edgecare.bt import NodeDef
from edgecare.protocol import STAGE_TREES
from edgecare.treelib import (InvariantError, ParseError, builtin_trees,
                              load_tree, serialize_tree, trees_for_stage)


def count_nodes(node: NodeDef) -> int:
    return 1 + sum(count_nodes(c) for c in node.children)


def test_catalog_is_exactly_the_stage_tree_map():
    catalog = builtin_trees()
    assert sorted(catalog) == sorted(
        tid for tids in STAGE_TREES.values() for tid in tids)
    for stage, tree_ids in STAGE_TREES.items():
        assert tuple(t.tree_id for t in trees_for_stage(stage)) == tree_ids


def test_entry_stage_has_the_three_play_scenarios():
    entry = {t.tree_id for t in trees_for_stage("Entry")}
    assert entry == {"entry_playball", "entry_chasing", "entry_spinning"}


def test_basic_aladdin_roles():
    tree = builtin_trees()["basic_aladdin"]
    assert tree.roles == {"robot": "Magic Lamp", "patient": "Aladdin"}
    assert tree.stage == "Basic"


def test_advanced_stage_has_two_sarcasm_programs():
    advanced = [t.tree_id for t in trees_for_stage("Advanced")]
    assert advanced == ["advanced_sarcasm_1", "advanced_sarcasm_2"]


def test_entry_trees_are_image_only_and_others_mixed():
    def modalities(node, out):
        if node.kind in ("Action", "Condition"):
            out.add((node.action_spec or {}).get("modality", "Image"))
        for c in node.children:
            modalities(c, out)
        return out

    for tree in builtin_trees().values():
        seen = modalities(tree.root, set())
        if tree.stage == "Entry":
            assert seen == {"Image"}, tree.tree_id
        else:
            assert seen <= {"Image", "Voice"}


def test_builtin_trees_are_script_sized():
    for tree in builtin_trees().values():
        n = count_nodes(tree.root)
        assert 5 <= n <= 12, (tree.tree_id, n)


def test_round_trip_all_builtins():
    for tree in builtin_trees().values():
        assert load_tree(serialize_tree(tree)) == tree


def test_knockknock_structure():
    tree = builtin_trees()["middle_knockknock"]
    root = tree.root
    assert root.kind == "Selector"
    main, fallback = root.children
    assert main.kind == "Sequence"
    kinds = [c.kind for c in main.children]
    assert kinds == ["Action", "Condition", "Action", "Condition", "Action"]
    assert "Knock knock" in main.children[0].action_spec["prompt"]
    assert fallback.action_spec["behavior"] == "encourage_retry"
    assert fallback.action_spec["budget"] == 3


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as err:
        load_tree('{"tree_id": "x",\n  "stage": Entry}')
    assert err.value.line == 2
    assert err.value.column > 0


def test_action_with_child_is_rejected():
    bad = """{
      "tree_id": "bad", "stage": "Entry",
      "root": {"kind": "Action", "name": "a",
               "children": [{"kind": "Action", "name": "b"}]}
    }"""
    with pytest.raises(Exception) as err:
        load_tree(bad)
    assert "children" in str(err.value)


def test_stage_modality_mismatch_rejected():
    bad = """{
      "tree_id": "bad", "stage": "Entry",
      "root": {"kind": "Sequence", "name": "root", "children": [
        {"kind": "Action", "name": "speak",
         "action_spec": {"behavior": "say", "modality": "Voice"}}]}
    }"""
    with pytest.raises(InvariantError) as err:
        load_tree(bad)
    assert "modality" in str(err.value)


def test_unknown_stage_rejected():
    with pytest.raises(InvariantError):
        load_tree('{"tree_id": "x", "stage": "Expert", '
                  '"root": {"kind": "Action", "name": "a"}}')
