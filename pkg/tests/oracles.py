"""Independent reference implementations used to check the real ones.

Everything here is deliberately written from the definitions, not from the
production code paths: a memoryless recursive behavior-tree evaluator, an
iterative water-filling allocator, an OrderedDict LRU, and exhaustive tree
shape enumeration.
"""

from __future__ import annotations

from collections import OrderedDict
from fractions import Fraction
from itertools import product

from edgecare.bt import NodeDef

SUCCESS, FAILURE, RUNNING = "Success", "Failure", "Running"


# --- behavior-tree oracle -----------------------------------------------------

def bt_oracle(node: NodeDef, outcomes: dict, visited: list | None = None) -> str:
    """Memoryless recursive tick over scripted leaf outcomes."""
    if visited is None:
        visited = []
    if node.kind in ("Action", "Condition"):
        visited.append(node.name)
        return outcomes[node.name]
    if node.kind == "Sequence":
        for child in node.children:
            status = bt_oracle(child, outcomes, visited)
            if status != SUCCESS:
                return status
        return SUCCESS
    if node.kind == "Selector":
        for child in node.children:
            status = bt_oracle(child, outcomes, visited)
            if status != FAILURE:
                return status
        return FAILURE
    raise ValueError(node.kind)


# --- tree shape enumeration -----------------------------------------------------

def _compositions(total: int, parts: int):
    """All ordered splits of `total` into `parts` non-negative integers."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def shapes_with(interior: int, leaves: int, _memo={}):
    """All ordered rooted tree shapes with exactly `interior` interior nodes
    and `leaves` leaves.  Shape encoding: "L" or a tuple of child shapes."""
    key = (interior, leaves)
    if key in _memo:
        return _memo[key]
    result = set()
    if interior == 0:
        if leaves == 1:
            result.add("L")
    elif leaves >= 1:
        max_children = interior - 1 + leaves
        for k in range(1, max_children + 1):
            for i_split in _compositions(interior - 1, k):
                for l_split in _compositions(leaves, k):
                    options = []
                    ok = True
                    for i_j, l_j in zip(i_split, l_split):
                        child_shapes = shapes_with(i_j, l_j)
                        if not child_shapes:
                            ok = False
                            break
                        options.append(sorted(child_shapes, key=repr))
                    if not ok:
                        continue
                    for combo in product(*options):
                        result.add(tuple(combo))
    _memo[key] = result
    return result


def all_shapes(max_interior: int, max_leaves: int):
    out = []
    for i in range(0, max_interior + 1):
        for l in range(1, max_leaves + 1):
            out.extend(sorted(shapes_with(i, l), key=repr))
    return out


def build_tree(shape, kinds, counter=None) -> NodeDef:
    """Materialize a shape into NodeDefs; `kinds` assigns each interior node
    (pre-order) Sequence or Selector."""
    if counter is None:
        counter = {"leaf": 0, "interior": 0}
    if shape == "L":
        name = f"leaf{counter['leaf']}"
        counter["leaf"] += 1
        return NodeDef(kind="Action", name=name)
    idx = counter["interior"]
    counter["interior"] += 1
    children = tuple(build_tree(child, kinds, counter) for child in shape)
    return NodeDef(kind=kinds[idx], name=f"node{idx}", children=children)


def count_nodes(shape) -> tuple[int, int]:
    """(interior, leaves) of a shape."""
    if shape == "L":
        return 0, 1
    interior, leaves = 1, 0
    for child in shape:
        ci, cl = count_nodes(child)
        interior += ci
        leaves += cl
    return interior, leaves


def leaf_names(node: NodeDef) -> list[str]:
    if node.kind in ("Action", "Condition"):
        return [node.name]
    names = []
    for child in node.children:
        names.extend(leaf_names(child))
    return names


# --- water-filling allocation oracle ---------------------------------------------

def waterfill_oracle(demands: dict, capacities: dict, risk_levels: dict,
                     epoch: int, cache_capacity_bytes: int = 0) -> dict:
    """Iterative proportional fill per risk tier, high tier first.

    Returns {patient: {resource: float}} in the same float convention as the
    allocator (exact Fractions converted at the end).
    """
    def exact(value):
        return Fraction(value) if isinstance(value, int) else Fraction(str(value))

    order = ("Critical", "High", "Moderate", "Low")
    allocations = {pid: {} for pid in sorted(demands)}
    for resource in ("bandwidth_kbps", "compute_units"):
        remaining = exact(capacities.get(resource, 0))
        for level in order:
            tier = sorted(p for p in demands
                          if risk_levels.get(p, "Low") == level)
            filled = {p: Fraction(0) for p in tier}
            unmet = {p: exact(demands[p].get(resource, 0)) for p in tier}
            while remaining > 0 and any(u > 0 for u in unmet.values()):
                total = sum(unmet.values())
                grant = min(remaining, total)
                round_total = Fraction(0)
                for p in tier:
                    delta = unmet[p] / total * grant
                    delta = min(delta, unmet[p])
                    filled[p] += delta
                    unmet[p] -= delta
                    round_total += delta
                remaining -= round_total
                if grant == total:
                    break
            for p in tier:
                allocations[p][resource] = float(filled[p])
    n = max(1, len(demands))
    for pid in allocations:
        allocations[pid]["cache_quota_bytes"] = float(
            Fraction(cache_capacity_bytes, n))
    return allocations


# --- LRU reference ----------------------------------------------------------------

class OracleLru:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.entries: OrderedDict[str, int] = OrderedDict()

    def access(self, asset_id: str, size: int) -> bool:
        if size > self.capacity:
            raise ValueError("too large")
        if asset_id in self.entries:
            self.entries.move_to_end(asset_id)
            return True
        while sum(self.entries.values()) + size > self.capacity:
            self.entries.popitem(last=False)
        self.entries[asset_id] = size
        return False
