"""Second, independent coding of the user reply rules, used as a test oracle.

Written straight from the rule text: a move is a fault check, a repair, or
invalid (nothing recognisable, several faults at once, or a repair aimed at
something that is not a bottom-level fault). It shares no code with
``jfta_bench.user``.
"""

from __future__ import annotations

import re

from jfta_bench.jfta import FaultTree

REPAIR_WORDS = (
    "resolv", "fix", "repair", "replac", "install", "reinstall", "solution", "remed",
    "can be handled", "to address",
)


def _names_in(text: str, tree: FaultTree) -> set[str]:
    low = re.sub(r"\s+", " ", text.lower())
    found: list[tuple[int, int, str]] = []
    for node in tree.nodes:
        name = re.sub(r"\s+", " ", node.name.lower()).strip()
        start = 0
        while True:
            at = low.find(name, start)
            if at < 0:
                break
            end = at + len(name)
            before = low[at - 1] if at else " "
            after = low[end] if end < len(low) else " "
            if not before.isalnum() and not after.isalnum():
                found.append((at, end, name))
            start = at + 1
    # drop a match lying inside a longer match
    keep = {
        name for at, end, name in found
        if not any(a <= at and end <= e and e - a > end - at for a, e, _ in found)
    }
    return keep


def _looks_like_repair(text: str, tree: FaultTree, names: set[str]) -> bool:
    low = re.sub(r"\s+", " ", text.lower())
    stripped = low
    for name in names:
        stripped = stripped.replace(name, " ")
    for word in REPAIR_WORDS:
        if re.search(r"\b" + re.escape(word), stripped):
            return True
    return any(
        n.solution and re.sub(r"\s+", " ", n.solution.lower()) in low
        for n in tree.nodes
        if n.is_solution
    )


def reference_decision(
    tree: FaultTree,
    failed: set[str],
    causes: dict[str, str],
    resolved: set[str],
    move_id: str,
    text: str,
) -> tuple[str, str, bool | None]:
    """(action, name, verdict) for one assistant move."""
    names = _names_in(text, tree)
    if len(names) != 1:
        return ("Invalid Input", "", None)
    (name,) = names
    holders = [n for n in tree.nodes if n.name.lower() == name]
    canonical = holders[0].name
    node = tree.index.get(move_id)
    same = node is not None and node.name.lower() == name
    if _looks_like_repair(text, tree, names):
        if not any(h.is_solution for h in holders):
            return ("Invalid Input", "", None)
        ok = (
            same
            and node.is_solution
            and move_id in causes
            and move_id not in resolved
            and causes[move_id].lower() in text.lower()
        )
        return ("Solution Confirmation", canonical, ok)
    return ("Fault Confirmation", canonical, same and move_id in failed)
