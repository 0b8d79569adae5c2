"""Fault-path sampling: bottom-up traceback from seed failures plus AND expansion."""

from __future__ import annotations

import random
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any

from .graph import build_index, dfs_order, effective_failures, gate_semantics_check, solutions_under
from .jfta import AND, FAULT, FaultTree, gate_rule, is_gate

RETRY_BUDGET = 64
MAX_ENUMERATION_NODES = 20

# nodes whose failure obliges every child to fail as well
_EXPAND_KINDS = (AND, FAULT)


class SamplingError(ValueError):
    pass


class TreeTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class FaultPath:
    selected: frozenset[str]
    order: tuple[str, ...]
    root_causes: tuple[tuple[str, str], ...]  # (solution id, solution text), DFS order
    seed: tuple[str, ...]

    @property
    def cause_ids(self) -> tuple[str, ...]:
        return tuple(cid for cid, _ in self.root_causes)

    @property
    def level(self) -> int | None:
        try:
            return classify_difficulty(self)
        except ValueError:
            return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "selected": sorted(self.selected, key=_id_sort_key),
            "order": list(self.order),
            "root_causes": [{"id": cid, "solution_text": text} for cid, text in self.root_causes],
            "seed": list(self.seed),
            "level": self.level,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FaultPath:
        return cls(
            selected=frozenset(data["selected"]),
            order=tuple(data["order"]),
            root_causes=tuple((rc["id"], rc["solution_text"]) for rc in data["root_causes"]),
            seed=tuple(data["seed"]),
        )


def _id_sort_key(node_id: str) -> tuple[int, int | str]:
    return (0, int(node_id)) if node_id.isdigit() else (1, node_id)


def make_path(tree: FaultTree, selected: Iterable[str], seed: Iterable[str] = ()) -> FaultPath:
    """Wrap an explicit failure set as a FaultPath (no consistency check)."""
    selected = frozenset(selected)
    order = tuple(dfs_order(tree, selected))
    causes = tuple((n, tree[n].solution or "") for n in order if tree[n].is_solution)
    return FaultPath(selected, order, causes, tuple(seed))


def classify_difficulty(path: FaultPath) -> int:
    """1-2 root causes -> level 1, 3-4 -> level 2, 5-6 -> level 3."""
    n = len(path.root_causes)
    if not 1 <= n <= 6:
        raise ValueError(f"{n} root causes is outside the benchmark range 1..6")
    return (n + 1) // 2


def level_cause_range(level: int) -> tuple[int, int]:
    if level not in (1, 2, 3):
        raise ValueError(f"unknown difficulty level {level}")
    return 2 * level - 1, 2 * level


def _attempt(tree: FaultTree, s_init: list[str], rng: random.Random) -> set[str]:
    index = build_index(tree)
    root = tree.root.id
    selected: set[str] = set()

    def traceback(u: str) -> None:
        while u not in selected:
            selected.add(u)
            parents = index.parents[u]
            if u == root or not parents:
                return
            u = rng.choice(parents)

    def walk_down(c: str) -> list[str]:
        # random chain c -> ... -> s for a uniformly drawn solution s under c
        target = rng.choice(solutions_under(tree, c))
        chain = [c]
        while chain[-1] != target:
            options = [
                kid for kid in index.children[chain[-1]] if target in index.descendants(kid)
            ]
            chain.append(rng.choice(options))
        return chain

    for s in s_init:
        traceback(s)

    for _ in range(len(tree) + 1):
        failed = effective_failures(tree, selected)
        chains: list[list[str]] = []
        for u in sorted(selected, key=tree.position.__getitem__):
            if tree[u].kind not in _EXPAND_KINDS:
                continue
            for c in index.children[u]:
                if c not in failed:
                    chains.append(walk_down(c))
        if not chains:
            return selected
        for chain in chains:
            # the chain hangs off an already-selected gate, so no upward choice is left
            selected.update(chain)
    raise SamplingError("expansion did not reach a fixpoint")  # pragma: no cover


def sample_path(
    tree: FaultTree, s_init: Iterable[str], rng_seed: int, *, retries: int = RETRY_BUDGET
) -> FaultPath:
    """Sample a gate-consistent fault path containing every seed failure.

    Seeds are traced back to the root choosing one random parent at shared
    nodes; failed AND/Fault nodes then pull in one random solution under each
    missing child until nothing new is added. Sets that break a gate rule
    (typically XOR exclusivity) are resampled with a derived seed.
    """
    s_init = list(dict.fromkeys(s_init))
    if not s_init:
        raise SamplingError("at least one seed failure is required")
    for s in s_init:
        if s not in tree:
            raise SamplingError(f"seed {s!r} is not in the tree")
        if not tree[s].is_solution:
            raise SamplingError(f"seed {s!r} is not a Solution leaf")
    for attempt in range(retries):
        rng = random.Random(f"{rng_seed}/{attempt}")
        selected = _attempt(tree, s_init, rng)
        if not gate_semantics_check(tree, selected):
            return make_path(tree, selected, s_init)
    raise SamplingError(
        f"no gate-consistent path for seeds {s_init} after {retries} attempts"
    )


def enumerate_consistent_sets(tree: FaultTree) -> list[frozenset[str]]:
    """Every gate-consistent failure set containing the root, by exhaustion.

    Test oracle, deliberately independent of ``graph``: candidate sets are
    generated upward-closed (a node can only join when one of its parents is
    in), then gate truth values are evaluated directly.
    """
    if len(tree) > MAX_ENUMERATION_NODES:
        raise TreeTooLarge(f"{len(tree)} nodes exceeds the {MAX_ENUMERATION_NODES}-node guard")

    by_id = {node.id: node for node in tree.nodes}
    kids: dict[str, list[str]] = {}
    for node in tree.nodes:
        kids[node.id] = [c.id for c in node.children]
        if node.is_link:
            kids[node.id].append(node.target)
    ups: dict[str, list[str]] = {n: [] for n in kids}
    for n, cs in kids.items():
        for c in cs:
            ups[c].append(n)

    topo: list[str] = []
    marked: set[str] = set()

    def place(n: str) -> None:
        if n in marked:
            return
        marked.add(n)
        for p in ups[n]:
            place(p)
        topo.append(n)

    for node in tree.nodes:
        place(node.id)

    def on(n: str, chosen: set[str]) -> bool:
        if n in chosen:
            return True
        node = by_id[n]
        return node.is_link and on(node.target, chosen)

    def holds(chosen: set[str]) -> bool:
        for n in chosen:
            node = by_id[n]
            if node.is_link:
                if node.target not in chosen:
                    return False
            elif is_gate(node.kind):
                lit = [on(c, chosen) for c in kids[n]]
                if not gate_rule(node.kind)(sum(lit), len(lit)):
                    return False
        return True

    results: list[frozenset[str]] = []
    root = tree.root.id
    rest = [n for n in topo if n != root]

    def grow(i: int, chosen: set[str]) -> None:
        if i == len(rest):
            if holds(chosen):
                results.append(frozenset(chosen))
            return
        n = rest[i]
        grow(i + 1, chosen)
        if any(p in chosen for p in ups[n]):
            chosen.add(n)
            grow(i + 1, chosen)
            chosen.discard(n)

    grow(0, {root})
    return results
