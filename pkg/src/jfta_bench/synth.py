"""Random valid fault trees for property tests, fixtures and synthetic datasets."""

from __future__ import annotations

import random
from collections.abc import Iterator
from dataclasses import dataclass, field

from .jfta import AND, FAULT, LINK, OR, SOLUTION, XOR, FaultTree, Node, validate
from .sampler import MAX_ENUMERATION_NODES, enumerate_consistent_sets

_COMPONENTS = (
    "pump", "valve", "relay", "fuse", "sensor", "motor", "belt", "filter", "fan", "gasket",
    "bearing", "switch", "cable", "heater", "nozzle", "spring", "display", "battery",
)
_GATE_WEIGHTS = ((XOR, 3), (OR, 3), (AND, 2), (FAULT, 2))
ALL_KINDS = (XOR, OR, AND, FAULT, SOLUTION, LINK)


@dataclass
class _Draft:
    kind: str
    children: list[int] = field(default_factory=list)
    target: int | None = None


def _weighted_kind(rng: random.Random) -> str:
    kinds, weights = zip(*_GATE_WEIGHTS)
    return rng.choices(kinds, weights)[0]


def _reach(drafts: list[_Draft], start: int) -> set[int]:
    seen, stack = set(), [start]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        stack.extend(drafts[n].children)
        if drafts[n].target is not None:
            stack.append(drafts[n].target)
    return seen


def _grow(rng: random.Random, size: int, n_links: int) -> list[_Draft]:
    drafts = [_Draft(rng.choice((XOR, OR, AND)), [1, 2]), _Draft(SOLUTION), _Draft(SOLUTION)]
    budget = size - n_links
    while True:
        leaves = [i for i, d in enumerate(drafts) if d.kind == SOLUTION]
        kind = _weighted_kind(rng)
        fan = 1 if kind == FAULT else rng.randint(2, 3)
        if len(drafts) + fan > budget:
            if len(drafts) + 1 > budget:
                break
            kind, fan = FAULT, 1
        leaf = rng.choice(leaves)
        drafts[leaf].kind = kind
        drafts[leaf].children = list(range(len(drafts), len(drafts) + fan))
        drafts.extend(_Draft(SOLUTION) for _ in range(fan))

    hosts = [i for i, d in enumerate(drafts) if d.kind in (XOR, OR, AND)]
    for _ in range(n_links):
        link = len(drafts)
        for _attempt in range(50):
            host = rng.choice(hosts)
            target = rng.randrange(1, len(drafts))
            if drafts[target].kind == LINK or target in drafts[host].children:
                continue
            if host in _reach(drafts, target):
                continue  # would close a cycle
            drafts.append(_Draft(LINK, target=target))
            drafts[host].children.append(link)
            break
    return drafts


def _freeze(drafts: list[_Draft], rng: random.Random) -> FaultTree:
    # preorder relabelling so ids read 1, 2, 3 ... down the document
    order: list[int] = []

    def visit(i: int) -> None:
        order.append(i)
        for c in drafts[i].children:
            visit(c)

    visit(0)
    new_id = {old: str(pos + 1) for pos, old in enumerate(order)}
    parts = [rng.choice(_COMPONENTS) for _ in drafts]

    def build(i: int) -> Node:
        d, nid = drafts[i], new_id[i]
        if d.kind == SOLUTION:
            return Node(nid, f"{parts[i].title()} wear {nid}", SOLUTION,
                        solution=f"Service the {parts[i]} unit {nid}")
        if d.kind == LINK:
            assert d.target is not None
            return Node(nid, f"{parts[i].title()} link {nid}", LINK, target=new_id[d.target])
        label = "symptom" if i == 0 else "issue"
        return Node(nid, f"{parts[i].title()} {label} {nid}", d.kind,
                    children=tuple(build(c) for c in d.children))

    return FaultTree(build(0))


def every_solution_reachable(tree: FaultTree) -> bool:
    """Each Solution leaf belongs to at least one gate-consistent failure set."""
    covered: set[str] = set()
    for members in enumerate_consistent_sets(tree):
        covered |= members
    return all(n.id in covered for n in tree.nodes if n.is_solution)


def random_tree(
    seed: int | str,
    *,
    size: int = 16,
    links: int = 1,
    require_kinds: tuple[str, ...] = (),
    attempts: int = 500,
) -> FaultTree:
    """A structurally valid tree of at most ``size`` nodes.

    Node names are unique and never contain one another as whole words, so
    name matching in the user simulator stays unambiguous. Small trees are
    additionally checked by enumeration so every Solution leaf can fail.
    """
    if size < 3 + links:
        raise ValueError(f"size {size} is too small for {links} links")
    for attempt in range(attempts):
        rng = random.Random(f"{seed}/tree/{attempt}")
        tree = _freeze(_grow(rng, size, links), rng)
        if validate(tree):
            continue  # pragma: no cover - construction keeps trees valid
        counts = tree.kind_counts()
        if any(not counts.get(kind) for kind in require_kinds):
            continue
        if len(tree) <= MAX_ENUMERATION_NODES and not every_solution_reachable(tree):
            continue
        return tree
    raise ValueError(f"no tree satisfying the constraints after {attempts} attempts")


def property_corpus(count: int = 10, seed: int = 0) -> list[FaultTree]:
    """Small trees (<= 20 nodes) that each contain every node kind."""
    return [
        random_tree(f"{seed}/corpus/{i}", size=14 + i % 7, links=1 + i % 2, require_kinds=ALL_KINDS)
        for i in range(count)
    ]


def iter_benchmark_trees(seed: int = 0) -> Iterator[FaultTree]:
    """Endless stream of larger trees with at least eight root causes."""
    i = 0
    while True:
        tree = random_tree(f"{seed}/bench/{i}", size=26 + i % 9, links=2, require_kinds=ALL_KINDS)
        i += 1
        if sum(n.is_solution for n in tree.nodes) >= 8:
            yield tree


def benchmark_corpus(count: int = 10, seed: int = 0) -> dict[str, FaultTree]:
    """Larger trees with enough root causes for all three difficulty levels."""
    trees = iter_benchmark_trees(seed)
    return {f"syn{i:02d}": next(trees) for i in range(count)}
