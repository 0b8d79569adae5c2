"""Parent/child indexes over the resolved DAG and gate-semantics checks."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

from .jfta import FAULT, XOR, FaultTree, Node, gate_rule, is_gate, resolved_edges


@dataclass(frozen=True)
class GraphIndex:
    """Resolved DAG view of a tree.

    ``children`` keeps document order; a LINK node has its target as its only
    child, so the target's ``parents`` include the LINK.
    """

    parents: dict[str, tuple[str, ...]]
    children: dict[str, tuple[str, ...]]
    depth_order: tuple[str, ...]
    root: str
    links: tuple[tuple[str, str], ...] = ()  # (LINK id, target id)
    _reach: dict[str, frozenset[str]] = field(default_factory=dict, compare=False, repr=False)

    def descendants(self, node_id: str) -> frozenset[str]:
        """Nodes reachable from ``node_id`` (inclusive)."""
        if node_id in self._reach:
            return self._reach[node_id]
        seen = {node_id}
        stack = [node_id]
        while stack:
            for child in self.children[stack.pop()]:
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        self._reach[node_id] = frozenset(seen)
        return self._reach[node_id]


def build_index(tree: FaultTree) -> GraphIndex:
    cached = tree.__dict__.get("_graph_index")
    if cached is not None:
        return cached
    index = _build_index(tree)
    tree.__dict__["_graph_index"] = index  # trees are immutable, so memoize on the instance
    return index


def _build_index(tree: FaultTree) -> GraphIndex:
    edges = resolved_edges(tree)
    children = {node_id: tuple(kids) for node_id, kids in edges.items()}
    parents: dict[str, list[str]] = {node_id: [] for node_id in children}
    for node_id, kids in children.items():
        for kid in kids:
            if node_id not in parents[kid]:
                parents[kid].append(node_id)
    position = tree.position
    parent_map = {
        node_id: tuple(sorted(ps, key=position.__getitem__)) for node_id, ps in parents.items()
    }

    # Kahn's algorithm seeded in document order
    indegree = {node_id: len(ps) for node_id, ps in parent_map.items()}
    ready = [node_id for node_id in children if indegree[node_id] == 0]
    order: list[str] = []
    while ready:
        ready.sort(key=position.__getitem__)
        current = ready.pop(0)
        order.append(current)
        for kid in children[current]:
            indegree[kid] -= 1
            if indegree[kid] == 0:
                ready.append(kid)
    links = tuple((n.id, n.target) for n in tree.nodes if n.is_link and n.target is not None)
    return GraphIndex(parent_map, children, tuple(order), tree.root.id, links)


def effective_failures(tree: FaultTree, members: Iterable[str]) -> frozenset[str]:
    """Members plus every LINK whose target is a member (a LINK mirrors its target)."""
    failed = set(members)
    links = build_index(tree).links
    grew = True
    while grew:  # LINK chains resolve in at most len(links) rounds
        grew = False
        for link, target in links:
            if link not in failed and target in failed:
                failed.add(link)
                grew = True
    return frozenset(failed)


@dataclass(frozen=True)
class GateViolation:
    code: str
    node_id: str
    message: str


def gate_semantics_check(tree: FaultTree, members: Iterable[str]) -> list[GateViolation]:
    """Check a failure set against gate logic.

    For every failed gate the number of failed children must satisfy its rule
    (a LINK child counts as failed iff its target is failed); a member LINK
    requires its target; every non-root member needs a failed parent.
    """
    members = set(members)
    index = build_index(tree)
    out: list[GateViolation] = []
    unknown = sorted(m for m in members if m not in tree)
    for node_id in unknown:
        out.append(GateViolation("unknown-id", node_id, f"{node_id!r} is not in the tree"))
    members -= set(unknown)
    if tree.root.id not in members:
        out.append(GateViolation("root-missing", tree.root.id, "the root symptom is not failed"))
    failed = effective_failures(tree, members)

    for node_id in sorted(members, key=tree.position.__getitem__):
        node = tree[node_id]
        if node.is_link:
            if node.target not in members:
                out.append(
                    GateViolation("link-state", node_id, f"LINK {node_id} failed but {node.target} is not")
                )
        elif is_gate(node.kind):
            kids = index.children[node_id]
            n_failed = sum(1 for kid in kids if kid in failed)
            if not gate_rule(node.kind)(n_failed, len(kids)):
                out.append(
                    GateViolation(
                        node.kind.lower() if node.kind != FAULT else "fault",
                        node_id,
                        f"{node.kind} {node_id} has {n_failed}/{len(kids)} failed children",
                    )
                )
        if node_id != tree.root.id and not any(p in members for p in index.parents[node_id]):
            out.append(GateViolation("closure", node_id, f"{node_id} failed without a failed parent"))
    return out


def is_consistent(tree: FaultTree, members: Iterable[str]) -> bool:
    return not gate_semantics_check(tree, members)


def solutions_under(tree: FaultTree, node_id: str) -> list[str]:
    """Solution ids reachable below ``node_id`` (through LINKs), document order."""
    if node_id not in tree:
        raise KeyError(node_id)
    index = build_index(tree)
    found = [n for n in index.descendants(node_id) if tree[n].is_solution]
    return sorted(found, key=tree.position.__getitem__)


def dfs_order(tree: FaultTree, members: Iterable[str]) -> list[str]:
    """Depth-first visit order of the member subgraph from the root (document order)."""
    members = set(members)
    index = build_index(tree)
    order: list[str] = []
    seen: set[str] = set()

    def visit(node_id: str) -> None:
        seen.add(node_id)
        order.append(node_id)
        for kid in index.children[node_id]:
            if kid in members and kid not in seen:
                visit(kid)

    if tree.root.id in members:
        visit(tree.root.id)
    return order


def probe_sequence(tree: FaultTree, members: Iterable[str]) -> list[tuple[str, bool]]:
    """Nodes a top-down diagnosis examines, with their observed state.

    Starting from the (failed) root, children are examined in document order;
    failed children are descended into and an XOR stops after its first failed
    child. Each id appears once.
    """
    failed = effective_failures(tree, members)
    index = build_index(tree)
    out: list[tuple[str, bool]] = []
    seen = {tree.root.id}

    def visit(node_id: str) -> None:
        xor = tree[node_id].kind == XOR
        for kid in index.children[node_id]:
            if kid in seen:
                if xor and kid in failed:
                    return
                continue
            seen.add(kid)
            state = kid in failed
            out.append((kid, state))
            if state:
                visit(kid)
                if xor:
                    return

    out.append((tree.root.id, tree.root.id in failed))
    visit(tree.root.id)
    return out


def node_label(node: Node) -> str:
    return f"{node.id}:{node.name}"


def divergence_node(
    tree: FaultTree, members_a: Iterable[str], members_b: Iterable[str]
) -> tuple[str, bool] | None:
    """First node, in diagnosis order under ``members_a``, whose state differs under ``members_b``.

    Returns ``(node_id, state_under_b)``; ``None`` when a top-down diagnosis
    cannot tell the two sets apart.
    """
    failed_b = effective_failures(tree, members_b)
    for node_id, state_a in probe_sequence(tree, members_a):
        if (node_id in failed_b) != state_a:
            return node_id, not state_a
    return None
