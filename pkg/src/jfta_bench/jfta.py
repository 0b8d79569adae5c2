"""JFTA documents: parsing, structural validation and serialization.

A JFTA document is a JSON object with a single top-level key (the root id).
Every node object carries ``NodeName``, ``NextType`` and ``NextTree``; the
shape of ``NextTree`` depends on the node kind::

    {"1": {"NodeName": "Light does not turn on",
           "NextType": "XOR",
           "NextTree": {"2": {...}, "3": {...}}}}

Gates (``AND``/``OR``/``XOR``) and ``Fault`` wrappers nest child objects,
``Solution`` nodes hold the repair text and ``LINK`` nodes hold the id of
the node they alias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Any, Callable, Iterator

AND = "AND"
OR = "OR"
XOR = "XOR"
FAULT = "Fault"
SOLUTION = "Solution"
LINK = "LINK"

GateRule = Callable[[int, int], bool]

# rule(failed_children, total_children) for a node that is itself failed
_BUILTIN_GATES: dict[str, GateRule] = {
    AND: lambda failed, total: failed == total,
    OR: lambda failed, total: failed >= 1,
    XOR: lambda failed, total: failed == 1,
    FAULT: lambda failed, total: failed == total,
}
_gate_rules: dict[str, GateRule] = dict(_BUILTIN_GATES)


def register_gate(token: str, rule: GateRule) -> None:
    """Whitelist a custom gate kind.

    ``rule(failed, total)`` must say whether a failed gate with ``total``
    children, ``failed`` of which are failed, is consistent.
    """
    if token.upper() in {k.upper() for k in (SOLUTION, LINK)}:
        raise ValueError(f"{token!r} is a reserved node kind")
    _gate_rules[token] = rule


def unregister_gate(token: str) -> None:
    if token in _BUILTIN_GATES:
        raise ValueError(f"cannot remove builtin gate {token!r}")
    _gate_rules.pop(token, None)


def gate_rule(kind: str) -> GateRule:
    return _gate_rules[kind]


def is_gate(kind: str) -> bool:
    return kind in _gate_rules


def canonical_kind(token: str) -> str:
    """Map a ``NextType`` token onto its registered spelling (case-insensitive)."""
    for known in (*_gate_rules, SOLUTION, LINK):
        if known.upper() == token.upper():
            return known
    raise JFTAParseError("unknown-kind", f"unknown NextType {token!r}")


class JFTAParseError(ValueError):
    def __init__(self, code: str, message: str, node_id: str | None = None):
        super().__init__(message)
        self.code = code
        self.node_id = node_id


@dataclass(frozen=True)
class Node:
    id: str
    name: str
    kind: str
    children: tuple[Node, ...] = ()
    solution: str | None = None
    target: str | None = None

    @property
    def is_solution(self) -> bool:
        return self.kind == SOLUTION

    @property
    def is_link(self) -> bool:
        return self.kind == LINK

    def walk(self) -> Iterator[Node]:
        """Pre-order over the nested structure (LINKs are not followed)."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class FaultTree:
    root: Node
    nodes: tuple[Node, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.root.walk()))

    @cached_property
    def index(self) -> dict[str, Node]:
        # first occurrence wins; duplicates are reported by validate()
        index: dict[str, Node] = {}
        for node in self.nodes:
            index.setdefault(node.id, node)
        return index

    @cached_property
    def position(self) -> dict[str, int]:
        """Document position of every id (first occurrence)."""
        pos: dict[str, int] = {}
        for i, node in enumerate(self.nodes):
            pos.setdefault(node.id, i)
        return pos

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.index

    def __getitem__(self, node_id: str) -> Node:
        return self.index[node_id]

    def __len__(self) -> int:
        return len(self.nodes)

    def kind_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for node in self.nodes:
            counts[node.kind] = counts.get(node.kind, 0) + 1
        return counts


# --------------------------------------------------------------------------- parsing

def _pairs(obj: Any) -> list[tuple[str, Any]] | None:
    # object_pairs_hook keeps JSON objects as pair lists so duplicate keys survive
    if isinstance(obj, _PairList):
        return list(obj)
    return None


class _PairList(list):
    pass


def _node_from_pairs(node_id: str, body: Any, strict: bool) -> Node:
    fields = _pairs(body)
    if fields is None:
        raise JFTAParseError("malformed", f"node {node_id!r} is not an object", node_id)
    values: dict[str, Any] = {}
    for key, value in fields:
        values[key] = value
    missing = [k for k in ("NodeName", "NextType", "NextTree") if k not in values]
    if missing:
        raise JFTAParseError("malformed", f"node {node_id!r} lacks {', '.join(missing)}", node_id)
    name, token, payload = values["NodeName"], values["NextType"], values["NextTree"]
    if not isinstance(name, str):
        raise JFTAParseError("malformed", f"node {node_id!r} NodeName must be a string", node_id)
    if not isinstance(token, str):
        raise JFTAParseError("malformed", f"node {node_id!r} NextType must be a string", node_id)
    kind = canonical_kind(token)

    child_pairs = _pairs(payload)
    if kind in (SOLUTION, LINK):
        if isinstance(payload, str):
            if kind == SOLUTION:
                return Node(node_id, name, kind, solution=payload)
            return Node(node_id, name, kind, target=payload)
        if strict or child_pairs is None:
            raise JFTAParseError(
                "payload-mismatch", f"{kind} node {node_id!r} needs a string NextTree", node_id
            )
        # lenient mode keeps the bad shape so validate() can report it
        children = tuple(_node_from_pairs(k, v, strict) for k, v in child_pairs)
        return Node(node_id, name, kind, children=children)

    if child_pairs is None:
        raise JFTAParseError(
            "payload-mismatch", f"{kind} node {node_id!r} needs an object NextTree", node_id
        )
    children = tuple(_node_from_pairs(k, v, strict) for k, v in child_pairs)
    return Node(node_id, name, kind, children=children)


def parse_fault_tree(document: str, *, strict: bool = True) -> FaultTree:
    """Parse a JFTA document.

    Only shape is checked here (kind tokens and payload/kind agreement).
    With ``strict=False`` a Solution or LINK node carrying a child object is
    kept as-is instead of raising, so that ``validate`` can flag it.
    """
    try:
        data = json.loads(document, object_pairs_hook=_PairList)
    except json.JSONDecodeError as exc:
        raise JFTAParseError("malformed", f"invalid JSON: {exc}") from exc
    top = _pairs(data)
    if top is None:
        raise JFTAParseError("malformed", "document must be a JSON object")
    if len(top) != 1:
        raise JFTAParseError("multiple-roots", f"expected one root, found {len(top)}")
    root_id, body = top[0]
    return FaultTree(_node_from_pairs(root_id, body, strict))


def load_fault_tree(path: str, *, strict: bool = True) -> FaultTree:
    with open(path, encoding="utf-8") as fh:
        return parse_fault_tree(fh.read(), strict=strict)


def example_tree_text() -> str:
    """The bundled 15-node "Light does not turn on" document."""
    return resources.files("jfta_bench").joinpath("data/light.json").read_text(encoding="utf-8")


def example_tree() -> FaultTree:
    return parse_fault_tree(example_tree_text())


# --------------------------------------------------------------------------- serialization

def node_to_dict(node: Node) -> dict[str, Any]:
    if node.kind == SOLUTION and not node.children:
        payload: Any = node.solution or ""
    elif node.kind == LINK and not node.children:
        payload = node.target or ""
    else:
        payload = {child.id: node_to_dict(child) for child in node.children}
    return {"NodeName": node.name, "NextType": node.kind, "NextTree": payload}


def to_dict(tree: FaultTree) -> dict[str, Any]:
    return {tree.root.id: node_to_dict(tree.root)}


def serialize(tree: FaultTree) -> str:
    return json.dumps(to_dict(tree), indent=1, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    code: str
    node_id: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code, "node_id": self.node_id, "message": self.message}


def resolved_edges(tree: FaultTree) -> dict[str, list[str]]:
    """Child lists by id with LINK edges materialized (LINK -> target)."""
    edges: dict[str, list[str]] = {}
    for node in tree.nodes:
        out = edges.setdefault(node.id, [])
        out.extend(child.id for child in node.children)
        if node.is_link and node.target is not None and node.target != node.id:
            if node.target in tree.index:
                out.append(node.target)
    return edges


def _find_cycles(tree: FaultTree, edges: dict[str, list[str]]) -> list[Violation]:
    white, grey, black = 0, 1, 2
    colour = {node_id: white for node_id in edges}
    found: list[Violation] = []

    def visit(start: str) -> None:
        # iterative DFS keeps deep trees clear of the recursion limit
        colour[start] = grey
        stack: list[tuple[str, Iterator[str]]] = [(start, iter(edges[start]))]
        while stack:
            current, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[current] = black
                stack.pop()
                continue
            if colour[nxt] == grey:
                found.append(
                    Violation("cycle", current, f"edge {current} -> {nxt} closes a cycle")
                )
            elif colour[nxt] == white:
                colour[nxt] = grey
                stack.append((nxt, iter(edges[nxt])))

    visit(tree.root.id)
    for node_id in edges:
        if colour[node_id] == white:
            visit(node_id)
    return found


def validate(tree: FaultTree) -> list[Violation]:
    """Return every structural violation; an empty list means the tree is valid."""
    report: list[Violation] = []
    seen: set[str] = set()
    for node in tree.nodes:
        if node.id in seen:
            report.append(Violation("duplicate-id", node.id, f"id {node.id!r} is defined twice"))
        seen.add(node.id)

    for node in tree.nodes:
        if node.is_solution:
            if node.children:
                report.append(
                    Violation("solution-not-leaf", node.id, f"Solution {node.id!r} has children")
                )
            elif not node.solution:
                report.append(
                    Violation("empty-solution", node.id, f"Solution {node.id!r} has no text")
                )
        elif node.is_link:
            if node.children:
                report.append(Violation("link-children", node.id, f"LINK {node.id!r} has children"))
            elif node.target == node.id:
                report.append(Violation("self-link", node.id, f"LINK {node.id!r} targets itself"))
            elif node.target not in tree.index:
                report.append(
                    Violation(
                        "dangling-link", node.id, f"LINK {node.id!r} targets unknown id {node.target!r}"
                    )
                )
        elif not node.children:
            report.append(Violation("empty-gate", node.id, f"{node.kind} {node.id!r} has no children"))
        elif node.kind == FAULT and len(node.children) != 1:
            report.append(
                Violation(
                    "fault-arity", node.id, f"Fault {node.id!r} has {len(node.children)} children"
                )
            )

    report.extend(_find_cycles(tree, resolved_edges(tree)))
    return report
