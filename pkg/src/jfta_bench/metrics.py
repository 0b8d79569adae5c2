"""Error taxonomy, aggregate scoring and the node-edge representation."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

from .graph import build_index
from .harness import Knowledge, SessionTranscript, apply_turn, next_step
from .jfta import LINK, SOLUTION, XOR, FaultTree, Node, serialize
from .user import Action, is_remedy, mentioned_names, normalize

KINDS = ("Path", "Plan", "Solution", "Graph")


@dataclass(frozen=True)
class ErrorEvent:
    kind: str
    turn: int
    node_id: str
    note: str

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "turn": self.turn, "node_id": self.node_id, "note": self.note}


def open_nodes(k: Knowledge, tree: FaultTree) -> set[str]:
    """Nodes still reachable from the root without crossing a ruled-out node.

    An XOR with a confirmed child only leads on through that child.
    """
    index = build_index(tree)
    seen = {tree.root.id}
    stack = [tree.root.id]
    while stack:
        node_id = stack.pop()
        kids = index.children[node_id]
        if tree[node_id].kind == XOR:
            known = [kid for kid in kids if k.status(kid)]
            kids = tuple(known) or kids
        for kid in kids:
            if kid not in seen and k.status(kid) is not False:
                seen.add(kid)
                stack.append(kid)
    return seen


def _graph_error(k: Knowledge, tree: FaultTree, node_id: str, names: list[str], remedy: bool) -> str | None:
    node = tree.index.get(node_id)
    if node is None:
        return "queried id is not in the tree"
    if remedy:
        return None
    if names != [normalize(node.name)]:
        return "ID and named node disagree"
    if node_id not in open_nodes(k, tree) and k.status(node_id) is None:
        return "node lies under a ruled-out branch or an excluded XOR arm"
    return None


def _plan_error(k: Knowledge, tree: FaultTree, node_id: str, remedy: bool) -> str | None:
    if remedy:
        return "repair re-proposed for a resolved cause" if node_id in k.resolved else None
    if node_id == tree.root.id:
        return "top-level symptom re-checked"
    if node_id in k.epoch_answers:
        return "node re-checked after the user already answered"
    if node_id in k.resolved and node_id not in k.unverified:
        return "resolved cause re-checked"
    return None


def _solution_error(tree: FaultTree, node_id: str, names: list[str], remedy: bool, accepted: bool) -> str | None:
    if not remedy:
        return None
    node = tree[node_id]
    if node.kind != SOLUTION:
        return "repair proposed for a node that is not a bottom-level cause"
    if names != [normalize(node.name)]:
        return "repair attached to the wrong identifier"
    if not accepted:
        return "wrong repair or not a current root cause"
    return None


def _path_error(k: Knowledge, tree: FaultTree, node_id: str, remedy: bool) -> str | None:
    if remedy:
        return None
    step = next_step(k, include_solutions=False)
    if step is None or step.parent is None:
        return None
    if node_id not in build_index(tree).descendants(step.parent):
        if k.epoch_start:
            return "diagnosis did not resume at the corrected node"
        return "left an open subtree before finishing it"
    return None


def classify_errors(transcript: SessionTranscript, tree: FaultTree) -> list[ErrorEvent]:
    """At most one event per assistant turn; precedence Graph > Plan > Solution > Path."""
    k = Knowledge(tree)
    events: list[ErrorEvent] = []
    for turn in transcript.turns:
        move = turn.move
        if move is not None:
            names = mentioned_names(move.response, tree)
            remedy = is_remedy(move.response, tree)
            accepted = turn.reply.action is Action.SOLUTION and bool(turn.reply.verdict)
            note = _graph_error(k, tree, move.id, names, remedy)
            kind = "Graph"
            if note is None:
                note, kind = _plan_error(k, tree, move.id, remedy), "Plan"
            if note is None:
                note, kind = _solution_error(tree, move.id, names, remedy, accepted), "Solution"
            if note is None:
                note, kind = _path_error(k, tree, move.id, remedy), "Path"
            if note is not None:
                events.append(ErrorEvent(kind, turn.index, move.id, note))
        apply_turn(k, turn)
    return events


@dataclass(frozen=True)
class SessionVerdict:
    key: str
    level: int
    success: bool
    turns: int
    errors: tuple[ErrorEvent, ...] = ()
    termination: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "level": self.level,
            "success": self.success,
            "turns": self.turns,
            "termination": self.termination,
            "errors": [e.to_dict() for e in self.errors],
        }


def score_session(transcript: SessionTranscript, tree: FaultTree, level: int) -> SessionVerdict:
    return SessionVerdict(
        key=transcript.entry_key,
        level=level,
        success=transcript.termination == "solved",
        turns=len(transcript.turns),
        errors=tuple(classify_errors(transcript, tree)),
        termination=transcript.termination or "",
    )


@dataclass
class AggregateReport:
    correct: dict[int, float]
    total_correct: float
    avg_turns: float
    error_share: dict[str, float]
    sessions: dict[int, int] = field(default_factory=dict)
    error_events: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "error_action_pct": {kind: round(self.error_share[kind], 2) for kind in KINDS},
            "correct_pct": {f"level_{lvl}": round(v, 2) for lvl, v in sorted(self.correct.items())},
            "total_correct_pct": round(self.total_correct, 2),
            "avg_turns": round(self.avg_turns, 2),
            "sessions": {f"level_{lvl}": n for lvl, n in sorted(self.sessions.items())},
            "error_events": self.error_events,
        }

    def table(self) -> str:
        levels = sorted(self.correct)
        head = [*KINDS, *(f"Level {lvl}" for lvl in levels), "Total", "Avg Turns"]
        vals = [
            *(self.error_share[kind] for kind in KINDS),
            *(self.correct[lvl] for lvl in levels),
            self.total_correct,
            self.avg_turns,
        ]
        width = max(len(h) for h in head) + 1
        line1 = f"{'Error Action(%)':<{4 * width}}{'Correct(%)':<{(len(levels) + 1) * width}}"
        line2 = "".join(f"{h:>{width}}" for h in head)
        line3 = "".join(f"{v:>{width}.2f}" for v in vals)
        return "\n".join([line1, line2, line3]) + "\n"


def aggregate(verdicts: list[SessionVerdict]) -> AggregateReport:
    if not verdicts:
        raise ValueError("cannot aggregate an empty verdict list")
    by_level: dict[int, list[SessionVerdict]] = {}
    for v in verdicts:
        by_level.setdefault(v.level, []).append(v)
    correct = {
        lvl: 100.0 * sum(v.success for v in vs) / len(vs) for lvl, vs in sorted(by_level.items())
    }
    kinds = Counter(e.kind for v in verdicts for e in v.errors)
    n_events = sum(kinds.values())
    share = {kind: (100.0 * kinds[kind] / n_events if n_events else 0.0) for kind in KINDS}
    return AggregateReport(
        correct=correct,
        total_correct=100.0 * sum(v.success for v in verdicts) / len(verdicts),
        avg_turns=sum(v.turns for v in verdicts) / len(verdicts),
        error_share=share,
        sessions={lvl: len(vs) for lvl, vs in by_level.items()},
        error_events=n_events,
    )


# --------------------------------------------------------------------------- node-edge form

def to_node_edge(tree: FaultTree) -> dict[str, list[dict[str, str]]]:
    """Flat node list plus parent/child edges, LINK edges included."""
    nodes: list[dict[str, str]] = []
    edges: list[dict[str, str]] = []
    for node in tree.nodes:
        record = {"id": node.id, "name": node.name, "kind": node.kind}
        if node.is_solution:
            record["solution_text"] = node.solution or ""
        nodes.append(record)
        edges.extend({"parent": node.id, "child": child.id} for child in node.children)
        if node.is_link and node.target is not None:
            edges.append({"parent": node.id, "child": node.target})
    return {"nodes": nodes, "edges": edges}


def from_node_edge(doc: dict[str, list[dict[str, str]]]) -> FaultTree:
    """Rebuild the nested tree; a LINK's single outgoing edge becomes its target."""
    records = {r["id"]: r for r in doc["nodes"]}
    nested: dict[str, list[str]] = {node_id: [] for node_id in records}
    targets: dict[str, str] = {}
    has_parent: set[str] = set()
    for edge in doc["edges"]:
        parent, child = edge["parent"], edge["child"]
        if records[parent]["kind"] == LINK:
            targets[parent] = child
        else:
            nested[parent].append(child)
            has_parent.add(child)
    roots = [node_id for node_id in records if node_id not in has_parent]
    if len(roots) != 1:
        raise ValueError(f"expected one root, found {roots}")

    def build(node_id: str) -> Node:
        r = records[node_id]
        if r["kind"] == SOLUTION:
            return Node(node_id, r["name"], SOLUTION, solution=r.get("solution_text", ""))
        if r["kind"] == LINK:
            return Node(node_id, r["name"], LINK, target=targets.get(node_id))
        return Node(node_id, r["name"], r["kind"], children=tuple(build(c) for c in nested[node_id]))

    return FaultTree(build(roots[0]))


def serialize_node_edge(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def _compact(text: str) -> int:
    return len(json.dumps(json.loads(text), separators=(",", ":"), ensure_ascii=False))


def length_stats(tree: FaultTree) -> dict[str, float]:
    """Character counts of both forms with layout whitespace stripped.

    Indentation grows with nesting depth, so the indented counts mostly
    measure how deep the tree is; they are reported alongside for reference.
    """
    jfta, ne = serialize(tree), serialize_node_edge(to_node_edge(tree))
    jfta_chars, ne_chars = _compact(jfta), _compact(ne)
    return {
        "jfta_chars": jfta_chars,
        "node_edge_chars": ne_chars,
        "ratio": ne_chars / jfta_chars,
        "jfta_chars_indented": len(jfta),
        "node_edge_chars_indented": len(ne),
    }
