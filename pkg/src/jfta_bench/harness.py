"""ReAct dialogue loop between an assistant and the rule-based user."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Protocol

import httpx

from .graph import build_index, divergence_node
from .jfta import XOR, FaultTree, serialize
from .sampler import FaultPath
from .user import Action, GroundTruth, RuleUser, UserReply

if TYPE_CHECKING:
    from .scenarios import ScenarioEntry

log = logging.getLogger(__name__)

STRIKE_LIMIT = 3


class MoveParseError(ValueError):
    pass


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class AssistantMove:
    think: str
    id: str
    response: str

    def to_dict(self) -> dict[str, str]:
        return {"think": self.think, "ID": self.id, "response": self.response}


def _field(obj: dict[str, Any], name: str) -> Any:
    for key, value in obj.items():
        if key.lower() == name.lower():
            return value
    raise MoveParseError(f"missing field {name!r}")


def parse_assistant_move(raw: str) -> AssistantMove:
    """Pull the first well-formed JSON object out of raw model text.

    Surrounding prose and code fences are tolerated; the object must carry
    ``think``, ``ID`` and ``response``.
    """
    decoder = json.JSONDecoder()
    problem = "no JSON object found"
    start = raw.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            start = raw.find("{", start + 1)
            continue
        if isinstance(obj, dict):
            try:
                return _move_from(obj)
            except MoveParseError as exc:
                problem = str(exc)  # keep looking; report the last defect seen
        start = raw.find("{", start + 1)
    raise MoveParseError(problem)


def _move_from(obj: dict[str, Any]) -> AssistantMove:
    think = _field(obj, "think")
    node_id = str(_field(obj, "ID")).strip()
    response = _field(obj, "response")
    if not node_id:
        raise MoveParseError("empty ID")
    if not isinstance(response, str) or not response.strip():
        raise MoveParseError("empty response")
    return AssistantMove(str(think), node_id, response)


# --------------------------------------------------------------------------- transcripts

@dataclass
class Turn:
    index: int
    raw: str
    move: AssistantMove | None
    reply: UserReply
    parse_error: str | None = None
    rollback: UserReply | None = None
    rollback_node: str | None = None

    def user_text(self) -> str:
        parts = [self.reply.response or self.reply.action.value]
        if self.rollback is not None:
            parts.append(self.rollback.response)
        return "\n".join(parts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "turn",
            "turn": self.index,
            "raw": self.raw,
            "move": self.move.to_dict() if self.move else None,
            "parse_error": self.parse_error,
            "reply": self.reply.to_wire(),
            "rollback": self.rollback.to_wire() if self.rollback else None,
            "rollback_node": self.rollback_node,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Turn:
        move = data.get("move")
        return cls(
            index=data["turn"],
            raw=data["raw"],
            move=AssistantMove(move["think"], move["ID"], move["response"]) if move else None,
            reply=UserReply.from_wire(data["reply"]),
            parse_error=data.get("parse_error"),
            rollback=UserReply.from_wire(data["rollback"]) if data.get("rollback") else None,
            rollback_node=data.get("rollback_node"),
        )


@dataclass
class SessionTranscript:
    entry_key: str
    opening: str
    system_prompt: str = ""
    turns: list[Turn] = field(default_factory=list)
    termination: str | None = None  # solved | turn_limit | protocol_failure
    transport_error: str | None = None

    @property
    def rollback_turn(self) -> int | None:
        for turn in self.turns:
            if turn.rollback is not None:
                return turn.index
        return None

    def messages(self) -> list[dict[str, str]]:
        """Chat history as the assistant sees it (user replies as plain text)."""
        out = [{"role": "user", "content": self.opening}]
        for turn in self.turns:
            out.append({"role": "assistant", "content": turn.raw})
            out.append({"role": "user", "content": turn.user_text()})
        return out


# --------------------------------------------------------------------------- dialogue knowledge

@dataclass
class Knowledge:
    """What the dialogue has established so far, as seen by a careful assistant.

    ``answers`` maps node id -> (state, turn). A rollback drops every answer
    given at or after the retracted one, then records the corrected state.
    Repairs accepted in that window stay resolved but become ``unverified``:
    they no longer count as known failures, so checking them again is allowed.
    """

    tree: FaultTree
    answers: dict[str, tuple[bool, int]] = field(default_factory=dict)
    resolved: dict[str, int] = field(default_factory=dict)
    unverified: set[str] = field(default_factory=set)
    epoch_start: int = 0
    epoch_answers: set[str] = field(default_factory=set)

    def status(self, node_id: str, _depth: int = 0) -> bool | None:
        tree = self.tree
        if node_id == tree.root.id:
            return True
        if node_id in self.answers:
            return self.answers[node_id][0]
        if node_id in self.resolved and node_id not in self.unverified:
            return True
        if _depth > len(tree):
            return None
        node = tree.index.get(node_id)
        if node is None:
            return None
        if node.is_link and node.target is not None:
            return self.status(node.target, _depth + 1)
        # a LINK mirrors its target, so an answered alias settles the target
        for alias in tree.nodes:
            if alias.is_link and alias.target == node_id and alias.id in self.answers:
                return self.answers[alias.id][0]
        return None

    def record(self, node_id: str, state: bool, turn: int) -> None:
        self.answers[node_id] = (state, turn)
        self.epoch_answers.add(node_id)

    def apply_rollback(self, node_id: str, state: bool, turn: int) -> None:
        if node_id in self.answers:
            cutoff = self.answers[node_id][1]
            self.answers = {n: a for n, a in self.answers.items() if a[1] < cutoff}
            self.unverified |= {n for n, t in self.resolved.items() if t >= cutoff}
        self.epoch_start = turn
        self.epoch_answers = set()
        self.record(node_id, state, turn)


def answered_node(turn: Turn, tree: FaultTree) -> str | None:
    """Node id a well-formed fault check in this turn settled, if any."""
    move, reply = turn.move, turn.reply
    if move is None or reply.action is not Action.FAULT:
        return None
    node = tree.index.get(move.id)
    if node is None or " ".join(node.name.lower().split()) != " ".join(reply.name.lower().split()):
        return None
    return move.id


def replay_knowledge(tree: FaultTree, turns: list[Turn]) -> Knowledge:
    k = Knowledge(tree)
    for turn in turns:
        apply_turn(k, turn)
    return k


def apply_turn(k: Knowledge, turn: Turn) -> None:
    node_id = answered_node(turn, k.tree)
    if node_id is not None:
        k.record(node_id, bool(turn.reply.verdict), turn.index)
    if turn.move is not None and turn.reply.action is Action.SOLUTION and turn.reply.verdict:
        k.resolved[turn.move.id] = turn.index
    if turn.rollback is not None and turn.rollback_node is not None:
        k.apply_rollback(turn.rollback_node, bool(turn.rollback.verdict), turn.index)


@dataclass(frozen=True)
class NextStep:
    kind: str  # "query" | "solve"
    node: str
    parent: str | None


def next_step(k: Knowledge, *, include_solutions: bool = True) -> NextStep | None:
    """The oracle's next action: depth-first, document order, XOR short-circuit."""
    tree = k.tree
    index = build_index(tree)
    seen = {tree.root.id}

    def visit(node_id: str) -> NextStep | None:
        node = tree[node_id]
        if node.is_solution:
            if include_solutions and node_id not in k.resolved:
                return NextStep("solve", node_id, None)
            return None
        xor = node.kind == XOR
        kids = index.children[node_id]
        if xor:
            # a failed arm already known (possibly through a LINK) rules out the rest
            known = [kid for kid in kids if k.status(kid)]
            if known:
                kids = known[:1]
        for kid in kids:
            state = k.status(kid)
            if kid in seen:
                if xor and state:
                    return None
                continue
            if state is None:
                return NextStep("query", kid, node_id)
            seen.add(kid)
            if state:
                found = visit(kid)
                if found is not None:
                    return found
                if xor:
                    return None
        return None

    return visit(tree.root.id)


# --------------------------------------------------------------------------- oracle assistant

_QUERY_TEMPLATES = (
    "Could you take a look for signs of {name}?",
    "Next, let's examine {name}.",
    "Please check whether you can observe {name}.",
    "Let's look into {name} now.",
)
_SOLVE_TEMPLATES = (
    "{name} can be resolved this way: {solution}.",
    "To fix {name}, please {solution_lc}.",
    "For {name}, the remedy is: {solution}.",
)


def oracle_assistant_step(tree: FaultTree, transcript: SessionTranscript) -> AssistantMove:
    """Reference diagnosis policy; reads only the tree and the dialogue so far."""
    k = replay_knowledge(tree, transcript.turns)
    step = next_step(k)
    turn = len(transcript.turns) + 1
    if step is None:
        root = tree.root
        return AssistantMove(
            "Every branch has been examined.", root.id, "All checks are complete on my side."
        )
    node = tree[step.node]
    if step.kind == "solve":
        solution = node.solution or ""
        text = _SOLVE_TEMPLATES[turn % len(_SOLVE_TEMPLATES)].format(
            name=node.name, solution=solution, solution_lc=solution[:1].lower() + solution[1:]
        )
        return AssistantMove(
            "The user confirmed this bottom-level cause, so it can be repaired directly.",
            node.id,
            text,
        )
    parent = tree[step.parent] if step.parent else tree.root
    text = _QUERY_TEMPLATES[turn % len(_QUERY_TEMPLATES)].format(name=node.name)
    return AssistantMove(
        f"{parent.name} is established; its next unexplored branch should be checked.",
        node.id,
        text,
    )


# --------------------------------------------------------------------------- adapters

class AssistantAdapter(Protocol):
    def next_move(self, system_prompt: str, transcript: SessionTranscript) -> str: ...


class OracleAdapter:
    def __init__(self, tree: FaultTree):
        self.tree = tree

    def next_move(self, system_prompt: str, transcript: SessionTranscript) -> str:
        move = oracle_assistant_step(self.tree, transcript)
        return "```json\n" + json.dumps(move.to_dict(), indent=4, ensure_ascii=False) + "\n```"


@dataclass
class EndpointConfig:
    url: str
    model: str
    api_key_env: str = "JFTA_API_KEY"
    timeout: float = 60.0
    retries: int = 3
    temperature: float = 0.0
    backoff: float = 1.0


class EndpointAdapter:
    """Generic chat-completion client: POST {model, messages, temperature}."""

    def __init__(self, config: EndpointConfig, client: httpx.Client | None = None):
        self.config = config
        self.client = client or httpx.Client(timeout=config.timeout)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.config.api_key_env)
        return {"Authorization": f"Bearer {key}"} if key else {}

    def next_move(self, system_prompt: str, transcript: SessionTranscript) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "system", "content": system_prompt}, *transcript.messages()],
            "temperature": self.config.temperature,
        }
        last: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self.client.post(
                    self.config.url, json=payload, headers=self._headers(), timeout=self.config.timeout
                )
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last = exc
                log.warning("endpoint call failed (attempt %d): %s", attempt + 1, exc)
                if attempt < self.config.retries:
                    time.sleep(self.config.backoff * 2**attempt)
        raise TransportError(f"endpoint unreachable after {self.config.retries + 1} attempts: {last}")


# --------------------------------------------------------------------------- system prompt

SYSTEM_PROMPT_TEMPLATE = """\
You are a technical support engineer for {field}. Help the user find every root cause of the \
reported problem and repair it.

The fault tree below (JFTA format) describes how the top-level symptom decomposes into \
intermediate faults and, at the bottom, directly repairable causes with their repair actions:
{fault_tree}

How to work:
- Start at the top-level symptom the user reports and descend the tree one node per turn.
- Either ask the user to check exactly one node, or propose the repair for one confirmed \
bottom-level cause.
- Name the node in full in every message. When repairing, give both the node name and the repair.
- Several bottom-level causes may be present; the issue is fixed only when all are repaired.
- The user may correct an earlier observation; update your picture of the tree when that happens.

Reply with exactly one JSON object:
{{"think": "<your reasoning>", "ID": "<id of the node handled this turn>", "response": "<what \
to check or how to repair, under 20 words>"}}
"""


def system_prompt(tree: FaultTree, field_name: str = "equipment maintenance") -> str:
    return SYSTEM_PROMPT_TEMPLATE.format(field=field_name, fault_tree=serialize(tree))


# --------------------------------------------------------------------------- session loop

def prefix_confirmed(k: Knowledge, prefix: tuple[str, ...]) -> bool:
    return all(k.status(n) is True for n in prefix)


def run_session(
    entry: ScenarioEntry,
    tree: FaultTree,
    assistant: AssistantAdapter,
    *,
    rng_seed: int = 0,
    field_name: str = "equipment maintenance",
) -> SessionTranscript:
    """Drive one dialogue until solved, out of turns, or protocol failure."""
    truth = GroundTruth(entry.path_a, entry.path_b if entry.rollback_turn is not None else None)
    user = RuleUser(tree, truth, style_seed=rng_seed)
    prompt = system_prompt(tree, field_name)
    transcript = SessionTranscript(entry.key, user.opening(), prompt)
    prefix = entry.path_a.order[: entry.prefix_len]
    divergence = divergence_node(tree, entry.path_a.selected, entry.path_b.selected)
    k = Knowledge(tree)
    strikes = 0

    for index in range(1, entry.max_turns + 1):
        try:
            raw = assistant.next_move(prompt, transcript)
        except TransportError as exc:
            transcript.transport_error = str(exc)
            transcript.termination = "protocol_failure"
            return transcript
        try:
            move = parse_assistant_move(raw)
        except MoveParseError as exc:
            strikes += 1
            transcript.turns.append(Turn(index, raw, None, UserReply.invalid(), parse_error=str(exc)))
            if strikes >= STRIKE_LIMIT:
                transcript.termination = "protocol_failure"
                return transcript
            continue
        strikes = 0
        turn = Turn(index, raw, move, user.reply(move, index))
        apply_turn(k, turn)
        if (
            truth.pending is not None
            and divergence is not None
            and entry.rollback_turn is not None
            and index >= entry.rollback_turn
            and prefix_confirmed(k, prefix)
        ):
            turn.rollback_node = divergence[0]
            turn.rollback = user.rollback(divergence[0], index)
            k.apply_rollback(divergence[0], bool(turn.rollback.verdict), index)
        transcript.turns.append(turn)
        if truth.solved():
            transcript.termination = "solved"
            return transcript
    transcript.termination = "turn_limit"
    return transcript


def simulate_oracle(tree: FaultTree, path: FaultPath, max_turns: int) -> list[Turn]:
    """Oracle assistant against a fixed path with no rollback (used to place rollbacks)."""
    truth = GroundTruth(path)
    user = RuleUser(tree, truth)
    transcript = SessionTranscript("simulation", user.opening())
    for index in range(1, max_turns + 1):
        move = oracle_assistant_step(tree, transcript)
        transcript.turns.append(Turn(index, "", move, user.reply(move, index)))
        if truth.solved():
            break
    return transcript.turns


# --------------------------------------------------------------------------- persistence

def write_transcript(
    path: Any, transcript: SessionTranscript, entry: ScenarioEntry, tree: FaultTree
) -> None:
    """One JSON record per line: session header, every turn, end marker."""
    header = {
        "type": "session",
        "key": transcript.entry_key,
        "entry": entry.to_dict(),
        "tree": serialize(tree),
        "system_prompt": transcript.system_prompt,
        "opening": transcript.opening,
    }
    end = {
        "type": "end",
        "termination": transcript.termination,
        "transport_error": transcript.transport_error,
        "turns": len(transcript.turns),
    }
    with open(path, "w", encoding="utf-8") as fh:
        for record in (header, *(t.to_dict() for t in transcript.turns), end):
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_transcript(path: Any) -> tuple[dict[str, Any], SessionTranscript]:
    """Inverse of ``write_transcript``; returns (header, transcript)."""
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records or records[0].get("type") != "session":
        raise ValueError(f"{path}: missing session header")
    header = records[0]
    transcript = SessionTranscript(header["key"], header["opening"], header.get("system_prompt", ""))
    for record in records[1:]:
        if record["type"] == "turn":
            transcript.turns.append(Turn.from_dict(record))
        elif record["type"] == "end":
            transcript.termination = record.get("termination")
            transcript.transport_error = record.get("transport_error")
    return header, transcript
