"""Rule-based user simulator.

The user knows the active fault path and the repair text for each root
cause. Each assistant move is classified (fault check, repair proposal or
invalid), judged against that ground truth, and answered with a vague,
non-committal observation in the style of a non-expert on site.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

from .graph import effective_failures
from .jfta import FaultTree
from .sampler import FaultPath

if TYPE_CHECKING:
    from .harness import AssistantMove


class Action(str, Enum):
    FAULT = "Fault Confirmation"
    SOLUTION = "Solution Confirmation"
    INVALID = "Invalid Input"


@dataclass(frozen=True)
class UserReply:
    action: Action
    name: str = ""
    verdict: bool | None = None
    response: str = ""

    def __post_init__(self) -> None:
        if self.action is Action.INVALID:
            if self.name or self.verdict is not None or self.response:
                raise ValueError("an Invalid Input reply carries no name, verdict or response")
        elif self.verdict is None:
            raise ValueError(f"{self.action.value} reply needs a verdict")

    def to_wire(self) -> dict[str, str]:
        verdict = "" if self.verdict is None else str(self.verdict)
        return {
            "action": self.action.value,
            "name": self.name,
            "return": verdict,
            "response": self.response,
        }

    @classmethod
    def from_wire(cls, data: dict[str, str]) -> UserReply:
        raw = data.get("return", "")
        verdict = None if raw == "" else raw == "True"
        return cls(Action(data["action"]), data.get("name", ""), verdict, data.get("response", ""))

    @classmethod
    def invalid(cls) -> UserReply:
        return cls(Action.INVALID)


@dataclass
class GroundTruth:
    active: FaultPath
    pending: FaultPath | None = None  # path switched to at rollback
    resolved: set[str] = field(default_factory=set)
    rolled_back: bool = False

    @property
    def solution_map(self) -> dict[str, str]:
        return dict(self.active.root_causes)

    def failed(self, tree: FaultTree) -> frozenset[str]:
        return effective_failures(tree, self.active.selected)

    def solved(self) -> bool:
        return set(self.active.cause_ids) <= self.resolved


class RollbackError(RuntimeError):
    pass


# --------------------------------------------------------------------------- move classification

def normalize(text: str) -> str:
    return " ".join(text.lower().split())


_REMEDY_CUES = re.compile(
    r"\b(resolv\w*|fix\w*|repair\w*|replac\w*|reinstall\w*|install\w*|solution|remed\w*|"
    r"can be handled|to address)\b"
)


def _name_patterns(tree: FaultTree) -> dict[str, re.Pattern[str]]:
    cached = tree.__dict__.get("_name_patterns")
    if cached is None:
        cached = {}
        for node in tree.nodes:
            key = normalize(node.name)
            if key and key not in cached:
                cached[key] = re.compile(r"(?<![0-9a-z])" + re.escape(key) + r"(?![0-9a-z])")
        tree.__dict__["_name_patterns"] = cached
    return cached


def mentioned_names(text: str, tree: FaultTree) -> list[str]:
    """Normalized node names occurring in ``text``, longest match wins on overlap."""
    norm = normalize(text)
    spans: list[tuple[int, int, str]] = []
    for key, pattern in _name_patterns(tree).items():
        spans.extend((m.start(), m.end(), key) for m in pattern.finditer(norm))
    kept = [
        s for s in spans
        if not any(o is not s and o[0] <= s[0] and s[1] <= o[1] and (o[1] - o[0]) > (s[1] - s[0])
                   for o in spans)
    ]
    names: list[str] = []
    for _, _, key in sorted(kept):
        if key not in names:
            names.append(key)
    return names


def _ids_named(tree: FaultTree, key: str) -> list[str]:
    return [node.id for node in tree.nodes if normalize(node.name) == key]


def is_remedy(text: str, tree: FaultTree) -> bool:
    """Does the text propose a repair (cue words or a known solution text)?"""
    norm = normalize(text)
    for key in mentioned_names(text, tree):
        norm = norm.replace(key, " ")
    if _REMEDY_CUES.search(norm):
        return True
    return any(
        node.solution and normalize(node.solution) in normalize(text)
        for node in tree.nodes
        if node.is_solution
    )


@dataclass(frozen=True)
class Classification:
    action: Action
    name: str = ""  # canonical NodeName of the node the move is about


def classify_action(move: AssistantMove, tree: FaultTree) -> Classification:
    """Decide whether a move checks one fault, proposes one repair, or is invalid."""
    names = mentioned_names(move.response, tree)
    if len(names) != 1:
        # nothing recognisable, or several faults at once
        return Classification(Action.INVALID)
    key = names[0]
    canonical = tree[_ids_named(tree, key)[0]].name
    if is_remedy(move.response, tree):
        if not any(tree[i].is_solution for i in _ids_named(tree, key)):
            return Classification(Action.INVALID)
        return Classification(Action.SOLUTION, canonical)
    return Classification(Action.FAULT, canonical)


# --------------------------------------------------------------------------- vague rendering

HEDGES = (
    "seems", "seem", "feels", "feel", "kind of", "sort of", "maybe", "might",
    "i think", "not sure", "probably", "as far as i can tell", "a bit", "a little",
)
CONCLUSIVE_TERMS = ("exists", "does not exist", "doesn't exist", "normal", "fault", "broken")

_FAULT_TRUE = (
    "I think the part you mentioned seems to be acting a bit off compared to before.",
    "Hmm, it kind of feels like that area is behaving differently than it used to.",
    "Something around there seems a little strange lately, like it's working harder than it should.",
    "Looking at that piece, it sort of seems like it isn't doing its job the way it used to.",
    "I'm not sure, but that section might be the trouble spot; it looks a bit different from what I remember.",
    "It feels like the thing you're pointing at has been a little unsteady recently.",
    "There's maybe a faint change there, it seems warmer and noisier than I'd expect.",
)
_FAULT_FALSE = (
    "I took a look at that part and I haven't noticed anything unusual there, as far as I can tell.",
    "That area seems about the same as always; I haven't noticed any particular changes.",
    "Hmm, I haven't noticed anything standing out there, it kind of looks like it usually does.",
    "As far as I can tell it seems fine; I haven't noticed anything odd about it.",
    "I checked around there and I haven't really noticed a difference, it feels pretty much as usual.",
)
_SOLUTION_TRUE = (
    "Okay, I did that and the issue has been resolved.",
    "That worked, the issue has been resolved.",
    "I tried it and the issue has been resolved.",
)
_SOLUTION_FALSE = (
    "Nothing changed after trying it; the method is ineffective.",
    "I tried that, but the method is ineffective.",
    "That didn't help; the method is ineffective.",
)
_CORRECTION = (
    "Sorry, I need to take back what I said earlier about {name}. Looking at it again, {detail}",
    "Wait, I think I got {name} wrong before. Checking once more, {detail}",
)
_CORRECTION_TRUE = "it does seem a bit off after all."
_CORRECTION_FALSE = "I haven't noticed anything unusual there after all, it seems fine."


def _bank(action: Action, verdict: bool) -> tuple[str, ...]:
    if action is Action.FAULT:
        return _FAULT_TRUE if verdict else _FAULT_FALSE
    if action is Action.SOLUTION:
        return _SOLUTION_TRUE if verdict else _SOLUTION_FALSE
    raise ValueError("Invalid Input replies have no response text")


def _pick(bank: tuple[str, ...], style_seed: Any, avoid: int | None) -> int:
    choices = [i for i in range(len(bank)) if i != avoid]
    return random.Random(f"{style_seed}").choice(choices)


def render_vague(
    name: str, verdict: bool, action: Action, style_seed: Any, *, avoid: int | None = None
) -> str:
    """Natural-language reply; fault checks are hedged and never conclusive.

    ``avoid`` is the template index used last turn, which is never reused.
    The node name itself is never echoed back.
    """
    bank = _bank(action, verdict)
    return bank[_pick(bank, (name, style_seed), avoid)]


# --------------------------------------------------------------------------- decisions

def _fault_verdict(move: AssistantMove, name: str, truth: GroundTruth, tree: FaultTree) -> bool:
    node = tree.index.get(move.id)
    if node is None or normalize(node.name) != normalize(name):
        return False
    return move.id in truth.failed(tree)


def _solution_verdict(move: AssistantMove, name: str, truth: GroundTruth, tree: FaultTree) -> bool:
    node = tree.index.get(move.id)
    if node is None or not node.is_solution or normalize(node.name) != normalize(name):
        return False
    solutions = truth.solution_map
    if move.id not in solutions or move.id in truth.resolved:
        return False
    return normalize(solutions[move.id]) in normalize(move.response)


def decide(move: AssistantMove, truth: GroundTruth, tree: FaultTree) -> tuple[Action, str, bool | None]:
    """(action, name, verdict) for a move without touching the ground truth."""
    cls = classify_action(move, tree)
    if cls.action is Action.FAULT:
        return cls.action, cls.name, _fault_verdict(move, cls.name, truth, tree)
    if cls.action is Action.SOLUTION:
        return cls.action, cls.name, _solution_verdict(move, cls.name, truth, tree)
    return Action.INVALID, "", None


def step_user(
    move: AssistantMove,
    truth: GroundTruth,
    tree: FaultTree,
    style_seed: Any,
    *,
    avoid: int | None = None,
) -> UserReply:
    """Answer one move; an accepted repair marks its root cause resolved in ``truth``."""
    action, name, verdict = decide(move, truth, tree)
    if action is Action.INVALID:
        return UserReply.invalid()
    assert verdict is not None
    if action is Action.SOLUTION and verdict:
        truth.resolved.add(move.id)
    return UserReply(action, name, verdict, render_vague(name, verdict, action, style_seed, avoid=avoid))


def emit_rollback(
    truth: GroundTruth, divergence: str, tree: FaultTree, style_seed: Any = 0
) -> UserReply:
    """Retract an earlier observation and switch the ground truth to the second path.

    The reply names the divergence node and carries its state on the new
    path. Resolved causes that are still root causes there stay resolved.
    """
    if truth.rolled_back:
        raise RollbackError("rollback already fired in this session")
    if truth.pending is None:
        raise RollbackError("no second path to roll back to")
    truth.active, truth.pending = truth.pending, None
    truth.rolled_back = True
    truth.resolved &= set(truth.active.cause_ids)
    verdict = divergence in truth.failed(tree)
    name = tree[divergence].name
    template = _CORRECTION[random.Random(f"{style_seed}/rollback").randrange(len(_CORRECTION))]
    detail = _CORRECTION_TRUE if verdict else _CORRECTION_FALSE
    return UserReply(Action.FAULT, name, verdict, template.format(name=name, detail=detail))


class RuleUser:
    """Session-scoped user: wraps the pure functions and remembers its last template."""

    def __init__(self, tree: FaultTree, truth: GroundTruth, style_seed: Any = 0):
        self.tree = tree
        self.truth = truth
        self.style_seed = style_seed
        self._last: dict[tuple[Action, bool], int] = {}

    def opening(self) -> str:
        return (
            f"Hi, we have a problem here: {self.tree.root.name}. "
            "Could you help me work out what is going on?"
        )

    def reply(self, move: AssistantMove, turn: int) -> UserReply:
        seed = f"{self.style_seed}:{turn}"
        action, _, verdict = decide(move, self.truth, self.tree)
        key = (action, bool(verdict))
        reply = step_user(move, self.truth, self.tree, seed, avoid=self._last.get(key))
        if reply.action is not Action.INVALID:
            self._last[key] = _bank(reply.action, bool(reply.verdict)).index(reply.response)
        return reply

    def rollback(self, divergence: str, turn: int) -> UserReply:
        return emit_rollback(self.truth, divergence, self.tree, f"{self.style_seed}:{turn}")
