"""Benchmark entries: same-level path pairs sharing a prefix, plus a rollback point."""

from __future__ import annotations

import json
import random
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean
from typing import Any

from .graph import divergence_node
from .harness import Knowledge, OracleAdapter, apply_turn, run_session, simulate_oracle, system_prompt
from .jfta import FaultTree
from .sampler import FaultPath, SamplingError, level_cause_range, sample_path
from .user import Action

PATH_BUDGET = 200
PAIR_BUDGET = 200
LEVEL_RETRIES = 8


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioEntry:
    tree_id: str
    level: int
    path_a: FaultPath
    path_b: FaultPath
    prefix_len: int
    rollback_turn: int | None
    max_turns: int
    key: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "tree_id": self.tree_id,
            "level": self.level,
            "path_a": self.path_a.to_dict(),
            "path_b": self.path_b.to_dict(),
            "prefix_len": self.prefix_len,
            "rollback_turn": self.rollback_turn,
            "max_turns": self.max_turns,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ScenarioEntry:
        return cls(
            tree_id=data["tree_id"],
            level=data["level"],
            path_a=FaultPath.from_dict(data["path_a"]),
            path_b=FaultPath.from_dict(data["path_b"]),
            prefix_len=data["prefix_len"],
            rollback_turn=data["rollback_turn"],
            max_turns=data["max_turns"],
            key=data.get("key", ""),
        )


def common_prefix(a: Iterable[str], b: Iterable[str]) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def turn_budget(path_a: FaultPath, path_b: FaultPath) -> int:
    return 3 * len(path_a.selected | path_b.selected) + 10


@dataclass
class _Timeline:
    """When the oracle, running against one path, confirms and answers each node."""

    confirmed_at: dict[str, int]
    answered_at: dict[str, int]
    end: int
    solved: bool

    @classmethod
    def of(cls, tree: FaultTree, path: FaultPath, limit: int) -> _Timeline:
        turns = simulate_oracle(tree, path, limit)
        k = Knowledge(tree)
        confirmed = {tree.root.id: 0}
        answered: dict[str, int] = {}
        for turn in turns:
            apply_turn(k, turn)
            if turn.move is not None and turn.reply.action is Action.FAULT:
                answered.setdefault(turn.move.id, turn.index)
            for node in tree.nodes:
                if node.id not in confirmed and k.status(node.id):
                    confirmed[node.id] = turn.index
        solved = set(path.cause_ids) <= k.resolved.keys()
        return cls(confirmed, answered, len(turns), solved)

    def rollback_window(self, prefix: tuple[str, ...], divergence: str) -> tuple[int, int] | None:
        if any(n not in self.confirmed_at for n in prefix) or divergence not in self.answered_at:
            return None
        lo = max(max(self.confirmed_at[n] for n in prefix) + 1, self.answered_at[divergence])
        hi = self.end - 1
        return (lo, hi) if lo <= hi else None


def _sample_at_level(
    tree: FaultTree, level: int, rng: random.Random, keep: tuple[str, ...] = ()
) -> FaultPath | None:
    solutions = [n.id for n in tree.nodes if n.is_solution]
    _, hi = level_cause_range(level)
    k = rng.randint(1, min(hi, len(solutions)))
    seeds = list(keep[: rng.randint(0, min(len(keep), k))])
    pool = [s for s in solutions if s not in seeds]
    seeds += rng.sample(pool, min(len(pool), k - len(seeds)))
    try:
        # blind seed draws are often jointly infeasible, so give up early
        path = sample_path(tree, seeds, rng.randrange(2**31), retries=LEVEL_RETRIES)
    except SamplingError:
        return None
    if path.level != level:
        return None
    return path


def build_entry(
    tree: FaultTree, level: int, rng_seed: int, *, tree_id: str = "tree", key: str = ""
) -> ScenarioEntry:
    """Sample path A at ``level``, then the same-level path B with the longest usable prefix.

    A pair is usable when a top-down diagnosis can tell the paths apart and a
    rollback turn exists after the shared prefix (and after the diverging
    node has been answered) but before the oracle would finish path A.
    """
    rng = random.Random(f"{rng_seed}/entry/{level}")
    timeline = None
    path_a = None
    for _ in range(PATH_BUDGET):
        path_a = _sample_at_level(tree, level, rng)
        if path_a is None:
            continue
        timeline = _Timeline.of(tree, path_a, 10 * len(tree) + 10)
        if timeline.solved:
            break
        path_a = None
    if path_a is None or timeline is None:
        raise ScenarioError(f"level {level} is infeasible for tree {tree_id!r}")

    best: tuple[int, FaultPath, tuple[int, int]] | None = None
    seen: set[frozenset[str]] = {path_a.selected}
    for _ in range(PAIR_BUDGET):
        path_b = _sample_at_level(tree, level, rng, keep=path_a.cause_ids)
        if path_b is None or path_b.selected in seen:
            continue
        seen.add(path_b.selected)
        diverge = divergence_node(tree, path_a.selected, path_b.selected)
        if diverge is None:
            continue
        prefix_len = common_prefix(path_a.order, path_b.order)
        window = timeline.rollback_window(path_a.order[:prefix_len], diverge[0])
        if window is None:
            continue
        if best is None or prefix_len > best[0]:
            best = (prefix_len, path_b, window)
    if best is None:
        raise ScenarioError(f"no second level-{level} path pairs with {path_a.order} in {tree_id!r}")

    prefix_len, path_b, (lo, hi) = best
    return ScenarioEntry(
        tree_id=tree_id,
        level=level,
        path_a=path_a,
        path_b=path_b,
        prefix_len=prefix_len,
        rollback_turn=rng.randint(lo, hi),
        max_turns=turn_budget(path_a, path_b),
        key=key or f"{tree_id}-L{level}-{rng_seed}",
    )


# --------------------------------------------------------------------------- datasets

def render_user_prompt(tree: FaultTree, path: FaultPath) -> str:
    chain = " -> ".join(tree[n].name for n in path.order)
    causes = "\n".join(f"- {tree[cid].name}: {text}" for cid, text in path.root_causes)
    return (
        "You are an on-site operator working through a problem with a support assistant.\n"
        f"Known failed nodes (top to bottom): {chain}\n"
        f"Bottom-level causes and their repairs:\n{causes}\n"
        "Answer each check vaguely, as a non-expert would, and say whether each repair worked."
    )


@dataclass
class DatasetStats:
    counts: dict[int, int] = field(default_factory=dict)
    assistant_prompt_chars: dict[int, float] = field(default_factory=dict)
    user_prompt_chars: dict[int, float] = field(default_factory=dict)
    turns: dict[int, float] = field(default_factory=dict)
    errors: dict[int, float] = field(default_factory=dict)
    shortfall: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "levels": [
                {
                    "level": lvl,
                    "size": self.counts[lvl],
                    "assistant_prompt_chars": round(self.assistant_prompt_chars[lvl], 2),
                    "user_prompt_chars": round(self.user_prompt_chars[lvl], 2),
                    "interaction_turns": round(self.turns[lvl], 2),
                    "error_count": round(self.errors[lvl], 2),
                }
                for lvl in sorted(self.counts)
            ],
            "total": self.total,
            "shortfall": self.shortfall,
            "length_unit": "characters",
        }

    def table(self) -> str:
        header = f"{'Level':>5} {'Size':>6} {'Assistant Prompt':>17} {'User Prompt':>12} {'Turns':>8} {'Errors':>7}"
        rows = [header]
        for lvl in sorted(self.counts):
            rows.append(
                f"{lvl:>5} {self.counts[lvl]:>6} {self.assistant_prompt_chars[lvl]:>17.2f} "
                f"{self.user_prompt_chars[lvl]:>12.2f} {self.turns[lvl]:>8.2f} {self.errors[lvl]:>7.2f}"
            )
        return "\n".join(rows) + "\n"


def compute_stats(entries: list[ScenarioEntry], trees: Mapping[str, FaultTree]) -> DatasetStats:
    """Table-1 style summary; turns and error counts come from closed-loop oracle runs.

    Error count is the number of checks the user answered negatively, i.e.
    branches a correct diagnosis still has to rule out.
    """
    per: dict[int, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for entry in entries:
        tree = trees[entry.tree_id]
        transcript = run_session(entry, tree, OracleAdapter(tree))
        bucket = per[entry.level]
        bucket["assistant"].append(len(system_prompt(tree)))
        bucket["user"].append(len(render_user_prompt(tree, entry.path_a)))
        bucket["turns"].append(len(transcript.turns))
        bucket["errors"].append(
            sum(1 for t in transcript.turns if t.reply.action is Action.FAULT and t.reply.verdict is False)
        )
    stats = DatasetStats()
    for lvl, bucket in sorted(per.items()):
        stats.counts[lvl] = len(bucket["turns"])
        stats.assistant_prompt_chars[lvl] = mean(bucket["assistant"])
        stats.user_prompt_chars[lvl] = mean(bucket["user"])
        stats.turns[lvl] = mean(bucket["turns"])
        stats.errors[lvl] = mean(bucket["errors"])
    return stats


def emit_dataset(
    trees: Mapping[str, FaultTree],
    per_level_quota: int,
    rng_seed: int,
    *,
    levels: Iterable[int] = (1, 2, 3),
    out_path: str | Path | None = None,
) -> tuple[list[ScenarioEntry], DatasetStats]:
    """Generate ``per_level_quota`` distinct entries per (tree, level) and persist them as JSONL."""
    levels = tuple(levels)
    entries: list[ScenarioEntry] = []
    shortfall: dict[str, int] = {}
    for tree_id in sorted(trees):
        tree = trees[tree_id]
        for level in levels:
            made: set[tuple[frozenset[str], frozenset[str]]] = set()
            attempt = 0
            while len(made) < per_level_quota and attempt < 5 * per_level_quota:
                seed = f"{rng_seed}/{tree_id}/{level}/{attempt}"
                attempt += 1
                try:
                    entry = build_entry(
                        tree,
                        level,
                        random.Random(seed).randrange(2**31),
                        tree_id=tree_id,
                        key=f"{tree_id}-L{level}-{len(made):04d}",
                    )
                except ScenarioError:
                    if not made and attempt >= 3:
                        break  # level looks infeasible for this tree
                    continue
                pair = (entry.path_a.selected, entry.path_b.selected)
                if pair in made:
                    continue
                made.add(pair)
                entries.append(entry)
            if len(made) < per_level_quota:
                shortfall[f"{tree_id}/L{level}"] = per_level_quota - len(made)

    stats = compute_stats(entries, trees)
    stats.shortfall = shortfall
    if out_path is not None:
        write_dataset(entries, out_path)
    return entries, stats


def write_dataset(entries: Iterable[ScenarioEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")


def read_dataset(path: str | Path) -> list[ScenarioEntry]:
    with open(path, encoding="utf-8") as fh:
        return [ScenarioEntry.from_dict(json.loads(line)) for line in fh if line.strip()]


def sample_subset(
    entries: list[ScenarioEntry], per_level_per_tree: int, rng_seed: int
) -> list[ScenarioEntry]:
    """Stratified sample: up to ``per_level_per_tree`` entries from every (tree, level) stratum.

    Short strata contribute everything they have; output keeps dataset order.
    """
    strata: dict[tuple[str, int], list[int]] = defaultdict(list)
    for i, entry in enumerate(entries):
        strata[(entry.tree_id, entry.level)].append(i)
    chosen: set[int] = set()
    for stratum in sorted(strata):
        members = strata[stratum]
        if len(members) <= per_level_per_tree:
            chosen.update(members)
            continue
        rng = random.Random(f"{rng_seed}/{stratum[0]}/{stratum[1]}")
        chosen.update(rng.sample(members, per_level_per_tree))
    return [entries[i] for i in sorted(chosen)]
