from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jfta_bench.graph import divergence_node, gate_semantics_check
from jfta_bench.harness import Knowledge, apply_turn, simulate_oracle
from jfta_bench.scenarios import (
    ScenarioEntry,
    ScenarioError,
    build_entry,
    common_prefix,
    compute_stats,
    emit_dataset,
    read_dataset,
    sample_subset,
)


def _prefix_exhausted_at(tree, entry: ScenarioEntry) -> int:
    """Turn at which the oracle, on path A, has confirmed every shared prefix node."""
    prefix = entry.path_a.order[: entry.prefix_len]
    k = Knowledge(tree)
    if all(k.status(n) for n in prefix):
        return 0
    for turn in simulate_oracle(tree, entry.path_a, entry.max_turns):
        apply_turn(k, turn)
        if all(k.status(n) for n in prefix):
            return turn.index
    raise AssertionError("prefix never confirmed")


class TestBuildEntry:
    def test_level_one_example_pair(self, a2):
        entry = build_entry(a2, 1, 9)
        assert entry.path_a.selected == {"1", "2", "4", "8", "14"}
        assert entry.path_b.selected == {"1", "2", "4", "9"}
        assert entry.path_a.order[: entry.prefix_len] == ("1", "2", "4")
        assert divergence_node(a2, entry.path_a.selected, entry.path_b.selected) == ("8", False)

    def test_single_path_tree_is_infeasible(self, one_tree):
        with pytest.raises(ScenarioError):
            build_entry(one_tree, 1, 0)

    def test_level_beyond_tree_is_infeasible(self, and_tree):
        with pytest.raises(ScenarioError):
            build_entry(and_tree, 3, 0)

    def test_deterministic(self, a2):
        assert build_entry(a2, 2, 17) == build_entry(a2, 2, 17)

    def test_dict_round_trip(self, a2):
        entry = build_entry(a2, 3, 2)
        assert ScenarioEntry.from_dict(entry.to_dict()) == entry

    @settings(max_examples=40, deadline=None)
    @given(level=st.integers(1, 3), seed=st.integers(0, 10**6))
    def test_invariants(self, a2, level, seed):
        entry = build_entry(a2, level, seed)
        a, b = entry.path_a, entry.path_b
        assert a.level == b.level == level
        assert a.selected != b.selected
        assert entry.prefix_len >= 1
        assert a.order[: entry.prefix_len] == b.order[: entry.prefix_len]
        assert entry.prefix_len == common_prefix(a.order, b.order)
        assert gate_semantics_check(a2, a.selected) == gate_semantics_check(a2, b.selected) == []
        assert entry.max_turns == 3 * len(a.selected | b.selected) + 10
        assert entry.rollback_turn > _prefix_exhausted_at(a2, entry)


class TestDataset:
    def test_quota(self, a2, tmp_path):
        entries, stats = emit_dataset({"a2": a2}, 2, 0, levels=[1], out_path=tmp_path / "d.jsonl")
        assert len(entries) == 2
        assert stats.counts == {1: 2}
        assert read_dataset(tmp_path / "d.jsonl") == entries

    def test_empty(self):
        entries, stats = emit_dataset({}, 5, 0)
        assert entries == [] and stats.total == 0
        assert stats.shortfall == {}

    def test_infeasible_level_reported_as_shortfall(self, and_tree):
        entries, stats = emit_dataset({"rig": and_tree}, 2, 0, levels=[3])
        assert entries == []
        assert stats.shortfall == {"rig/L3": 2}

    def test_entries_distinct_and_deterministic(self, a2):
        first, _ = emit_dataset({"a2": a2}, 4, 5)
        again, _ = emit_dataset({"a2": a2}, 4, 5)
        assert first == again
        assert len({(e.path_a.selected, e.path_b.selected) for e in first}) == len(first) == 12

    def test_stats_shape(self, a2):
        entries, stats = emit_dataset({"a2": a2}, 3, 1)
        assert stats.counts == {1: 3, 2: 3, 3: 3}
        assert set(stats.turns) == {1, 2, 3}
        assert stats.turns[1] < stats.turns[3]
        assert all(v > 0 for v in stats.assistant_prompt_chars.values())
        assert "Level" in stats.table()
        assert compute_stats(entries, {"a2": a2}).to_dict() == {**stats.to_dict(), "shortfall": {}}


class TestSubset:
    @pytest.fixture
    def dataset(self, a2):
        return emit_dataset({"a2": a2, "b2": a2}, 6, 2)[0]

    def test_zero(self, dataset):
        assert sample_subset(dataset, 0, 1) == []

    def test_idempotent(self, dataset):
        sub = sample_subset(dataset, 3, 8)
        assert sample_subset(sub, 3, 8) == sub

    def test_per_stratum_counts_and_order(self, dataset):
        sub = sample_subset(dataset, 2, 4)
        counts = {}
        for e in sub:
            counts[(e.tree_id, e.level)] = counts.get((e.tree_id, e.level), 0) + 1
        assert set(counts.values()) == {2} and len(counts) == 6
        positions = [dataset.index(e) for e in sub]
        assert positions == sorted(positions)

    def test_short_stratum_kept_whole(self, dataset):
        assert sample_subset(dataset, 100, 0) == dataset
