from __future__ import annotations

import re

import pytest

from jfta_bench.harness import AssistantMove
from jfta_bench.sampler import make_path
from jfta_bench.user import (
    _CORRECTION,
    _FAULT_FALSE,
    _FAULT_TRUE,
    CONCLUSIVE_TERMS,
    HEDGES,
    Action,
    GroundTruth,
    RollbackError,
    RuleUser,
    UserReply,
    classify_action,
    emit_rollback,
    mentioned_names,
    render_vague,
    step_user,
)


def move(node_id: str, text: str) -> AssistantMove:
    return AssistantMove("", node_id, text)


def _has_term(text: str, term: str) -> bool:
    return re.search(r"\b" + re.escape(term) + r"\b", text.lower()) is not None


class TestReplyRecord:
    def test_invalid_is_blank(self):
        assert UserReply.invalid().to_wire() == {
            "action": "Invalid Input", "name": "", "return": "", "response": ""
        }

    def test_invalid_with_payload_rejected(self):
        with pytest.raises(ValueError):
            UserReply(Action.INVALID, name="x")

    def test_verdict_required(self):
        with pytest.raises(ValueError):
            UserReply(Action.FAULT, "x", None, "text")

    def test_wire_round_trip(self):
        reply = UserReply(Action.SOLUTION, "Misfire", True, "ok")
        assert reply.to_wire()["return"] == "True"
        assert UserReply.from_wire(reply.to_wire()) == reply


class TestClassify:
    def test_check_of_a_named_node(self, a2):
        cls = classify_action(move("4", "Please check the Power Supply Issue for me."), a2)
        assert (cls.action, cls.name) == (Action.FAULT, "Power Supply Issue")

    def test_repair_on_gate_is_invalid(self, a2):
        text = "Power Supply Issue can be fixed by replacing the adapter."
        assert classify_action(move("4", text), a2).action is Action.INVALID

    def test_two_faults_at_once_is_invalid(self, a2):
        text = "Check Switch Open and Bulb Issue together."
        assert classify_action(move("3", text), a2).action is Action.INVALID

    def test_wrap_up_is_invalid(self, a2):
        assert classify_action(move("1", "All done, anything else?"), a2).action is Action.INVALID

    def test_longest_name_wins(self, a2):
        # "Power Supply Issue (Test DAG)" contains "Power Supply Issue"
        names = mentioned_names("Look at Power Supply Issue (Test DAG) please", a2)
        assert names == ["power supply issue (test dag)"]

    def test_names_match_on_word_boundaries_only(self, a2):
        assert mentioned_names("the unpluggedness of it", a2) == []


class TestStepUser:
    def test_on_path_query(self, shop_tree):
        truth = GroundTruth(make_path(shop_tree, {"1", "2", "3"}))
        reply = step_user(move("3", "Can you look for Chip Overheating?"), truth, shop_tree, 0)
        assert (reply.action, reply.name, reply.verdict) == (Action.FAULT, "Chip Overheating", True)
        assert any(_has_term(reply.response, h) for h in HEDGES)

    def test_off_path_query(self, shop_tree):
        truth = GroundTruth(make_path(shop_tree, {"1", "2", "3"}))
        reply = step_user(move("4", "Any sign of Insulation Aging?"), truth, shop_tree, 0)
        assert reply.verdict is False
        assert "haven't" in reply.response and "noticed" in reply.response

    def test_correct_repair(self, shop_tree):
        truth = GroundTruth(make_path(shop_tree, {"1", "5", "6"}))
        text = "Misfire can be resolved: swap the ignition coil."
        reply = step_user(move("6", text), truth, shop_tree, 0)
        assert (reply.action, reply.name, reply.verdict) == (Action.SOLUTION, "Misfire", True)
        assert "issue has been resolved" in reply.response
        assert truth.resolved == {"6"} and truth.solved()

    def test_wrong_repair_text(self, shop_tree):
        truth = GroundTruth(make_path(shop_tree, {"1", "5", "6"}))
        reply = step_user(move("6", "Misfire is fixed by rebooting."), truth, shop_tree, 0)
        assert reply.verdict is False and "ineffective" in reply.response
        assert truth.resolved == set()

    def test_id_name_mismatch_is_false(self, shop_tree):
        truth = GroundTruth(make_path(shop_tree, {"1", "2", "3"}))
        reply = step_user(move("4", "Check Chip Overheating."), truth, shop_tree, 0)
        assert reply.action is Action.FAULT and reply.verdict is False

    def test_link_alias_mirrors_target(self, a2):
        truth = GroundTruth(make_path(a2, {"1", "2", "4", "8"}))
        reply = step_user(move("14", "Check Power Supply Issue (Test DAG)."), truth, a2, 0)
        assert reply.verdict is True


class TestRendering:
    @pytest.mark.parametrize("text", _FAULT_TRUE + _FAULT_FALSE)
    def test_fault_templates_hedged_and_inconclusive(self, text):
        assert any(_has_term(text, h) for h in HEDGES)
        assert not any(_has_term(text, t) for t in CONCLUSIVE_TERMS)

    @pytest.mark.parametrize("text", _FAULT_FALSE)
    def test_negative_family(self, text):
        assert "haven't" in text and "noticed" in text

    def test_deterministic(self):
        a = render_vague("Chip Overheating", True, Action.FAULT, 11)
        assert a == render_vague("Chip Overheating", True, Action.FAULT, 11)

    def test_avoid_previous_template(self):
        first = render_vague("X", False, Action.FAULT, 5)
        index = _FAULT_FALSE.index(first)
        assert render_vague("X", False, Action.FAULT, 5, avoid=index) != first

    def test_name_is_never_echoed(self, a2):
        for node in a2.nodes:
            for verdict in (True, False):
                text = render_vague(node.name, verdict, Action.FAULT, 3)
                assert node.name.lower() not in text.lower()

    def test_rule_user_varies_consecutive_replies(self, a2):
        user = RuleUser(a2, GroundTruth(make_path(a2, {"1", "3"})), style_seed=1)
        texts = [user.reply(move(n, f"Check {a2[n].name}."), i).response
                 for i, n in enumerate(["6", "7", "8", "9"])]
        assert all(a != b for a, b in zip(texts, texts[1:]))


class TestRollback:
    def test_level_one_pair(self, a2):
        truth = GroundTruth(make_path(a2, {"1", "2", "4", "8"}), make_path(a2, {"1", "2", "4", "9"}))
        reply = emit_rollback(truth, "8", a2)
        assert (reply.name, reply.verdict) == ("Power not connected", False)
        assert "Power not connected" in reply.response
        assert truth.active.cause_ids == ("9",)

    def test_fires_once(self, a2):
        truth = GroundTruth(make_path(a2, {"1", "3"}), make_path(a2, {"1", "2", "6"}))
        emit_rollback(truth, "2", a2)
        with pytest.raises(RollbackError):
            emit_rollback(truth, "2", a2)

    def test_needs_second_path(self, a2):
        with pytest.raises(RollbackError):
            emit_rollback(GroundTruth(make_path(a2, {"1", "3"})), "2", a2)

    def test_keeps_resolved_causes_still_present(self, a2):
        truth = GroundTruth(
            make_path(a2, {"1", "2", "6", "7"}), make_path(a2, {"1", "2", "6", "4", "9"})
        )
        truth.resolved = {"6", "7"}
        emit_rollback(truth, "7", a2)
        assert truth.resolved == {"6"}

    @pytest.mark.parametrize("template", _CORRECTION)
    def test_correction_templates_name_the_node(self, template):
        assert "{name}" in template
