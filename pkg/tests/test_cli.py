from __future__ import annotations

import json

import pytest

from jfta_bench.cli import (
    EXIT_ADAPTER,
    EXIT_FAILURES,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_TRANSPORT,
    EXIT_USAGE,
    main,
)
from jfta_bench.jfta import example_tree_text


@pytest.fixture
def a2_file(tmp_path):
    path = tmp_path / "a2.json"
    path.write_text(example_tree_text(), encoding="utf-8")
    return path


@pytest.fixture
def dataset(tmp_path, a2_file):
    out = tmp_path / "ds"
    assert main(["gen-scenarios", str(a2_file), "--seed", "4", "--quota", "3", "--out", str(out)]) == EXIT_OK
    return out


class TestValidate:
    def test_clean(self, a2_file, capsys):
        assert main(["validate", str(a2_file)]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["violations"] == []

    def test_violation(self, tmp_path, capsys):
        doc = json.loads(example_tree_text())
        doc["1"]["NextTree"]["2"]["NextTree"]["14"]["NextTree"] = "99"
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert main(["validate", str(bad)]) == EXIT_FAILURES
        assert json.loads(capsys.readouterr().out)["violations"][0]["code"] == "dangling-link"

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_INPUT


class TestSample:
    def test_records(self, a2_file, capsys):
        assert main(["sample", str(a2_file), "--init", "8", "--seed", "0", "--count", "3"]) == EXIT_OK
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert len(records) == 3
        assert all("8" in r["selected"] for r in records)

    def test_seed_required(self, a2_file):
        assert main(["sample", str(a2_file), "--init", "8"]) == EXIT_USAGE

    def test_unknown_subcommand(self):
        assert main(["explode"]) == EXIT_USAGE


class TestPipeline:
    def test_generation_is_reproducible(self, tmp_path, a2_file, dataset):
        again = tmp_path / "again"
        main(["gen-scenarios", str(a2_file), "--seed", "4", "--quota", "3", "--out", str(again)])
        assert (again / "dataset.jsonl").read_bytes() == (dataset / "dataset.jsonl").read_bytes()
        assert (dataset / "trees" / "a2.json").read_text() == example_tree_text()

    def test_oracle_run_and_score(self, tmp_path, dataset, capsys):
        runs = tmp_path / "runs"
        code = main(["run-eval", "--dataset", str(dataset / "dataset.jsonl"), "--adapter", "oracle",
                     "--parallel", "3", "--out", str(runs)])
        assert code == EXIT_OK
        assert "9/9 sessions solved" in capsys.readouterr().out
        assert len(list(runs.glob("*.jsonl"))) == 9
        assert main(["score", "--in", str(runs), "--out", str(tmp_path / "rep" / "report")]) == EXIT_OK
        record = json.loads((tmp_path / "rep" / "report.json").read_text())
        assert record["total_correct_pct"] == 100.0
        assert record["error_events"] == 0
        assert (tmp_path / "rep" / "report.txt").read_text().startswith("Error Action(%)")

    def test_stats(self, dataset, capsys):
        assert main(["stats", "--dataset", str(dataset / "dataset.jsonl")]) == EXIT_OK
        rows = capsys.readouterr().out.splitlines()
        assert rows[0].split()[:2] == ["Level", "Size"]
        assert [r.split()[:2] for r in rows[1:]] == [["1", "3"], ["2", "3"], ["3", "3"]]

    def test_endpoint_needs_url_and_model(self, tmp_path, dataset):
        args = ["run-eval", "--dataset", str(dataset / "dataset.jsonl"), "--out", str(tmp_path / "r")]
        assert main([*args, "--adapter", "endpoint"]) == EXIT_ADAPTER
        assert main([*args, "--model", "m"]) == EXIT_USAGE

    def test_unreachable_endpoint(self, tmp_path, dataset):
        code = main(["run-eval", "--dataset", str(dataset / "dataset.jsonl"), "--out", str(tmp_path / "r"),
                     "--adapter", "endpoint", "--endpoint-url", "http://127.0.0.1:9/v1/chat",
                     "--model", "m", "--retries", "0", "--timeout", "2"])
        assert code == EXIT_TRANSPORT

    def test_missing_dataset(self, tmp_path):
        assert main(["stats", "--dataset", str(tmp_path / "none.jsonl")]) == EXIT_INPUT

    def test_score_flags_failed_sessions(self, tmp_path, dataset):
        runs = tmp_path / "runs"
        main(["run-eval", "--dataset", str(dataset / "dataset.jsonl"), "--out", str(runs),
              "--adapter", "endpoint", "--endpoint-url", "http://127.0.0.1:9/v1/chat",
              "--model", "m", "--retries", "0", "--timeout", "2"])
        assert main(["score", "--in", str(runs)]) == EXIT_FAILURES


class TestConvert:
    def test_node_edge(self, tmp_path, a2_file, capsys):
        out = tmp_path / "ne.json"
        assert main(["convert", str(a2_file), "--out", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert (len(doc["nodes"]), len(doc["edges"])) == (15, 16)
        assert json.loads(capsys.readouterr().out)["ratio"] > 1
