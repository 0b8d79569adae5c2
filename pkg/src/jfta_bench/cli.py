"""Command-line entry point: ``jfta-bench <subcommand>``.

Exit codes: 0 ok, 1 violations or failed sessions, 2 usage error,
3 transport error, 4 missing or unreadable input, 5 adapter misconfiguration.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from .harness import (
    EndpointAdapter,
    EndpointConfig,
    OracleAdapter,
    read_transcript,
    run_session,
    write_transcript,
)
from .jfta import FaultTree, JFTAParseError, load_fault_tree, parse_fault_tree, serialize, validate
from .metrics import aggregate, length_stats, score_session, serialize_node_edge, to_node_edge
from .sampler import SamplingError, sample_path
from .scenarios import ScenarioEntry, compute_stats, emit_dataset, read_dataset

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2
EXIT_TRANSPORT = 3
EXIT_INPUT = 4
EXIT_ADAPTER = 5


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _load_tree(path: str | Path) -> FaultTree:
    try:
        return load_fault_tree(str(path))
    except FileNotFoundError as exc:
        raise CliError(EXIT_INPUT, f"no such file: {path}") from exc
    except (OSError, JFTAParseError) as exc:
        raise CliError(EXIT_INPUT, f"cannot read tree {path}: {exc}") from exc


def _load_trees(paths: Sequence[str]) -> dict[str, FaultTree]:
    trees: dict[str, FaultTree] = {}
    for path in paths:
        stem = Path(path).stem
        if stem in trees:
            raise CliError(EXIT_USAGE, f"two tree files share the id {stem!r}")
        trees[stem] = _load_tree(path)
    return trees


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------- subcommands

def cmd_validate(args: argparse.Namespace) -> int:
    failed = False
    for path in args.trees:
        violations = validate(_load_tree(path))
        report = {"file": path, "violations": [v.to_dict() for v in violations]}
        print(json.dumps(report, ensure_ascii=False))
        failed |= bool(violations)
    return EXIT_FAILURES if failed else EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    tree = _load_tree(args.tree)
    lines = []
    for i in range(args.count):
        try:
            path = sample_path(tree, args.init, args.seed + i)
        except SamplingError as exc:
            raise CliError(EXIT_FAILURES, str(exc)) from exc
        lines.append(json.dumps(path.to_dict(), ensure_ascii=False))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_gen_scenarios(args: argparse.Namespace) -> int:
    trees = _load_trees(args.trees)
    out = Path(args.out)
    (out / "trees").mkdir(parents=True, exist_ok=True)
    for tree_id, tree in trees.items():
        (out / "trees" / f"{tree_id}.json").write_text(serialize(tree), encoding="utf-8")
    entries, stats = emit_dataset(
        trees, args.quota, args.seed, levels=args.levels, out_path=out / "dataset.jsonl"
    )
    (out / "stats.json").write_text(json.dumps(stats.to_dict(), indent=1) + "\n", encoding="utf-8")
    (out / "stats.txt").write_text(stats.table(), encoding="utf-8")
    sys.stdout.write(stats.table())
    for stratum, missing in sorted(stats.shortfall.items()):
        print(f"warning: {stratum} is {missing} entries short of the quota", file=sys.stderr)
    print(f"{len(entries)} entries written to {out / 'dataset.jsonl'}", file=sys.stderr)
    return EXIT_OK


def _dataset_and_trees(args: argparse.Namespace) -> tuple[list[ScenarioEntry], dict[str, FaultTree]]:
    dataset = Path(args.dataset)
    if not dataset.is_file():
        raise CliError(EXIT_INPUT, f"no such dataset: {dataset}")
    try:
        entries = read_dataset(dataset)
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_INPUT, f"cannot read dataset {dataset}: {exc}") from exc
    tree_dir = Path(args.trees) if args.trees else dataset.parent / "trees"
    trees = {}
    for tree_id in sorted({e.tree_id for e in entries}):
        trees[tree_id] = _load_tree(tree_dir / f"{tree_id}.json")
    return entries, trees


def _make_adapter(args: argparse.Namespace, tree: FaultTree) -> Any:
    if args.adapter == "oracle":
        return OracleAdapter(tree)
    return args._endpoint


def cmd_run_eval(args: argparse.Namespace) -> int:
    if args.adapter == "endpoint":
        if not args.endpoint_url or not args.model:
            raise CliError(EXIT_ADAPTER, "--adapter endpoint needs --endpoint-url and --model")
        args._endpoint = EndpointAdapter(
            EndpointConfig(args.endpoint_url, args.model, timeout=args.timeout, retries=args.retries)
        )
    elif args.endpoint_url or args.model:
        raise CliError(EXIT_USAGE, "--endpoint-url/--model only apply to --adapter endpoint")
    entries, trees = _dataset_and_trees(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(entry: ScenarioEntry) -> tuple[str, str | None, str | None]:
        tree = trees[entry.tree_id]
        transcript = run_session(entry, tree, _make_adapter(args, tree), rng_seed=args.seed)
        write_transcript(out / f"{entry.key}.jsonl", transcript, entry, tree)
        return entry.key, transcript.termination, transcript.transport_error

    with ThreadPoolExecutor(max_workers=max(1, args.parallel)) as pool:
        results = list(pool.map(one, entries))
    solved = sum(term == "solved" for _, term, _ in results)
    transport = [(key, err) for key, _, err in results if err]
    print(f"{solved}/{len(results)} sessions solved; transcripts in {out}")
    for key, err in transport:
        print(f"transport error in {key}: {err}", file=sys.stderr)
    return EXIT_TRANSPORT if transport else EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    source = Path(args.input)
    files = sorted(source.glob("*.jsonl")) if source.is_dir() else [source]
    if not files or not all(f.is_file() for f in files):
        raise CliError(EXIT_INPUT, f"no transcripts found at {source}")
    verdicts = []
    for f in files:
        try:
            header, transcript = read_transcript(f)
        except (ValueError, KeyError) as exc:
            raise CliError(EXIT_INPUT, str(exc)) from exc
        tree = parse_fault_tree(header["tree"])
        verdicts.append(score_session(transcript, tree, header["entry"]["level"]))
    report = aggregate(verdicts)
    sys.stdout.write(report.table())
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        prefix.with_suffix(".txt").write_text(report.table(), encoding="utf-8")
        record = {**report.to_dict(), "sessions_detail": [v.to_dict() for v in verdicts]}
        prefix.with_suffix(".json").write_text(json.dumps(record, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK if all(v.success for v in verdicts) else EXIT_FAILURES


def cmd_convert(args: argparse.Namespace) -> int:
    tree = _load_tree(args.tree)
    _emit(serialize_node_edge(to_node_edge(tree)), args.out)
    print(json.dumps(length_stats(tree)), file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    entries, trees = _dataset_and_trees(args)
    stats = compute_stats(entries, trees)
    sys.stdout.write(stats.table())
    if args.out:
        _emit(json.dumps(stats.to_dict(), indent=1) + "\n", args.out)
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jfta-bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structural check of JFTA files")
    p.add_argument("trees", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="sample fault paths from seed failures")
    p.add_argument("tree")
    p.add_argument("--init", type=lambda s: [x for x in s.split(",") if x], required=True,
                   help="comma-separated Solution ids that must fail")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("gen-scenarios", help="generate a rollback dataset")
    p.add_argument("trees", nargs="+")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--levels", type=_int_list, default=[1, 2, 3])
    p.add_argument("--quota", type=int, default=10, help="entries per tree and level")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_scenarios)

    p = sub.add_parser("run-eval", help="run dialogue sessions over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--trees", help="directory of <tree_id>.json files (default: next to dataset)")
    p.add_argument("--adapter", choices=("oracle", "endpoint"), default="oracle")
    p.add_argument("--endpoint-url")
    p.add_argument("--model")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="user style seed")
    p.add_argument("--out", required=True, help="transcript directory")
    p.set_defaults(func=cmd_run_eval)

    p = sub.add_parser("score", help="score transcripts with the error taxonomy")
    p.add_argument("--in", dest="input", required=True, help="transcript file or directory")
    p.add_argument("--out", help="report path prefix (.txt and .json are written)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("convert", help="emit the node-edge form of a tree")
    p.add_argument("tree")
    p.add_argument("--out")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", help="summary table of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--trees")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"jfta-bench: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
