"""Command-line entry point.

``crosscheck run`` executes the verification pipeline on one scenario and
writes three artifacts into the output directory: ``answer.json`` (the
synthesized answer with its score, anchors, and conflict states),
``audit.log`` (line-delimited, byte-reproducible event journal) and
``facts.jsonl`` (the facts-store dump). ``crosscheck eval`` scores methods
over a corpus directory and writes ``report.json`` / ``report.txt``.

Exit codes are a total function of the outcome: 0 answer produced,
2 abstention (nothing feasible survived), 1 any error. Environment
variables configure only the optional live backend; every hermetic run is
driven entirely by flags and files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .baselines import METHODS, evaluate_methods
from .engine import EngineConfig, RunResult, run_pipeline
from .errors import CrosscheckError, NoFeasibleCandidateError
from .scenario import SCHEMA_TEXT, load_corpus, load_scenario
from .values import format_literal, value_to_json


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosscheck",
        description="Conflict-aware verification of multi-expert reasoning traces.",
    )
    parser.add_argument("--version", action="version", version=f"crosscheck {__version__}")
    parser.add_argument(
        "--schema-dump", action="store_true",
        help="print the scenario/report file schemas and exit",
    )
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="verify one scenario and write the audit bundle")
    run_p.add_argument("--scenario", required=True, type=Path, help="scenario file (JSON)")
    run_p.add_argument("--theta", type=int, default=2, help="anchor quorum (default 2)")
    run_p.add_argument("--budget", type=int, default=None,
                       help="max verify calls (default: conflict count, capped at 16)")
    run_p.add_argument("--gate-threshold", type=float, default=0.5,
                       help="minimum surviving fraction for a trace to pass the gate")
    run_p.add_argument("--weights", type=str, default="0.5,0.3,0.2",
                       help="anchor,conflict,confidence score weights")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--no-facts", action="store_true",
                       help="skip facts seeding and facts-consistency gating")
    run_p.add_argument("--out", required=True, type=Path, help="output directory")

    eval_p = sub.add_parser("eval", help="score methods over a corpus directory")
    eval_p.add_argument("--corpus", required=True, type=Path, help="directory of scenario files")
    eval_p.add_argument("--methods", type=str, default="audit,mv,sv,passn",
                        help=f"comma-separated subset of {{{','.join(METHODS)}}}")
    eval_p.add_argument("--theta", type=int, default=2)
    eval_p.add_argument("--budget", type=int, default=None)
    eval_p.add_argument("--gate-threshold", type=float, default=0.5)
    eval_p.add_argument("--seed", type=int, default=0)
    eval_p.add_argument("--out", required=True, type=Path, help="output directory")
    return parser


def _parse_weights(raw: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 3:
        raise CrosscheckError(f"--weights needs three comma-separated reals, got {raw!r}")
    return (float(parts[0]), float(parts[1]), float(parts[2]))


def _write_bundle(result: RunResult, out_dir: Path, abstained: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    answer_obj = {
        "abstained": abstained,
        "answer": None if result.answer is None else value_to_json(result.answer),
        "answer_literal": None if result.answer is None else format_literal(result.answer),
        "expert": result.winner_expert,
        "score": None if result.score is None else {
            "anchor_support": result.score.anchor_support,
            "conflict_agreement": result.score.conflict_agreement,
            "mean_confidence": result.score.mean_confidence,
            "total": result.score.total,
        },
        "anchors": [
            {"step": a.step, "value": format_literal(a.value), "supporters": list(a.supporters)}
            for a in result.anchors.items()
        ],
        "conflicts": [
            {"step": item.step, "state": item.state,
             "candidates": [format_literal(c.value) for c in item.candidates]}
            for item in result.conflicts.items()
        ],
        "verify_calls": result.verify_calls,
        "fallback_used": result.fallback_used,
    }
    (out_dir / "answer.json").write_text(
        json.dumps(answer_obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (out_dir / "audit.log").write_text(result.audit_log.to_text(), encoding="utf-8")
    (out_dir / "facts.jsonl").write_text(
        "".join(line + "\n" for line in result.facts.to_lines()), encoding="utf-8"
    )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
        config = EngineConfig(
            theta=args.theta,
            budget=args.budget,
            gate_threshold=args.gate_threshold,
            weights=_parse_weights(args.weights),
            seed=args.seed,
            facts_enabled=not args.no_facts,
        )
    except (CrosscheckError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        result = run_pipeline(scenario, config)
    except NoFeasibleCandidateError as exc:
        if isinstance(exc.result, RunResult):
            _write_bundle(exc.result, args.out, abstained=True)
        print("abstained: no feasible candidate response", file=sys.stderr)
        return 2
    except CrosscheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_bundle(result, args.out, abstained=False)
    print(f"answer: {format_literal(result.answer)} (expert {result.winner_expert}, "
          f"score {result.score.total:.4f}, {result.verify_calls} verify calls)")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        corpus = load_corpus(args.corpus)
    except CrosscheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not corpus:
        print(f"error: corpus directory {args.corpus} contains no scenario files", file=sys.stderr)
        return 1
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    try:
        config = EngineConfig(
            theta=args.theta,
            budget=args.budget,
            gate_threshold=args.gate_threshold,
            seed=args.seed,
        )
        report = evaluate_methods(corpus, methods, config)
    except (CrosscheckError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.json").write_text(
        json.dumps(report.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (args.out / "report.txt").write_text(report.to_table(), encoding="utf-8")
    print(report.to_table(), end="")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema_dump:
        print(SCHEMA_TEXT, end="")
        return 0
    if args.command == "run":
        return cmd_run(args)
    if args.command == "eval":
        return cmd_eval(args)
    parser.print_help()
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
