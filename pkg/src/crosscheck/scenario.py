"""Scenario files: the hermetic, replayable unit of work.

A scenario bundles everything one run needs — the query, the step DAG,
serializable constraints, scripted expert traces, a verdict table for the
scripted falsifier, scripted tool outcomes for cross-execution, optional
ground truth, and optional seed records for the facts store. One scenario
per JSON file; a corpus is a directory of them, ordered by filename.

Loading validates every cross-reference (trace steps, verdict-table keys,
oracle keys, facts provenance) so a scenario that loads is a scenario
that runs. ``load(save(load(path)))`` is structurally identical to
``load(path)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .ensemble import CONSERVATIVE, RADICAL, ExpertConfig, ScriptedBackend, parse_expert_output
from .errors import CycleError, ParseError, SchemaError, UnknownIdError, UnknownStepError, ValidationError
from .facts import FactStore, params_key
from .plandag import PlanDag, build_plan
from .values import Value, parse_statement_key, value_from_json, value_to_json
from .verifiers import (
    Constraint,
    OperatorRegistry,
    VERDICTS,
    constraint_from_spec,
    default_registry,
)


@dataclass(frozen=True)
class ScriptedExpert:
    config: ExpertConfig
    raw_traces: tuple[dict, ...]
    fail: bool = False


@dataclass(frozen=True)
class Oracle:
    """Ground truth for synthetic evaluation; answer mandatory, truth may be partial."""

    answer: Value
    truth: dict[str, Value] = field(default_factory=dict)


@dataclass
class Scenario:
    query: str
    dag: PlanDag
    experts: tuple[ScriptedExpert, ...]
    constraints: tuple[Constraint, ...] = ()
    verdict_table: dict[str, str] = field(default_factory=dict)
    tool_scripts: dict[str, object] = field(default_factory=dict)
    oracle: Oracle | None = None
    facts_seed: tuple[dict, ...] = ()
    name: str = ""

    def expert_configs(self) -> list[ExpertConfig]:
        return [e.config for e in self.experts]

    def backend(self) -> ScriptedBackend:
        return ScriptedBackend(
            {e.config.expert_id: list(e.raw_traces) for e in self.experts},
            failing={e.config.expert_id for e in self.experts if e.fail},
        )

    def registry(self) -> OperatorRegistry:
        return default_registry(self.constraints, self.verdict_table or None)

    def tool_runner(self) -> Callable[[str, dict], Value]:
        scripts = {key: value_from_json(outcome) for key, outcome in self.tool_scripts.items()}

        def run_tool(tool_name: str, params: dict) -> Value:
            key = params_key(tool_name, params)
            try:
                return scripts[key]
            except KeyError:
                raise UnknownIdError(f"no scripted outcome for {key!r}") from None

        return run_tool

    def responses(self) -> list[Value]:
        """All non-failing experts' responses, in expert-id then trace order."""
        out = []
        for expert in sorted(self.experts, key=lambda e: e.config.expert_id):
            if expert.fail:
                continue
            for raw in expert.raw_traces:
                out.append(value_from_json(raw["response"]))
        return out


def scenario_from_dict(obj: dict, name: str = "") -> Scenario:
    """Build and fully validate a scenario; every dangling reference is named."""
    if not isinstance(obj, dict):
        raise ParseError("scenario must be a JSON object")
    try:
        dag_obj = obj["dag"]
        dag = build_plan(
            dag_obj.get("steps", []),
            [tuple(edge) for edge in dag_obj.get("edges", [])],
        )
    except KeyError as exc:
        raise ValidationError(f"scenario missing field {exc}") from exc
    except (ValueError, SchemaError, CycleError, UnknownStepError) as exc:
        raise ValidationError(f"bad dag: {exc}") from exc

    constraints = tuple(constraint_from_spec(c) for c in obj.get("constraints", []))

    experts = []
    seen_ids: set[str] = set()
    for block in obj.get("experts", []):
        expert_id = block.get("expert_id", "")
        if not expert_id:
            raise ValidationError("expert block missing expert_id")
        if expert_id in seen_ids:
            raise ValidationError(f"duplicate expert_id {expert_id!r}")
        seen_ids.add(expert_id)
        role = block.get("class", CONSERVATIVE)
        if role not in (CONSERVATIVE, RADICAL):
            raise ValidationError(f"expert {expert_id!r} has unknown class {role!r}")
        config = ExpertConfig(
            expert_id=expert_id,
            role=role,
            temperature=float(block.get("temperature", 0.1)),
            seed=int(block.get("seed", 0)),
        )
        raw_traces = tuple(block.get("traces", []))
        if not raw_traces and not block.get("fail", False):
            raise ValidationError(f"expert {expert_id!r} has no traces and is not marked failing")
        for t_idx, raw in enumerate(raw_traces):
            try:
                parsed = parse_expert_output(expert_id, raw)
            except SchemaError as exc:
                raise ValidationError(f"expert {expert_id!r} trace {t_idx}: {exc}") from exc
            for step in parsed.steps:
                if step not in dag:
                    raise ValidationError(
                        f"expert {expert_id!r} trace {t_idx} references unknown step {step!r}"
                    )
        experts.append(ScriptedExpert(config=config, raw_traces=raw_traces, fail=bool(block.get("fail", False))))
    if not experts:
        raise ValidationError("scenario needs at least one expert")

    verdict_table = dict(obj.get("verdict_table", {}))
    for key, verdict in sorted(verdict_table.items()):
        if verdict not in VERDICTS:
            raise ValidationError(f"verdict_table[{key!r}] has unknown verdict {verdict!r}")
        try:
            step, _ = parse_statement_key(key)
        except ParseError as exc:
            raise ValidationError(f"verdict_table key {key!r} does not parse: {exc}") from exc
        if step not in dag:
            raise ValidationError(f"verdict_table key {key!r} references unknown step {step!r}")

    tool_scripts = dict(obj.get("tool_scripts", {}))
    for key, outcome in sorted(tool_scripts.items()):
        tool_name, sep, params_json = key.partition("|")
        if not sep or not tool_name:
            raise ValidationError(f"tool_scripts key {key!r} must look like 'tool|{{params-json}}'")
        try:
            json.loads(params_json)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"tool_scripts key {key!r} has bad params JSON: {exc}") from exc
        try:
            value_from_json(outcome)
        except ParseError as exc:
            raise ValidationError(f"tool_scripts[{key!r}] outcome does not parse: {exc}") from exc

    oracle = None
    if obj.get("oracle") is not None:
        oracle_obj = obj["oracle"]
        if "answer" not in oracle_obj:
            raise ValidationError("oracle present but missing 'answer'")
        truth = {}
        for step, raw_value in sorted(oracle_obj.get("truth", {}).items()):
            if step not in dag:
                raise ValidationError(f"oracle truth references unknown step {step!r}")
            truth[step] = value_from_json(raw_value)
        oracle = Oracle(answer=value_from_json(oracle_obj["answer"]), truth=truth)

    facts_seed = tuple(obj.get("facts_seed", ()))
    if facts_seed:
        probe = FactStore()
        try:
            for record in facts_seed:
                probe.load_record(record)
        except (SchemaError, UnknownIdError) as exc:
            raise ValidationError(f"facts_seed does not load: {exc}") from exc

    return Scenario(
        query=str(obj.get("query", "")),
        dag=dag,
        experts=tuple(experts),
        constraints=constraints,
        verdict_table=verdict_table,
        tool_scripts=tool_scripts,
        oracle=oracle,
        facts_seed=facts_seed,
        name=name or str(obj.get("name", "")),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    obj: dict = {
        "name": scenario.name,
        "query": scenario.query,
        "dag": {
            "steps": list(scenario.dag.steps),
            "edges": [list(edge) for edge in scenario.dag.edges],
        },
        "constraints": [c.spec for c in scenario.constraints if c.spec is not None],
        "experts": [
            {
                "expert_id": e.config.expert_id,
                "class": e.config.role,
                "temperature": e.config.temperature,
                "seed": e.config.seed,
                "traces": [dict(raw) for raw in e.raw_traces],
                **({"fail": True} if e.fail else {}),
            }
            for e in scenario.experts
        ],
        "verdict_table": {k: scenario.verdict_table[k] for k in sorted(scenario.verdict_table)},
        "tool_scripts": {k: scenario.tool_scripts[k] for k in sorted(scenario.tool_scripts)},
    }
    if scenario.oracle is not None:
        obj["oracle"] = {
            "answer": value_to_json(scenario.oracle.answer),
            "truth": {s: value_to_json(v) for s, v in sorted(scenario.oracle.truth.items())},
        }
    if scenario.facts_seed:
        obj["facts_seed"] = [dict(r) for r in scenario.facts_seed]
    return obj


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(obj, name=path.stem)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    path = Path(path)
    path.write_text(
        json.dumps(scenario_to_dict(scenario), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_corpus(directory: str | Path) -> list[Scenario]:
    """Every ``*.json`` scenario in the directory, ordered by filename."""
    directory = Path(directory)
    scenarios = []
    for path in sorted(directory.glob("*.json")):
        scenarios.append(load_scenario(path))
    return scenarios


SCHEMA_TEXT = """\
scenario file (JSON, one scenario per file)
  name            optional string; defaults to the filename stem
  query           string
  dag             {"steps": [step-id...], "edges": [[dep, dependent]...]}
                  step ids are unique strings without '|'; graph must be acyclic
  constraints     list of constraint specs:
                    {"id": str, "check": "range",  "scope": "step"|"response",
                     "step_pattern": glob?, "min": num?, "max": num?}
                    {"id": str, "check": "regex",  "pattern": str, ...}
                    {"id": str, "check": "kind",   "expect": "number"|"text"|"boolean"|"quantity"|"composite", ...}
                    {"id": str, "check": "unit",   "unit": str, ...}
                    {"id": str, "check": "facts",  ...}   (consistency with verified facts)
  experts         list of scripted expert blocks:
                    {"expert_id": str, "class": "conservative"|"radical",
                     "temperature": num, "seed": int,
                     "traces": [{"steps": {step-id: {"value": V, "confidence": num,
                                                     "provenance": [tool-id...]?}},
                                 "analysis": str, "response": V}],
                     "fail": bool?}
  verdict_table   {"<step>|<value-literal>": "support"|"refute"|"inconclusive"}
  tool_scripts    {"<tool>|<canonical-params-json>": V}
  oracle          {"answer": V, "truth": {step-id: V}} or absent
  facts_seed      list of store records, the same line format the store dumps:
                    {"kind": "tool"|"note"|"fact", ...}

values V are JSON scalars/lists (shorthand) or explicit objects
  {"kind": "number", "value": 42}
  {"kind": "text", "value": "s"}
  {"kind": "boolean", "value": true}
  {"kind": "quantity", "value": 3.5, "unit": "m"}
  {"kind": "composite", "items": [V...]}

value literals (verdict-table keys, audit-log payloads)
  num:42   txt:"s"   bool:true   qty:3.5:"m"   list:[num:1,num:2]

audit log (line-delimited JSON, fields in order)
  {"seq": int, "stage": "gate|prune|anchor|audit|synthesize|ensemble|facts",
   "event": str, "payload": {sorted keys}, "parent_refs": [str...]}

facts store dump (line-delimited JSON; tools, then notes, then facts, by id)
  {"kind": "tool", "id", "tool_name", "params", "outcome", "source_url", "retrieved_at"}
  {"kind": "note", "id", "summary", "credibility", "derived_from"}
  {"kind": "fact", "id", "category", "key", "value", "status", "version", "derived_from"}
"""


def corpus_paths(directory: str | Path) -> list[Path]:
    return sorted(Path(directory).glob("*.json"))


def scenario_expert_outputs(scenario: Scenario) -> list:
    """Parsed outputs for baseline methods that skip the pipeline entirely."""
    outputs = []
    for expert in sorted(scenario.experts, key=lambda e: e.config.expert_id):
        if expert.fail:
            continue
        for raw in expert.raw_traces:
            outputs.append(parse_expert_output(expert.config.expert_id, raw))
    return outputs
