"""Expert ensembles: diversified configs, trace sampling, tuple collection.

Experts are instantiated from one pluggable backend under mixed sampling
regimes: low-temperature conservative experts anchor the stable consensus,
higher-temperature radical experts widen coverage and make disagreements
informative. A fixed share of every ensemble is reserved for conservative
experts so the stable baseline never disappears.

Backends return raw trace payloads (JSON-shaped dicts); this module is the
schema boundary that turns them into validated :class:`ExpertOutput`
tuples — intermediates with confidences, an overall analysis, and a final
response. Scripted backends replay scenario-specified traces verbatim,
which is what every test in this repository runs against. A minimal HTTP
adapter for a chat-completion-style endpoint is provided for live use and
is exercised nowhere in the test suite.
"""

from __future__ import annotations

import json
import math
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .errors import AllExpertsFailedError, BackendError, InvalidPlanError, SchemaError
from .plandag import StepResult
from .values import Value, value_from_json

CONSERVATIVE = "conservative"
RADICAL = "radical"

CONSERVATIVE_TEMPERATURE = 0.1
RADICAL_TEMPERATURE_RANGE = (0.7, 1.0)

# Confidences drift by a whisker when they round-trip through JSON; clamp
# within tolerance, reject anything genuinely out of range.
_CONFIDENCE_SLACK = 1e-9

ENDPOINT_ENV = "CROSSCHECK_BACKEND_URL"
TOKEN_ENV = "CROSSCHECK_BACKEND_TOKEN"


@dataclass(frozen=True)
class ExpertConfig:
    expert_id: str
    role: str
    temperature: float
    seed: int

    def __post_init__(self) -> None:
        if self.role not in (CONSERVATIVE, RADICAL):
            raise InvalidPlanError(f"unknown expert role {self.role!r}")
        if self.temperature < 0:
            raise InvalidPlanError("temperature must be >= 0")


@dataclass(frozen=True)
class ExpertOutput:
    """One expert trace: intermediates, confidences, analysis, response."""

    expert_id: str
    steps: dict[str, StepResult]
    analysis: str
    response: Value

    @property
    def confidences(self) -> dict[str, float]:
        return {step: res.confidence for step, res in self.steps.items()}

    def restricted_to(self, keep: set[str]) -> "ExpertOutput":
        """A fragment containing only the retained steps; shares StepResults."""
        kept = {s: r for s, r in self.steps.items() if s in keep}
        return ExpertOutput(self.expert_id, kept, self.analysis, self.response)


@dataclass(frozen=True)
class EnsemblePlan:
    n_experts: int
    conservative_fraction: float = 0.25
    temperature_schedule: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_experts < 1:
            raise InvalidPlanError("n_experts must be >= 1")
        if not 0.0 <= self.conservative_fraction <= 1.0:
            raise InvalidPlanError("conservative_fraction must be in [0,1]")
        if self.n_experts >= 2 and math.ceil(self.conservative_fraction * self.n_experts) < 1:
            raise InvalidPlanError("ensembles of 2+ experts must reserve at least one conservative slot")


def default_schedule(n_conservative: int, n_radical: int) -> tuple[float, ...]:
    lo, hi = RADICAL_TEMPERATURE_RANGE
    if n_radical <= 1:
        radical = [hi] * n_radical
    else:
        radical = [round(lo + (hi - lo) * i / (n_radical - 1), 6) for i in range(n_radical)]
    return tuple([CONSERVATIVE_TEMPERATURE] * n_conservative + radical)


def make_ensemble(plan: EnsemblePlan, master_seed: int = 0) -> list[ExpertConfig]:
    """Instantiate configs: conservative slots first, then the radical spread.

    A singleton ensemble defaults to conservative. Temperatures come from
    the schedule by index; per-expert seeds derive from the master seed, so
    the same (plan, master_seed) always reproduces the same configs.
    """
    n = plan.n_experts
    # A singleton is conservative by definition; mixtures only matter at n >= 2.
    n_conservative = 1 if n == 1 else math.ceil(plan.conservative_fraction * n)
    schedule = plan.temperature_schedule or default_schedule(n_conservative, n - n_conservative)
    configs = []
    for i in range(n):
        role = CONSERVATIVE if i < n_conservative else RADICAL
        configs.append(ExpertConfig(
            expert_id=f"e{i + 1:02d}",
            role=role,
            temperature=schedule[i % len(schedule)],
            seed=(master_seed * 1_000_003 + i) % 2**32,
        ))
    cons_temps = [c.temperature for c in configs if c.role == CONSERVATIVE]
    rad_temps = [c.temperature for c in configs if c.role == RADICAL]
    if cons_temps and rad_temps and max(cons_temps) > min(rad_temps):
        raise InvalidPlanError("conservative temperatures must not exceed radical ones")
    return configs


class ExpertBackend(Protocol):
    """Produces raw trace payloads for one expert config and query."""

    def sample(self, config: ExpertConfig, query: str) -> list[dict]: ...


def parse_expert_output(expert_id: str, raw: dict) -> ExpertOutput:
    """Validate one raw trace payload into an ExpertOutput; SchemaError on violation."""
    if not isinstance(raw, dict):
        raise SchemaError(f"trace payload must be an object, got {type(raw).__name__}")
    steps_raw = raw.get("steps", {})
    if not isinstance(steps_raw, dict):
        raise SchemaError("trace 'steps' must be a map of step id to result")
    steps: dict[str, StepResult] = {}
    for step in sorted(steps_raw):
        entry = steps_raw[step]
        if not isinstance(entry, dict) or "value" not in entry:
            raise SchemaError(f"step {step!r} entry must be an object with a 'value'")
        confidence = entry.get("confidence", 1.0)
        if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
            raise SchemaError(f"step {step!r} confidence must be numeric")
        if -_CONFIDENCE_SLACK <= confidence < 0.0:
            confidence = 0.0
        elif 1.0 < confidence <= 1.0 + _CONFIDENCE_SLACK:
            confidence = 1.0
        if not 0.0 <= confidence <= 1.0:
            raise SchemaError(f"step {step!r} confidence {confidence!r} outside [0,1]")
        provenance = entry.get("provenance", [])
        if not isinstance(provenance, list) or not all(isinstance(p, str) for p in provenance):
            raise SchemaError(f"step {step!r} provenance must be a list of tool record ids")
        steps[step] = StepResult(
            step=step,
            value=value_from_json(entry["value"]),
            confidence=float(confidence),
            provenance=tuple(provenance),
        )
    if "response" not in raw:
        raise SchemaError("trace payload missing 'response'")
    analysis = raw.get("analysis", "")
    if not isinstance(analysis, str):
        raise SchemaError("trace 'analysis' must be a string")
    return ExpertOutput(
        expert_id=expert_id,
        steps=steps,
        analysis=analysis,
        response=value_from_json(raw["response"]),
    )


def sample_traces(config: ExpertConfig, query: str, backend: ExpertBackend) -> list[ExpertOutput]:
    """Draw this expert's candidate traces and validate each against the schema."""
    raw_traces = backend.sample(config, query)
    if not raw_traces:
        raise BackendError(f"backend returned no traces for expert {config.expert_id!r}")
    return [parse_expert_output(config.expert_id, raw) for raw in raw_traces]


@dataclass
class ExpertFailure:
    expert_id: str
    error: str


@dataclass
class CollectResult:
    outputs: list[ExpertOutput]
    failures: list[ExpertFailure] = field(default_factory=list)


def collect(query: str, configs: Sequence[ExpertConfig], backend: ExpertBackend) -> CollectResult:
    """Gather every expert's traces, in expert-id order.

    Individual backend failures are tolerated and reported alongside the
    survivors; the whole collection fails only when nobody answered.
    """
    if not configs:
        raise AllExpertsFailedError("no expert configs supplied")
    outputs: list[ExpertOutput] = []
    failures: list[ExpertFailure] = []
    for config in sorted(configs, key=lambda c: c.expert_id):
        try:
            outputs.extend(sample_traces(config, query, backend))
        except (BackendError, SchemaError) as exc:
            failures.append(ExpertFailure(config.expert_id, str(exc)))
    if not outputs:
        raise AllExpertsFailedError(
            "all experts failed: " + "; ".join(f"{f.expert_id}: {f.error}" for f in failures)
        )
    return CollectResult(outputs=outputs, failures=failures)


class ScriptedBackend:
    """Replays scenario-specified traces verbatim; concurrent-safe and exact."""

    def __init__(self, traces_by_expert: dict[str, list[dict]], failing: set[str] | None = None) -> None:
        self._traces = traces_by_expert
        self._failing = failing or set()

    def sample(self, config: ExpertConfig, query: str) -> list[dict]:
        if config.expert_id in self._failing:
            raise BackendError(f"scripted failure for expert {config.expert_id!r}")
        try:
            return self._traces[config.expert_id]
        except KeyError:
            raise BackendError(f"no scripted traces for expert {config.expert_id!r}") from None


class HttpBackend:
    """Chat-completion-style JSON adapter.

    POSTs ``{model, messages, temperature, seed}`` to the endpoint named by
    ``CROSSCHECK_BACKEND_URL`` (bearer token from ``CROSSCHECK_BACKEND_TOKEN``)
    and expects the first choice's message content to be a JSON list of raw
    trace payloads in the same shape scenario files use. Transport problems
    surface as BackendError, malformed content as SchemaError. Live use
    only; no acceptance path depends on it.
    """

    def __init__(self, endpoint: str | None = None, token: str | None = None, model: str = "default", timeout: float = 60.0) -> None:
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV, "")
        self.model = model
        self.timeout = timeout
        if not self.endpoint:
            raise BackendError(f"no endpoint configured; set {ENDPOINT_ENV}")

    def sample(self, config: ExpertConfig, query: str) -> list[dict]:
        body = json.dumps({
            "model": self.model,
            "messages": [{"role": "user", "content": query}],
            "temperature": config.temperature,
            "seed": config.seed,
        }).encode("utf-8")
        request = urllib.request.Request(self.endpoint, data=body, method="POST")
        request.add_header("Content-Type", "application/json")
        if self.token:
            request.add_header("Authorization", f"Bearer {self.token}")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise BackendError(f"backend transport failure: {exc}") from exc
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise SchemaError(f"backend response missing choices[0].message.content: {exc}") from exc
        try:
            traces = json.loads(content)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"backend content is not JSON: {exc}") from exc
        if not isinstance(traces, list):
            raise SchemaError("backend content must be a JSON list of trace payloads")
        return traces
