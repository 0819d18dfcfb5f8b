"""Scenario files, suite execution and report serialization.

Scenario grammar (YAML syntax, format tag ``rsp-scenario/1``)::

    format: rsp-scenario/1
    name: <scenario name>
    output: {format: json|csv|text, path: <file>}      # optional
    entries:
      - label: <text>                                  # optional
        protocol: auto|exact|probabilistic|joint|single_particle
        resource: {kind: <ResourceKind>, a:, b:, m:, matching:, d:}
        ensemble: {family: <Family>, d:, phi0:}
        params: random:<count>:<seed> | {<free parameter>: <number>, ...}
        parties: <int>
        mode: enumerate | {sample: {trials: <int>, seed: <int>}}
        classifier: PaperLiteral|SeparabilityAware
        accounting: success_only|success_or_fail|full_outcome
        sweep: {<resource field>: [values], ...}       # optional grid over resource fields
        expect:                                        # optional
          success_probability: <number> | formula
          tolerance: <number>                          # default 1e-10
          ebits: <number>
          cbits_total: <number>
          cbits_per_party: <number>
          empirical_sigma: <number>                    # sample mode: |rate - p| <= k sigma

Numbers may be written as arithmetic over pi, sqrt(), log2() (e.g. ``2*log2(3)``).
"""
from __future__ import annotations

import ast
import csv
import io
import itertools
import json
import logging
import math
import operator
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .core import QuantumError
from .dark_states import DarkStateSpec, ResourceKind
from .ensembles import EnsembleSpec, Params, make_params, params_to_dict, random_params
from .protocols import (
    ProtocolConfig,
    Sample,
    Transcript,
    binomial_sigma,
    check_compatibility,
    run_protocol,
    success_probability_formula,
)

log = logging.getLogger(__name__)

SCENARIO_FORMAT = "rsp-scenario/1"
REPORT_FORMAT = "rsp-report/1"
FIXTURE_SUFFIX = ".scn"
CSV_COLUMNS = ("scenario", "entry", "outcome", "probability", "success", "fidelity_min")
DEFAULT_TOL = 1e-10
LEDGER_TOL = 1e-9


class ScenarioError(ValueError):
    """Scenario file could not be read or failed validation.

    `problems` lists (entry index or None, reason) pairs.
    """

    def __init__(self, problems: list[tuple[int | None, str]]):
        self.problems = problems
        lines = [f"entry {i}: {msg}" if i is not None else msg for i, msg in problems]
        super().__init__("; ".join(lines))


# ---------------------------------------------------------------- numbers

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt, "log2": math.log2, "cos": math.cos, "sin": math.sin, "acos": math.acos}
_CONSTS = {"pi": math.pi}


def eval_number(value: Any) -> float:
    """Evaluate a number or a small arithmetic expression string."""
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number, got {value!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            return -ev(node.operand) if isinstance(node.op, ast.USub) else ev(node.operand)
        if isinstance(node, ast.Name) and node.id in _CONSTS:
            return _CONSTS[node.id]
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression {value!r}")

    try:
        return float(ev(ast.parse(value.strip(), mode="eval")))
    except SyntaxError as exc:
        raise ValueError(f"cannot parse number {value!r}") from exc
    except ArithmeticError as exc:
        raise ValueError(f"cannot evaluate {value!r}: {exc}") from exc


def _numbers(obj):
    if isinstance(obj, list):
        return [_numbers(x) for x in obj]
    return eval_number(obj)


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class Expectation:
    success_probability: float | str | None = None
    tolerance: float = DEFAULT_TOL
    ebits: float | None = None
    cbits_total: float | None = None
    cbits_per_party: float | None = None
    empirical_sigma: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in vars(self).items() if v is not None}


@dataclass
class ScenarioEntry:
    index: int
    label: str
    configs: list[ProtocolConfig]
    expect: Expectation | None
    params_source: str


@dataclass
class ScenarioConfig:
    name: str
    entries: list[ScenarioEntry]
    output_format: str = "json"
    output_path: str | None = None


_ENTRY_KEYS = {
    "label", "protocol", "resource", "ensemble", "params", "parties",
    "mode", "classifier", "accounting", "sweep", "expect",
}


def _parse_expect(raw) -> Expectation | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ValueError("expect must be a mapping")
    unknown = set(raw) - set(Expectation.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown expectation keys {sorted(unknown)}")
    vals = {}
    for k, v in raw.items():
        if k == "success_probability" and v == "formula":
            vals[k] = "formula"
        else:
            vals[k] = eval_number(v)
    return Expectation(**vals)


def _parse_sample(mode, seed_override, trials_override) -> Sample | None:
    if mode in (None, "enumerate"):
        return None
    if isinstance(mode, dict) and set(mode) == {"sample"} and isinstance(mode["sample"], dict):
        s = mode["sample"]
        trials = int(trials_override if trials_override is not None else s["trials"])
        seed = int(seed_override if seed_override is not None else s["seed"])
        return Sample(trials, seed)
    raise ValueError(f"mode must be 'enumerate' or {{sample: {{trials, seed}}}}, got {mode!r}")


def _param_draws(ensemble: EnsembleSpec, raw, seed_override) -> tuple[list[Params], str]:
    if raw is None:
        raw = {}
    if isinstance(raw, str):
        parts = raw.split(":")
        if len(parts) != 3 or parts[0] != "random":
            raise ValueError(f"params string must be random:<count>:<seed>, got {raw!r}")
        count, seed = int(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("random draw count must be >= 1")
        if seed_override is not None:
            seed = int(seed_override)
        rng = np.random.default_rng(seed)
        return [random_params(ensemble, rng) for _ in range(count)], f"random:{count}:{seed}"
    if isinstance(raw, dict):
        values = {k: _numbers(v) for k, v in raw.items()}
        return [make_params(ensemble, values)], "fixed"
    raise ValueError(f"params must be a mapping or random:<count>:<seed>, got {raw!r}")


def _expand_sweep(resource: dict, sweep) -> list[tuple[str, dict]]:
    if sweep is None:
        return [("", resource)]
    if not isinstance(sweep, dict) or not sweep:
        raise ValueError("sweep must be a nonempty mapping of resource field to value list")
    keys = list(sweep)
    grids = [[eval_number(v) for v in sweep[k]] for k in keys]
    out = []
    for point in itertools.product(*grids):
        res = dict(resource)
        res.update(zip(keys, point))
        tag = ",".join(f"{k}={v:g}" for k, v in zip(keys, point))
        out.append((tag, res))
    return out


def _build_entry(index: int, raw: dict, seed_override, trials_override) -> list[ScenarioEntry]:
    if not isinstance(raw, dict):
        raise ValueError("entry must be a mapping")
    unknown = set(raw) - _ENTRY_KEYS
    if unknown:
        raise ValueError(f"unknown keys {sorted(unknown)}")
    for key in ("resource", "ensemble"):
        if not isinstance(raw.get(key), dict):
            raise ValueError(f"missing or malformed '{key}'")
    ensemble = EnsembleSpec.from_dict(raw["ensemble"])
    sample = _parse_sample(raw.get("mode"), seed_override, trials_override)
    expect = _parse_expect(raw.get("expect"))
    draws, source = _param_draws(ensemble, raw.get("params"), seed_override)
    base_label = raw.get("label") or f"{raw['resource'].get('kind')}+{ensemble.family.value}"
    entries = []
    for tag, res_raw in _expand_sweep(raw["resource"], raw.get("sweep")):
        resource_fields = {k: (_numbers(v) if k in ("a", "b") else v) for k, v in res_raw.items()}
        resource = DarkStateSpec.from_dict(resource_fields)
        parties = int(raw.get("parties", resource.remote_parties))
        configs = [
            ProtocolConfig(
                resource, ensemble, p, parties,
                raw.get("protocol", "auto"), sample,
                raw.get("classifier", "PaperLiteral"),
                raw.get("accounting", "success_or_fail"),
            )
            for p in draws
        ]
        for c in configs:
            check_compatibility(c)
        if expect is not None and expect.success_probability == "formula" and resource.kind is not ResourceKind.SUPERPOSED_FOUR_QUBIT:
            raise ValueError("expect success_probability 'formula' only applies to SuperposedFourQubit")
        label = f"{base_label} [{tag}]" if tag else base_label
        entries.append(ScenarioEntry(index, label, configs, expect, source))
    return entries


def load_scenario_data(data, seed: int | None = None, trials: int | None = None) -> ScenarioConfig:
    """Validate an already-parsed scenario tree. Every entry is checked before anything runs."""
    if not isinstance(data, dict):
        raise ScenarioError([(None, "scenario must be a mapping at top level")])
    problems: list[tuple[int | None, str]] = []
    if data.get("format") != SCENARIO_FORMAT:
        problems.append((None, f"format tag must be {SCENARIO_FORMAT!r}, got {data.get('format')!r}"))
    raw_entries = data.get("entries")
    if not isinstance(raw_entries, list) or not raw_entries:
        problems.append((None, "scenario needs a nonempty 'entries' list"))
        raise ScenarioError(problems)
    output = data.get("output") or {}
    fmt = output.get("format", "json")
    if fmt not in ("json", "csv", "text"):
        problems.append((None, f"unknown output format {fmt!r}"))
    entries: list[ScenarioEntry] = []
    for i, raw in enumerate(raw_entries):
        try:
            entries += _build_entry(i, raw, seed, trials)
        except (QuantumError, ValueError, KeyError, TypeError) as exc:
            problems.append((i, str(exc)))
    if problems:
        raise ScenarioError(problems)
    return ScenarioConfig(str(data.get("name", "scenario")), entries, fmt, output.get("path"))


def parse_scenario(path: str | Path, seed: int | None = None, trials: int | None = None) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError([(None, f"scenario file not found: {path}")])
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError([(None, f"malformed scenario file {path}: {exc}")]) from exc
    return load_scenario_data(data, seed, trials)


# ---------------------------------------------------------------- fixtures

def fixture_dir():
    return resources.files("darkrsp") / "fixtures"


def list_fixtures() -> list[str]:
    return sorted(p.name[: -len(FIXTURE_SUFFIX)] for p in fixture_dir().iterdir() if p.name.endswith(FIXTURE_SUFFIX))


def fixture_path(name: str) -> Path:
    name = name[: -len(FIXTURE_SUFFIX)] if name.endswith(FIXTURE_SUFFIX) else name
    p = fixture_dir() / f"{name}{FIXTURE_SUFFIX}"
    if not p.is_file():
        raise ScenarioError([(None, f"no bundled fixture named {name!r}")])
    return Path(str(p))


def resolve_scenario_path(ref: str) -> Path:
    """A path on disk, or else the name of a bundled fixture."""
    p = Path(ref)
    return p if p.is_file() else fixture_path(ref)


# ---------------------------------------------------------------- report

@dataclass
class Check:
    name: str
    expected: float
    actual: float
    tolerance: float
    passed: bool


@dataclass
class OutcomeRow:
    outcome: list[int]
    probability: float
    messages: list
    fidelities: list[float]
    success: bool
    separable: bool | None = None

    @property
    def fidelity_min(self) -> float | None:
        return min(self.fidelities) if self.fidelities else None


@dataclass
class RunReport:
    params: dict
    success_probability: float
    total_probability: float
    ledger: dict
    outcomes: list[OutcomeRow]
    sampling: dict | None = None
    checks: list[Check] = field(default_factory=list)


@dataclass
class EntryReport:
    index: int
    label: str
    status: str
    config: dict
    params_source: str
    runs: list[RunReport] = field(default_factory=list)
    error: str | None = None
    duration_s: float = 0.0


@dataclass
class Report:
    scenario: str
    entries: list[EntryReport]
    format: str = REPORT_FORMAT

    @property
    def passed(self) -> bool:
        return all(e.status in ("pass", "unchecked") for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "format": self.format,
            "scenario": self.scenario,
            "passed": self.passed,
            "entries": [_entry_to_dict(e) for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        entries = []
        for e in data["entries"]:
            runs = [
                RunReport(
                    r["params"], r["success_probability"], r["total_probability"], r["ledger"],
                    [OutcomeRow(**o) for o in r["outcomes"]], r["sampling"], [Check(**c) for c in r["checks"]],
                )
                for r in e["runs"]
            ]
            entries.append(
                EntryReport(e["index"], e["label"], e["status"], e["config"], e["params_source"], runs, e["error"], e["duration_s"])
            )
        return cls(data["scenario"], entries, data.get("format", REPORT_FORMAT))


def _entry_to_dict(e: EntryReport) -> dict:
    return {
        "index": e.index,
        "label": e.label,
        "status": e.status,
        "config": e.config,
        "params_source": e.params_source,
        "error": e.error,
        "duration_s": e.duration_s,
        "runs": [
            {
                "params": r.params,
                "success_probability": r.success_probability,
                "total_probability": r.total_probability,
                "ledger": r.ledger,
                "sampling": r.sampling,
                "checks": [vars(c) for c in r.checks],
                "outcomes": [vars(o) for o in r.outcomes],
            }
            for r in e.runs
        ],
    }


def _checks(tr: Transcript, expect: Expectation) -> list[Check]:
    out = []

    def add(name, expected, actual, tol):
        out.append(Check(name, float(expected), float(actual), float(tol), bool(abs(actual - expected) <= tol)))

    p_expected = expect.success_probability
    if p_expected == "formula":
        res = tr.config.resource
        p_expected = success_probability_formula(res.a, res.b).PS
    if p_expected is not None:
        add("success_probability", p_expected, tr.success_probability, expect.tolerance)
    for name in ("ebits", "cbits_total", "cbits_per_party"):
        want = getattr(expect, name)
        if want is not None:
            add(name, want, getattr(tr.ledger, name), LEDGER_TOL)
    if expect.empirical_sigma is not None and tr.sampling is not None:
        n = tr.sampling.trials
        p = tr.success_probability
        tol = expect.empirical_sigma * binomial_sigma(min(max(p, 0.0), 1.0), n)
        add("empirical_success_rate", p, tr.sampling.empirical_success_rate, tol + 1e-12)
    return out


def _run_report(tr: Transcript, expect: Expectation | None) -> RunReport:
    rows = [
        OutcomeRow(list(r.outcome), r.probability, list(r.messages), list(r.fidelities), r.success, r.separable)
        for r in tr.records
    ]
    sampling = None
    if tr.sampling is not None:
        s = tr.sampling
        sampling = {
            "trials": s.trials,
            "seed": s.seed,
            "counts": list(s.counts),
            "successes": s.successes,
            "empirical_success_rate": s.empirical_success_rate,
        }
    ledger = {
        "ebits": tr.ledger.ebits,
        "cbits_per_party": tr.ledger.cbits_per_party,
        "cbits_total": tr.ledger.cbits_total,
        "messages": tr.ledger.messages,
    }
    return RunReport(
        params_to_dict(tr.config.params), tr.success_probability, tr.total_probability,
        ledger, rows, sampling, _checks(tr, expect) if expect else [],
    )


def run_entry(entry: ScenarioEntry) -> EntryReport:
    cfg = entry.configs[0].to_dict()
    cfg.pop("params")
    report = EntryReport(entry.index, entry.label, "unchecked", cfg, entry.params_source)
    t0 = time.perf_counter()
    try:
        for config in entry.configs:
            report.runs.append(_run_report(run_protocol(config), entry.expect))
    except (QuantumError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.warning("entry %d (%s) errored: %s", entry.index, entry.label, exc)
        report.status = "error"
        report.error = f"{type(exc).__name__}: {exc}"
    else:
        if entry.expect is not None:
            ok = all(c.passed for r in report.runs for c in r.checks)
            report.status = "pass" if ok else "fail"
    report.duration_s = time.perf_counter() - t0
    return report


def run_scenario(config: ScenarioConfig, jobs: int = 1) -> Report:
    """Run every entry; the report keeps entry order whatever `jobs` is."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(run_entry, config.entries))
    else:
        entries = [run_entry(e) for e in config.entries]
    return Report(config.name, entries)


# ---------------------------------------------------------------- emit

def _outcome_str(outcome) -> str:
    return "".join(str(x) for x in outcome) if all(x < 10 for x in outcome) else ",".join(map(str, outcome))


def _run_name(e: EntryReport, i: int) -> str:
    return e.label if len(e.runs) == 1 else f"{e.label}#{i}"


def to_json(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in report.entries:
        for i, run in enumerate(e.runs):
            for o in run.outcomes:
                fmin = o.fidelity_min
                w.writerow([
                    report.scenario, _run_name(e, i), _outcome_str(o.outcome),
                    repr(o.probability), str(o.success).lower(), "" if fmin is None else repr(fmin),
                ])
    return buf.getvalue()


def _table(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    return ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]


def to_text(report: Report) -> str:
    lines = [f"scenario {report.scenario}: {'PASS' if report.passed else 'FAIL'}", ""]
    for e in report.entries:
        lines.append(f"[{e.index}] {e.label}  status={e.status}  runs={len(e.runs)}  ({e.duration_s:.3f}s)")
        if e.error:
            lines.append(f"    error: {e.error}")
        for i, run in enumerate(e.runs):
            lg = run.ledger
            lines.append(f"  run {i}: success_probability={run.success_probability:.12g}  params={run.params}")
            lines.append(
                f"    ebits={lg['ebits']:.12g} cbits_total={lg['cbits_total']:.12g} "
                f"cbits_per_party={lg['cbits_per_party']:.12g}"
            )
            rows = [["outcome", "probability", "messages", "fidelity_min", "success"]]
            for o in run.outcomes:
                rows.append([
                    _outcome_str(o.outcome), f"{o.probability:.12g}",
                    ",".join(map(str, o.messages)) or "-",
                    "-" if o.fidelity_min is None else f"{o.fidelity_min:.12g}",
                    "yes" if o.success else "no",
                ])
            lines += ["    " + ln for ln in _table(rows)]
            if run.sampling:
                s = run.sampling
                lines.append(
                    f"    sampled {s['trials']} trials (seed {s['seed']}): "
                    f"empirical success rate {s['empirical_success_rate']:.6g}"
                )
            for c in run.checks:
                mark = "ok" if c.passed else "FAILED"
                lines.append(f"    check {c.name}: expected {c.expected:.12g} got {c.actual:.12g} (tol {c.tolerance:.3g}) {mark}")
        lines.append("")
    return "\n".join(lines)


FORMATTERS = {"json": to_json, "csv": to_csv, "text": to_text}


def render_report(report: Report, fmt: str = "json") -> str:
    if fmt not in FORMATTERS:
        raise ValueError(f"unknown report format {fmt!r}")
    return FORMATTERS[fmt](report)


def emit_report(report: Report, fmt: str, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(render_report(report, fmt))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def read_json_report(path: str | Path) -> Report:
    return Report.from_dict(json.loads(Path(path).read_text()))
