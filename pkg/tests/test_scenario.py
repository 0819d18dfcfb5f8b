import csv
import io
import json
import textwrap
from math import log2, pi, sqrt

import pytest

from darkrsp import scenario as scn
from darkrsp.core import QuantumError
from darkrsp.ensembles import Family
from darkrsp.protocols import success_probability_formula
from darkrsp.scenario import (
    Report,
    ScenarioError,
    emit_report,
    eval_number,
    fixture_path,
    list_fixtures,
    load_scenario_data,
    parse_scenario,
    read_json_report,
    run_scenario,
    to_csv,
    to_json,
    to_text,
)

FIXTURES = [
    "paper_eq20_sweep", "paper_iii_a", "paper_iii_b", "paper_iii_c", "paper_iv_a",
    "paper_iv_b", "paper_iv_c", "paper_iv_d", "paper_v_a", "paper_v_b",
]

SINGLET_ENTRY = """
  - label: singlet
    resource: {kind: Singlet}
    ensemble: {family: QubitPolarReal}
    params: random:3:1
    expect: {success_probability: 1, ebits: 1, cbits_total: 1}
"""


def write(tmp_path, body, name="s.scn"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(body))
    return p


def scenario_text(*entries, name="t"):
    return f"format: rsp-scenario/1\nname: {name}\nentries:" + "".join(entries)


# ---------------------------------------------------------------- numbers

@pytest.mark.parametrize(
    "text,value",
    [("1/6", 1 / 6), ("2*log2(3)", 2 * log2(3)), ("pi/4", pi / 4), ("-sqrt(2)", -sqrt(2)), (0.5, 0.5), (3, 3.0), ("2**-1", 0.5)],
)
def test_eval_number(text, value):
    assert eval_number(text) == value


@pytest.mark.parametrize("text", ["__import__('os')", "x", "1 if 1 else 2", "[1]", "True", True, "open('f')", "1/0", "10.0**400", None])
def test_eval_number_rejects(text):
    with pytest.raises(ValueError):
        eval_number(text)


# ---------------------------------------------------------------- parsing

def test_fixture_listing():
    assert list_fixtures() == FIXTURES
    assert fixture_path("paper_iv_c.scn") == fixture_path("paper_iv_c")


def test_parse_two_party_fixture():
    cfg = parse_scenario(fixture_path("paper_iii_b"))
    four_a = [e for e in cfg.entries if e.configs[0].resource.kind.value == "FourQubitA"]
    families = {e.configs[0].ensemble.family for e in four_a}
    assert families == {Family.QUBIT_POLAR_REAL, Family.QUBIT_EQUATORIAL, Family.QUBIT_POLAR_IMAG, Family.QUBIT_FIXED_PHASE}
    assert all(c.parties == 2 for e in four_a for c in e.configs)


def test_degenerate_entry_reports_index(tmp_path):
    bad = """
  - resource: {kind: SuperposedFourQubit, a: 0, b: 0}
    ensemble: {family: QubitPolarReal}
    parties: 2
"""
    with pytest.raises(ScenarioError) as info:
        parse_scenario(write(tmp_path, scenario_text(SINGLET_ENTRY, bad)))
    (problem,) = info.value.problems
    assert problem[0] == 1 and "degenerate normalization" in problem[1]


def test_dimension_mismatch_is_reported(tmp_path):
    bad = """
  - resource: {kind: Antisymmetric, d: 3}
    ensemble: {family: QubitEquatorial}
"""
    with pytest.raises(ScenarioError) as info:
        parse_scenario(write(tmp_path, scenario_text(bad)))
    assert info.value.problems[0][0] == 0
    assert "dimension mismatch" in info.value.problems[0][1]


def test_all_problems_reported_together(tmp_path):
    bad1 = """
  - resource: {kind: Antisymmetric, d: 3}
    ensemble: {family: QubitEquatorial}
"""
    bad2 = """
  - resource: {kind: Singlet}
    ensemble: {family: Nope}
"""
    with pytest.raises(ScenarioError) as info:
        parse_scenario(write(tmp_path, scenario_text(bad1, SINGLET_ENTRY, bad2)))
    assert [i for i, _ in info.value.problems] == [0, 2]
    assert "entry 0" in str(info.value)


def test_validation_happens_before_any_run(tmp_path, monkeypatch):
    calls = []
    monkeypatch.setattr(scn, "run_protocol", lambda c: calls.append(c))
    bad = """
  - resource: {kind: FourQubitA}
    ensemble: {family: QubitEquatorial}
    parties: 3
"""
    with pytest.raises(ScenarioError):
        cfg = parse_scenario(write(tmp_path, scenario_text(SINGLET_ENTRY, bad)))
        run_scenario(cfg)
    assert calls == []


@pytest.mark.parametrize(
    "body,needle",
    [
        ("format: rsp-scenario/1\nentries: [\n", "malformed"),
        ("format: other/1\nentries:" + SINGLET_ENTRY, "format tag"),
        ("format: rsp-scenario/1\nentries: []\n", "nonempty"),
        ("- 1\n- 2\n", "mapping"),
        (scenario_text(SINGLET_ENTRY.replace("params: random:3:1", "params: random:3")), "random:<count>:<seed>"),
        (scenario_text(SINGLET_ENTRY + "    colour: blue\n"), "unknown keys"),
        (scenario_text(SINGLET_ENTRY.replace("{success_probability: 1,", "{probability: 1,")), "unknown expectation"),
        (scenario_text(SINGLET_ENTRY + "    mode: fast\n"), "mode"),
        ("format: rsp-scenario/1\noutput: {format: xml}\nentries:" + SINGLET_ENTRY, "output format"),
    ],
)
def test_malformed_scenarios(tmp_path, body, needle):
    with pytest.raises(ScenarioError, match=needle):
        parse_scenario(write(tmp_path, body))


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="not found"):
        parse_scenario(tmp_path / "nope.scn")


def test_formula_expectation_only_for_superposed():
    data = {
        "format": "rsp-scenario/1",
        "entries": [{"resource": {"kind": "Singlet"}, "ensemble": {"family": "QubitEquatorial"},
                     "expect": {"success_probability": "formula"}}],
    }
    with pytest.raises(ScenarioError, match="formula"):
        load_scenario_data(data)


def test_sweep_expands_grid():
    data = {
        "format": "rsp-scenario/1",
        "entries": [{
            "protocol": "probabilistic",
            "resource": {"kind": "SuperposedFourQubit", "a": 1, "b": 0},
            "ensemble": {"family": "QubitPolarReal"},
            "params": {"theta": "pi/3"},
            "sweep": {"a": [1, 2], "b": ["-1/2", 0, 1]},
            "expect": {"success_probability": "formula"},
        }],
    }
    cfg = load_scenario_data(data)
    assert len(cfg.entries) == 6
    assert {(e.configs[0].resource.a, e.configs[0].resource.b) for e in cfg.entries} == {
        (a, b) for a in (1.0, 2.0) for b in (-0.5, 0.0, 1.0)
    }
    assert all(e.index == 0 for e in cfg.entries)


def test_seed_and_trial_overrides():
    p = fixture_path("paper_iii_c")
    base = parse_scenario(p)
    over = parse_scenario(p, seed=5, trials=1000)
    sampled = [e for e in over.entries if e.configs[0].sample is not None]
    assert sampled and all(e.configs[0].sample.trials == 1000 and e.configs[0].sample.seed == 5 for e in sampled)
    assert over.entries[0].params_source == "random:10:5"
    assert base.entries[0].params_source == "random:10:301"


# ---------------------------------------------------------------- running

def test_two_party_fixture_passes():
    report = run_scenario(parse_scenario(fixture_path("paper_iii_b")))
    assert report.passed
    assert all(r.success_probability == pytest.approx(1, abs=1e-10) for e in report.entries for r in e.runs)


def test_eq20_sweep_matches_formula():
    report = run_scenario(parse_scenario(fixture_path("paper_eq20_sweep")))
    assert report.passed and len(report.entries) == 30
    for e in report.entries:
        a, b = e.config["resource"]["a"], e.config["resource"]["b"]
        for r in e.runs:
            assert abs(r.success_probability - success_probability_formula(a, b).PS) < 1e-10


def test_qutrit_probabilistic_fixture():
    report = run_scenario(parse_scenario(fixture_path("paper_iv_c")))
    values = sorted({round(r.success_probability, 12) for e in report.entries for r in e.runs})
    assert values == [round(1 / 3, 12), round(2 / 3, 12)]
    assert report.passed


@pytest.mark.parametrize("name", FIXTURES)
def test_every_fixture_passes(name):
    report = run_scenario(parse_scenario(fixture_path(name)), jobs=2)
    failing = [(e.label, e.status, e.error) for e in report.entries if e.status != "pass"]
    assert not failing


def test_failed_expectation_marks_entry(tmp_path):
    entry = SINGLET_ENTRY.replace("success_probability: 1,", "success_probability: 0.9,")
    report = run_scenario(parse_scenario(write(tmp_path, scenario_text(entry))))
    assert not report.passed
    assert report.entries[0].status == "fail"
    checks = {c.name: c.passed for c in report.entries[0].runs[0].checks}
    assert checks == {"success_probability": False, "ebits": True, "cbits_total": True}


def test_errored_entry_does_not_abort_others(tmp_path, monkeypatch):
    real = scn.run_protocol

    def flaky(config):
        if config.resource.kind.value == "FourQubitA":
            raise QuantumError("numerical breakdown")
        return real(config)

    monkeypatch.setattr(scn, "run_protocol", flaky)
    four = """
  - resource: {kind: FourQubitA}
    ensemble: {family: QubitEquatorial}
    params: {phi: 1}
"""
    report = run_scenario(parse_scenario(write(tmp_path, scenario_text(four, SINGLET_ENTRY))))
    assert [e.status for e in report.entries] == ["error", "pass"]
    assert "numerical breakdown" in report.entries[0].error
    assert not report.passed


def test_unchecked_entry_counts_as_pass(tmp_path):
    entry = """
  - resource: {kind: Singlet}
    ensemble: {family: QubitEquatorial}
"""
    report = run_scenario(parse_scenario(write(tmp_path, scenario_text(entry))))
    assert report.entries[0].status == "unchecked" and report.passed


def test_jobs_do_not_change_report():
    cfg = parse_scenario(fixture_path("paper_iii_c"))
    one = json.loads(to_json(run_scenario(cfg, jobs=1)))
    four = json.loads(to_json(run_scenario(cfg, jobs=4)))
    for e in one["entries"] + four["entries"]:
        e["duration_s"] = 0
    assert one == four


# ---------------------------------------------------------------- emitting

@pytest.fixture(scope="module")
def iii_c_report():
    return run_scenario(parse_scenario(fixture_path("paper_iii_c")))


def test_json_round_trip(iii_c_report, tmp_path):
    path = emit_report(iii_c_report, "json", tmp_path / "r.json")
    back = read_json_report(path)
    assert back == iii_c_report
    assert to_json(back) == to_json(iii_c_report)


def test_json_floats_are_lossless(iii_c_report):
    data = json.loads(to_json(iii_c_report))
    p = data["entries"][0]["runs"][0]["success_probability"]
    assert p == iii_c_report.entries[0].runs[0].success_probability
    assert Report.from_dict(data).entries[0].runs[0].ledger == iii_c_report.entries[0].runs[0].ledger


def test_csv_shape(iii_c_report):
    rows = list(csv.reader(io.StringIO(to_csv(iii_c_report))))
    assert rows[0] == ["scenario", "entry", "outcome", "probability", "success", "fidelity_min"]
    expected = sum(len(r.outcomes) for e in iii_c_report.entries for r in e.runs)
    assert len(rows) - 1 == expected
    assert all(row[0] == "paper_iii_c" for row in rows[1:])
    assert {row[4] for row in rows[1:]} <= {"true", "false"}
    assert float(rows[1][3]) == iii_c_report.entries[0].runs[0].outcomes[0].probability


def test_text_has_ledger_line_per_run(iii_c_report):
    text = to_text(iii_c_report)
    runs = sum(len(e.runs) for e in iii_c_report.entries)
    ledger_lines = [ln for ln in text.splitlines() if ln.strip().startswith("ebits=") and "cbits_total=" in ln]
    assert len(ledger_lines) == runs
    assert "scenario paper_iii_c: PASS" in text


def test_unwritable_path(iii_c_report, tmp_path):
    with pytest.raises(OSError):
        emit_report(iii_c_report, "json", tmp_path / "missing" / "r.json")


def test_unknown_format(iii_c_report, tmp_path):
    with pytest.raises(ValueError):
        emit_report(iii_c_report, "xml", tmp_path / "r.xml")
