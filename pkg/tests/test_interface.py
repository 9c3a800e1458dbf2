import json
import math

import numpy as np
import pytest
from hypothesis import given, settings

from helpers import random_scenario, rng, seeds
from weaktrace.interface.cli import main
from weaktrace.interface.dsl import (
    ArityError,
    DimensionMismatchError,
    DSLSyntaxError,
    NonUnitaryError,
    UnknownElementError,
    builtin_text,
    document_to_scenario,
    format_scenario,
    parse_number,
    parse_scenario,
    scenario_to_document,
)
from weaktrace.interface.serialize import ResultEnvelope, UnsupportedFormatError, emit, load_csv, load_json
from weaktrace.scenarios import build_scenario, scenario_names
from weaktrace.weakvalue import segment_trace_map

HEAD = "version 1\nscenario t\nmode a\nmode b\n"
TAIL = "input : a\n"


def _err(text):
    with pytest.raises(Exception) as info:
        parse_scenario(text)
    return info.value


# ---------------------------------------------------------------- DSL

@pytest.mark.parametrize("name", scenario_names())
def test_shipped_files_rebuild_builders_bit_identically(name):
    sc = document_to_scenario(parse_scenario(builtin_text(name)))
    ref = build_scenario(name)
    assert sc.circuit.layers == ref.circuit.layers
    assert sc.circuit.segments == ref.circuit.segments
    assert sc.circuit.detectors == ref.circuit.detectors
    assert np.array_equal(sc.circuit.unitary().matrix, ref.circuit.unitary().matrix)
    assert sc.input == ref.input
    assert sc.postselections == ref.postselections
    assert dict(sc.roles) == dict(ref.roles) and sc.default_cut == ref.default_cut


def test_nested_file_golden_values():
    sc = document_to_scenario(parse_scenario(builtin_text("nested")))
    wv = segment_trace_map(sc, "D2").weak_values()
    assert abs(wv["B"] - 0.5) < 1e-12 and abs(wv["C"] + 0.5) < 1e-12


def test_empty_input_error_location():
    e = _err("")
    assert isinstance(e, DSLSyntaxError) and (e.line, e.col) == (1, 1)
    e = _err("   \n# only a comment\n")
    assert (e.line, e.col) == (1, 1)


def test_three_mode_beamsplitter_is_arity_error():
    e = _err(HEAD + "mode c\nbs a b c r=1/2\n" + TAIL)
    assert isinstance(e, ArityError)
    assert "bs" in str(e) and (e.line, e.col) == (6, 1)


def test_unknown_element():
    e = _err(HEAD + "  widget a\n" + TAIL)
    assert isinstance(e, UnknownElementError) and (e.line, e.col) == (5, 3)


def test_unknown_key_is_fatal():
    e = _err(HEAD + "bs a b r=1/2 colour=red\n" + TAIL)
    assert isinstance(e, DSLSyntaxError) and "colour" in str(e) and e.col == 14


def test_non_unitary_element():
    e = _err(HEAD + "bs a b r=3/2\n" + TAIL)
    assert isinstance(e, NonUnitaryError) and e.line == 5


def test_dimension_mismatch():
    text = "version 1\nscenario t\nmode a.H\nmode a.V\nmode b\nbs a b r=1/2\ninput : a.H\n"
    e = _err(text)
    assert isinstance(e, DimensionMismatchError) and e.line == 6


def test_unknown_mode_located_in_expression():
    e = _err(HEAD + "detector D a\npostselect D : sqrt(2)/2*a + sqrt(2)/2*q\n" + TAIL)
    assert isinstance(e, DSLSyntaxError) and "q" in str(e)
    assert (e.line, e.col) == (6, 40)


def test_unnormalized_input():
    e = _err(HEAD + "input : a + b\n")
    assert "normalized" in str(e)


def test_expression_syntax_errors():
    e = _err(HEAD + "phase a pi*/2\n" + TAIL)
    assert isinstance(e, DSLSyntaxError) and (e.line, e.col) == (5, 12)
    with pytest.raises(DSLSyntaxError):
        parse_number("sqrt(-1)")
    with pytest.raises(DSLSyntaxError):
        parse_number("1/0")


def test_number_grammar():
    assert parse_number("-pi/2") == -math.pi / 2
    assert parse_number("sqrt(2)/2") == math.sqrt(2) / 2
    assert parse_number("2*(1+3)/4") == 2.0
    assert parse_number("1e-3") == 1e-3


def test_version_must_come_first():
    e = _err("scenario t\nversion 1\n")
    assert (e.line, e.col) == (1, 1)
    assert "version" in str(_err("version 2\n"))


def test_analysis_keys_strict():
    doc = parse_scenario(HEAD + TAIL + "analysis trace-map detector=D1\n")
    assert doc.analyses[0].get("detector") == "D1"
    e = _err(HEAD + TAIL + "analysis trace-map detectr=D1\n")
    assert "detectr" in str(e)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_parse_print_round_trip(seed):
    doc = scenario_to_document(random_scenario(rng(seed)))
    text = format_scenario(doc)
    again = parse_scenario(text)
    assert again == doc
    assert format_scenario(again) == text


# ---------------------------------------------------------------- serialization

def _wv_envelope():
    payload = {"value": 0.5 + 0j, "numerator": 0.25 - 1e-17j, "denominator": 0.5 + 0j,
               "postselection_probability": 0.25}
    return ResultEnvelope("0.1.0", "nested", "weakvalue", payload, notes=("detector=D2",))


def test_weakvalue_json_schema():
    doc = json.loads(emit(_wv_envelope(), "json"))
    assert set(doc["payload"]) == {"value", "numerator", "denominator", "postselection_probability"}
    assert doc["payload"]["numerator"] == {"re": 0.25, "im": -1e-17}
    assert doc["tool_version"] == "0.1.0" and doc["version"] == 1


def test_json_round_trip_and_determinism():
    env = _wv_envelope()
    data = emit(env, "json")
    assert data == emit(_wv_envelope(), "json")
    assert load_json(data) == env


def test_sweep_csv_header():
    rows = [{"lambda": 1e-3, "mean_shift": 1e-3, "first_order_mean_shift": 1e-3, "residual_norm": 0.0,
             "success_probability": 0.25}]
    env = ResultEnvelope("0.1.0", "nested", "pointer-sweep", {"rows": rows})
    text = emit(env, "csv").decode()
    assert text.splitlines()[0] == "lambda,mean_shift,first_order_mean_shift,residual_norm,success_probability"
    assert load_csv(text) == rows


def test_csv_complex_columns():
    text = emit(_wv_envelope(), "csv").decode()
    assert text.splitlines()[0].startswith("value_re,value_im,numerator_re,numerator_im")
    assert load_csv(text)[0]["numerator"] == 0.25 - 1e-17j


def test_unsupported_combination():
    env = ResultEnvelope("0.1.0", "x", "custom", {"nested": {"a": 1}, "b": 2})
    with pytest.raises(UnsupportedFormatError):
        emit(env, "csv")
    with pytest.raises(UnsupportedFormatError):
        emit(_wv_envelope(), "xml")


# ---------------------------------------------------------------- CLI

def _run(capsysbinary, *argv):
    code = main(list(argv))
    out = capsysbinary.readouterr()
    return code, out.out, out.err.decode()


def test_cli_weakvalue(capsysbinary):
    code, out, _ = _run(capsysbinary, "weakvalue", "--scenario", "nested", "--detector", "D2", "--segments", "C")
    assert code == 0
    assert load_json(out).payload["value"] == pytest.approx(-0.5)


def test_cli_reads_files(capsysbinary, tmp_path):
    path = tmp_path / "n.wv"
    path.write_text(builtin_text("nested"))
    code, out, _ = _run(capsysbinary, "trace-map", "--scenario", str(path), "--detector", "D2", "--format", "csv")
    assert code == 0
    rows = load_csv(out)
    assert [r["sign"] for r in rows] == [1, 1, -1, 0, 0]


def test_cli_exit_codes(capsysbinary, tmp_path):
    code, _, err = _run(capsysbinary, "weakvalue", "--scenario", "dark_port_mz", "--detector", "dark",
                        "--segments", "arm_a")
    assert code == 3 and "orthogonal" in err
    assert _run(capsysbinary, "weakvalue", "--scenario", "nope", "--detector", "D2", "--segments", "A")[0] == 2
    assert _run(capsysbinary, "weakvalue", "--scenario", "nested", "--detector", "D9", "--segments", "A")[0] == 2
    bad = tmp_path / "bad.wv"
    bad.write_text(HEAD + "bs a b c r=1/2\n")
    code, _, err = _run(capsysbinary, "trace-map", "--scenario", str(bad), "--detector", "D1")
    assert code == 2 and "5:1" in err
    with pytest.raises(SystemExit) as info:
        main(["weakvalue", "--format", "xml"])
    assert info.value.code == 2


def test_cli_ensemble_reproducible(capsysbinary, tmp_path):
    args = ["ensemble", "--scenario", "nested", "--detector", "D2", "--segment", "A", "--lambda", "0.2",
            "--n", "5000", "--seed", "42"]
    a = _run(capsysbinary, *args)[1]
    b = _run(capsysbinary, *args)[1]
    assert a == b
    env = load_json(a)
    assert env.seed == 42 and env.payload["n_particles"] == 5000


def test_cli_outputs_and_plots(capsysbinary, tmp_path):
    out, fig = tmp_path / "sweep.csv", tmp_path / "sweep.png"
    code = main(["pointer-sweep", "--scenario", "nested", "--detector", "D2", "--segment", "C",
                 "--format", "csv", "--out", str(out), "--plot", str(fig)])
    assert code == 0
    assert len(load_csv(out.read_bytes())) == 10
    assert fig.stat().st_size > 0
    fig2 = tmp_path / "fringe.png"
    assert main(["fringe-sweep", "--points", "5", "--plot", str(fig2), "--out", str(tmp_path / "f.json")]) == 0
    assert fig2.exists()
    assert _run(capsysbinary, "weakvalue", "--scenario", "nested", "--detector", "D2", "--segments", "A",
                "--plot", str(tmp_path / "x.png"))[0] == 2


def test_cli_scenario_list_and_show(capsysbinary):
    code, out, _ = _run(capsysbinary, "scenario", "list", "--format", "csv")
    assert code == 0 and [r["name"] for r in load_csv(out)] == scenario_names()
    code, out, _ = _run(capsysbinary, "scenario", "show", "salih_single_outer", "--param", "inner_cycles=2")
    doc = parse_scenario(out)
    assert len(doc.layers) == 9
