import copy
import csv
import json
import subprocess
import sys
import warnings

import numpy as np
import pytest

from reusable_pricing.cli import main
from reusable_pricing.config import (
    ConfigError,
    UnknownFieldWarning,
    example_path,
    instance_from_dict,
    instance_to_dict,
    load_instance,
)
from reusable_pricing.experiments import FLUID_COLUMNS, GUARANTEE_COLUMNS, fluid_row, ratio_report

EXAMPLE = json.loads(example_path().read_text())


def test_example_config():
    loaded = load_instance(example_path())
    inst = loaded.instance
    assert inst.C == 3 and inst.M == 2
    np.testing.assert_allclose(inst.mus, [0.001, 1000])
    assert loaded.tolerances == {"dynamic": 1e-9, "static": 1e-10}
    assert loaded.seed == 0


def test_missing_field_named():
    doc = copy.deepcopy(EXAMPLE)
    del doc["classes"][0]["mu"]
    with pytest.raises(ConfigError, match=r"classes\[0\]\.mu"):
        instance_from_dict(doc)


def test_negative_rate_rejected():
    doc = copy.deepcopy(EXAMPLE)
    doc["classes"][1]["mu"] = -1.0
    with pytest.raises(ConfigError, match=r"classes\[1\]\.mu"):
        instance_from_dict(doc)


def test_inconsistent_market_size_rejected():
    doc = copy.deepcopy(EXAMPLE)
    doc["classes"][0]["Lambda"] = 10.0
    with pytest.raises(ConfigError, match="Lambda"):
        instance_from_dict(doc)


def test_unknown_field_warns():
    doc = copy.deepcopy(EXAMPLE)
    doc["comment"] = "hello"
    doc["classes"][0]["colour"] = "red"
    with pytest.warns(UnknownFieldWarning) as rec:
        loaded = instance_from_dict(doc)
    assert loaded.instance.C == 3
    assert {str(w.message) for w in rec} >= {"unknown config field comment ignored", "unknown config field classes[0].colour ignored"}


def test_round_trip(tmp_path):
    loaded = load_instance(example_path())
    doc = instance_to_dict(loaded)
    p = tmp_path / "x.json"
    p.write_text(json.dumps(doc))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        again = load_instance(p)
    assert again.instance == loaded.instance
    assert instance_to_dict(again) == doc


def test_params_block_and_other_kinds():
    doc = {
        "C": 2,
        "classes": [
            {"mu": 1.0, "demand": {"kind": "reciprocal_tight", "params": {"a": 1.0, "b": 2.0}}, "Lambda": 5.0},
            {"mu": 2.0, "demand": {"kind": "exponential", "a": 1.0, "b": 3.0}},
        ],
    }
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        inst = instance_from_dict(doc).instance
    assert inst.classes[0].Lambda == 5.0


def test_bad_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_instance(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_instance(p)


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["solve-dynamic", "--bogus"])
    assert err.value.code == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"C": 3, "classes": [{"demand": {"kind": "linear", "a": 1, "b": 1}}]}))
    assert main(["solve-dynamic", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "classes[0].mu" in capsys.readouterr().err
    assert main(["certify", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--horizon", "-1", "--out", str(tmp_path)]) == 1


def test_certify_json(tmp_path):
    assert main(["certify", "--C", "19", "--grid", "100", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "certificate_C19.json").read_text())
    assert set(doc) >= {"C", "N", "bound", "argmin_box", "cases", "runtime_s"}
    assert set(doc["cases"]) == {"case1", "case2", "box"}
    assert doc["bound"] == min(doc["cases"].values())
    run = json.loads((tmp_path / "run.json").read_text())
    assert run["command"] == "certify" and "REPL_THREADS" in run


def test_certify_two_units(tmp_path):
    assert main(["certify", "--C", "2", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "certificate_C2.json").read_text())
    assert doc["mhr"]["bound"] == pytest.approx(0.9801, abs=1e-4)


def test_table_guarantees_csv(tmp_path):
    assert main(["table-guarantees", "--Cmax", "6", "--grid", "50", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "table_guarantees.csv").open()))
    assert list(rows[0]) == GUARANTEE_COLUMNS
    assert [int(r["C"]) for r in rows] == [3, 4, 5, 6]


def test_table_fluid_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["table-fluid", "--M", "2", "--C", "2", "--instances", "2", "--seed", "5", "--out", str(out)]) == 0
    assert (a / "table_fluid.csv").read_bytes() == (b / "table_fluid.csv").read_bytes()
    rows = list(csv.DictReader((a / "table_fluid.csv").open()))
    assert list(rows[0]) == FLUID_COLUMNS
    for r in rows:
        for col in ("ratio_deltaC", "ratio_bestDelta", "ratio_optimal"):
            assert 0 < float(r[col]) <= 1.0001


def test_single_unit_static_equals_dynamic():
    row = fluid_row(1, 1, 3, "linear")
    assert row["ratio_optimal"] == pytest.approx(1.0, abs=1e-8)


def test_ratio_ordering():
    rep = ratio_report(load_instance(example_path()).instance)
    assert rep["revenue_constructed"] <= rep["revenue_static_opt"] <= rep["revenue_dynamic"] + 1e-8


def test_console_script_entry(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "reusable_pricing.cli", "repro-example1", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0, res.stderr
    doc = json.loads((tmp_path / "example1.json").read_text())
    assert doc["revenue_dynamic"] == pytest.approx(0.96436, abs=1e-3)
    assert "resolved arguments" in res.stderr
