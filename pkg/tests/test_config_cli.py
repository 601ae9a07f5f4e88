import csv
import json
import math
import xml.etree.ElementTree as ET

import pytest

from becsim.cli import emit_traces, main, run_scenario, trace_header
from becsim.config import (
    DETUNED_LASER_OFFSET_HZ,
    config_from_dict,
    expand_config,
    load_document,
    parse_config,
    preset_paths,
)
from becsim.errors import ConfigurationError
from becsim.cascade import resonant_pump, QDParams


def preset_doc(name):
    return next(load_document(p) for p in preset_paths() if p.stem == name)


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def last_stderr_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


# configuration ----------------------------------------------------------------

def test_six_presets_in_order():
    assert [p.stem for p in preset_paths()] == [
        "fss0_pi", "fss0_five_pi", "fss0_detuned_pi", "fss5_pi", "fss5_five_pi", "fss5_detuned_pi",
    ]


def test_preset_expansion():
    doc = expand_config(preset_doc("fss0_pi"))
    assert doc["pulse"]["envelope"] == "square"
    assert doc["pulse"]["duration_s"] == 160e-12
    assert doc["pulse"]["t0_s"] == 80e-12
    assert doc["pulse"]["omega0_rad_per_s"] * 160e-12 == pytest.approx(math.pi)
    assert doc["layout"] == {"fss_nonzero": False, "cutoff": 2}
    assert doc["solver"]["t0_s"] == 0.0
    # the pulse end lands on the step grid
    steps = 160e-12 / doc["solver"]["dt_s"]
    assert steps == pytest.approx(round(steps), abs=1e-9)
    assert expand_config(doc) == doc


def test_detuned_preset_offsets_the_laser():
    doc = expand_config(preset_doc("fss0_detuned_pi"))
    p = QDParams(1.3, 3e-3)
    offset = doc["pulse"]["omega_pump_rad_per_s"] - resonant_pump(p)
    assert offset == pytest.approx(2 * math.pi * DETUNED_LASER_OFFSET_HZ, rel=1e-6)


def test_five_pi_preset():
    doc = expand_config(preset_doc("fss5_five_pi"))
    assert doc["pulse"]["omega0_rad_per_s"] * doc["pulse"]["duration_s"] == pytest.approx(5 * math.pi)
    assert doc["layout"]["fss_nonzero"] is True


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"qd": {"exciton_energy_ev": 1.3, "binding_energy_mev": 3.0, "colour": 1}}, "qd.colour"),
        ({"layout": {"fss_nonzero": True}}, "layout.fss_nonzero"),
        ({"layout": {"fss_nonzero": False, "cutoff": 1}}, "layout.cutoff"),
        ({"pulse": {"preset": "seven_pi"}}, "pulse.preset"),
        ({"solver": {"tf_s": 1e-9, "dt_s": 1e-10}}, "solver.dt_s"),
        ({"extra": 1}, "config.extra"),
    ],
)
def test_invalid_fields_are_named(patch, field):
    doc = {**preset_doc("fss0_pi"), **patch}
    with pytest.raises(ConfigurationError) as err:
        config_from_dict(doc)
    assert err.value.field == field


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "name": "x",\n  "qd": {,}\n}')
    with pytest.raises(ConfigurationError, match="line 3 column 10"):
        parse_config(path)


# traces -----------------------------------------------------------------------

def _zero_pulse_doc():
    doc = expand_config(preset_doc("fss0_pi"))
    doc["pulse"]["omega0_rad_per_s"] = 0.0
    doc["solver"] = {"tf_s": 200e-12, "dt_s": 1e-12, "record_stride": 10}
    doc["name"] = "dark"
    return doc


def test_emit_traces_layout(tmp_path):
    result = run_scenario(config_from_dict(_zero_pulse_doc()))
    path = emit_traces(result.record, tmp_path / "t.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == trace_header(result.record)
    assert rows[0][:5] == ["t_s", "P_G", "P_X1", "P_X2", "P_XX"]
    assert rows[0][5] == "N_early_H" and rows[0][-1] == "trace_drift"
    assert len(rows) == 1 + 21
    assert [float(x) for x in rows[1]] == [0.0, 1.0, 0.0, 0.0, 0.0, 0, 0, 0, 0, 0.0]


def test_zero_amplitude_pulse_leaves_vacuum():
    m = run_scenario(config_from_dict(_zero_pulse_doc())).metrics
    assert m.N_early == 0 and m.N_late == 0 and m.E_N == 0
    assert m.P == pytest.approx(1)
    assert m.E_N_cond is None and m.coherence_mag is None and m.phase is None


# command line -----------------------------------------------------------------

def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, _zero_pulse_doc())
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "out")]) == 0
    out = tmp_path / "out"
    assert {p.name for p in out.iterdir()} == {"traces.csv", "metrics.json", "kraus.json", "plot.svg"}
    doc = json.loads((out / "metrics.json").read_text())
    assert doc["scenario"] == "dark" and doc["metrics"]["E_N_cond"] is None
    root = ET.parse(out / "plot.svg").getroot()
    assert root.tag.endswith("svg")
    assert not root.findall(".//{http://www.w3.org/2000/svg}image")
    assert "dark" in capsys.readouterr().out


def test_cli_outputs_can_be_disabled(tmp_path):
    doc = _zero_pulse_doc()
    doc["outputs"] = {"traces_csv": "t.csv", "metrics_json": None, "kraus_json": None, "plot_svg": None}
    assert main(["run", "--config", str(write(tmp_path, doc)), "--out-dir", str(tmp_path / "o")]) == 0
    assert [p.name for p in (tmp_path / "o").iterdir()] == ["t.csv"]


def test_cli_missing_file_exit_code(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == 4
    assert last_stderr_json(capsys)["exit_code"] == 4


def test_cli_config_error_exit_code(tmp_path, capsys):
    doc = {**preset_doc("fss0_pi"), "layout": {"fss_nonzero": True}}
    assert main(["run", "--config", str(write(tmp_path, doc)), "--out-dir", str(tmp_path)]) == 2
    err = last_stderr_json(capsys)
    assert err["field"] == "layout.fss_nonzero" and err["error"] == "ConfigurationError"


def test_cli_bad_json_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{")
    assert main(["validate", "--config", str(path)]) == 2
    assert "line 1" in last_stderr_json(capsys)["message"]


def test_cli_divergence_exit_code(tmp_path, capsys):
    doc = expand_config(preset_doc("fss0_pi"))
    doc["pulse"]["omega0_rad_per_s"] = 1e22
    doc["solver"] = {"tf_s": 100e-12, "dt_s": 1e-12, "method": "euler"}
    with pytest.warns(RuntimeWarning):
        code = main(["run", "--config", str(write(tmp_path, doc)), "--out-dir", str(tmp_path)])
    assert code == 3
    assert "step" in last_stderr_json(capsys)


def test_cli_bad_thread_setting(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("BEC_SIM_THREADS", "zero")
    assert main(["validate", "--config", str(preset_paths()[0])]) == 2
    assert last_stderr_json(capsys)["field"] == "BEC_SIM_THREADS"


def test_cli_validate_prints_expanded_document(capsys):
    assert main(["validate", "--config", str(preset_paths()[0])]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == expand_config(preset_doc("fss0_pi"))
    assert "preset" not in doc["pulse"]


def test_outputs_are_deterministic(tmp_path):
    doc = _zero_pulse_doc()
    doc["pulse"]["omega0_rad_per_s"] = math.pi / 160e-12
    for d in ("a", "b"):
        run_scenario(config_from_dict(doc), tmp_path / d)
    for name in ("traces.csv", "metrics.json", "kraus.json", "plot.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fss5_five_pi_reference_values():
    # reference: E_N 0.200, P 0.421, E_N_cond 0.484, phase 1.3; the small
    # offsets come from the single-time-mode photon model
    m = run_scenario(parse_config(preset_paths()[4])).metrics
    assert m.E_N == pytest.approx(0.200, abs=0.05)
    assert m.P == pytest.approx(0.421, abs=0.05)
    assert m.E_N_cond == pytest.approx(0.484, abs=0.05)
    assert m.phase == pytest.approx(1.3, abs=0.1)
