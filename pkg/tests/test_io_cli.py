import json

import numpy as np
import pytest

from reicoh import __version__, cli, fitting, io, synth
from reicoh.io import SchemaError


def _write(path, text):
    path.write_text(text)
    return path


def _echo_csv(tmp_path, seed=1):
    ds = synth.synthesize("mims", np.linspace(0, 421.5, 30), [1.0, 421.5, 1.3], 0.02, mode="absolute", seed=seed)
    path = tmp_path / "echo.csv"
    io.write_dataset(path, ds, "tau", "amp")
    return path


def test_minimal_file(tmp_path):
    loaded = io.load_dataset(_write(tmp_path / "a.csv", "tau_us,amp\n0,1.0\n100,0.5\n"), "fit-decay")
    assert len(loaded.dataset) == 2
    assert loaded.dataset.sigma is None
    assert loaded.columns == ("tau_us", "amp")


def test_sigma_column_weights_the_fit(tmp_path):
    text = "# comment line\nT_K,gamma_kHz,sigma_kHz\n0.5,1.0,0.1\n# another\n0.1,0.5,0.05\n"
    ds = io.load_dataset(_write(tmp_path / "b.csv", text), "fit-temperature").dataset
    np.testing.assert_array_equal(ds.x, [0.1, 0.5])
    np.testing.assert_allclose(ds.weights, [400.0, 100.0], rtol=1e-14)


def test_units_converted_to_canonical(tmp_path):
    text = "T_mK,gamma_Hz,sigma_Hz\n40,300,10\n1000,900,20\n"
    ds = io.load_dataset(_write(tmp_path / "c.csv", text), "fit-temperature").dataset
    np.testing.assert_allclose(ds.x, [0.04, 1.0])
    np.testing.assert_allclose(ds.y, [0.3, 0.9])
    np.testing.assert_allclose(ds.sigma, [0.01, 0.02])
    assert (ds.x_unit, ds.y_unit) == ("K", "kHz")


@pytest.mark.parametrize(
    "text,line,match",
    [
        ("# head\nT,gamma_kHz\n1,2\n", 2, "no unit suffix"),
        ("T_F,gamma_kHz\n1,2\n", 1, "unknown for temperature"),
        ("T_K,gamma_kHz\n1,2\n3,abc\n", 3, "non-numeric"),
        ("T_K,gamma_kHz\n1,2,3\n", 2, "expected 2 columns"),
        ("T_K,gamma_kHz,err_kHz\n1,2,3\n", 1, "third column"),
        ("T_K\n1\n", 1, "expected 2 or 3 columns"),
    ],
)
def test_schema_errors_carry_line_numbers(tmp_path, text, line, match):
    with pytest.raises(SchemaError, match=match) as info:
        io.load_dataset(_write(tmp_path / "bad.csv", text), "fit-temperature")
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_duplicate_abscissae_flagged(tmp_path):
    ds = io.load_dataset(_write(tmp_path / "d.csv", "B_T,gamma_kHz\n1,2\n1,2.1\n0,3\n"), "fit-field").dataset
    assert ds.duplicates
    np.testing.assert_array_equal(ds.x, [0.0, 1.0, 1.0])


def test_record_round_trip():
    data = synth.synthesize("double_exp", np.linspace(0, 160, 60), [0.4, 0.6, 3.169, 31.69], 0.05, seed=2)
    res = fitting.fit_hole(data)
    text = io.fit_record(res, ("arb", "arb", "h", "h"), {"seed": 2, "tool": "t"})
    lines, structured = io.read_record(text)
    back = io.fit_result_from_record(structured)
    for field in ("params", "stderr", "covariance", "free"):
        np.testing.assert_array_equal(getattr(back, field), getattr(res, field))
    for field in ("model", "param_names", "chi2", "n_iter", "converged", "condition_warning", "n_points", "message", "flags"):
        assert getattr(back, field) == getattr(res, field)
    assert lines["tau2_h"][0] == res.params[3]
    assert lines["tau2_h"][1] == res.stderr[3]
    assert lines["tau2_h"][2] == "h"
    assert lines["chi2"][0] == res.chi2


def test_fit_decay_command(tmp_path, capsys):
    csv_path = _echo_csv(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["fit-decay", "--input", str(csv_path), "--output-dir", str(out), "--seed", "11"]) == 0
    stdout = capsys.readouterr().out
    lines, structured = io.read_record(stdout)
    value, err, unit = lines["T2_us"]
    assert value == pytest.approx(421.5, rel=0.03) and err > 0 and unit == "us"
    assert (out / "fit_decay_params.txt").read_text() == stdout
    digest = io.sha256_bytes(csv_path.read_bytes())
    for name in ("fit_decay_params.txt", "fit_decay_residuals.csv", "fit_decay.svg"):
        text = (out / name).read_text()
        assert digest in text and "seed" in text and __version__ in text
    assert structured["provenance"]["seed"] == 11


def test_identical_runs_give_identical_records(tmp_path, capsys):
    csv_path = _echo_csv(tmp_path)
    records = []
    for sub in ("a", "b"):
        cli.main(["fit-decay", "--input", str(csv_path), "--output-dir", str(tmp_path / sub)])
        records.append((tmp_path / sub / "fit_decay_params.txt").read_bytes())
        records.append((tmp_path / sub / "fit_decay.svg").read_bytes())
    assert records[0] == records[2]
    assert records[1] == records[3]


def test_temperature_series_routed_to_linewidth_fit(tmp_path, capsys):
    T = np.geomspace(0.04, 11.0, 40)
    ds = synth.synthesize("gamma_t", T, [0.3, 1.2, 0.47, 0.0, 6e-5], 0.02, seed=3)
    path = tmp_path / "gamma_T.csv"
    io.write_dataset(path, ds, "T", "gamma")
    assert path.read_text().splitlines()[0] == "T_K,gamma_kHz,sigma_kHz"
    code = cli.main(["fit-temperature", "--input", str(path), "--output-dir", str(tmp_path)])
    lines, structured = io.read_record(capsys.readouterr().out)
    assert code == 0
    assert lines["xi_half_K"][0] == pytest.approx(0.47, rel=0.10)
    assert "tls_eliminated" in structured["flags"]


def test_field_command_needs_temperature(tmp_path, capsys):
    ds = synth.synthesize("gamma_b", np.linspace(0, 3, 30), [0.3, 1.2, 0.43, 0.088], 0.02, seed=4)
    path = tmp_path / "gamma_B.csv"
    io.write_dataset(path, ds, "B", "gamma")
    assert cli.main(["fit-field", "--input", str(path), "--output-dir", str(tmp_path)]) == 1
    assert "temperature" in capsys.readouterr().err
    assert cli.main(["fit-field", "--input", str(path), "--output-dir", str(tmp_path), "--temperature-k", "0.088"]) == 0
    lines, _ = io.read_record(capsys.readouterr().out)
    assert lines["T_fixed_K"] == (0.088, None, "K")


def test_fix_and_init_flags(tmp_path, capsys):
    csv_path = _echo_csv(tmp_path)
    code = cli.main(["fit-decay", "--input", str(csv_path), "--output-dir", str(tmp_path),
                     "--fix", "x=1.3", "--init", "T2=300"])
    lines, structured = io.read_record(capsys.readouterr().out)
    assert code == 0
    assert lines["x"] == (1.3, None, "")
    assert structured["free"] == [True, True, False]


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"delta-mhz": 2.0, "finesse": 3.0, "grid_points": 2**16, "seed": 5}))
    out = tmp_path / "cfg"
    assert cli.main(["simulate-afc", "--config", str(cfg), "--finesse", "4", "--output-dir", str(out)]) == 0
    _, structured = io.read_record(capsys.readouterr().out)
    assert structured["comb"]["delta"] == 2.0
    assert structured["comb"]["finesse"] == 4.0
    assert structured["provenance"]["seed"] == 5


def test_simulate_command(tmp_path, capsys):
    out = tmp_path / "sim"
    code = cli.main(["simulate-afc", "--delta-mhz", "1", "--finesse", "4", "--d", "1", "--output-dir", str(out)])
    captured = capsys.readouterr()
    lines, structured = io.read_record(captured.out)
    assert code == 0
    assert abs(lines["arrival_time_us"][0] - 1.0) <= lines["time_step_us"][0]
    assert "echo at" in captured.err and "echo at" not in captured.out
    header = [l for l in (out / "simulate_afc_waveforms.csv").read_text().splitlines() if not l.startswith("#")][0]
    assert header == "t_us,input_intensity,output_intensity"
    assert "seed" in (out / "simulate_afc.svg").read_text()


def test_efficiency_curve_command(tmp_path, capsys):
    code = cli.main(["efficiency-curve", "--d-list", "0.5,1", "--grid-points", str(2**16), "--output-dir", str(tmp_path)])
    _, structured = io.read_record(capsys.readouterr().out)
    assert code == 0
    assert [r[0] for r in structured["rows"]] == [0.5, 1.0]
    assert (tmp_path / "efficiency_curve.csv").exists()


def test_selftest_command(tmp_path, capsys):
    assert cli.main(["selftest", "--output-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out and "FAIL" not in out


def test_nonconverged_fit_exits_two(tmp_path, capsys):
    rows = "\n".join(f"{i},{(i * i) % 7}" for i in range(-10, 11))
    path = _write(tmp_path / "junk.csv", "nu_GHz,signal\n" + rows + "\n")
    assert cli.main(["fit-line", "--input", str(path), "--output-dir", str(tmp_path)]) == 2
    assert "did not converge" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["fit-decay"],
        ["fit-decay", "--input", "missing.csv"],
        ["fit-decay", "--bogus"],
        ["fit-decay", "--input", "x.csv", "--fix", "T2"],
        ["simulate-afc", "--finesse", "0.5"],
        ["simulate-afc", "--tooth-shape", "triangle"],
        ["efficiency-curve", "--d-list", "a,b"],
    ],
)
def test_usage_errors_exit_one(argv, tmp_path, capsys):
    assert cli.main(argv + ["--output-dir", str(tmp_path)] if argv else argv) == 1
    captured = capsys.readouterr()
    assert captured.err and not captured.out


def test_unknown_config_key(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", json.dumps({"finesse": 3, "colour": "red"}))
    assert cli.main(["simulate-afc", "--config", str(cfg)]) == 1
    assert "colour" in capsys.readouterr().err


def test_unknown_fit_parameter(tmp_path, capsys):
    csv_path = _echo_csv(tmp_path)
    assert cli.main(["fit-decay", "--input", str(csv_path), "--fix", "T3=1"]) == 1
    assert "T3" in capsys.readouterr().err


def test_schema_error_from_cli(tmp_path, capsys):
    path = _write(tmp_path / "e.csv", "tau,amp\n0,1\n")
    assert cli.main(["fit-decay", "--input", str(path), "--output-dir", str(tmp_path)]) == 1
    assert "line 1" in capsys.readouterr().err
