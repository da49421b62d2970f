import csv
import json

import pytest

from carterlab import cli
from carterlab.config import DEFAULTS, apply_override, parse_config, parse_scan, resolve
from carterlab.errors import RangeError, SchemaError


def test_defaults_filled():
    cfg = parse_config("command: cert\n")
    assert cfg["numerics"]["resolution"] == DEFAULTS["numerics"]["resolution"]
    assert cfg["output"]["path"] == "carterlab_out/cert"


def test_unknown_key_named():
    with pytest.raises(SchemaError) as err:
        parse_config("command: slab-evolve\nnumerics:\n  dtt: 0.1\n")
    assert "numerics.dtt" in str(err.value)


def test_superextremal_rejected_at_parse_time():
    with pytest.raises(RangeError):
        parse_config("command: kn-check\nM: 1\na: 0.6\nQ: 0.96\n")


def test_type_and_enum_errors():
    with pytest.raises(SchemaError):
        parse_config("command: cert\nnumerics:\n  resolution: many\n")
    with pytest.raises(SchemaError):
        parse_config("command: fly\n")
    with pytest.raises(SchemaError):
        parse_config("- 1\n- 2\n")


def test_exponent_strings_are_numbers():
    cfg = parse_config("command: slab-evolve\nnumerics:\n  dt: 1e-3\n  T: 2e1\n")
    assert cfg["numerics"]["dt"] == 1e-3 and cfg["numerics"]["T"] == 20.0


def test_override_and_scan():
    data = {}
    apply_override(data, "horizon.n_r=64")
    apply_override(data, "kn.R_w=2.4")
    assert data == {"horizon": {"n_r": 64}, "kn": {"R_w": 2.4}}
    assert parse_scan("0:1:5") == {"start": 0.0, "stop": 1.0, "num": 5}
    with pytest.raises(SchemaError):
        parse_scan("0:1")


def _run(tmp_path, *args):
    out = tmp_path / "res"
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_cert_spot_pass_and_fault(tmp_path, capsys):
    code, out = _run(tmp_path, "cert", "--set", "cert.mode=spot", "--set", "cert.points=3")
    assert code == 0
    rep = json.loads(out.with_suffix(".json").read_text())
    assert rep["schema_version"] == 1 and rep["passed"]
    code, _ = _run(tmp_path, "cert", "--set", "cert.mode=spot", "--set", "cert.points=3", "--set", "cert.fault=true")
    assert code == 1
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[-1].startswith("cert: FAIL")


def test_slab_spectrum_outputs(tmp_path):
    code, out = _run(tmp_path, "slab-spectrum", "--set", "numerics.resolution=9",
                     "--set", "spectrum.pencil_resolution=7")
    assert code == 0
    rows = list(csv.reader(out.with_suffix(".csv").open()))
    assert rows[0] == ["index", "eigenvalue", "residual"] and len(rows) == 7
    summary = json.loads(out.with_suffix(".json").read_text())["result"]
    assert summary["pencil"]["0"]["dim_ker"] == 1 and summary["pencil"]["0"]["dim_ker2"] == 2
    cfg = json.loads((tmp_path / "res.config.json").read_text())
    assert cfg["config"]["numerics"]["resolution"] == 9


def test_reject_slab_exit_2(tmp_path):
    code, _ = _run(tmp_path, "slab-spectrum", "--set", "slab.r_minus=1.0")
    assert code == 2


def test_huge_dt_exit_1(tmp_path):
    code, out = _run(tmp_path, "slab-evolve", "--set", "numerics.resolution=32", "--set", "numerics.dt=1e6",
                     "--set", "numerics.T=2e7")
    assert code == 1
    summary = json.loads(out.with_suffix(".json").read_text())["result"]
    assert summary["energy_drift"] > 1e-10 and not summary["checks"]["energy_drift"]


def test_evolve_default_passes(tmp_path):
    code, out = _run(tmp_path, "slab-evolve", "--set", "numerics.resolution=12", "--set", "numerics.T=3")
    assert code == 0
    header = next(csv.reader(out.with_suffix(".csv").open()))
    assert header == ["t", "E", "Re_Pi0_u", "Re_Pi0_ut", "norm_v", "norm_vt"]


def test_modes_scan(tmp_path):
    code, out = _run(tmp_path, "modes", "--scan", "0:0.4:3", "--set", "numerics.count=2")
    assert code == 0
    rows = list(csv.reader(out.with_suffix(".csv").open()))
    assert len(rows) == 1 + 3 * 2


def test_kn_check_and_domain(tmp_path):
    code, out = _run(tmp_path, "kn-check", "--set", "a=0", "--set", "Q=0")
    assert code == 0
    res = json.loads(out.with_suffix(".json").read_text())["result"]
    assert res["nontrapping"]["margin"] == pytest.approx(-6.25, abs=1e-12)
    assert res["obstruction"]["closed_form"] == pytest.approx(3.2)
    code, _ = _run(tmp_path, "kn-check", "--set", "Q=0.96")
    assert code == 2


def test_horizon_constant_and_not_extremal(tmp_path):
    code, out = _run(tmp_path, "horizon-extremal", "--set", "a=0", "--set", "Q=1", "--set", "horizon.data=constant",
                     "--set", "horizon.n_r=32", "--set", "horizon.n_steps=20")
    assert code == 0
    code, _ = _run(tmp_path, "horizon-extremal", "--set", "a=0.5", "--set", "Q=0.5")
    assert code == 2


def test_run_subcommand_with_yaml(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"command: kn-check\nkn:\n  R_w: 2.4\noutput:\n  path: {tmp_path / 'k'}\n  format: json\n")
    assert cli.main(["run", str(cfg)]) == 0
    assert (tmp_path / "k.json").exists() and not (tmp_path / "k.csv").exists()


def test_outputs_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for p in (a, b):
        cli.main(["slab-evolve", "--set", "numerics.resolution=8", "--set", "numerics.T=1", "--out", str(p)])
    assert a.with_suffix(".json").read_text() == b.with_suffix(".json").read_text()
    assert a.with_suffix(".csv").read_text() == b.with_suffix(".csv").read_text()


def test_plot_flag_writes_png(tmp_path):
    pytest.importorskip("matplotlib")
    code, out = _run(tmp_path, "slab-evolve", "--set", "numerics.resolution=8", "--set", "numerics.T=1", "--plot")
    assert code == 0 and out.with_suffix(".png").exists()


def test_missing_config_file_exit_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.yaml")]) == 2


def test_resolve_rejects_bad_horizon():
    with pytest.raises(RangeError):
        resolve({"command": "horizon-extremal", "a": 0.0, "Q": 1.0, "horizon": {"support": 2.0}})


def test_horizon_order_floor_per_scheme(tmp_path):
    code, out = _run(tmp_path, "horizon-extremal", "--set", "a=0.6", "--set", "Q=0.8", "--set", "horizon.n_r=32")
    res = json.loads(out.with_suffix(".json").read_text())["result"]
    assert res["order_min"] == 1.0 and res["scheme"] == "kn-experimental"
    assert code == (0 if res["order_estimate"] >= 1.0 else 1)
    code, out = _run(tmp_path, "horizon-extremal", "--set", "a=0", "--set", "Q=1", "--set", "horizon.n_r=32")
    assert json.loads(out.with_suffix(".json").read_text())["result"]["order_min"] == 2.0


def test_cert_full_mode_csv(tmp_path, monkeypatch):
    # full mode wiring on a pinned background (the generic run belongs to the acceptance suite)
    from fractions import Fraction

    from carterlab import curvature

    real = curvature.verify_certificates
    bg = curvature.SymbolicCarter(subs=dict(a=Fraction(1, 2), M=1, C3=Fraction(1, 3), k=0, Lambda=0, C1=0, C2=0,
                                            C4=0, C5=Fraction(1, 5)))
    monkeypatch.setattr(curvature, "verify_certificates",
                        lambda mutation=None, raise_on_failure=True: real(bg, mutation, raise_on_failure))
    code, out = _run(tmp_path, "cert")
    assert code == 0
    rows = list(csv.reader(out.with_suffix(".csv").open()))
    assert rows[0] == ["component", "zero", "terms_before_cancel"] and len(rows) == 9
    assert all(r[1] == "true" for r in rows[1:])
    code, _ = _run(tmp_path, "cert", "--set", "cert.fault=true")
    assert code == 1
