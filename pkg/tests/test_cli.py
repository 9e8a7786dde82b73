import numpy as np
import pytest

from lelsd import (
    BankEntry,
    DirectionBank,
    PartLabel,
    load_bank,
    sample_latents,
    save_bank,
)
from lelsd.cli import main
from lelsd.imaging import encode_png


def axis_bank(backend, path):
    left = PartLabel("left", 0)
    vec = np.zeros(8, dtype=np.float32)
    vec[0] = 1.0
    bank = DirectionBank(
        backend.fingerprint,
        backend.space,
        (BankEntry("left_0", left, (0, 0), vec, final_score=1.0),),
        backend_descriptor=backend.descriptor(),
    )
    save_bank(bank, path)
    return bank


def test_train_smoke_writes_bank(tmp_path, capsys):
    out = tmp_path / "b.lelsd.json"
    code = main(["train", "--k", "1", "--samples", "8", "--batch", "4", "--seed", "1", "--out", str(out)])
    assert code == 0
    bank = load_bank(out)
    assert len(bank.entries) == 1
    assert bank.entries[0].name == "left_0"
    captured = capsys.readouterr().out
    assert "steps=2" in captured
    assert "wall_time_seconds=" in captured


def test_train_writes_report(tmp_path):
    out = tmp_path / "b.lelsd.json"
    report = tmp_path / "report.json"
    code = main(
        ["train", "--samples", "8", "--batch", "4", "--seed", "1", "--out", str(out), "--report", str(report)]
    )
    assert code == 0
    import json

    payload = json.loads(report.read_text())
    assert payload["steps"] == 2
    assert len(payload["objective_trace"]) == 2


def test_edit_alpha_zero_writes_base_png(tmp_path, planted):
    bank_path = tmp_path / "axis.lelsd.json"
    axis_bank(planted, bank_path)
    out = tmp_path / "x.png"
    code = main(["edit", "--bank", str(bank_path), "--seed", "9", "--apply", "left_0:0", "--out", str(out)])
    assert code == 0
    base_code = sample_latents(planted.space, 1, 9)[0]
    expected = encode_png(planted.forward(base_code).image)
    assert out.read_bytes() == expected


def test_edit_applies_strength(tmp_path, planted):
    bank_path = tmp_path / "axis.lelsd.json"
    axis_bank(planted, bank_path)
    out = tmp_path / "y.png"
    assert main(["edit", "--bank", str(bank_path), "--seed", "9", "--apply", "left_0:2.5", "--out", str(out)]) == 0
    base_code = sample_latents(planted.space, 1, 9)[0]
    assert out.read_bytes() != encode_png(planted.forward(base_code).image)


def test_edit_unknown_direction_fails(tmp_path, planted, capsys):
    bank_path = tmp_path / "axis.lelsd.json"
    axis_bank(planted, bank_path)
    out = tmp_path / "z.png"
    code = main(["edit", "--bank", str(bank_path), "--apply", "hair_0:1", "--out", str(out)])
    assert code == 1
    assert "UnknownDirection" in capsys.readouterr().err


def test_calibrate_prints_both_strengths(tmp_path, planted, capsys):
    bank_path = tmp_path / "axis.lelsd.json"
    axis_bank(planted, bank_path)
    code = main(["calibrate", "--bank", str(bank_path), "--seed", "3", "--direction", "left_0", "--distance", "0.05"])
    assert code == 0
    out = capsys.readouterr().out
    lines = dict(line.split("=", 1) for line in out.strip().splitlines())
    assert float(lines["alpha_pos"]) > 0
    assert float(lines["alpha_neg"]) < 0


def test_eval_reports_perfect_axis_direction(tmp_path, planted, capsys):
    bank_path = tmp_path / "axis.lelsd.json"
    axis_bank(planted, bank_path)
    assert main(["eval", "--bank", str(bank_path), "--samples", "8", "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "direction=left_0" in out
    scores = [float(s) for s in out.split("per_layer=")[1].split()[0].split(",")]
    assert all(s >= 0.999 for s in scores)


def test_parts_lists_vocabulary(capsys):
    assert main(["parts"]) == 0
    out = capsys.readouterr().out
    assert "left" in out and "right" in out


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as excinfo:
        main(["train", "--frobnicate"])
    assert excinfo.value.code == 2


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_serve_port_defaults_to_env(tmp_path, planted, monkeypatch):
    bank_path = tmp_path / "axis.lelsd.json"
    axis_bank(planted, bank_path)
    seen = {}

    def fake_run(app, host, port, log_level):
        seen["port"] = port
        seen["host"] = host

    import uvicorn

    monkeypatch.setattr(uvicorn, "run", fake_run)
    monkeypatch.setenv("LELSD_PORT", "18123")
    assert main(["serve", "--bank", str(bank_path)]) == 0
    assert seen["port"] == 18123
    monkeypatch.delenv("LELSD_PORT")
    assert main(["serve", "--bank", str(bank_path), "--port", "9001"]) == 0
    assert seen["port"] == 9001


def test_bank_backend_mismatch_fails(tmp_path, planted, capsys):
    bank_path = tmp_path / "axis.lelsd.json"
    axis_bank(planted, bank_path)
    out = tmp_path / "m.png"
    code = main(
        ["edit", "--bank", str(bank_path), "--backend", "planted:5", "--apply", "left_0:1", "--out", str(out)]
    )
    assert code == 1
    assert "error" in capsys.readouterr().err
