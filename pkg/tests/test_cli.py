import csv
import json

from qcbm.cli import main

RUN = """\
[experiment]
scheme = {scheme}
bas = 2x2
iterations = 5
eval_interval = 5
output_dir = {out}
"""


def _write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    cfg = _write(tmp_path, RUN.format(scheme="GAN_NS", out=out))
    assert main(["run", "--config", str(cfg)]) == 0
    for name in ("trace.csv", "report.json", "params.json", "net.npz", "features.csv"):
        assert (out / name).exists(), name
    with open(out / "features.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1000
    assert "final_tv" in json.loads(capsys.readouterr().out)


def test_run_without_net_skips_net_files(tmp_path):
    out = tmp_path / "run"
    cfg = _write(tmp_path, RUN.format(scheme="MMD_RBF", out=out))
    assert main(["run", "--config", str(cfg)]) == 0
    assert (out / "report.json").exists()
    assert not (out / "features.csv").exists()


def test_grid_run(tmp_path):
    out = tmp_path / "grid"
    cfg = _write(tmp_path, RUN.format(scheme="MMD_RBF", out=out) + "lr_g_list = 1e-2, 1e-3\nn_seeds = 2\n")
    assert main(["run", "--config", str(cfg), "--jobs", "1"]) == 0
    with open(out / "grid_summary.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2
    assert len([p for p in out.iterdir() if p.is_dir()]) == 4


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("QCBM_OUTPUT_ROOT", str(tmp_path))
    cfg = _write(tmp_path, RUN.format(scheme="MMD_RBF", out="rel"))
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "rel" / "report.json").exists()


def test_dry_run_and_config_errors(tmp_path, capsys):
    good = _write(tmp_path, RUN.format(scheme="GAN_NS", out=tmp_path / "x"))
    assert main(["run", "--config", str(good), "--dry-run"]) == 0
    assert json.loads(capsys.readouterr().out)["valid"] is True
    assert not (tmp_path / "x").exists()
    bad = _write(tmp_path, "[experiment]\nscheme = GAN_NS\nbas = 2x2\nbogus = 1\n", "bad.ini")
    assert main(["run", "--config", str(bad)]) == 2
    assert "bad.ini:4" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["frobnicate"]) == 2


def test_eval_round_trip(tmp_path, capsys):
    out = tmp_path / "run"
    cfg = _write(tmp_path, RUN.format(scheme="MMD_RBF", out=out))
    main(["run", "--config", str(cfg)])
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(out / "params.json"), "--bas", "2x2"]) == 0
    report = json.loads(capsys.readouterr().out)
    stored = json.loads((out / "report.json").read_text())
    assert abs(report["tv"] - stored["final"]["tv"]) < 1e-12
    assert main(["eval", "--checkpoint", str(out / "params.json"), "--bas", "2x3"]) == 2


def test_dataset(tmp_path, capsys):
    assert main(["dataset", "--bas", "2x3", "--out", str(tmp_path / "d.csv")]) == 0
    paths = json.loads(capsys.readouterr().out)
    with open(paths["patterns"]) as fh:
        assert len(list(csv.reader(fh))) >= 10


def test_reproduce_tiny(tmp_path, capsys):
    assert main(["reproduce", "fine_tune", "--seeds", "1", "--iterations", "3",
                 "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "reproduce" / "fine_tune" / "fine_tune_pairs.csv").exists()
    assert (tmp_path / "reproduce" / "fine_tune" / "fine_tune_summary.json").exists()
