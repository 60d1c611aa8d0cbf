from mdiqkd_coexist import runner
from mdiqkd_coexist.cli import main


def test_tables(capsys):
    assert main(["tables"]) == 0
    out = capsys.readouterr().out
    assert "29.602 kHz" in out and "NO" not in out


def test_calibrate(capsys):
    assert main(["calibrate"]) == 0
    assert "round trip within 1e-6" in capsys.readouterr().out


def test_sweep(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[[scenario]]\nid = "c"\nlength_km = 20.0\nn_channels = [0, 2, 4]\n')
    out = tmp_path / "c.csv"
    assert main(["sweep", str(cfg), "-o", str(out), "--summary", str(tmp_path / "c.txt")]) == 0
    assert len(runner.read_csv(out)) == 3
    assert "N_max" in (tmp_path / "c.txt").read_text()


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[[scenario]]\nid = "c"\nlength_km = 20.0\ncolour = "red"\n')
    assert main(["sweep", str(cfg), "-o", str(tmp_path / "x.csv")]) == 2
    assert "colour" in capsys.readouterr().err


def test_oracle_small_run(capsys):
    assert main(["oracle", "--cycles", "2e5", "--n-channels", "0", "--seed", "3"]) == 0
    assert "PASS" in capsys.readouterr().out
