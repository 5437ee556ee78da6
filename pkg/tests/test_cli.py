import csv

import pytest

from coulomblab import cli


def _rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


def test_parse_config_sections():
    cfg = cli.parse_config("# comment\n[run]\nd = 4\n dr=0.01  # trailing\n[data]\nkind = bump_shell\n")
    assert cfg["run"] == {"d": "4", "dr": "0.01"}
    assert cfg["data"]["kind"] == "bump_shell"
    assert cfg.pos[("run", "dr")][1:] == (4, 5)


@pytest.mark.parametrize("text,line,col", [
    ("[run]\nd = 3\n  oops\n", 3, 3),
    ("d = 3\n", 1, 1),
    ("[run\n", 1, 5),
    ("[run]\nd =\n", 2, 4),
    ("[run]\n2x = 1\n", 2, 1),
])
def test_parse_errors_have_position(text, line, col):
    with pytest.raises(cli.ConfigError, match=rf":{line}:{col}: "):
        cli.parse_config(text, "f.cfg")


def test_bad_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[run]\nd = 3\n  oops\n")
    assert cli.main(["evolve", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_PARSE
    assert f"{bad}:3:3: expected key = value" in capsys.readouterr().err


def test_bad_number_reports_position(tmp_path, capsys):
    cfg = tmp_path / "n.cfg"
    cfg.write_text("[run]\ndr = abc\n")
    assert cli.main(["evolve", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_PARSE
    assert ":2:5: run.dr: cannot read" in capsys.readouterr().err


def test_override_errors():
    cfg = cli.merged_config(None, ["dr=0.01", "data.amp=2"])
    assert cfg["run"]["dr"] == "0.01" and cfg["data"]["amp"] == "2"
    with pytest.raises(cli.ConfigError):
        cli.merged_config(None, ["nonsense=1"])
    with pytest.raises(cli.ConfigError):
        cli.merged_config(None, ["dr"])


def test_invariant_exit_code(tmp_path, capsys):
    assert cli.main(["evolve", "--set", "cfl=1.5", "--out", str(tmp_path)]) == cli.EXIT_INVARIANT
    err = capsys.readouterr().err
    assert err.startswith("invariant violated:") and err.count("invariant violated") == 1


def test_evolve_t_final_zero(tmp_path):
    assert cli.main(["evolve", "--set", "t_final=0", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "evolve.csv")
    assert rows[0] == cli.EVOLVE_COLUMNS
    assert len(rows) == 2 and float(rows[1][0]) == 0.0


def test_evolve_metadata_and_determinism(tmp_path):
    args = ["evolve", "--set", "t_final=2", "--set", "dr=0.01"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = (tmp_path / "a" / "evolve.csv").read_bytes(), (tmp_path / "b" / "evolve.csv").read_bytes()
    assert a == b
    text = a.decode()
    assert "# run.t_final=2\n" in text and "# data.kind=gaussian_shell\n" in text
    assert len(_rows(tmp_path / "a" / "evolve.csv")) > 2


def test_norms_point(capsys, tmp_path):
    assert cli.main(["norms", "--point", "3", "14/3", "14/3", "--out", str(tmp_path)]) == 0
    assert "allowed (equality branch)" in capsys.readouterr().out
    assert cli.main(["norms", "--point", "3", "2", "10", "--out", str(tmp_path)]) == 0
    assert "not allowed" in capsys.readouterr().out


def test_special_table(tmp_path):
    assert cli.main(["special", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "special.csv")
    assert len(rows) == 41


def test_accept_single_criterion(tmp_path, capsys):
    assert cli.main(["accept", "--only", "14", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] 14" in out and "1/1 criteria passed" in out
    assert (tmp_path / "accept.csv").exists()
