import json
import re

import pytest

from artifact import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    body = [line for line in out.splitlines() if not re.match(r"# \w+ = ", line)]
    return code, body, err


def table(lines):
    return dict(line.split(",", 1) for line in lines if "," in line and not line.startswith("#"))


def test_word_for_225(capsys):
    code, body, _ = run(capsys, "word", "--rot", "2,2,5")
    assert code == 0 and body == ["LRRLR"]


def test_word_detail(capsys):
    code, body, _ = run(capsys, "word", "--rot", "3,3,8", "--detail")
    tab = table(body)
    assert code == 0 and tab["d"] == "3"
    assert tab["farey_left"] == "1/3" and tab["farey_right"] == "2/5"


def test_settings_are_echoed(capsys):
    cli.main(["word", "--rot", "2,2,5"])
    out = capsys.readouterr().out
    assert "# rot = " in out and "# threads = 1" in out


def test_sawtooth_trace(capsys):
    code, body, _ = run(capsys, "sawtooth", "--aL", "0.5", "--aR", "2", "--w", "0.25", "--trace", "1")
    assert code == 0
    assert body[0] == "0,0.0"
    assert float(body[1].split(",")[1]) == pytest.approx(0.58333, abs=1e-5)
    assert body[-2] == "# rotation,2/5"
    assert float(body[-1].split(",")[1]) < 0


def test_shrink_table(capsys):
    code, body, _ = run(capsys, "shrink")
    tab = table(body)
    assert code == 0 and tab["generic"] == "True"
    assert float(tab["tau_R"]) == pytest.approx(-1.36039455, abs=1e-7)
    rows = {int(line.split(",")[0]): line.split(",") for line in body
            if line.split(",")[0].lstrip("-").isdigit()}
    assert float(rows[0][2]) == pytest.approx(5.1288, abs=1e-3)
    assert float(rows[-1][4]) == pytest.approx(1.6222, abs=1e-3)


def test_negative_guess_is_accepted(capsys):
    code, body, _ = run(capsys, "shrink", "--guess", "-1.35,0.13", "--lo", "0", "--hi", "0")
    assert code == 0
    assert float(table(body)["tau_R"]) == pytest.approx(-1.36039455, abs=1e-7)


def test_sectors_ratio(capsys):
    code, body, _ = run(capsys, "sectors", "--k", "2", "--dl", "1")
    tab = table(body)
    assert code == 0
    assert float(tab["ratio_theta"]) == pytest.approx(1.5856, abs=1e-3)
    assert float(tab["ratio_kappa"]) == pytest.approx(float(tab["ratio_theta"]), abs=1e-5)


@pytest.mark.parametrize("argv", [
    ["word", "--rot", "3,2,8"],
    ["word"],
    ["sawtooth", "--aL", "2", "--aR", "3", "--w", "0.1"],
    ["shrink", "--base", "2,2,7"],
    ["bogus"],
    ["run"],
    ["run", "--kind", "fig1", "--set", "nx"],
    ["run", "--kind", "fig1", "--set", "colour=red"],
])
def test_usage_errors_exit_with_two(capsys, argv):
    assert cli.main(argv) == 2


@pytest.mark.parametrize("argv", [
    ["shrink", "--guess", "5,5"],
    ["sectors", "--dl", "4"],
])
def test_solver_failures_exit_with_one(capsys, argv):
    assert cli.main(argv) == 1
    assert "solver failure" in capsys.readouterr().err


def test_run_writes_a_manifest(capsys, tmp_path):
    code = cli.main(["run", "--kind", "fig1", "--out-dir", str(tmp_path), "--set", "nx=6", "--set", "ny=3",
                     "--set", "p_max=10"])
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["params"]["nx"] == 6 and manifest["kind"] == "fig1"


def test_run_from_config(capsys, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[experiment]\nkind = fig1\nseed = 3\n\n[params]\nnx = 4\nny = 2\np_max = 8\n")
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["params"]["nx"] == 4


def test_set_overrides_the_config(capsys, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[experiment]\nkind = fig1\n\n[params]\nnx = 4\nny = 2\np_max = 8\n")
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path), "--set", "nx=3"]) == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["params"]["nx"] == 3


def test_missing_config_is_a_usage_error(capsys, tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "none.ini")]) == 2


def test_mlscan_writes_grid(capsys, tmp_path):
    code, body, _ = run(capsys, "mlscan", "--x=-2,-1,3", "--y", "0,0.3,2", "--p-max", "10",
                        "--out-dir", str(tmp_path))
    assert code == 0
    assert (tmp_path / table(body)["grid"].rsplit("/", 1)[-1]).exists()


def test_verify_ladder_records_a_failed_k(capsys, tmp_path):
    code, body, _ = run(capsys, "verify", "--ks", "2,6", "--n-grid", "60", "--c0", "1.2", "--out-dir", str(tmp_path))
    assert code == 0
    assert body[0].startswith("id,k,")
    assert "error: exclusion strips" in body[1]
    assert body[2].endswith(",ok")


def test_sectors_mesh_feeds_verify(capsys, tmp_path):
    code, body, _ = run(capsys, "sectors", "--k", "4", "--mesh", "mesh.csv", "--n-delta", "2", "--n-theta", "2",
                        "--out-dir", str(tmp_path))
    assert code == 0
    mesh = tmp_path / "mesh.csv"
    assert mesh.exists()
    code, body, _ = run(capsys, "verify", "--mesh", str(mesh), "--n-grid", "60", "--out-dir", str(tmp_path))
    assert code == 0
    rows = [line for line in body if line[:1].isdigit()]
    assert len(rows) == 4 and all(r.endswith(",ok") for r in rows)
    assert (tmp_path / "errors.csv").exists() and (tmp_path / "lambda_000.csv").exists()
