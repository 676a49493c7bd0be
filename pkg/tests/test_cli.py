import csv
import hashlib
import json
import shutil
import subprocess

import pytest

from sigmatile.cli import ConfigError, build_config, load_config, main

SMALL = """
seed = 7
[scheme]
order = 2
rule = "ideal"
x = "sqrt2m1"
[run]
steps = 400000
[tile]
resolution = 64
[spectrum]
K_max = 20
[mse]
M = [8, 16, 32, 64, 128]
[identity]
M_max = 8
[decay_lemma]
n_phi = 2
K_max = 10
"""


def _cfg(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(tmp_path, cmd, text, *extra):
    out = tmp_path / f"out_{cmd}"
    code = main([cmd, "--config", _cfg(tmp_path, text), "--out", str(out), *extra])
    return code, out


def _digest(tmp_path, text):
    return load_config(_cfg(tmp_path, text, "d.toml")).digest()


def test_empty_config_exit1(tmp_path):
    assert _run(tmp_path, "simulate", "")[0] == 1


def test_zero_resolution_exit1(tmp_path):
    assert _run(tmp_path, "tile", SMALL.replace("resolution = 64", "resolution = 0"))[0] == 1


@pytest.mark.parametrize("bad", [
    "[scheme]\norder = 2\ncolour = 3\n",
    "[scheme]\norder = 2\nx = \"pi\"\n",
    "[scheme]\norder = 2\nrule = \"nope\"\n",
    "[scheme]\norder = 2.5\n",
    "[scheme]\norder = 2\nu0 = [0.1]\n",
    "[scheme\norder = 2\n",
    "[mse]\nM = []\n",
])
def test_bad_configs_exit1(tmp_path, bad):
    assert _run(tmp_path, "simulate", bad)[0] == 1


def test_parse_error_names_line(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        load_config(_cfg(tmp_path, "[scheme]\norder = = 2\n"))


def test_unknown_field_named():
    with pytest.raises(ConfigError, match="run.stepz"):
        build_config({"run": {"stepz": 3}})


def test_short_run_exit3(tmp_path):
    text = SMALL.replace("steps = 400000", "steps = 10").replace("[run]", "[run]\nburn_in = 0")
    assert _run(tmp_path, "tile", text)[0] == 3


def test_rational_spectrum_exit4(tmp_path):
    assert _run(tmp_path, "spectrum", SMALL.replace('x = "sqrt2m1"', "x = 0.5"))[0] == 4


def test_divergence_exit2(tmp_path, caplog):
    text = SMALL.replace('rule = "ideal"', 'rule = {kind = "linear", alpha = [1e9, 1.0, 1.0], beta = [0.5, 0.0]}')
    assert _run(tmp_path, "simulate", text)[0] == 2
    assert "divergence at step" in caplog.text


def test_simulate_rows_and_stamp(tmp_path):
    text = SMALL.replace("steps = 400000", "steps = 250")
    code, out = _run(tmp_path, "simulate", text)
    assert code == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == f"# sigmatile config-sha256 {_digest(tmp_path, text)}"
    assert lines[1] == "n,u_1,u_2,q"
    assert len(lines) == 2 + 250


def test_tile_outputs(tmp_path):
    code, out = _run(tmp_path, "tile", SMALL)
    assert code == 0
    rep = json.loads((out / "multiplicity.json").read_text())
    assert rep["certified"] is True and rep["config_sha256"] == _digest(tmp_path, SMALL)
    assert (out / "tile.pgm").read_bytes().startswith(b"P5\n# sigmatile")
    assert (out / "tile.csv").read_text().splitlines()[1].startswith("cell,j_1,j_2")


def test_spectrum_flat(tmp_path):
    code, out = _run(tmp_path, "spectrum", SMALL)
    assert code == 0
    with open(out / "density.csv") as fh:
        rows = [r for r in csv.reader(fh) if not r[0].startswith("#")]
    assert rows[0] == ["xi", "s"]
    s = [float(r[1]) for r in rows[1:]]
    assert max(abs(v - 1 / 12) for v in s) < 0.05 / 12
    summary = json.loads((out / "spectrum.json").read_text())
    assert summary["decomposition_residual"] < 5e-3


def test_spectrum_m1_atoms(tmp_path):
    text = SMALL.replace("order = 2", "order = 1").replace('x = "sqrt2m1"', 'x = "golden"').replace(
        "resolution = 64", "resolution = 2048")
    code, out = _run(tmp_path, "spectrum", text)
    assert code == 0
    with open(out / "atoms.csv") as fh:
        rows = [r for r in csv.reader(fh) if not r[0].startswith("#")]
    masses = {int(r[0]): float(r[2]) for r in rows[1:]}
    for n in (1, 2, 3, -4):
        assert masses[n] == pytest.approx(1 / (39.47841760435743 * n * n), rel=0.05)


def test_mse_sweep(tmp_path):
    code, out = _run(tmp_path, "mse", SMALL)
    assert code == 0
    fit = json.loads((out / "fit.json").read_text())["fit"]
    assert fit["slope"] == pytest.approx(-5, abs=0.15)
    header = (out / "curve.csv").read_text().splitlines()[1]
    assert header == "M,E_total,E_pp,E_ac,slope_so_far"


def test_mse_reports_pp_tail(tmp_path):
    text = SMALL.replace('rule = "ideal"', 'rule = "onebit_a1_b0.5"').replace('x = "sqrt2m1"', 'x = "golden"')
    text = text.replace("steps = 400000", "steps = 1000000").replace("resolution = 64", "resolution = 128")
    code, out = _run(tmp_path, "mse", text.replace("M = [8, 16, 32, 64, 128]", "M = [8, 16]"))
    assert code == 0
    tail = json.loads((out / "fit.json").read_text())["pp_tail"]
    assert tail["n_fourier"] == 32
    assert tail["beta"] > 1.0
    assert 0 < tail["bound"] < 1e-4


def test_mse_flat_tile_has_no_tail(tmp_path):
    code, out = _run(tmp_path, "mse", SMALL.replace("M = [8, 16, 32, 64, 128]", "M = [16]"))
    assert json.loads((out / "fit.json").read_text())["pp_tail"] is None


def test_mse_single_M_omits_fit(tmp_path):
    code, out = _run(tmp_path, "mse", SMALL.replace("M = [8, 16, 32, 64, 128]", "M = [16]"))
    assert code == 0
    assert json.loads((out / "fit.json").read_text())["fit"] is None


def test_mse_mismatched_p_warns(tmp_path, caplog):
    code, _ = _run(tmp_path, "mse", SMALL.replace("[mse]", "[mse]\np = 2").replace("steps = 400000", "steps = 50000"))
    assert code == 0
    assert "matched choice is p = 3" in caplog.text


def test_identity_table(tmp_path):
    code, out = _run(tmp_path, "identity", SMALL)
    assert code == 0
    rows = (out / "identity.csv").read_text().splitlines()
    assert rows[1] == "m,M,ratio" and len(rows) == 2 + 3 * 7
    assert all(abs(float(r.split(",")[2]) - 1) < 1e-8 for r in rows[2:])


def test_decay_lemma_command(tmp_path):
    code, out = _run(tmp_path, "decay-lemma", SMALL)
    assert code == 0
    assert json.loads((out / "decay_lemma.json").read_text())["all_hold"] is True


def _hashes(out):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.iterdir())}


@pytest.mark.parametrize("cmd", ["simulate", "tile", "spectrum", "decay-lemma"])
def test_bit_for_bit(tmp_path, cmd):
    text = SMALL.replace("steps = 400000", "steps = 300000").replace("[scheme]", "[scheme]\njitter = 0.01")
    a = tmp_path / "a"
    b = tmp_path / "b"
    cfg = _cfg(tmp_path, text)
    assert main([cmd, "--config", cfg, "--out", str(a)]) == 0
    assert main([cmd, "--config", cfg, "--out", str(b), "--threads", "3"]) == 0
    assert _hashes(a) == _hashes(b)


def test_seed_changes_digest_and_jitter(tmp_path):
    text = SMALL.replace("[scheme]", "[scheme]\njitter = 0.01")
    p = _cfg(tmp_path, text)
    c1, c2 = load_config(p), load_config(p, seed=8)
    assert c1.digest() != c2.digest()
    assert (c1.u0 != c2.u0).all()


def test_threads_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SIGMA_TILE_THREADS", "two")
    assert _run(tmp_path, "identity", SMALL)[0] == 1
    monkeypatch.setenv("SIGMA_TILE_THREADS", "2")
    assert _run(tmp_path, "identity", SMALL)[0] == 0


def test_liouville_x_spec():
    cfg = build_config({"scheme": {"order": 1, "x": "liouville:0.5:2"}})
    assert cfg.modulator.x == 0.5 + 2**-2 + 2**-6 + 2**-24
    assert cfg.liouville is not None and len(cfg.liouville.resonances) == 4
    with pytest.raises(ConfigError):
        build_config({"scheme": {"x": "liouville:0.1:2"}})


@pytest.mark.skipif(shutil.which("sigmatile") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = _cfg(tmp_path, SMALL)
    res = subprocess.run(["sigmatile", "identity", "--config", cfg, "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
