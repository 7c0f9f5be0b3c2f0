import json

import numpy as np
import pytest
import yaml

from qtstomo import __version__, commands
from qtstomo.cli import main
from qtstomo.config import ConfigError, from_dict, parse_config, preset, with_overrides
from qtstomo.io import read_table

MINIMAL = """
model:
  kink_chain: {n: 3, j: 1.0, delta: 0.5}
probe:
  j_p: 2.0
bath:
  w_mk: 10
  t_mk: 12
"""


def test_minimal_config_is_valid():
    cfg = parse_config(MINIMAL)
    assert cfg.experiment.command == "sweep"
    assert cfg.bath.build().mode == "fdt"
    assert cfg.model.n == 3


def test_explicit_model_uses_one_based_couplings():
    cfg = parse_config("""
model:
  n_qubits: 3
  h: [0.1, 0.2, 0.3]
  delta: [1, 1, 1]
  couplings: [[1, 3, 0.5]]
experiment: {command: spectrum}
""")
    spec = cfg.model.build()
    assert spec.couplings == {(0, 2): 0.5}


@pytest.mark.parametrize("text, fragment", [
    (MINIMAL.replace("t_mk: 12", "t_mk: 12\n  w_ghz: 0.2\n  eps_p_ghz: 0.1\n  t_ghz: 0.25"), "bath"),
    (MINIMAL + "experiment: {bogus: 1}\n", "bogus"),
    (MINIMAL.replace("j_p: 2.0", "j_p: 2.0\n  epsilon: {start: -1, stop: 1, step: 0.1}"), "W/4"),
    (MINIMAL + "experiment: {l: [9]}\n", "outside"),
    (MINIMAL.replace("j_p: 2.0", "j_p: -2.0"), "probe.j_p"),
    ("model: {kink_chain: {n: 3, j: 1, delta: 1}}\nexperiment: {command: sweep}\n", "probe and bath"),
    ("[1, 2]", "mapping"),
])
def test_invalid_configs(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert fragment in str(err.value)


def test_mode_conflict_rejected():
    data = yaml.safe_load(MINIMAL)
    data["bath"]["mode"] = "explicit"
    with pytest.raises(ConfigError):
        from_dict(data)


def test_fine_grid_accepted():
    W = 0.2083662
    cfg = parse_config(MINIMAL.replace("j_p: 2.0", f"j_p: 2.0\n  epsilon: {{start: -1, stop: 1, step: {W / 4 * 0.99}}}"))
    assert cfg.probe.epsilon.step < W / 4


def test_overrides_and_presets():
    cfg = from_dict(preset("fig3"))
    cfg2 = with_overrides(cfg, **{"experiment.seed": 5, "output.dir": "x"})
    assert cfg2.experiment.seed == 5 and cfg2.output.dir == "x"
    assert cfg2.model.kink_chain.n == 7
    with pytest.raises(ConfigError):
        preset("nope")


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def write_config(tmp_path, text):
    p = tmp_path / "cfg.yaml"
    p.write_text(text)
    return str(p)


def test_exit_codes(tmp_path, capsys):
    assert main(["validate", "--preset", "smoke"]) == 0
    assert json.loads(capsys.readouterr().out)["model"]["n_qubits"] == 1
    bad = write_config(tmp_path, "model: {kink_chain: {n: 1, j: 1, delta: 1}}\n")
    assert main(["validate", "--config", bad]) == 1
    assert "model.kink_chain.n" in capsys.readouterr().err
    assert main(["spectrum", "--config", str(tmp_path / "missing.yaml")]) == 1
    # iteration-starved eigensolver is a numerical failure
    starved = write_config(tmp_path, "model: {kink_chain: {n: 8, j: 1, delta: 1}}\n"
                                     "experiment: {command: spectrum, solver: lanczos, tol: 1.0e-300}\n")
    assert main(["spectrum", "--config", starved, "--out", str(tmp_path)]) == 2


def test_spectrum_single_qubit(tmp_path):
    assert run(tmp_path, "spectrum", "--preset", "smoke") == 0
    header, cols, rows = read_table(tmp_path / "spectrum.csv")
    assert cols == ["n", "energy_ghz", "excitation_ghz", "residual"]
    assert [float(x) for x in rows[0][:3]] == [0, -1, 0]
    assert [float(x) for x in rows[1][:3]] == [1, 1, 2]
    assert header[0] == f"qtstomo {__version__}"
    cfg = json.loads(header[1][len("config "):])
    assert "dir" not in cfg["output"] and cfg["model"]["delta"] == [1.0]


def test_spectrum_two_qubit_kink(tmp_path):
    path = write_config(tmp_path, "model: {kink_chain: {n: 2, j: 1, delta: 0}}\nexperiment: {command: spectrum, k: 4}\n")
    assert run(tmp_path, "spectrum", "--config", path) == 0
    _, _, rows = read_table(tmp_path / "spectrum.csv")
    assert np.allclose([float(r[1]) for r in rows], [-1, -1, -1, 3], atol=1e-12)


def test_sweep_tables_smoke(tmp_path):
    assert run(tmp_path, "sweep", "--preset", "smoke") == 0
    for name in ("grid", "references", "levels", "peaks", "amplitudes"):
        assert (tmp_path / f"{name}.csv").exists()
    _, cols, rows = read_table(tmp_path / "amplitudes.csv")
    amp = [float(r[cols.index("amplitude_sq")]) for r in rows]
    direct = [float(r[cols.index("direct_sq")]) for r in rows]
    assert np.allclose(amp, 0.5, atol=1e-3) and np.allclose(direct, 0.5)


def test_tree_format(tmp_path):
    assert run(tmp_path, "spectrum", "--preset", "smoke", "--format", "tree") == 0
    data = json.loads((tmp_path / "spectrum.json").read_text())
    tab = data["tables"]["spectrum"]
    assert tab["columns"][0] == "n" and len(tab["rows"]) == 2


def test_far_detuned_evolve_is_frozen(tmp_path):
    text = yaml.safe_dump(preset("smoke") | {"experiment": {"command": "evolve", "k": 2,
                                                             "evolve": {"epsilon_rel": 100.0, "t_max_ns": 5.0,
                                                                        "n_times": 6}}})
    assert run(tmp_path, "evolve", "--config", write_config(tmp_path, text)) == 0
    _, cols, rows = read_table(tmp_path / "trajectory.csv")
    assert cols[:2] == ["t_ns", "p_down_0"]
    assert all(float(r[1]) == 1.0 for r in rows)


def test_evolve_matches_sweep_rate():
    cfg = from_dict(preset("fig3"))
    grid = commands.sweep(with_overrides(cfg, **{"experiment.l": [4], "experiment.peaks": False})).extra["grid"]
    col = grid.columns[0]
    i0 = int(np.argmin(np.abs(col.eps_rel)))
    assert abs(col.eps_rel[i0]) < 1e-12
    res = commands.evolve_command(with_overrides(cfg, **{"experiment.command": "evolve",
                                                         "experiment.evolve.l": 4}))
    g0 = res.extra["gamma0"]
    assert g0 == pytest.approx(col.gamma[i0], rel=1e-9)
    traj = res.extra["trajectory"]
    t1, p1 = traj[1].t, traj[1].p[0]
    # first step is 0.05 / gamma0; back-flow enters only at second order
    assert -np.log(p1) / t1 == pytest.approx(g0, rel=2e-2)
    for s in traj:
        assert abs(s.p.sum() - 1) < 1e-9
