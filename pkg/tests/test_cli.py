from pathlib import Path

import numpy as np
import pytest

from affine_husimi import cli
from affine_husimi.cli import (
    EXIT_CONFIG,
    EXIT_GATE,
    EXIT_OK,
    ConfigError,
    RunConfig,
    build_grid,
    build_state,
    load_config,
    main,
    parse_config_text,
    read_table,
    write_table,
)

LIGHT = """\
# small grids so each command runs in seconds
n = 512
x_min = 1e-3
x_max = 30
a_min = 0.3
a_max = 3
n_a = 16
b_min = -3
b_max = 3
n_b = 32
sym_n_a = 128
sym_n_b = 256
t_max = 1
n_t = 3
"""


@pytest.fixture
def light_cfg(tmp_path):
    path = tmp_path / "light.cfg"
    path.write_text(LIGHT)
    return path


def test_parse_config_text():
    vals = parse_config_text("hbar = 0.5  # comment\n\nn = 1024\nstate = monomial\n")
    assert vals == {"hbar": 0.5, "n": 1024, "state": "monomial"}


@pytest.mark.parametrize(
    "text",
    ["nonsense = 1", "hbar = 1\nhbar = 2", "hbar 1", "n = 2.5", "hbar = nan", "hbar = abc"],
)
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize(
    "override",
    [{"hbar": -1.0}, {"x_min": 50.0}, {"n": 2}, {"state": "squeezed"}, {"state": "superposition", "state_points": "1;2"}],
)
def test_validation(override):
    with pytest.raises(ConfigError):
        load_config(env={}, overrides=override)


def test_precedence(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("hbar = 0.5\nn = 256\n")
    cfg = load_config(path, env={"AFFINE_HUSIMI_N": "300"}, overrides={"probes": 3})
    assert (cfg.hbar, cfg.n, cfg.probes) == (0.5, 300, 3)
    assert load_config(env={}).hbar == RunConfig().hbar


def test_table_round_trip(tmp_path):
    data = np.array([[1.0, -2.5e-17], [np.pi, 3.0]])
    path = tmp_path / "t.tsv"
    write_table(path, ["x", "y"], data, {"note": "hello", "value": np.float64(0.25)})
    meta, cols, back = read_table(path)
    assert cols == ["x", "y"] and meta == {"note": "hello", "value": "0.25"}
    assert np.array_equal(back, data)


@pytest.mark.parametrize("state", ["coherent", "monomial", "superposition"])
def test_state_families_are_normalized(state):
    cfg = load_config(env={}, overrides={"state": state, "n": 512})
    assert abs(build_state(cfg, build_grid(cfg)).norm() - 1.0) < 1e-12


def test_main_exit_codes_for_bad_input(tmp_path, capsys):
    assert main(["nope"]) == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("unknown_key = 3\n")
    assert main(["husimi", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["husimi", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert "error: config" in capsys.readouterr().err


def test_husimi_state(light_cfg, tmp_path):
    out = tmp_path / "h"
    assert main(["husimi", "--config", str(light_cfg), "--out", str(out)]) == EXIT_OK
    meta, cols, data = read_table(out / "husimi.tsv")
    assert cols == ["a", "b", "direct"] and data.shape == (16 * 32, 3)
    assert meta["command"] == "husimi" and "convention.U" in meta
    assert data[:, 2].min() >= 0


def test_husimi_symbol_both_paths(light_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("AFFINE_HUSIMI_SOURCE", "symbol")
    out = tmp_path / "hs"
    assert main(["husimi", "--config", str(light_cfg), "--out", str(out)]) == EXIT_OK
    meta, cols, data = read_table(out / "husimi.tsv")
    assert cols[2:] == ["direct", "mellin", "difference"]
    assert float(meta["max_relative_difference"]) < 1e-3


def test_quantize_round_trip(light_cfg, tmp_path):
    out = tmp_path / "q"
    assert main(["quantize", "--config", str(light_cfg), "--out", str(out)]) == EXIT_OK
    meta, _, _ = read_table(out / "roundtrip.tsv")
    assert float(meta["sup_relative_error"]) < 1e-3
    kmeta, _, kernel = read_table(out / "kernel.tsv")
    assert float(kmeta["hermiticity_defect"]) < 1e-8 and kernel.shape[0] == (512 // 8) ** 2


def test_wigner_reports_both_normalizations(light_cfg, tmp_path):
    out = tmp_path / "w"
    assert main(["wigner", "--config", str(light_cfg), "--out", str(out)]) == EXIT_OK
    meta, _, _ = read_table(out / "wigner.tsv")
    assert {"ratio_to_norm", "ratio_to_norm_squared"} <= set(meta)


def test_evolve_gates_norm_and_energy(light_cfg, tmp_path):
    out = tmp_path / "e"
    assert main(["evolve", "--config", str(light_cfg), "--out", str(out)]) == EXIT_OK
    meta, cols, data = read_table(out / "evolve.tsv")
    assert float(meta["norm_drift"]) < 1e-8 and float(meta["energy_drift"]) < 1e-8
    assert np.unique(data[:, 0]).size == 3


def test_gate_failure_exit_code(light_cfg, tmp_path, monkeypatch):
    def broken(cfg):
        raise cli.GateFailure("forced")

    monkeypatch.setitem(cli.COMMANDS, "husimi", broken)
    assert main(["husimi", "--config", str(light_cfg), "--out", str(tmp_path)]) == EXIT_GATE


def test_internal_error_exit_code(light_cfg, tmp_path, monkeypatch):
    def broken(cfg):
        raise KeyError("boom")

    monkeypatch.setitem(cli.COMMANDS, "husimi", broken)
    assert main(["husimi", "--config", str(light_cfg), "--out", str(tmp_path)]) == cli.EXIT_INTERNAL


VERIFY_LIGHT = """\
n = 1024
x_min = 1e-3
x_max = 30
a_min = 0.3
a_max = 3
n_a = 32
b_min = -3
b_max = 3
n_b = 64
id_a_min = 2e-3
id_a_max = 500
id_n_a = 200
id_b_max = 60
id_n_b = 1201
id_n = 4096
kernel_n_a = 96
probes = 1
"""


@pytest.mark.slow
def test_verify_kernel_failure_emits_variant_ledger(tmp_path, monkeypatch):
    """A wrong kernel rate must fail with exit 3 and list every convention variant."""
    from affine_husimi import evolution

    cfg = tmp_path / "v.cfg"
    cfg.write_text(VERIFY_LIGHT)
    original = evolution.PhiKernel.rate
    monkeypatch.setattr(evolution.PhiKernel, "rate", lambda self, a_factor=None: original(self, a_factor) + 1.0)
    out = tmp_path / "v"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_GATE
    meta, _, _ = read_table(out / "rates.tsv")
    variants = {k for k in meta if k.startswith("variant.")}
    assert variants == {"variant.adopted", "variant.rate_prefactor_2/hbar^2", "variant.identity_measure_da_db/(a_hbar)"}
    assert all(k in meta for k in ("convention.rate", "convention.identity", "convention.continuation"))
    vmeta, _, _ = read_table(out / "verify.tsv")
    assert vmeta["status"] == "fail" and vmeta["check.rate_direct_vs_kernel"].startswith("fail")
