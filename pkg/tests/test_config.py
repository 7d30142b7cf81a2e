import pytest

from fdbia.config import (
    DEFAULTS,
    csv_body,
    fmt,
    load_config,
    manifest_lines,
    merge,
    preset,
    read_manifest,
    render_csv,
    validate,
)
from fdbia.errors import InvalidScenarioError


def test_load_toml(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[network]\nk_d = 3\n[simulation]\nsnr_grid_db = [0, 10]\nresidual_si_power = 2\n'
                 '[multicell]\nscheduler = "round-robin"\nj_grid = [4, 6]\n')
    cfg = load_config(p)
    assert cfg == {
        "network": {"k_d": 3},
        "simulation": {"snr_grid_db": [0.0, 10.0], "residual_si_power": 2.0},
        "multicell": {"scheduler": "round-robin", "j_grid": [4, 6]},
    }
    merged = merge(cfg)
    assert merged["network"] == {"k_d": 3, "k_u": 2, "m_d": 2, "m_u": 2}
    assert merged["simulation"]["seed"] == DEFAULTS["simulation"]["seed"]


@pytest.mark.parametrize(
    "raw",
    [
        {"netwrk": {}},
        {"network": {"kd": 1}},
        {"network": {"k_d": 1.5}},
        {"network": {"k_d": True}},
        {"simulation": {"snr_grid_db": []}},
        {"simulation": {"trials": "many"}},
        {"multicell": {"scheduler": "greedy"}},
        {"multicell": {"j_grid": [2, 3.5]}},
        {"network": 3},
    ],
)
def test_validation_rejects(raw):
    with pytest.raises(InvalidScenarioError):
        validate(raw)


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(InvalidScenarioError, match="not found"):
        load_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[network\n")
    with pytest.raises(InvalidScenarioError, match="cannot parse"):
        load_config(bad)


def test_presets():
    assert preset("fig5", "rate-sweep")["simulation"]["snr_grid_db"][-1] == 40.0
    assert preset("fig6", "multicell")["multicell"]["j_grid"] == [2, 4, 6, 8]
    with pytest.raises(InvalidScenarioError):
        preset("fig5", "multicell")
    with pytest.raises(InvalidScenarioError):
        preset("fig9", "dof")
    # a preset is a copy
    preset("fig5", "rate-sweep")["network"]["k_d"] = 99
    assert preset("fig5", "rate-sweep")["network"]["k_d"] == 2


def test_manifest_round_trip(tmp_path):
    config = {"network": {"k_d": 1, "k_u": 1, "m_d": 2, "m_u": 2}}
    text = render_csv(("a", "b"), [(1, 0.1), (2, 1 / 3)], manifest_lines("rate-sweep", config, 4, "0.1.0", []))
    assert read_manifest(text)["config"] == config
    assert csv_body(text) == "a,b\n1,0.1\n2,0.3333333333333333\n"
    p = tmp_path / "out.csv"
    p.write_text(text)
    assert load_config(p) == config
    with pytest.raises(InvalidScenarioError):
        read_manifest("a,b\n")


def test_fmt():
    assert fmt(0.1) == "0.1" and fmt(3) == "3" and fmt("x") == "x"
