import json

import pytest

from lmsm.config import RunConfig, ValidationError, config_from_dict, load_config


def test_defaults_validate():
    cfg = load_config()
    assert cfg.alpha == 1.5
    assert cfg.path_level == cfg.window.j_max + cfg.path.oversampling
    lo, hi = cfg.psi_v_range()
    assert 1 / cfg.alpha < lo < cfg.grids.a and cfg.grids.b < hi < 1


@pytest.mark.parametrize("alpha", [1.0, 2.0, 2.5])
def test_alpha_open_interval(alpha):
    with pytest.raises(ValidationError, match="open interval") as info:
        load_config(overrides={"alpha": alpha})
    assert info.value.field == "alpha"


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError, match="unknown"):
        config_from_dict({"alpah": 1.5})
    with pytest.raises(ValidationError, match="unknown"):
        config_from_dict({"grids": {"N": 3}})


def test_v_range_inside_stable_range():
    with pytest.raises(ValidationError) as info:
        config_from_dict({"alpha": 1.5, "grids": {"a": 0.6}}).validate()
    assert info.value.field == "grids"


def test_hurst_range_checked():
    cfg = config_from_dict({"hurst": {"kind": "sinusoidal",
                                      "params": {"center": 0.8, "amplitude": 0.15}}})
    with pytest.raises(ValidationError) as info:
        cfg.validate()
    assert info.value.field == "hurst"


def test_path_step_rules():
    with pytest.raises(ValidationError, match="power of two"):
        config_from_dict({"path": {"step": 0.001}}).validate()
    with pytest.raises(ValidationError, match="too coarse"):
        config_from_dict({"path": {"step": 2.0 ** -10}}).validate()
    cfg = config_from_dict({"path": {"step": 2.0 ** -20}}).validate()
    assert cfg.path_level == 20


def test_path_span_covers_window():
    with pytest.raises(ValidationError, match="cover"):
        config_from_dict({"path": {"s_min": -1.0, "s_max": 1.0}}).validate()


def test_empty_window():
    with pytest.raises(ValidationError, match="empty window"):
        config_from_dict({"window": {"j_min": 3, "j_max": 2}}).validate()


def test_holder_levels_need_three():
    with pytest.raises(ValidationError):
        config_from_dict({"verify": {"holder_levels": [5, 6]}}).validate()


def test_overrides_and_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"alpha": 1.3, "grids": {"a": 0.8, "b": 0.95},
                                "hurst": {"kind": "constant", "params": {"value": 0.85}}}))
    cfg = load_config(path, {"seed": 9, "out": "somewhere", "ensemble_size": 2})
    assert cfg.alpha == 1.3 and cfg.seeds.master == 9 and cfg.seeds.ensemble_size == 2
    assert cfg.output_dir() == "somewhere"
    assert cfg.hurst_function().kind == "constant"


def test_bad_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{nope")
    with pytest.raises(ValidationError, match="JSON"):
        load_config(path)


def test_output_dir_from_environment(monkeypatch):
    monkeypatch.setenv("LMSM_OUT", "/tmp/elsewhere")
    assert RunConfig().output_dir() == "/tmp/elsewhere"
    monkeypatch.delenv("LMSM_OUT")
    assert RunConfig().output_dir() == "lmsm_out"


def test_to_dict_round_trip():
    cfg = load_config(overrides={"alpha": 1.7})
    assert config_from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
