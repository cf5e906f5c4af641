import pytest

from experiment_config import OPTIONS, OUTPUT_ENV, ExperimentConfig, apply_overrides, load_config, parse_config
from model_errors import ConfigError


def test_defaults():
    config = load_config()
    assert config.get("model", "beta") == 1.0
    assert config.get("sampler", "sweeps") == 1000
    assert config.get("sampler", "burn_in") == 100
    assert config.get("analysis", "N") == 4
    assert config.get("output", "formats") == ["csv", "jsonl"]
    assert config.boundary().is_periodic
    assert config.window().K == 8 and config.window().L == 8
    assert config.move_probabilities() == (0.0, 0.0)


def test_every_option_has_a_resolved_value():
    config = ExperimentConfig()
    for opt in OPTIONS.options():
        assert config.get(opt.section, opt.name) == opt.default


def test_parse_values():
    text = "[model]\nbeta = 2.5\nbeta_ladder = 0.5, 1.0\nanneal_sweeps = 3\n\n[sampler]\nmoves = flip, pivot\n"
    config = parse_config(text)
    assert config.params().beta == 2.5
    assert config.anneal() == [(0.5, 3), (1.0, 3)]
    assert config.move_probabilities() == (0.25, 0.0)


@pytest.mark.parametrize("text", [
    "[model]\nbogus = 1\n",
    "[nowhere]\nbeta = 1\n",
    "[model]\nbeta = fast\n",
    "[model]\nbeta = -1\n",
    "[sampler]\ninit = file\n",
    "[geometry]\nW = 7\n",
    "[output]\nformats = csv, xml\n",
])
def test_rejects_bad_files(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_error_message_names_the_key():
    with pytest.raises(ConfigError) as info:
        parse_config("[model]\nbogus = 1\n")
    assert "[model] key 'bogus'" in info.value.format_error()


def test_overrides():
    config = apply_overrides(load_config(), ["model.beta=3", "geometry.bc=vacant"])
    assert config.get("model", "beta") == 3.0
    assert not config.boundary().is_periodic
    with pytest.raises(ConfigError):
        apply_overrides(load_config(), ["model.beta"])
    with pytest.raises(ConfigError):
        apply_overrides(load_config(), ["model.nothing=1"])


def test_ini_round_trip():
    config = apply_overrides(load_config(), ["model.beta_ladder=2.0,3.0", "model.anneal_sweeps=5",
                                             "sampler.moves=flip,slide"])
    again = parse_config(config.to_ini())
    assert again.as_dict() == config.as_dict()


def test_output_dir_resolution(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    config = load_config()
    assert config.output_dir() == str(tmp_path)
    config.set("output", "dir", "elsewhere")
    assert config.output_dir() == "elsewhere"


def test_load_from_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[geometry]\nW = 4\nH = 4\n\n[analysis]\nK = 1\nL = 1\n", encoding="utf-8")
    config = load_config(str(path))
    assert config.window().area == 16
