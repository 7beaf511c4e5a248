import pytest

from wavecast.config import RunConfig, default_entries, load_config, parse_config
from wavecast.errors import ConfigurationError


def test_defaults_round_trip_through_resolved_text():
    cfg = RunConfig()
    again = parse_config(cfg.resolved_text())
    assert again == cfg
    assert again.resolved_text() == cfg.resolved_text()


def test_every_default_key_is_accepted_back():
    text = "\n".join(f"{k}={v}" for k, v in default_entries().items())
    assert parse_config(text) == RunConfig()


def test_overrides_land_in_the_right_place():
    cfg = parse_config("seed=7\nwave.hs=0.12\nbody.rw=0.8\ntrain.patience=none\nmodel.enable_dbfm=false  # ablate\n")
    assert cfg.seed == 7 and cfg.wave.Hs == 0.12 and cfg.body.rw == 0.8
    assert cfg.train.patience is None and cfg.model.enable_dbfm is False
    assert cfg.wave_condition().Hs == 0.12


@pytest.mark.parametrize("text,key", [("wave.hz=0.1", "wave.hz"), ("foo=1", "foo"), ("optim.lr=1", "optim.lr")])
def test_unknown_keys_are_named(text, key):
    with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
        parse_config(text)


@pytest.mark.parametrize(
    "text",
    ["wave.hs", "wave.hs=abc", "seed=1\nseed=2", "model.enable_dbfm=maybe", "wave.hs=-1", "train.patience=50"],
)
def test_malformed_or_invalid_values(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_seeds_fan_out_by_subsystem():
    a, b = RunConfig().with_seed(1), RunConfig().with_seed(2)
    assert a.wave_condition().seed != b.wave_condition().seed
    assert a.model_config().seed != a.train_config().seed
    assert a.model_config().seed == RunConfig().with_seed(1).model_config().seed


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="does not exist"):
        load_config(tmp_path / "nope.cfg")
    assert load_config(None) == RunConfig()
