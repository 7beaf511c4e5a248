import numpy as np
import pytest

from wavecast.checkpoint import MAGIC, Checkpoint, Normalizer
from wavecast.errors import IncompatibleCheckpointError
from wavecast.model import ModelConfig, init_params

CFG = ModelConfig(L=8, H=4, D=8, n_heads=2, d_head=4, n_layers=1)


def make(seed=0):
    r = np.random.default_rng(seed)
    norm = Normalizer(r.normal(size=12), r.uniform(0.5, 2, 12))
    return Checkpoint(CFG, init_params(CFG), norm, {"best_epoch": 3, "provenance": {"dataset": "d"}})


def test_round_trip_is_bit_exact(tmp_path):
    ck = make()
    back = Checkpoint.load(ck.save(tmp_path / "c.bin"))
    assert back.config == ck.config and back.extra == ck.extra
    assert back.params.names() == ck.params.names()
    for k in ck.params:
        assert back.params[k].tobytes() == ck.params[k].tobytes()
    assert back.normalizer.mean.tobytes() == ck.normalizer.mean.tobytes()
    assert back.to_bytes() == ck.to_bytes()


def test_equal_inputs_give_equal_bytes():
    assert make().to_bytes() == make().to_bytes()
    assert make(0).to_bytes() != make(1).to_bytes()


@pytest.mark.parametrize(
    "mangle,msg",
    [
        (lambda b: b"NOT" + b[3:], "magic"),
        (lambda b: b[: len(MAGIC) + 5], "header"),
        (lambda b: b[:-8], "ends inside"),
        (lambda b: b + b"\0" * 8, "trailing"),
        (lambda b: MAGIC + b"{not json\n", "header"),
    ],
)
def test_damaged_files_are_rejected(mangle, msg):
    with pytest.raises(IncompatibleCheckpointError, match=msg):
        Checkpoint.from_bytes(mangle(make().to_bytes()))


def test_config_and_arrays_must_agree():
    ck = make()
    bigger = Checkpoint(ModelConfig(L=8, H=4, D=16, n_heads=2, d_head=8, n_layers=1), ck.params, ck.normalizer)
    with pytest.raises(IncompatibleCheckpointError):
        Checkpoint.from_bytes(bigger.to_bytes())
