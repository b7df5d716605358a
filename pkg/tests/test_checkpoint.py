import numpy as np
import pytest

from firstbreak.errors import FormatError, TruncatedFileError
from firstbreak.segnet import UNetConfig, init_params, init_state
from firstbreak.segnet.checkpoint import Checkpoint, dumps, load_checkpoint, loads, save_checkpoint

CFG = UNetConfig(depth=3, in_channels=2, base_channels=2, input_shape=(16, 8))


def _ck(opt="adam"):
    p = init_params(CFG, 4)
    st = init_state(p.weights, opt)
    st["t"] = 7
    if opt == "adam":
        st["m"] = {k: v + 1 for k, v in st["m"].items()}
    return Checkpoint(CFG, p, opt, st, 123, {"stage": "rsn", "best_iteration": 90})


@pytest.mark.parametrize("opt", ["adam", "sgd"])
def test_round_trip(tmp_path, opt):
    ck = _ck(opt)
    save_checkpoint(ck, tmp_path / "c.ck")
    back = load_checkpoint(tmp_path / "c.ck")
    assert back.config == CFG and back.iteration == 123 and back.meta == ck.meta
    assert back.optimizer == opt and back.opt_state["t"] == 7
    for k in ck.params.weights:
        assert back.params.weights[k].tobytes() == ck.params.weights[k].tobytes()
    if opt == "adam":
        assert np.array_equal(back.opt_state["m"]["head.w"], ck.opt_state["m"]["head.w"])
    assert dumps(back) == dumps(ck)


def test_layout_prefix_little_endian():
    raw = dumps(_ck())
    assert raw[:4] == b"FBCK" and raw[4:8] == (1).to_bytes(4, "little")


def test_corruption_detected():
    raw = dumps(_ck())
    with pytest.raises(FormatError):
        loads(b"NOPE" + raw[4:])
    with pytest.raises(TruncatedFileError):
        loads(raw[:-8])
    with pytest.raises(FormatError):
        loads(raw + b"\0")


def test_no_optimizer_state():
    ck = Checkpoint(CFG, init_params(CFG, 0))
    assert loads(dumps(ck)).opt_state is None
