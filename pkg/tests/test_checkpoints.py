import numpy as np
import pytest

from edsurrogate.errors import CheckpointError
from edsurrogate.recognizer import (
    RecognizerConfig,
    RecognizerNet,
    WordImage,
    load_recognizer,
    recognize,
    save_recognizer,
)
from edsurrogate.surrogate import (
    SurrogateConfig,
    SurrogateNet,
    load_surrogate,
    save_surrogate,
    surrogate_distance,
)
from edsurrogate.text_metrics import CharGrid


def test_surrogate_round_trip_preserves_behavior(tmp_path):
    config = SurrogateConfig(
        alphabet_size=3, capacity=4, embedding_dim=8, channels=(4, 5, 4, 6, 4), hidden=7
    )
    net = SurrogateNet(config)
    path = tmp_path / "surrogate.bin"
    save_surrogate(path, net)

    loaded = load_surrogate(path)
    assert loaded.config.channels == config.channels
    assert loaded.config.hidden == config.hidden

    rng = np.random.default_rng(0)
    p = rng.random((3, 4))
    grid = CharGrid(p / p.sum(axis=0))
    q = rng.random((3, 4))
    other = CharGrid(q / q.sum(axis=0))
    before = surrogate_distance(grid, other, net).item()
    after = surrogate_distance(grid, other, loaded).item()
    assert before == after


def test_recognizer_round_trip_preserves_behavior(tmp_path):
    config = RecognizerConfig(
        alphabet_size=3, capacity=4, image_height=5, image_width=12, channels=(6, 7)
    )
    net = RecognizerNet(config)
    path = tmp_path / "recognizer.bin"
    save_recognizer(path, net)

    loaded = load_recognizer(path)
    assert loaded.config == RecognizerConfig(
        alphabet_size=3, capacity=4, image_height=5, image_width=12, channels=(6, 7)
    )
    image = WordImage(np.random.default_rng(1).random((5, 12)), "ab")
    assert recognize(image, net).values.tobytes() == recognize(image, loaded).values.tobytes()


def test_cross_family_load_fails(tmp_path):
    config = RecognizerConfig(alphabet_size=3, capacity=4, image_height=5, image_width=12)
    path = tmp_path / "rec.bin"
    save_recognizer(path, RecognizerNet(config))
    with pytest.raises(CheckpointError):
        load_surrogate(path)
