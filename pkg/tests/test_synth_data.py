import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edsurrogate.errors import CapacityError, ConfigError
from edsurrogate.synth_data import (
    DatasetConfig,
    glyph_bitmap,
    load_dataset,
    mutate_word,
    random_pair_generator,
    render_word,
    sample_corpus,
    sample_word,
    save_dataset,
    split_corpus,
)
from edsurrogate.text_metrics import decode_greedy, edit_distance

from .oracles import recursive_edit_distance

CFG = DatasetConfig.desk()
SMALL = DatasetConfig.desk(corpus_size=10)


def test_config_validation():
    with pytest.raises(ConfigError):
        DatasetConfig.desk(image_width=20)  # not a multiple of capacity
    with pytest.raises(ConfigError):
        DatasetConfig.desk(shift_range=2)  # exceeds cell slack
    with pytest.raises(ConfigError):
        DatasetConfig.desk(noise_std=-0.1)


def test_config_dict_round_trip():
    assert DatasetConfig.from_dict(CFG.to_dict()) == CFG


def test_render_deterministic():
    a = render_word("abc", CFG, np.random.default_rng(5))
    b = render_word("abc", CFG, np.random.default_rng(5))
    assert a.pixels.tobytes() == b.pixels.tobytes()
    assert a.label == "abc"


def test_render_without_noise_is_pure_glyph_composition():
    cfg = DatasetConfig.desk(noise_std=0.0, shift_range=0)
    image = render_word("ab", cfg, np.random.default_rng(0))
    expected = np.zeros((cfg.image_height, cfg.image_width))
    for slot, char in enumerate("ab"):
        col = slot * cfg.cell_width
        expected[:, col : col + cfg.glyph_width] = glyph_bitmap(
            cfg.alphabet.index_of(char), cfg
        )
    assert np.array_equal(image.pixels, expected)


def test_render_rejects_overlong_word():
    with pytest.raises(CapacityError):
        render_word("a" * (CFG.capacity + 1), CFG, np.random.default_rng(0))


def test_pixel_mean_is_moderate():
    rng = np.random.default_rng(1)
    means = [
        render_word(sample_word(CFG, rng), CFG, rng).pixels.mean() for _ in range(100)
    ]
    assert 0.05 <= np.mean(means) <= 0.95


def test_corpus_cardinality_and_determinism():
    first = sample_corpus(SMALL)
    second = sample_corpus(SMALL)
    assert len(first) == 10
    assert [w.label for w in first] == [w.label for w in second]
    assert all(
        a.pixels.tobytes() == b.pixels.tobytes() for a, b in zip(first, second)
    )


def test_corpus_differs_across_seeds():
    a = sample_corpus(SMALL)
    b = sample_corpus(DatasetConfig.desk(corpus_size=10, seed=1))
    assert [w.label for w in a] != [w.label for w in b]


def test_split_is_80_10_10_by_index():
    images = sample_corpus(DatasetConfig.desk(corpus_size=100))
    split = split_corpus(images)
    assert (len(split.train), len(split.val), len(split.test)) == (80, 10, 10)
    assert split.train[0] is images[0]
    assert split.test[-1] is images[-1]


def test_character_frequency_roughly_uniform():
    # Labels only; rendering 10k images here would dominate the suite runtime.
    rng_labels = [
        sample_word(CFG, np.random.default_rng([0, i])) for i in range(10_000)
    ]
    counts = {c: 0 for c in CFG.alphabet.symbols[1:]}
    total = 0
    for word in rng_labels:
        for char in word:
            counts[char] += 1
            total += 1
    expected = total / len(counts)
    for char, count in counts.items():
        assert abs(count - expected) / expected <= 0.2, (char, count, expected)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=4))
def test_mutate_word_bounds_edit_distance(seed, k):
    rng = np.random.default_rng(seed)
    base = sample_word(CFG, rng)
    edited = mutate_word(base, k, CFG, rng)
    assert len(edited) <= CFG.capacity
    assert edit_distance(base, edited) <= k
    if k == 0:
        assert edited == base


def test_pair_labels_match_recursive_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pair = random_pair_generator(CFG, rng)
        a = decode_greedy(pair.grid_a, CFG.alphabet)
        b = decode_greedy(pair.grid_b, CFG.alphabet)
        assert pair.ed == recursive_edit_distance(a, b)


def test_pair_ed_buckets_all_populated():
    rng = np.random.default_rng(4)
    eds = [random_pair_generator(CFG, rng).ed for _ in range(10_000)]
    counts = np.bincount(eds, minlength=5)
    assert counts[: CFG.capacity // 2 + 1].sum() == len(eds)
    for bucket in range(5):
        assert counts[bucket] / len(eds) >= 0.05, (bucket, counts)


def test_dataset_round_trip(tmp_path):
    images = sample_corpus(SMALL)
    save_dataset(tmp_path / "data", images, SMALL)

    loaded, cfg = load_dataset(tmp_path / "data")
    assert cfg == SMALL
    assert [w.label for w in loaded] == [w.label for w in images]
    for original, back in zip(images, loaded):
        assert np.max(np.abs(original.pixels - back.pixels)) <= 0.5 / 255.0 + 1e-12

    labels = (tmp_path / "data" / "labels.tsv").read_bytes()
    assert b"\r" not in labels
    assert labels.startswith(b"index\tfilename\ttranscription\n")


def test_dataset_files_are_byte_stable(tmp_path):
    images = sample_corpus(SMALL)
    save_dataset(tmp_path / "one", images, SMALL)
    save_dataset(tmp_path / "two", sample_corpus(SMALL), SMALL)
    for name in ["labels.tsv", "dataset.json", "img_00003.pgm"]:
        assert (tmp_path / "one" / name).read_bytes() == (
            tmp_path / "two" / name
        ).read_bytes()
