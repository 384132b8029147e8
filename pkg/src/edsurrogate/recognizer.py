"""Small differentiable recognizer from word images to character grids.

The image is treated as a length-W sequence of H-dimensional columns.
A conv1d stack produces per-column features, non-overlapping average
pooling maps the W positions onto the L character slots, and a linear
head with column softmax yields the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DiffNode
from .errors import CheckpointError, ConfigError, NumericError, ShapeError
from .params import CheckpointHeader, ParamStore, load_checkpoint, save_checkpoint
from .text_metrics import CharGrid

META_IMAGE_SHAPE = "meta.image_shape"


@dataclass(frozen=True)
class WordImage:
    pixels: np.ndarray
    label: str

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2:
            raise ShapeError(f"image must be 2-d, got shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise NumericError("image contains non-finite pixels")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ValueError("pixels must lie in [0, 1]")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class RecognizerConfig:
    alphabet_size: int
    capacity: int
    image_height: int
    image_width: int
    channels: tuple[int, ...] = (16, 16)
    kernel: int = 3
    slope: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.alphabet_size < 2 or self.capacity < 1:
            raise ConfigError("alphabet_size >= 2 and capacity >= 1 required")
        if self.image_height < 1 or self.image_width < 1:
            raise ConfigError("image dims must be positive")
        if self.image_width % self.capacity != 0:
            raise ConfigError("image width must be a multiple of the capacity")
        if not self.channels or any(c < 1 for c in self.channels):
            raise ConfigError("channel counts must be positive")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError("kernel must be odd so same-padding is exact")


def _uniform_init(rng, shape, fan_in):
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _pooling_matrix(width: int, capacity: int) -> np.ndarray:
    """(W, L) constant averaging each stride-sized block of columns."""
    stride = width // capacity
    pool = np.zeros((width, capacity))
    for slot in range(capacity):
        pool[slot * stride : (slot + 1) * stride, slot] = 1.0 / stride
    return pool


class RecognizerNet:
    """Conv stack over image columns + per-position linear head."""

    def __init__(self, config: RecognizerConfig):
        self.config = config
        self.params = ParamStore()
        rng = np.random.default_rng(config.seed)
        c_in = config.image_height
        for i, c_out in enumerate(config.channels):
            fan_in = c_in * config.kernel
            self.params.add(
                f"conv{i}.weight",
                _uniform_init(rng, (c_out, c_in, config.kernel), fan_in),
            )
            self.params.add(f"conv{i}.bias", _uniform_init(rng, (c_out, 1), fan_in))
            c_in = c_out
        self.params.add(
            "head.weight", _uniform_init(rng, (config.alphabet_size, c_in), c_in)
        )
        self.params.add("head.bias", _uniform_init(rng, (config.alphabet_size, 1), c_in))
        self._pool = ad.constant(_pooling_matrix(config.image_width, config.capacity))


def forward(image: WordImage, net: RecognizerNet) -> DiffNode:
    """Soft-max grid as a graph node, differentiable w.r.t. the weights."""
    config = net.config
    if image.pixels.shape != (config.image_height, config.image_width):
        raise ConfigError(
            f"image shape {image.pixels.shape} does not match net "
            f"({config.image_height}, {config.image_width})"
        )
    x = ad.constant(image.pixels)
    pad = (config.kernel - 1) // 2
    for i in range(len(config.channels)):
        x = ad.conv1d(
            x, net.params.node(f"conv{i}.weight"), net.params.node(f"conv{i}.bias"), pad
        )
        x = ad.leaky_relu(x, config.slope)
    pooled = ad.matmul(x, net._pool)
    logits = ad.linear(net.params.node("head.weight"), pooled, net.params.node("head.bias"))
    return ad.softmax_columns(logits)


def recognize(image: WordImage, net: RecognizerNet) -> CharGrid:
    return CharGrid(forward(image, net).values)


def ce_loss(z_hat, y_hat: CharGrid) -> DiffNode:
    """Mean cross entropy -(1/(L|A|)) sum y log z, log clamped at 1e-12."""
    if not isinstance(y_hat, CharGrid) or not y_hat.is_one_hot():
        raise ValueError("target grid must be one-hot")
    z_node = ad.constant(z_hat.values) if isinstance(z_hat, CharGrid) else z_hat
    if z_node.shape != y_hat.values.shape:
        raise ShapeError(
            f"prediction shape {z_node.shape} != target shape {y_hat.values.shape}"
        )
    alphabet_size, capacity = y_hat.values.shape
    logs = ad.log(ad.clamp_min(z_node, 1e-12))
    total = ad.sum_all(ad.mul(ad.constant(y_hat.values), logs))
    return ad.mul_scalar(total, -1.0 / (capacity * alphabet_size))


def save_recognizer(path, net: RecognizerNet) -> None:
    """Same tensor format as the surrogate; image dims ride as a meta tensor."""
    config = net.config
    header = CheckpointHeader(
        alphabet_size=config.alphabet_size, capacity=config.capacity, embedding_dim=0
    )
    arrays = net.params.to_arrays()
    arrays[META_IMAGE_SHAPE] = np.array(
        [config.image_height, config.image_width], dtype=np.float64
    )
    save_checkpoint(path, header, arrays)


def load_recognizer(path) -> RecognizerNet:
    header, arrays = load_checkpoint(path)
    try:
        meta = arrays.pop(META_IMAGE_SHAPE)
        kernel = arrays["conv0.weight"].shape[2]
    except KeyError as exc:
        raise CheckpointError(f"missing tensor {exc} in recognizer checkpoint") from exc
    channels = []
    while f"conv{len(channels)}.weight" in arrays:
        channels.append(arrays[f"conv{len(channels)}.weight"].shape[0])
    config = RecognizerConfig(
        alphabet_size=header.alphabet_size,
        capacity=header.capacity,
        image_height=int(meta[0]),
        image_width=int(meta[1]),
        channels=tuple(channels),
        kernel=kernel,
    )
    net = RecognizerNet(config)
    net.params.load_arrays(arrays)
    return net
