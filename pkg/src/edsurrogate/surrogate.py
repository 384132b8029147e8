"""Learned edit-distance surrogate: a char-level CNN embedding of grids
compared in Euclidean space, plus its regression-with-penalty training loss.

The network reads a grid as |A| channels over the length axis, applies five
same-padded conv layers with LeakyReLU, pools over length, and maps through
two fully connected layers to a fixed-size embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DiffNode
from .errors import CheckpointError, ConfigError, ShapeError
from .params import CheckpointHeader, ParamStore, load_checkpoint, save_checkpoint
from .text_metrics import CharGrid

CONV_LAYERS = 5


@dataclass(frozen=True)
class SurrogateConfig:
    alphabet_size: int
    capacity: int
    embedding_dim: int = 128
    channels: tuple[int, ...] = (64, 64, 64, 64, 64)
    kernel: int = 3
    hidden: int = 128
    slope: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.alphabet_size < 2 or self.capacity < 1:
            raise ConfigError("alphabet_size >= 2 and capacity >= 1 required")
        if self.embedding_dim < 1 or self.hidden < 1:
            raise ConfigError("embedding_dim and hidden must be positive")
        if len(self.channels) != CONV_LAYERS:
            raise ConfigError(f"exactly {CONV_LAYERS} conv layers required")
        if any(c < 1 for c in self.channels):
            raise ConfigError("channel counts must be positive")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError("kernel must be odd so same-padding is exact")


@dataclass(frozen=True)
class SurrogateLossWeights:
    w1: float = 1.0
    w2: float = 0.1

    def __post_init__(self):
        if not self.w1 > 0:
            raise ConfigError("w1 must be > 0")
        if self.w2 < 0:
            raise ConfigError("w2 must be >= 0")


def _uniform_init(rng, shape, fan_in):
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class SurrogateNet:
    """Five conv1d layers + two FC layers over CharGrid inputs."""

    def __init__(self, config: SurrogateConfig):
        self.config = config
        self.params = ParamStore()
        rng = np.random.default_rng(config.seed)
        c_in = config.alphabet_size
        for i, c_out in enumerate(config.channels):
            fan_in = c_in * config.kernel
            self.params.add(
                f"conv{i}.weight",
                _uniform_init(rng, (c_out, c_in, config.kernel), fan_in),
            )
            self.params.add(f"conv{i}.bias", _uniform_init(rng, (c_out, 1), fan_in))
            c_in = c_out
        self.params.add("fc1.weight", _uniform_init(rng, (config.hidden, c_in), c_in))
        self.params.add("fc1.bias", _uniform_init(rng, (config.hidden, 1), c_in))
        self.params.add(
            "fc2.weight",
            _uniform_init(rng, (config.embedding_dim, config.hidden), config.hidden),
        )
        self.params.add(
            "fc2.bias", _uniform_init(rng, (config.embedding_dim, 1), config.hidden)
        )

    @property
    def embedding_dim(self) -> int:
        return self.config.embedding_dim


def _as_grid_node(grid, config: SurrogateConfig) -> DiffNode:
    if isinstance(grid, DiffNode):
        node = grid
    elif isinstance(grid, CharGrid):
        node = ad.constant(grid.values)
    else:
        raise TypeError("expected CharGrid or DiffNode")
    expected = (config.alphabet_size, config.capacity)
    if node.shape != expected:
        raise ConfigError(f"grid shape {node.shape} does not match net {expected}")
    return node


def embed(grid, net: SurrogateNet) -> DiffNode:
    """Deterministic embedding of a grid, differentiable in grid and weights."""
    config = net.config
    x = _as_grid_node(grid, config)
    pad = (config.kernel - 1) // 2
    for i in range(CONV_LAYERS):
        x = ad.conv1d(
            x, net.params.node(f"conv{i}.weight"), net.params.node(f"conv{i}.bias"), pad
        )
        x = ad.leaky_relu(x, config.slope)
    pooled = ad.mul_scalar(ad.sum_axis(x, 1), 1.0 / config.capacity)
    h = ad.leaky_relu(
        ad.linear(net.params.node("fc1.weight"), pooled, net.params.node("fc1.bias")),
        config.slope,
    )
    out = ad.linear(net.params.node("fc2.weight"), h, net.params.node("fc2.bias"))
    return ad.reshape(out, (config.embedding_dim,))


def surrogate_distance(z_hat, y_hat, net: SurrogateNet) -> DiffNode:
    """Euclidean distance between the two embeddings (symmetric, >= 0)."""
    return ad.l2_norm_eps(ad.sub(embed(z_hat, net), embed(y_hat, net)))


@dataclass(frozen=True)
class SurrogateLossParts:
    loss: DiffNode
    e_hat: DiffNode
    fit: DiffNode
    penalty: DiffNode | None


def surrogate_loss_parts(
    z_hat, y_hat, e: int, net: SurrogateNet, weights: SurrogateLossWeights
) -> SurrogateLossParts:
    """Loss w1*(e_hat - e)^2 + w2*(||d e_hat/d z||_2 - 1)^2 with its pieces.

    The penalty gradient is taken w.r.t. the predicted grid only, with
    create_graph set so the loss stays differentiable in the weights.
    """
    if e < 0:
        raise ValueError("edit distance must be non-negative")
    z_node = ad.variable(z_hat.values) if isinstance(z_hat, CharGrid) else z_hat
    if not z_node.requires_grad:
        raise ShapeError("predicted grid must participate in differentiation")
    e_hat = surrogate_distance(z_node, y_hat, net)
    fit = ad.square(ad.add_scalar(e_hat, -float(e)))
    loss = ad.mul_scalar(fit, weights.w1)
    penalty = None
    if weights.w2 > 0:
        (grad_z,) = ad.backward(e_hat, [z_node], create_graph=True)
        penalty = ad.square(ad.add_scalar(ad.l2_norm_eps(grad_z), -1.0))
        loss = ad.add(loss, ad.mul_scalar(penalty, weights.w2))
    return SurrogateLossParts(loss=loss, e_hat=e_hat, fit=fit, penalty=penalty)


def surrogate_loss(
    z_hat, y_hat, e: int, net: SurrogateNet, weights: SurrogateLossWeights
) -> DiffNode:
    return surrogate_loss_parts(z_hat, y_hat, e, net, weights).loss


def save_surrogate(path, net: SurrogateNet) -> None:
    config = net.config
    header = CheckpointHeader(
        alphabet_size=config.alphabet_size,
        capacity=config.capacity,
        embedding_dim=config.embedding_dim,
    )
    save_checkpoint(path, header, net.params.to_arrays())


def load_surrogate(path) -> SurrogateNet:
    """Rebuild a net from a checkpoint; layer sizes come from tensor shapes."""
    header, arrays = load_checkpoint(path)
    try:
        channels = tuple(arrays[f"conv{i}.weight"].shape[0] for i in range(CONV_LAYERS))
        kernel = arrays["conv0.weight"].shape[2]
        hidden = arrays["fc1.weight"].shape[0]
        out_dim = arrays["fc2.weight"].shape[0]
    except KeyError as exc:
        raise CheckpointError(f"missing tensor {exc} in surrogate checkpoint") from exc
    if out_dim != header.embedding_dim:
        raise CheckpointError(
            f"header embedding_dim {header.embedding_dim} != fc2 rows {out_dim}"
        )
    config = SurrogateConfig(
        alphabet_size=header.alphabet_size,
        capacity=header.capacity,
        embedding_dim=header.embedding_dim,
        channels=channels,
        kernel=kernel,
        hidden=hidden,
    )
    net = SurrogateNet(config)
    net.params.load_arrays(arrays)
    return net
