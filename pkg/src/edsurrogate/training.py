"""Alternating post-tuning: surrogate regression phases interleaved with
filtered recognizer tuning, plus the optimizer and the filtering function.

Modes: "feds" gates each recognizer update on the surrogate's per-sample
approximation error; "lsed" trains without the gate and feeds the surrogate
extra randomly generated word pairs; "baseline" is plain cross-entropy
pretraining and never enters the alternation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import DiffNode
from .errors import ConfigError, ShapeError
from .params import ParamStore
from .recognizer import RecognizerNet, WordImage, ce_loss, forward, save_recognizer
from .surrogate import (
    SurrogateConfig,
    SurrogateLossWeights,
    SurrogateNet,
    embed,
    save_surrogate,
    surrogate_loss_parts,
)
from .synth_data import DatasetConfig, SplitCorpus, random_pair_generator
from .text_metrics import CharGrid, decode_greedy, edit_distance, encode_one_hot

PHASE_PRETRAIN = "pretrain"
PHASE_SURROGATE = "surrogate"
PHASE_RECOGNIZER = "recognizer"

MODES = ("feds", "lsed", "baseline")
GATE_MODES = ("gated", "literal")
OPTIMIZERS = ("adadelta", "sgd")

GENERATED_SAMPLE_INDEX = -1


@dataclass(frozen=True)
class TrainConfig:
    i_a: int = 500
    i_b: int = 500
    epochs: int = 10
    eta_a: float = 1.0
    eta_b: float = 1.0
    eta_pre: float = 1.0
    lam: float = 0.25
    batch_size: int = 32
    mode: str = "feds"
    gate_mode: str = "gated"
    optimizer: str = "adadelta"
    rho: float = 0.95
    eps: float = 1e-6
    pretrain_iterations: int = 2000
    weights: SurrogateLossWeights = field(default_factory=SurrogateLossWeights)
    seed: int = 0

    def __post_init__(self):
        if self.i_a < 1 or self.i_b < 1 or self.epochs < 1:
            raise ConfigError("i_a, i_b and epochs must be >= 1")
        if not self.lam > 0:
            raise ConfigError("lambda must be > 0")
        if self.batch_size < 1 or self.pretrain_iterations < 1:
            raise ConfigError("batch_size and pretrain_iterations must be >= 1")
        if self.eta_a <= 0 or self.eta_b <= 0 or self.eta_pre <= 0:
            raise ConfigError("learning rates must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.gate_mode not in GATE_MODES:
            raise ConfigError(f"gate_mode must be one of {GATE_MODES}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if not 0 <= self.rho < 1 or self.eps <= 0:
            raise ConfigError("rho must lie in [0, 1) and eps must be positive")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Settings sized for a single CPU core.

        Short surrogate phases keep the approximation visibly improving
        across epochs instead of converging inside the first one; the light
        pretrain budget leaves the recognizer headroom that tuning can still
        claim; and the damped tuning rate keeps early, poorly gated updates
        from undoing the baseline.
        """
        desk = dict(
            i_a=100,
            i_b=100,
            epochs=5,
            eta_b=0.5,
            batch_size=16,
            pretrain_iterations=800,
        )
        desk.update(overrides)
        return cls(**desk)

    def to_dict(self) -> dict:
        out = {}
        for name in (
            "i_a",
            "i_b",
            "epochs",
            "eta_a",
            "eta_b",
            "eta_pre",
            "lam",
            "batch_size",
            "mode",
            "gate_mode",
            "optimizer",
            "rho",
            "eps",
            "pretrain_iterations",
            "seed",
        ):
            out[name] = getattr(self, name)
        out["w1"] = self.weights.w1
        out["w2"] = self.weights.w2
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        w1 = data.pop("w1", 1.0)
        w2 = data.pop("w2", 0.1)
        return cls(weights=SurrogateLossWeights(w1=w1, w2=w2), **data)


@dataclass(frozen=True)
class PhaseLogRecord:
    epoch: int
    phase: str
    iteration: int
    sample_index: int
    e: float
    e_hat: float
    loss: float
    gate_open: bool


# --- filtering --------------------------------------------------------------

def filter_value(e: int, e_hat, lam: float):
    """min(|e_hat - e|, lam). On a DiffNode the clipped branch (including the
    |err| = lam boundary) carries a zero sub-gradient."""
    if not lam > 0:
        raise ConfigError("lambda must be > 0")
    if isinstance(e_hat, DiffNode):
        return ad.clip_max(ad.abs_val(ad.add_scalar(e_hat, -float(e))), lam)
    return min(abs(float(e_hat) - float(e)), lam)


@dataclass(frozen=True)
class FilteredLossParts:
    loss: DiffNode
    e_hat: DiffNode
    gate_open: bool


def filtered_str_loss_parts(
    z_hat,
    y_hat: CharGrid,
    e: int,
    net: SurrogateNet,
    lam: float,
    gate_mode: str = "gated",
    y_embedding: DiffNode | None = None,
) -> FilteredLossParts:
    """Per-sample tuning loss. Gated mode trains on e_hat itself with the
    gate indicator held constant; literal mode differentiates min(|err|, lam)
    as written. Both give exactly zero gradient once |e_hat - e| >= lam.

    y_embedding, when given, must be the detached embedding of y_hat under
    the same frozen net; it skips recomputing the target branch.
    """
    if not lam > 0:
        raise ConfigError("lambda must be > 0")
    if gate_mode not in GATE_MODES:
        raise ConfigError(f"gate_mode must be one of {GATE_MODES}")
    z_node = ad.constant(z_hat.values) if isinstance(z_hat, CharGrid) else z_hat
    if y_embedding is None:
        y_embedding = embed(y_hat, net)
    e_hat = ad.l2_norm_eps(ad.sub(embed(z_node, net), y_embedding))
    gate_open = abs(e_hat.item() - e) < lam
    if gate_mode == "gated":
        loss = ad.mul_scalar(e_hat, 1.0 if gate_open else 0.0)
    else:
        loss = filter_value(e, e_hat, lam)
    return FilteredLossParts(loss=loss, e_hat=e_hat, gate_open=gate_open)


def filtered_str_loss(
    z_hat, y_hat: CharGrid, e: int, net: SurrogateNet, lam: float, gate_mode: str = "gated"
) -> DiffNode:
    return filtered_str_loss_parts(z_hat, y_hat, e, net, lam, gate_mode).loss


# --- optimizer ---------------------------------------------------------------

class OptimizerState:
    """Per-parameter accumulators; shapes are pinned at construction."""

    def __init__(self, params: ParamStore):
        self.square_avg = {n: np.zeros(params.node(n).shape) for n in params.names()}
        self.acc_delta = {n: np.zeros(params.node(n).shape) for n in params.names()}


def adadelta_step(
    params: ParamStore,
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    rho: float = 0.95,
    eps: float = 1e-6,
    lr: float = 1.0,
) -> None:
    for name in params.names():
        g = grads[name]
        sq = state.square_avg[name]
        acc = state.acc_delta[name]
        if g.shape != sq.shape:
            raise ShapeError(f"gradient shape {g.shape} != state shape {sq.shape}")
        sq *= rho
        sq += (1.0 - rho) * g * g
        delta = np.sqrt(acc + eps) / np.sqrt(sq + eps) * g
        acc *= rho
        acc += (1.0 - rho) * delta * delta
        params.assign(name, params.node(name).values - lr * delta)
    params.iteration += 1


def sgd_step(params: ParamStore, grads: dict[str, np.ndarray], lr: float) -> None:
    for name in params.names():
        params.assign(name, params.node(name).values - lr * grads[name])
    params.iteration += 1


def _apply_step(params, grads, state, cfg: TrainConfig, lr: float) -> None:
    if cfg.optimizer == "adadelta":
        adadelta_step(params, grads, state, cfg.rho, cfg.eps, lr)
    else:
        sgd_step(params, grads, lr)


def _mean_node(nodes: list[DiffNode]) -> DiffNode:
    total = nodes[0]
    for node in nodes[1:]:
        total = ad.add(total, node)
    return ad.mul_scalar(total, 1.0 / len(nodes))


def _grads_by_name(root: DiffNode, params: ParamStore) -> dict[str, np.ndarray]:
    grads = ad.backward(root, params.nodes())
    return {name: g.values for name, g in zip(params.names(), grads)}


# --- phases -------------------------------------------------------------------

def pretrain_recognizer(
    images: list[WordImage],
    recognizer: RecognizerNet,
    cfg: TrainConfig,
    dcfg: DatasetConfig,
    logs: list[PhaseLogRecord] | None = None,
) -> None:
    """Plain cross-entropy training of the recognizer (the baseline)."""
    if not images:
        raise ConfigError("empty training set")
    rng = np.random.default_rng([cfg.seed, 0, 0])
    state = OptimizerState(recognizer.params)
    targets = {}
    for iteration in range(cfg.pretrain_iterations):
        indices = rng.integers(0, len(images), size=cfg.batch_size)
        losses = []
        for index in indices:
            image = images[index]
            if image.label not in targets:
                targets[image.label] = encode_one_hot(
                    image.label, dcfg.alphabet, dcfg.capacity
                )
            z_node = forward(image, recognizer)
            loss = ce_loss(z_node, targets[image.label])
            losses.append(loss)
            if logs is not None:
                decoded = decode_greedy(CharGrid(z_node.values), dcfg.alphabet)
                logs.append(
                    PhaseLogRecord(
                        epoch=0,
                        phase=PHASE_PRETRAIN,
                        iteration=iteration,
                        sample_index=int(index),
                        e=edit_distance(decoded, image.label),
                        e_hat=float("nan"),
                        loss=loss.item(),
                        gate_open=False,
                    )
                )
        grads = _grads_by_name(_mean_node(losses), recognizer.params)
        _apply_step(recognizer.params, grads, state, cfg, cfg.eta_pre)


def train_surrogate_phase(
    images: list[WordImage],
    recognizer: RecognizerNet,
    surrogate_net: SurrogateNet,
    cfg: TrainConfig,
    dcfg: DatasetConfig,
    epoch: int,
    state: OptimizerState,
    logs: list[PhaseLogRecord],
) -> None:
    """i_a updates of the surrogate on (predicted grid, target grid, true ED)
    triples from the frozen recognizer. In lsed mode half of every batch
    comes from the random pair generator instead."""
    if not images:
        raise ConfigError("empty training set")
    rng = np.random.default_rng([cfg.seed, epoch, 1])
    cache: dict[int, tuple[np.ndarray, CharGrid, int]] = {}
    for iteration in range(cfg.i_a):
        indices = rng.integers(0, len(images), size=cfg.batch_size)
        losses = []
        for position, index in enumerate(indices):
            generated = cfg.mode == "lsed" and position % 2 == 1
            if generated:
                pair = random_pair_generator(dcfg, rng)
                z_values, y_grid, e = pair.grid_a.values, pair.grid_b, pair.ed
                log_index = GENERATED_SAMPLE_INDEX
            else:
                index = int(index)
                if index not in cache:
                    z_vals = forward(images[index], recognizer).values
                    y_grid = encode_one_hot(
                        images[index].label, dcfg.alphabet, dcfg.capacity
                    )
                    decoded = decode_greedy(CharGrid(z_vals), dcfg.alphabet)
                    cache[index] = (
                        z_vals,
                        y_grid,
                        edit_distance(decoded, images[index].label),
                    )
                z_values, y_grid, e = cache[index]
                log_index = index
            parts = surrogate_loss_parts(
                ad.variable(z_values), y_grid, e, surrogate_net, cfg.weights
            )
            losses.append(parts.loss)
            e_hat = parts.e_hat.item()
            logs.append(
                PhaseLogRecord(
                    epoch=epoch,
                    phase=PHASE_SURROGATE,
                    iteration=iteration,
                    sample_index=log_index,
                    e=e,
                    e_hat=e_hat,
                    loss=parts.loss.item(),
                    gate_open=abs(e_hat - e) < cfg.lam,
                )
            )
        grads = _grads_by_name(_mean_node(losses), surrogate_net.params)
        _apply_step(surrogate_net.params, grads, state, cfg, cfg.eta_a)


def tune_recognizer_phase(
    images: list[WordImage],
    recognizer: RecognizerNet,
    surrogate_net: SurrogateNet,
    cfg: TrainConfig,
    dcfg: DatasetConfig,
    epoch: int,
    state: OptimizerState,
    logs: list[PhaseLogRecord],
) -> None:
    """i_b updates of the recognizer against the frozen surrogate. FEDS mode
    gates each sample on |e_hat - e| < lambda; lsed mode trains ungated."""
    if not images:
        raise ConfigError("empty training set")
    rng = np.random.default_rng([cfg.seed, epoch, 2])
    target_embeddings: dict[str, tuple[CharGrid, DiffNode]] = {}
    for iteration in range(cfg.i_b):
        indices = rng.integers(0, len(images), size=cfg.batch_size)
        losses = []
        for index in indices:
            image = images[int(index)]
            if image.label not in target_embeddings:
                y_grid = encode_one_hot(image.label, dcfg.alphabet, dcfg.capacity)
                y_embed = embed(y_grid, surrogate_net).detach()
                target_embeddings[image.label] = (y_grid, y_embed)
            y_grid, y_embed = target_embeddings[image.label]
            z_node = forward(image, recognizer)
            decoded = decode_greedy(CharGrid(z_node.values), dcfg.alphabet)
            e = edit_distance(decoded, image.label)
            if cfg.mode == "lsed":
                e_hat = ad.l2_norm_eps(ad.sub(embed(z_node, surrogate_net), y_embed))
                parts = FilteredLossParts(loss=e_hat, e_hat=e_hat, gate_open=True)
            else:
                parts = filtered_str_loss_parts(
                    z_node,
                    y_grid,
                    e,
                    surrogate_net,
                    cfg.lam,
                    cfg.gate_mode,
                    y_embedding=y_embed,
                )
            losses.append(parts.loss)
            logs.append(
                PhaseLogRecord(
                    epoch=epoch,
                    phase=PHASE_RECOGNIZER,
                    iteration=iteration,
                    sample_index=int(index),
                    e=e,
                    e_hat=parts.e_hat.item(),
                    loss=parts.loss.item(),
                    gate_open=parts.gate_open,
                )
            )
        grads = _grads_by_name(_mean_node(losses), recognizer.params)
        _apply_step(recognizer.params, grads, state, cfg, cfg.eta_b)


@dataclass
class PostTuningResult:
    recognizer: RecognizerNet
    surrogate: SurrogateNet
    logs: list[PhaseLogRecord]


def default_surrogate_config(dcfg: DatasetConfig, seed: int) -> SurrogateConfig:
    return SurrogateConfig(
        alphabet_size=len(dcfg.alphabet), capacity=dcfg.capacity, seed=seed
    )


def run_post_tuning(
    cfg: TrainConfig,
    dcfg: DatasetConfig,
    split: SplitCorpus,
    recognizer: RecognizerNet,
    surrogate_net: SurrogateNet | None = None,
    out_dir: str | Path | None = None,
) -> PostTuningResult:
    """epochs alternations of (surrogate phase, recognizer phase), starting
    from a pretrained recognizer and a freshly initialized surrogate."""
    if cfg.mode == "baseline":
        raise ConfigError("post-tuning requires mode feds or lsed")
    if surrogate_net is None:
        surrogate_net = SurrogateNet(default_surrogate_config(dcfg, cfg.seed))
    logs: list[PhaseLogRecord] = []
    state_a = OptimizerState(surrogate_net.params)
    state_b = OptimizerState(recognizer.params)
    for epoch in range(1, cfg.epochs + 1):
        train_surrogate_phase(
            split.train, recognizer, surrogate_net, cfg, dcfg, epoch, state_a, logs
        )
        tune_recognizer_phase(
            split.train, recognizer, surrogate_net, cfg, dcfg, epoch, state_b, logs
        )
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            save_recognizer(out_dir / f"recognizer_epoch{epoch}.bin", recognizer)
            save_surrogate(out_dir / f"surrogate_epoch{epoch}.bin", surrogate_net)
    return PostTuningResult(recognizer=recognizer, surrogate=surrogate_net, logs=logs)
