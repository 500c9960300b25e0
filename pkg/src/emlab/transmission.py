"""Ease-of-transmission experiments: freeze a trained sender and measure how
quickly fresh receivers of several architectures pick its language up."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .agents import FfnReceiver, GruReceiver, reconstruction_loss_grads, reconstruction_outcome
from .env import DataSplit
from .errors import ConfigError
from .numerics import AdamState, adam_update
from .stats import CorrelationResult, spearman

DEFAULT_ARCHITECTURES = ("gru-500", "gru-50", "ffn-500")
GENERALIZATION_GATE = 0.80  # senders below this test accuracy are not studied


@dataclass
class TransmissionConfig:
    architectures: tuple[str, ...] = DEFAULT_ARCHITECTURES
    seeds_per_sender: int = 3
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.001
    embed_dim: int = 50
    sender_decoding: str = "greedy"  # "sample" re-draws messages each epoch

    def __post_init__(self):
        if not self.architectures:
            raise ConfigError("at least one architecture required")
        if self.seeds_per_sender < 1:
            raise ConfigError("seeds_per_sender must be >= 1")
        if self.sender_decoding not in ("greedy", "sample"):
            raise ConfigError("sender_decoding must be 'greedy' or 'sample'")


def build_receiver(architecture: str, space, channel, embed_dim: int, rng):
    """'gru-<hidden>' or 'ffn-<hidden>' -> a fresh receiver."""
    m = re.fullmatch(r"(gru|ffn)-(\d+)", architecture)
    if not m:
        raise ConfigError(f"unknown architecture {architecture!r}")
    kind, hidden = m.group(1), int(m.group(2))
    if kind == "gru":
        return GruReceiver(space, channel, hidden_size=hidden, embed_dim=embed_dim, rng=rng)
    return FfnReceiver(space, channel, hidden_size=hidden, rng=rng)


@dataclass
class TransmissionResult:
    sender_id: str
    architecture: str
    seed: int
    learning_speed: float          # normalized AUC of the train accuracy curve
    test_accuracy: float
    final_train_accuracy: float
    accuracy_curve: list[float] = field(repr=False, default_factory=list)


def learning_speed_auc(curve: np.ndarray, epochs: int) -> float:
    """Trapezoidal area under (epoch, accuracy), divided by the epoch budget.

    The curve holds accuracies at epochs 0..epochs (pre-training included).
    """
    if len(curve) != epochs + 1:
        raise ValueError("curve must have one accuracy per epoch plus the initial point")
    return float(np.trapezoid(curve) / epochs)


def retrain_receiver(
    sender,
    architecture: str,
    split: DataSplit,
    config: TransmissionConfig,
    rng: np.random.Generator,
    seed: int = 0,
    sender_id: str = "",
) -> TransmissionResult:
    """Train a fresh receiver on the frozen sender's language.

    The sender contributes no gradients; its greedy messages are the fixed
    object of study (config.sender_decoding="sample" instead re-samples
    messages every epoch, still without touching the sender).
    """
    space, channel = sender.space, sender.channel
    receiver = build_receiver(architecture, space, channel, config.embed_dim, rng)
    adam = AdamState.for_params(receiver.parameters(), lr=config.learning_rate)

    train_msgs = sender.greedy_messages(split.train)
    test_msgs = sender.greedy_messages(split.test)
    inputs = split.train

    def train_accuracy() -> float:
        out = reconstruction_outcome(receiver.decode(train_msgs), inputs)
        return float(out.all_correct.mean())

    curve = [train_accuracy()]
    for _ in range(config.epochs):
        if config.sender_decoding == "sample":
            epoch_msgs = sender.forward(inputs, mode="sample", rng=rng, keep_cache=False).messages
        else:
            epoch_msgs = train_msgs
        order = rng.permutation(len(inputs))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            logits, cache = receiver.forward(epoch_msgs[idx])
            _, d_logits = reconstruction_loss_grads(logits, inputs[idx])
            grads = receiver.backward(cache, d_logits / len(idx))
            adam_update(receiver.parameters(), grads, adam)
        curve.append(train_accuracy())

    test_out = reconstruction_outcome(receiver.decode(test_msgs), split.test)
    return TransmissionResult(
        sender_id=sender_id,
        architecture=architecture,
        seed=seed,
        learning_speed=learning_speed_auc(np.array(curve), config.epochs),
        test_accuracy=float(test_out.all_correct.mean()),
        final_train_accuracy=curve[-1],
        accuracy_curve=curve,
    )


def run_transmission(
    sender,
    split: DataSplit,
    config: TransmissionConfig,
    rng: np.random.Generator,
    sender_id: str = "",
) -> list[TransmissionResult]:
    """All architectures x seeds for one frozen sender."""
    results = []
    for architecture in config.architectures:
        for seed in range(config.seeds_per_sender):
            sub = np.random.Generator(np.random.PCG64(int(rng.integers(0, 2**63))))
            results.append(
                retrain_receiver(sender, architecture, split, config, sub, seed, sender_id)
            )
    return results


@dataclass
class CorrelationCell:
    metric: str
    measure: str
    architecture: str
    result: CorrelationResult | None


def transmission_correlations(
    metric_scores: dict[str, dict[str, float | None]],
    results: list[TransmissionResult],
    min_senders: int = 10,
) -> list[CorrelationCell]:
    """Spearman correlation of each compositionality metric against each
    transmission measure, per architecture, over senders (seed-averaged).

    metric_scores maps sender_id -> {"posdis": ..., "bosdis": ..., "topsim": ...}.
    """
    architectures = sorted({r.architecture for r in results})
    cells = []
    for architecture in architectures:
        by_sender: dict[str, list[TransmissionResult]] = {}
        for r in results:
            if r.architecture == architecture:
                by_sender.setdefault(r.sender_id, []).append(r)
        for metric in ("posdis", "bosdis", "topsim"):
            for measure in ("learning_speed", "test_accuracy"):
                xs, ys = [], []
                for sender_id, rs in by_sender.items():
                    score = metric_scores.get(sender_id, {}).get(metric)
                    if score is None:
                        continue
                    xs.append(score)
                    ys.append(float(np.mean([getattr(r, measure) for r in rs])))
                if len(xs) < min_senders:
                    raise ValueError(
                        f"only {len(xs)} senders with valid {metric} for {architecture}; "
                        f"need >= {min_senders}"
                    )
                cells.append(
                    CorrelationCell(metric, measure, architecture, spearman(xs, ys))
                )
    return cells
