"""Hybrid optimization loop.

The Receiver is trained by plain backpropagation through the reconstruction
cross-entropy.  The Sender sees only a scalar reward R = -loss per sample and
is trained by REINFORCE on the surrogate

    -(R - b) * sum_t log pi(s_t)  -  lambda * sum_t H(pi_t)

where b is a running mean of all rewards seen since the start of training
and the entropy term promotes exploration.  The baseline value is held fixed
while a batch's gradients are computed and is updated with the batch's
rewards afterwards.  Both gradient estimates are averaged over the batch and
passed to Adam.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .agents import ChannelSpec, reconstruction_loss_grads, reconstruction_outcome
from .env import AttributeSpace
from .errors import ConfigError, TrainingDiverged
from .metrics import LanguageCorpus
from .numerics import AdamState, adam_update, entropy_grad_logits, softmax


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    entropy_coeff: float = 0.5
    batch_size: int = 32
    max_epochs: int = 1000
    convergence_threshold: float = 0.999
    eval_every: int = 1

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.max_epochs, self.eval_every) <= 0:
            raise ConfigError("learning_rate, batch_size, max_epochs, eval_every must be positive")
        if self.entropy_coeff < 0:
            raise ConfigError("entropy_coeff must be >= 0")
        if not 0.0 < self.convergence_threshold <= 1.0:
            raise ConfigError("convergence_threshold must be in (0, 1]")


@dataclass
class BaselineState:
    """Running mean of every reward observed since the start of training."""

    total: float = 0.0
    count: int = 0

    @property
    def value(self) -> float:
        return self.total / self.count if self.count else 0.0

    def update(self, rewards: np.ndarray) -> None:
        self.total += float(np.sum(rewards))
        self.count += int(np.size(rewards))


@dataclass
class BatchStats:
    mean_loss: float
    mean_reward: float
    mean_entropy: float


def game_step(
    inputs: np.ndarray,
    sender,
    receiver,
    baseline: BaselineState,
    rng: np.random.Generator,
    entropy_coeff: float = 0.5,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], BatchStats]:
    """One batch of games: sample messages, reconstruct, build both gradients.

    Returns (sender_grads, receiver_grads, stats) and folds the batch rewards
    into the baseline after they were used.
    """
    n = len(inputs)
    trace = sender.forward(inputs, mode="sample", rng=rng)
    logits, r_cache = receiver.forward(trace.messages)
    losses, d_logits_rec = reconstruction_loss_grads(logits, inputs)
    if not np.all(np.isfinite(losses)):
        raise TrainingDiverged(f"non-finite reconstruction loss in a batch of {n}")
    receiver_grads = receiver.backward(r_cache, d_logits_rec / n)

    rewards = -losses
    advantage = rewards - baseline.value
    probs = softmax(trace.logits)
    onehot = np.zeros_like(probs)
    rows = np.arange(n)[:, None]
    cols = np.arange(trace.messages.shape[1])[None, :]
    onehot[rows, cols, trace.messages] = 1.0
    # d/d(logits) of -(R-b) log pi(s_t) - lambda H_t, per position
    d_logits_sender = -advantage[:, None, None] * (onehot - probs)
    if entropy_coeff != 0.0:
        d_logits_sender -= entropy_coeff * entropy_grad_logits(trace.logits)
    sender_grads = sender.backward(trace, d_logits_sender / n)

    baseline.update(rewards)
    return (
        sender_grads,
        receiver_grads,
        BatchStats(
            mean_loss=float(losses.mean()),
            mean_reward=float(rewards.mean()),
            mean_entropy=float(trace.entropies.mean()),
        ),
    )


@dataclass
class TrainHistory:
    """One row per completed epoch."""

    train_accuracy: list[float] = field(default_factory=list)
    mean_loss: list[float] = field(default_factory=list)
    mean_entropy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_accuracy)

    def write_csv(self, fh: io.TextIOBase) -> None:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_accuracy", "mean_loss", "mean_sender_entropy"])
        for i in range(len(self)):
            writer.writerow([i, self.train_accuracy[i], self.mean_loss[i], self.mean_entropy[i]])


@dataclass
class EvalResult:
    accuracy: float
    per_attribute: np.ndarray


def evaluate(sender, receiver, inputs: np.ndarray) -> EvalResult:
    """Greedy decoding accuracy: fraction of inputs fully reconstructed."""
    messages = sender.greedy_messages(inputs)
    outcome = reconstruction_outcome(receiver.decode(messages), inputs)
    return EvalResult(
        accuracy=float(outcome.all_correct.mean()),
        per_attribute=outcome.per_attribute_correct.mean(axis=0),
    )


def extract_language(sender, inputs: np.ndarray) -> LanguageCorpus:
    """Greedy message for every input; the deterministic language of the sender."""
    return LanguageCorpus(
        space=sender.space,
        channel=sender.channel,
        inputs=np.asarray(inputs, dtype=np.int64),
        messages=sender.greedy_messages(inputs),
    )


@dataclass
class TrainResult:
    history: TrainHistory
    converged: bool
    epochs_run: int


def train(
    space: AttributeSpace,
    train_inputs: np.ndarray,
    channel: ChannelSpec,
    sender,
    receiver,
    config: TrainConfig,
    rng: np.random.Generator,
    on_checkpoint=None,
    checkpoint_every: int = 0,
) -> TrainResult:
    """Optimize both agents on `train_inputs` until greedy accuracy passes the
    convergence threshold or the epoch budget runs out.

    One epoch is a full pass over the inputs in a freshly shuffled order.
    Agents are updated in place; the (sender, receiver) pair after return is
    the trained pair.
    """
    if channel.capacity < len(train_inputs):
        warnings.warn(
            f"channel capacity {channel.capacity} below input count {len(train_inputs)}; "
            "perfect reconstruction is impossible",
            stacklevel=2,
        )
    train_inputs = space.validate_inputs(train_inputs)
    sender_adam = AdamState.for_params(sender.parameters(), lr=config.learning_rate)
    receiver_adam = AdamState.for_params(receiver.parameters(), lr=config.learning_rate)
    baseline = BaselineState()
    history = TrainHistory()
    converged = False
    last_acc = float("nan")

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_inputs))
        losses = []
        entropies = []
        for start in range(0, len(order), config.batch_size):
            batch = train_inputs[order[start : start + config.batch_size]]
            s_grads, r_grads, stats = game_step(
                batch, sender, receiver, baseline, rng, config.entropy_coeff
            )
            adam_update(sender.parameters(), s_grads, sender_adam)
            adam_update(receiver.parameters(), r_grads, receiver_adam)
            losses.append(stats.mean_loss)
            entropies.append(stats.mean_entropy)

        if (epoch + 1) % config.eval_every == 0:
            last_acc = evaluate(sender, receiver, train_inputs).accuracy
        history.train_accuracy.append(last_acc)
        history.mean_loss.append(float(np.mean(losses)))
        history.mean_entropy.append(float(np.mean(entropies)))

        if checkpoint_every and on_checkpoint and (epoch + 1) % checkpoint_every == 0:
            on_checkpoint(epoch + 1, sender, receiver)

        if last_acc > config.convergence_threshold:
            converged = True
            break

    return TrainResult(history=history, converged=converged, epochs_run=len(history))
