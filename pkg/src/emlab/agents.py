"""Sender and Receiver networks with hand-written forward/backward passes.

The Sender maps an attribute-value input to a fixed-length symbol message:
a linear layer turns the one-hot input into the initial GRU hidden state,
a learned start-of-generation embedding is consumed first, and each emitted
symbol is embedded and fed back into the cell.  Symbols are sampled during
training and chosen greedily at evaluation time.

The GRU Receiver consumes the whole message from a zero hidden state and
projects the final hidden state to one logit block per attribute.  The FFN
Receiver sees the flattened one-hot message through a single ReLU layer.

All forward entry points accept one sample or a batch along the first axis.
Parameter gradients are summed over the batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import AttributeSpace, one_hot
from .errors import ConfigError
from .numerics import (
    GruCache,
    GruParams,
    categorical_sample_rows,
    entropy_of_logits,
    gru_step,
    gru_step_backward,
    init_matrix,
    log_softmax,
    softmax_cross_entropy_rows,
)

CHECKPOINT_FORMAT = "emlab-checkpoint-v1"


@dataclass(frozen=True)
class ChannelSpec:
    """Discrete channel: messages are msg_len symbols from a vocab of vocab_size."""

    vocab_size: int
    msg_len: int

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")
        if self.msg_len < 1:
            raise ConfigError("msg_len must be >= 1")

    @property
    def capacity(self) -> int:
        return self.vocab_size ** self.msg_len

    def validate_messages(self, messages: np.ndarray) -> np.ndarray:
        messages = np.asarray(messages, dtype=np.int64)
        if messages.ndim == 1:
            messages = messages[None, :]
        if messages.shape[-1] != self.msg_len:
            raise ValueError(f"message length {messages.shape[-1]} != {self.msg_len}")
        if messages.min(initial=0) < 0 or messages.max(initial=0) >= self.vocab_size:
            raise ValueError("symbol out of vocabulary range")
        return messages


@dataclass
class SenderTrace:
    """Everything recorded along one sender unroll (batched)."""

    messages: np.ndarray        # (N, L) int
    log_probs: np.ndarray       # (N, L) log-prob of the chosen symbol
    entropies: np.ndarray       # (N, L) policy entropy per position, nats
    logits: np.ndarray          # (N, L, V)
    hiddens: list | None        # hidden state feeding out_proj at each position
    gru_caches: list[GruCache] | None
    x_onehot: np.ndarray | None


class Sender:
    def __init__(
        self,
        space: AttributeSpace,
        channel: ChannelSpec,
        hidden_size: int = 500,
        embed_dim: int = 50,
        rng: np.random.Generator | None = None,
    ):
        if rng is None:
            raise ConfigError("Sender requires an rng for initialization")
        self.space = space
        self.channel = channel
        self.hidden_size = hidden_size
        self.embed_dim = embed_dim
        self.proj_W = init_matrix(hidden_size, space.onehot_dim, rng)
        self.proj_b = np.zeros(hidden_size)
        self.gru = GruParams.init(embed_dim, hidden_size, rng)
        self.embed = init_matrix(channel.vocab_size, embed_dim, rng)
        self.bos = init_matrix(1, embed_dim, rng)[0]
        self.out_W = init_matrix(channel.vocab_size, hidden_size, rng)
        self.out_b = np.zeros(channel.vocab_size)

    def parameters(self) -> dict[str, np.ndarray]:
        params = {
            "proj_W": self.proj_W, "proj_b": self.proj_b,
            "embed": self.embed, "bos": self.bos,
            "out_W": self.out_W, "out_b": self.out_b,
        }
        for name, arr in self.gru.named().items():
            params[f"gru.{name}"] = arr
        return params

    def forward(
        self,
        inputs: np.ndarray,
        mode: str = "sample",
        rng: np.random.Generator | None = None,
        forced: np.ndarray | None = None,
        keep_cache: bool = True,
    ) -> SenderTrace:
        """Unroll the sender over a batch of inputs.

        mode "sample" draws each symbol from the categorical policy (requires
        rng), "greedy" takes the argmax, "forced" replays `forced` messages
        and records their log-probs (used by REINFORCE and its gradient
        checks, where the sampled message is held fixed).
        """
        inputs = self.space.validate_inputs(inputs)
        n = inputs.shape[0]
        L = self.channel.msg_len
        if mode == "sample" and rng is None:
            raise ConfigError("sample mode requires an rng")
        if mode == "forced":
            forced = self.channel.validate_messages(forced)
            if forced.shape[0] != n:
                raise ConfigError("forced messages must match the batch")

        x = one_hot(inputs, self.space)
        h = x @ self.proj_W.T + self.proj_b
        bos_in = np.broadcast_to(self.bos, (n, self.embed_dim))
        h, bos_cache = gru_step(bos_in, h, self.gru)

        messages = np.empty((n, L), dtype=np.int64)
        log_probs = np.empty((n, L))
        entropies = np.empty((n, L))
        all_logits = np.empty((n, L, self.channel.vocab_size))
        hiddens = [h] if keep_cache else None
        caches = [bos_cache] if keep_cache else None
        rows = np.arange(n)

        for t in range(L):
            logits = h @ self.out_W.T + self.out_b
            if mode == "sample":
                sym = categorical_sample_rows(logits, rng)
            elif mode == "greedy":
                sym = np.argmax(logits, axis=-1)
            elif mode == "forced":
                sym = forced[:, t]
            else:
                raise ConfigError(f"unknown sender mode {mode!r}")
            logp = log_softmax(logits)
            messages[:, t] = sym
            log_probs[:, t] = logp[rows, sym]
            entropies[:, t] = entropy_of_logits(logits)
            all_logits[:, t] = logits
            if t < L - 1:
                # feed the chosen symbol back into the cell
                h, cache = gru_step(self.embed[sym], h, self.gru)
                if keep_cache:
                    hiddens.append(h)
                    caches.append(cache)

        return SenderTrace(
            messages=messages,
            log_probs=log_probs,
            entropies=entropies,
            logits=all_logits,
            hiddens=hiddens,
            gru_caches=caches,
            x_onehot=x if keep_cache else None,
        )

    def backward(self, trace: SenderTrace, d_logits: np.ndarray) -> dict[str, np.ndarray]:
        """Backprop d(objective)/d(logits) at every position into all params.

        The message symbols are treated as constants; gradient flows through
        the deterministic unroll (out_proj, GRU chain, embeddings, input
        projection, bos).
        """
        if trace.gru_caches is None:
            raise ConfigError("trace was recorded without caches")
        L = self.channel.msg_len
        grads = {k: np.zeros_like(v) for k, v in self.parameters().items()}
        d_h = np.zeros((trace.messages.shape[0], self.hidden_size))
        for t in range(L - 1, -1, -1):
            dl = d_logits[:, t]
            grads["out_W"] += dl.T @ trace.hiddens[t]
            grads["out_b"] += dl.sum(axis=0)
            d_h = d_h + dl @ self.out_W
            d_x, d_h, gru_grads = gru_step_backward(trace.gru_caches[t], d_h)
            for name, g in gru_grads.items():
                grads[f"gru.{name}"] += g
            if t == 0:
                grads["bos"] += d_x.sum(axis=0)
            else:
                np.add.at(grads["embed"], trace.messages[:, t - 1], d_x)
        # d_h is now the gradient at the pre-bos hidden state, i.e. at proj output
        grads["proj_W"] += d_h.T @ trace.x_onehot
        grads["proj_b"] += d_h.sum(axis=0)
        return grads

    def greedy_messages(self, inputs: np.ndarray) -> np.ndarray:
        """Deterministic message for each input, shape (N, msg_len)."""
        return self.forward(inputs, mode="greedy", keep_cache=False).messages


@dataclass
class ReceiverCache:
    messages: np.ndarray
    hiddens_in: list[np.ndarray]   # hidden state entering each gru step
    gru_caches: list[GruCache]
    h_final: np.ndarray


class GruReceiver:
    def __init__(
        self,
        space: AttributeSpace,
        channel: ChannelSpec,
        hidden_size: int = 500,
        embed_dim: int = 50,
        rng: np.random.Generator | None = None,
    ):
        if rng is None:
            raise ConfigError("GruReceiver requires an rng for initialization")
        self.space = space
        self.channel = channel
        self.hidden_size = hidden_size
        self.embed_dim = embed_dim
        self.embed = init_matrix(channel.vocab_size, embed_dim, rng)
        self.gru = GruParams.init(embed_dim, hidden_size, rng)
        self.out_W = init_matrix(space.onehot_dim, hidden_size, rng)
        self.out_b = np.zeros(space.onehot_dim)

    def parameters(self) -> dict[str, np.ndarray]:
        params = {"embed": self.embed, "out_W": self.out_W, "out_b": self.out_b}
        for name, arr in self.gru.named().items():
            params[f"gru.{name}"] = arr
        return params

    def forward(self, messages: np.ndarray, keep_cache: bool = True):
        """Consume messages (N, L); returns logits (N, n_att, n_val) and a cache."""
        messages = self.channel.validate_messages(messages)
        n = messages.shape[0]
        h = np.zeros((n, self.hidden_size))
        hiddens_in = []
        caches = []
        for t in range(self.channel.msg_len):
            if keep_cache:
                hiddens_in.append(h)
            h, cache = gru_step(self.embed[messages[:, t]], h, self.gru)
            if keep_cache:
                caches.append(cache)
        flat = h @ self.out_W.T + self.out_b
        logits = flat.reshape(n, self.space.n_att, self.space.n_val)
        cache = ReceiverCache(messages, hiddens_in, caches, h) if keep_cache else None
        return logits, cache

    def backward(self, cache: ReceiverCache, d_logits: np.ndarray) -> dict[str, np.ndarray]:
        n = cache.messages.shape[0]
        d_flat = d_logits.reshape(n, self.space.onehot_dim)
        grads = {k: np.zeros_like(v) for k, v in self.parameters().items()}
        grads["out_W"] += d_flat.T @ cache.h_final
        grads["out_b"] += d_flat.sum(axis=0)
        d_h = d_flat @ self.out_W
        for t in range(self.channel.msg_len - 1, -1, -1):
            d_x, d_h, gru_grads = gru_step_backward(cache.gru_caches[t], d_h)
            for name, g in gru_grads.items():
                grads[f"gru.{name}"] += g
            np.add.at(grads["embed"], cache.messages[:, t], d_x)
        # gradient at the all-zeros initial hidden state is dropped
        return grads

    def decode(self, messages: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(messages, keep_cache=False)
        return logits


@dataclass
class FfnCache:
    x: np.ndarray
    pre_act: np.ndarray
    hidden: np.ndarray


class FfnReceiver:
    """Two-layer feed-forward receiver over the flattened one-hot message."""

    def __init__(
        self,
        space: AttributeSpace,
        channel: ChannelSpec,
        hidden_size: int = 500,
        rng: np.random.Generator | None = None,
    ):
        if rng is None:
            raise ConfigError("FfnReceiver requires an rng for initialization")
        self.space = space
        self.channel = channel
        self.hidden_size = hidden_size
        in_dim = channel.msg_len * channel.vocab_size
        self.W1 = init_matrix(hidden_size, in_dim, rng)
        self.b1 = np.zeros(hidden_size)
        self.W2 = init_matrix(space.onehot_dim, hidden_size, rng)
        self.b2 = np.zeros(space.onehot_dim)

    def parameters(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def _flatten(self, messages: np.ndarray) -> np.ndarray:
        n, L = messages.shape
        V = self.channel.vocab_size
        x = np.zeros((n, L * V))
        cols = messages + np.arange(L) * V
        x[np.arange(n)[:, None], cols] = 1.0
        return x

    def forward(self, messages: np.ndarray, keep_cache: bool = True):
        messages = self.channel.validate_messages(messages)
        x = self._flatten(messages)
        pre = x @ self.W1.T + self.b1
        hid = np.maximum(pre, 0.0)
        flat = hid @ self.W2.T + self.b2
        logits = flat.reshape(messages.shape[0], self.space.n_att, self.space.n_val)
        return logits, (FfnCache(x, pre, hid) if keep_cache else None)

    def backward(self, cache: FfnCache, d_logits: np.ndarray) -> dict[str, np.ndarray]:
        n = cache.x.shape[0]
        d_flat = d_logits.reshape(n, self.space.onehot_dim)
        d_hid = d_flat @ self.W2
        d_pre = d_hid * (cache.pre_act > 0.0)
        return {
            "W2": d_flat.T @ cache.hidden,
            "b2": d_flat.sum(axis=0),
            "W1": d_pre.T @ cache.x,
            "b1": d_pre.sum(axis=0),
        }

    def decode(self, messages: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(messages, keep_cache=False)
        return logits


@dataclass
class ReconstructionOutcome:
    per_attribute_correct: np.ndarray   # bool
    all_correct: np.ndarray             # bool
    per_attribute_loss: np.ndarray
    mean_loss: np.ndarray


def reconstruction_outcome(logits: np.ndarray, inputs: np.ndarray) -> ReconstructionOutcome:
    """Per-attribute argmax correctness and cross-entropy against the input.

    logits: (n_att, n_val) or (N, n_att, n_val); inputs shaped to match.
    mean_loss averages the n_att cross-entropies.
    """
    single = logits.ndim == 2
    if single:
        logits = logits[None]
        inputs = np.asarray(inputs)[None, :]
    n, n_att, n_val = logits.shape
    inputs = np.asarray(inputs, dtype=np.int64)
    losses, _ = softmax_cross_entropy_rows(
        logits.reshape(n * n_att, n_val), inputs.reshape(n * n_att)
    )
    per_loss = losses.reshape(n, n_att)
    correct = logits.argmax(axis=-1) == inputs
    out = ReconstructionOutcome(
        per_attribute_correct=correct,
        all_correct=correct.all(axis=-1),
        per_attribute_loss=per_loss,
        mean_loss=per_loss.mean(axis=-1),
    )
    if single:
        return ReconstructionOutcome(
            per_attribute_correct=out.per_attribute_correct[0],
            all_correct=out.all_correct[0],
            per_attribute_loss=out.per_attribute_loss[0],
            mean_loss=out.mean_loss[0],
        )
    return out


def reconstruction_loss_grads(
    logits: np.ndarray, inputs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample mean CE loss and d(loss)/d(logits), batch form only."""
    n, n_att, n_val = logits.shape
    losses, grads = softmax_cross_entropy_rows(
        logits.reshape(n * n_att, n_val), np.asarray(inputs, dtype=np.int64).reshape(n * n_att)
    )
    return losses.reshape(n, n_att).mean(axis=-1), grads.reshape(n, n_att, n_val) / n_att


_AGENT_KINDS = {"sender": Sender, "gru_receiver": GruReceiver, "ffn_receiver": FfnReceiver}


def save_agent(path, agent) -> None:
    """Write an agent checkpoint (.npz with a JSON meta entry)."""
    kind = next(k for k, cls in _AGENT_KINDS.items() if isinstance(agent, cls))
    meta = {
        "format": CHECKPOINT_FORMAT,
        "kind": kind,
        "n_att": agent.space.n_att,
        "n_val": agent.space.n_val,
        "vocab_size": agent.channel.vocab_size,
        "msg_len": agent.channel.msg_len,
        "hidden_size": agent.hidden_size,
        "embed_dim": getattr(agent, "embed_dim", None),
    }
    arrays = {f"param/{k}": v for k, v in agent.parameters().items()}
    np.savez(path, meta=json.dumps(meta), **arrays)


def load_agent(path):
    """Load a checkpoint written by save_agent; rejects shape mismatches."""
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format in {path}")
        space = AttributeSpace(meta["n_att"], meta["n_val"])
        channel = ChannelSpec(meta["vocab_size"], meta["msg_len"])
        cls = _AGENT_KINDS[meta["kind"]]
        kwargs = {"hidden_size": meta["hidden_size"], "rng": np.random.default_rng(0)}
        if meta["kind"] != "ffn_receiver":
            kwargs["embed_dim"] = meta["embed_dim"]
        agent = cls(space, channel, **kwargs)
        for name, param in agent.parameters().items():
            stored = data[f"param/{name}"]
            if stored.shape != param.shape:
                raise ValueError(
                    f"checkpoint shape mismatch for {name}: {stored.shape} vs {param.shape}"
                )
            param[...] = stored
    return agent
