"""Compositionality metrics over extracted languages.

A language here is a deterministic mapping from inputs to fixed-length
messages (a LanguageCorpus).  Three scores are computed:

topsim, the Spearman correlation between pairwise input distances (number of
differing attributes) and message edit distances;

posdis, which asks each message position to be informative about exactly one
attribute: the mean over positions of the top-2 mutual-information gap
normalized by the position's entropy, skipping zero-entropy positions;

bosdis, the order-free analogue over per-message symbol counts.  Symbols
whose count distribution is constant carry no signal and are skipped, as are
symbols whose count is exactly equally informative about the two best
attributes (a zero gap): including the latter is indistinguishable from the
former in every reference value this module is validated against.

All entropies and mutual informations are plug-in estimates in bits.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .agents import ChannelSpec
from .env import AttributeSpace
from .numerics import make_rng
from .stats import CorrelationResult, spearman  # noqa: F401  (re-exported)

TOPSIM_PAIR_CAP = 10**6
_GAP_TOL = 1e-12


@dataclass
class LanguageCorpus:
    """Input -> message pairs for a fixed space and channel, no duplicate inputs."""

    space: AttributeSpace
    channel: ChannelSpec
    inputs: np.ndarray     # (N, n_att)
    messages: np.ndarray   # (N, msg_len)
    ambiguous: bool = field(init=False)

    def __post_init__(self):
        self.inputs = self.space.validate_inputs(self.inputs)
        self.messages = self.channel.validate_messages(self.messages)
        if len(self.inputs) != len(self.messages):
            raise ValueError("inputs and messages must pair up")
        if len(np.unique(self.inputs, axis=0)) != len(self.inputs):
            raise ValueError("corpus contains duplicate inputs")
        # two inputs sharing one message make the language non-injective
        self.ambiguous = len(np.unique(self.messages, axis=0)) != len(self.messages)

    def __len__(self) -> int:
        return len(self.inputs)


def input_distance(a, b) -> int:
    """Number of attribute positions whose values differ."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("inputs come from different spaces")
    return int((a != b).sum())


def edit_distance(m1, m2) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    m1 = list(m1)
    m2 = list(m2)
    prev = list(range(len(m2) + 1))
    for i in range(1, len(m1) + 1):
        cur = [i] + [0] * len(m2)
        for j in range(1, len(m2) + 1):
            cost = 0 if m1[i - 1] == m2[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def _edit_distance_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Levenshtein distance per row pair for equal-length message arrays."""
    p, L = a.shape
    prev = np.broadcast_to(np.arange(L + 1), (p, L + 1)).astype(np.int64).copy()
    for i in range(1, L + 1):
        cur = np.empty_like(prev)
        cur[:, 0] = i
        for j in range(1, L + 1):
            cost = (a[:, i - 1] != b[:, j - 1]).astype(np.int64)
            cur[:, j] = np.minimum(
                np.minimum(prev[:, j] + 1, cur[:, j - 1] + 1), prev[:, j - 1] + cost
            )
        prev = cur
    return prev[:, -1]


def topsim(
    corpus: LanguageCorpus, pair_cap: int = TOPSIM_PAIR_CAP, seed: int = 0
) -> CorrelationResult | None:
    """Spearman correlation of input distance vs message edit distance.

    All unordered pairs are used when their count fits `pair_cap`; above it a
    seeded uniform sample of pair_cap pairs is drawn.  None when either
    distance series is constant.
    """
    n = len(corpus)
    if n < 3:
        return None
    total_pairs = n * (n - 1) // 2
    if total_pairs <= pair_cap:
        i_idx, j_idx = np.triu_indices(n, k=1)
    else:
        rng = make_rng(seed)
        i_idx = rng.integers(0, n, size=pair_cap)
        j_idx = rng.integers(0, n, size=pair_cap)
        clash = i_idx == j_idx
        while clash.any():
            j_idx[clash] = rng.integers(0, n, size=int(clash.sum()))
            clash = i_idx == j_idx
    d_in = (corpus.inputs[i_idx] != corpus.inputs[j_idx]).sum(axis=1)
    d_msg = _edit_distance_rows(corpus.messages[i_idx], corpus.messages[j_idx])
    return spearman(d_in.astype(float), d_msg.astype(float))


@dataclass
class JointCounts:
    """Contingency table between two discrete variables."""

    table: np.ndarray  # (n_x, n_y) nonnegative ints

    @classmethod
    def from_pairs(cls, xs, ys) -> "JointCounts":
        xs = np.asarray(xs)
        ys = np.asarray(ys)
        _, xi = np.unique(xs, return_inverse=True)
        _, yi = np.unique(ys, return_inverse=True)
        table = np.zeros((xi.max() + 1, yi.max() + 1), dtype=np.int64)
        np.add.at(table, (xi, yi), 1)
        return cls(table)

    @property
    def x_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def y_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


def entropy(counts) -> float:
    """Plug-in entropy in bits of a count vector; 0 log 0 = 0."""
    counts = np.asarray(counts, dtype=float).ravel()
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty distribution")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def mutual_information(joint: JointCounts) -> float:
    """Plug-in mutual information in bits."""
    t = joint.table.astype(float)
    total = t.sum()
    if total <= 0:
        raise ValueError("mutual information of an empty table")
    pxy = t / total
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    mask = pxy > 0
    ratio = np.ones_like(pxy)
    ratio[mask] = pxy[mask] / (px @ py)[mask]
    return float((pxy[mask] * np.log2(ratio[mask])).sum())


def _mi_bits(xs: np.ndarray, ys: np.ndarray) -> float:
    return mutual_information(JointCounts.from_pairs(xs, ys))


def _entropy_of_labels(xs: np.ndarray) -> float:
    _, counts = np.unique(xs, return_counts=True)
    return entropy(counts)


def _top2_gap_over_entropy(var: np.ndarray, corpus: LanguageCorpus) -> float | None:
    """(I(var; a1) - I(var; a2)) / H(var) for the two most informative
    attributes; None when H(var) = 0.  With one attribute the second
    information is taken as zero."""
    h = _entropy_of_labels(var)
    if h <= 0.0:
        return None
    mis = np.array([_mi_bits(var, corpus.inputs[:, a]) for a in range(corpus.space.n_att)])
    order = np.argsort(-mis, kind="stable")  # ties -> lowest attribute index first
    best = mis[order[0]]
    second = mis[order[1]] if corpus.space.n_att > 1 else 0.0
    return (best - second) / h


def posdis(corpus: LanguageCorpus) -> float | None:
    """Positional disentanglement: mean top-2 information gap over positions
    with nonzero symbol entropy.  None when every position is constant."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    contributions = []
    for j in range(corpus.channel.msg_len):
        c = _top2_gap_over_entropy(corpus.messages[:, j], corpus)
        if c is not None:
            contributions.append(c)
    if not contributions:
        return None
    return float(np.mean(contributions))


def symbol_counts(corpus: LanguageCorpus) -> np.ndarray:
    """Per-message occurrence count of every vocabulary symbol, (N, vocab_size)."""
    n = len(corpus)
    counts = np.zeros((n, corpus.channel.vocab_size), dtype=np.int64)
    np.add.at(counts, (np.arange(n)[:, None], corpus.messages), 1)
    return counts


def bosdis(corpus: LanguageCorpus) -> float | None:
    """Bag-of-symbols disentanglement over per-message symbol counts.

    Averages the normalized top-2 information gap over symbols carrying
    disentangled signal (nonzero count entropy and a positive gap).  Returns
    0.0 when symbols vary but none favors one attribute, None when no symbol
    count varies at all.
    """
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    counts = symbol_counts(corpus)
    contributions = []
    any_entropy = False
    for j in range(corpus.channel.vocab_size):
        c = _top2_gap_over_entropy(counts[:, j], corpus)
        if c is None:
            continue
        any_entropy = True
        if c > _GAP_TOL:
            contributions.append(c)
    if not any_entropy:
        return None
    if not contributions:
        return 0.0
    return float(np.mean(contributions))


@dataclass
class MetricReport:
    """The three scores; None marks an undefined value, with the reason in notes."""

    topsim: float | None
    posdis: float | None
    bosdis: float | None
    topsim_p: float | None = None
    notes: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "topsim": self.topsim,
            "posdis": self.posdis,
            "bosdis": self.bosdis,
            "topsim_p": self.topsim_p,
            "notes": self.notes,
        }


def metric_report(
    corpus: LanguageCorpus, pair_cap: int = TOPSIM_PAIR_CAP, seed: int = 0
) -> MetricReport:
    notes: dict[str, str] = {}
    ts = topsim(corpus, pair_cap=pair_cap, seed=seed)
    if ts is None:
        notes["topsim"] = "undefined: constant distance series"
    pd = posdis(corpus)
    if pd is None:
        notes["posdis"] = "undefined: all positions have zero entropy"
    bd = bosdis(corpus)
    if bd is None:
        notes["bosdis"] = "undefined: no symbol count varies"
    return MetricReport(
        topsim=None if ts is None else ts.rho,
        posdis=pd,
        bosdis=bd,
        topsim_p=None if ts is None else ts.p_value,
        notes=notes,
    )


def write_corpus(corpus: LanguageCorpus, fh: io.TextIOBase) -> None:
    """Text form: header 'natt nval cvoc clen', then 'values<TAB>symbols' lines."""
    fh.write(
        f"{corpus.space.n_att} {corpus.space.n_val} "
        f"{corpus.channel.vocab_size} {corpus.channel.msg_len}\n"
    )
    for inp, msg in zip(corpus.inputs, corpus.messages):
        fh.write(
            " ".join(str(int(v)) for v in inp) + "\t" + " ".join(str(int(s)) for s in msg) + "\n"
        )


def read_corpus(fh: io.TextIOBase) -> LanguageCorpus:
    header = fh.readline().split()
    if len(header) != 4:
        raise ValueError(f"corpus header must hold four integers, got {header!r}")
    n_att, n_val, c_voc, c_len = (int(tok) for tok in header)
    space = AttributeSpace(n_att, n_val)
    channel = ChannelSpec(c_voc, c_len)
    inputs, messages = [], []
    for lineno, line in enumerate(fh, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        try:
            left, right = line.split("\t")
            inputs.append([int(tok) for tok in left.split()])
            messages.append([int(tok) for tok in right.split()])
        except ValueError as exc:
            raise ValueError(f"malformed corpus line {lineno}: {line!r}") from exc
    return LanguageCorpus(
        space=space,
        channel=channel,
        inputs=np.array(inputs, dtype=np.int64).reshape(len(inputs), n_att),
        messages=np.array(messages, dtype=np.int64).reshape(len(messages), c_len),
    )
