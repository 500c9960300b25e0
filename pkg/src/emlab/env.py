"""Attribute-value input spaces, one-hot encodings, and train/test splits."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ResourceError, SplitError
from .numerics import make_rng

ENUMERATION_CAP = 10**7
SPLIT_MAX_RETRIES = 1000


@dataclass(frozen=True)
class AttributeSpace:
    """n_att categorical attributes with n_val values each."""

    n_att: int
    n_val: int

    def __post_init__(self):
        if self.n_att < 1:
            raise ConfigError("n_att must be >= 1")
        if self.n_val < 2:
            raise ConfigError("n_val must be >= 2")

    @property
    def n_inputs(self) -> int:
        return self.n_val ** self.n_att

    @property
    def onehot_dim(self) -> int:
        return self.n_att * self.n_val

    def validate_inputs(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=np.int64)
        if inputs.ndim == 1:
            inputs = inputs[None, :]
        if inputs.shape[-1] != self.n_att:
            raise ValueError(f"inputs have {inputs.shape[-1]} attributes, expected {self.n_att}")
        if inputs.min(initial=0) < 0 or inputs.max(initial=0) >= self.n_val:
            raise ValueError("attribute value out of range")
        return inputs


def enumerate_inputs(space: AttributeSpace, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """All inputs of the space, rows in lexicographic order, shape (|I|, n_att)."""
    if space.n_inputs > cap:
        raise ResourceError(f"input space size {space.n_inputs} exceeds enumeration cap {cap}")
    grids = np.meshgrid(*[np.arange(space.n_val)] * space.n_att, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def one_hot(inputs: np.ndarray, space: AttributeSpace) -> np.ndarray:
    """Concatenated per-attribute one-hot encoding.

    Accepts a single input (n_att,) -> (n_att*n_val,) or a batch
    (N, n_att) -> (N, n_att*n_val).
    """
    arr = np.asarray(inputs, dtype=np.int64)
    single = arr.ndim == 1
    arr = space.validate_inputs(arr)
    n = arr.shape[0]
    out = np.zeros((n, space.onehot_dim))
    cols = arr + np.arange(space.n_att) * space.n_val
    out[np.arange(n)[:, None], cols] = 1.0
    return out[0] if single else out


@dataclass
class DataSplit:
    """Disjoint train/test partition; every attribute value occurs in train."""

    train: np.ndarray
    test: np.ndarray
    seed: int
    coverage_enforced: bool = field(default=True)

    @property
    def n_total(self) -> int:
        return len(self.train) + len(self.test)


def _train_covers_all_values(train: np.ndarray, n_att: int, n_val: int) -> bool:
    for a in range(n_att):
        if len(np.unique(train[:, a])) < n_val:
            return False
    return True


def split_inputs(
    inputs: np.ndarray,
    space: AttributeSpace,
    test_fraction: float = 0.10,
    seed: int = 0,
    max_retries: int = SPLIT_MAX_RETRIES,
) -> DataSplit:
    """Uniform random partition of `inputs`, re-drawn until every attribute
    value of the space occurs in the train part.

    Test size is round(test_fraction * len(inputs)).
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    inputs = space.validate_inputs(inputs)
    n = len(inputs)
    n_test = int(round(test_fraction * n))
    if n_test < 1 or n - n_test < 1:
        raise SplitError(f"cannot split {n} inputs with test_fraction {test_fraction}")
    rng = make_rng(seed)
    for _ in range(max_retries):
        perm = rng.permutation(n)
        test = inputs[perm[:n_test]]
        train = inputs[perm[n_test:]]
        if _train_covers_all_values(train, space.n_att, space.n_val):
            return DataSplit(train=train, test=test, seed=seed)
    raise SplitError(
        f"no split with full train coverage found in {max_retries} draws "
        f"(n={n}, test_fraction={test_fraction})"
    )


def split_unseen_combinations(
    space: AttributeSpace,
    test_fraction: float = 0.10,
    seed: int = 0,
    max_retries: int = SPLIT_MAX_RETRIES,
) -> DataSplit:
    """90/10-style split of the full enumerated space: test items are attribute
    combinations never seen in training, though every individual value is."""
    return split_inputs(enumerate_inputs(space), space, test_fraction, seed, max_retries)


def sample_with_density(
    n_val_ambient: int, n_samples: int, seed: int = 0
) -> np.ndarray:
    """Fixed-size sample from a two-attribute space of n_val_ambient values.

    The full diagonal (v, v) is always included so that every value of both
    attributes is observed; the remaining points are drawn uniformly without
    replacement from the off-diagonal cells.  Density of the returned sample
    is n_samples / n_val_ambient**2.
    """
    if n_samples < n_val_ambient:
        raise ValueError("n_samples must be >= n_val_ambient (the diagonal)")
    if n_samples > n_val_ambient**2:
        raise ValueError("n_samples exceeds the ambient space size")
    rng = make_rng(seed)
    diag = np.stack([np.arange(n_val_ambient)] * 2, axis=1)
    n_off = n_samples - n_val_ambient
    if n_off == 0:
        return diag.astype(np.int64)
    # enumerate off-diagonal cells by flat index, skipping the diagonal
    flat = rng.choice(n_val_ambient * (n_val_ambient - 1), size=n_off, replace=False)
    row = flat // (n_val_ambient - 1)
    col = flat % (n_val_ambient - 1)
    col = col + (col >= row)  # shift to skip the diagonal cell
    off = np.stack([row, col], axis=1)
    return np.concatenate([diag, off], axis=0).astype(np.int64)


def write_split(split: DataSplit, space: AttributeSpace, role: str, fh: io.TextIOBase) -> None:
    """One part of a split as text: header, then one input per line."""
    part = split.train if role == "train" else split.test
    fh.write(f"natt={space.n_att} nval={space.n_val} seed={split.seed} role={role}\n")
    for row in part:
        fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_split_part(fh: io.TextIOBase) -> tuple[AttributeSpace, int, str, np.ndarray]:
    """Inverse of write_split. Returns (space, seed, role, inputs)."""
    header = fh.readline().strip()
    try:
        fields = dict(kv.split("=", 1) for kv in header.split())
        space = AttributeSpace(int(fields["natt"]), int(fields["nval"]))
        seed = int(fields["seed"])
        role = fields["role"]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed split header: {header!r}") from exc
    rows = []
    for line in fh:
        line = line.strip()
        if line:
            rows.append([int(tok) for tok in line.split()])
    inputs = space.validate_inputs(np.array(rows, dtype=np.int64).reshape(len(rows), space.n_att))
    return space, seed, role, inputs
