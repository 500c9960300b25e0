"""Three hand-built miniature languages used as metric reference points.

All three map a (2 attributes x 4 values) space bijectively onto length-3
messages over an 8-symbol vocabulary, but differ in strategy:

lang1 is perfectly positional: the first two positions jointly encode
attribute 1 (one binary symbol each), the third copies attribute 2.

lang2 is mostly positional with an entangled corner: position 1 copies
attribute 1, position 3 mostly copies attribute 2, but the (3, *) inputs
fold part of attribute 2 into position 2.

lang3 carries meaning in symbol identity alone: which symbols occur (not
where) determines both attributes, so it is order-free.
"""

from __future__ import annotations

import numpy as np

from .agents import ChannelSpec
from .env import AttributeSpace
from .metrics import LanguageCorpus

FIXTURE_SPACE = AttributeSpace(n_att=2, n_val=4)
FIXTURE_CHANNEL = ChannelSpec(vocab_size=8, msg_len=3)

_LANG1 = """
0 0  0 0 0    0 1  0 0 1    0 2  0 0 2    0 3  0 0 3
1 0  0 1 0    1 1  0 1 1    1 2  0 1 2    1 3  0 1 3
2 0  2 0 0    2 1  2 0 1    2 2  2 0 2    2 3  2 0 3
3 0  2 1 0    3 1  2 1 1    3 2  2 1 2    3 3  2 1 3
"""

_LANG2 = """
0 0  0 0 0    0 1  0 0 1    0 2  0 0 2    0 3  0 0 3
1 0  1 2 0    1 1  1 2 1    1 2  1 2 2    1 3  1 2 3
2 0  2 3 0    2 1  2 3 1    2 2  2 3 2    2 3  2 3 3
3 0  3 1 0    3 1  3 1 1    3 2  3 2 1    3 3  3 3 1
"""

_LANG3 = """
0 0  0 0 4    0 1  0 0 5    0 2  0 0 6    0 3  0 0 7
1 0  1 4 1    1 1  1 5 1    1 2  1 6 1    1 3  1 7 1
2 0  2 4 2    2 1  2 5 2    2 2  2 6 2    2 3  2 7 2
3 0  3 4 3    3 1  3 3 5    3 2  3 3 6    3 3  3 3 7
"""


def _parse(blob: str) -> LanguageCorpus:
    nums = [int(tok) for tok in blob.split()]
    rows = np.array(nums, dtype=np.int64).reshape(-1, 5)
    return LanguageCorpus(
        space=FIXTURE_SPACE,
        channel=FIXTURE_CHANNEL,
        inputs=rows[:, :2],
        messages=rows[:, 2:],
    )


def miniature_languages() -> dict[str, LanguageCorpus]:
    return {"lang1": _parse(_LANG1), "lang2": _parse(_LANG2), "lang3": _parse(_LANG3)}
