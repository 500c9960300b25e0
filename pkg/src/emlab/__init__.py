"""emlab: attribute-value signaling games from scratch.

Training of sender/receiver agents on a reconstruction game, generalization
splits over unseen attribute combinations, compositionality metrics (topsim,
posdis, bosdis), language ablation tooling, and transmission experiments
with fresh receivers.
"""

from .agents import ChannelSpec, FfnReceiver, GruReceiver, Sender
from .env import AttributeSpace, enumerate_inputs, one_hot, split_unseen_combinations
from .metrics import LanguageCorpus, bosdis, metric_report, posdis, topsim
from .training import TrainConfig, evaluate, extract_language, train

__all__ = [
    "AttributeSpace",
    "ChannelSpec",
    "FfnReceiver",
    "GruReceiver",
    "LanguageCorpus",
    "Sender",
    "TrainConfig",
    "bosdis",
    "enumerate_inputs",
    "evaluate",
    "extract_language",
    "metric_report",
    "one_hot",
    "posdis",
    "split_unseen_combinations",
    "topsim",
    "train",
]
