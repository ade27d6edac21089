"""Trainable multi-lingual dialogue-evaluation metric toolkit.

A shared-private Bi-LSTM metric trained adversarially across language
tasks, plus word-overlap baselines and correlation reporting.
"""

from .config import Config, TaskConfig
from .corpus import Vocabulary, QueryReplyPair, TrainingTriple, build_vocab
from .multitask import ModelState, TrainResult, train
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Config", "TaskConfig",
    "Vocabulary", "QueryReplyPair", "TrainingTriple", "build_vocab",
    "ModelState", "TrainResult", "train",
    "load_checkpoint", "save_checkpoint",
]

__version__ = "0.1.0"
