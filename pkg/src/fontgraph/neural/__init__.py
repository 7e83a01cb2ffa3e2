"""Learned components, losses and the staged training procedure."""

from .config import ModelConfig
from .losses import loss_adj, loss_cls, loss_img, loss_rec
from .model import FontModel, glyph_key
from .train import MissingCheckpointError, TrainConfig, train
