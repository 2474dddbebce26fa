from .checkpoint import load_checkpoint, save_checkpoint
from .data import TrainingSet, make_training_set
from .estimator import ContextualLSTMGenerator
from .lstm import (LstmLayerParams, LstmState, ModelParams, forward, init_model, loss_and_grad,
                   lstm_cell_forward, predict, zero_model)
from .optim import AdamState, adam_step
from .training import TrainConfig, generate, train

__all__ = [
    "AdamState", "ContextualLSTMGenerator", "LstmLayerParams", "LstmState", "ModelParams",
    "TrainConfig", "TrainingSet", "adam_step", "forward", "generate", "init_model",
    "load_checkpoint", "loss_and_grad", "lstm_cell_forward", "make_training_set", "predict",
    "save_checkpoint", "train", "zero_model",
]
