from .adam import AdamState, adam_step
from .checkpoint import (CheckpointFormatError, load_checkpoint,
                         save_checkpoint)
from .gradcheck import finite_diff_check
from .kernels import BACKEND
from .lstm import LstmParams, init_lstm, lstm_backward, lstm_forward
from .ntn import NtnParams, init_ntn, ntn_backward, ntn_forward
from .ops import bce_with_logits, sigmoid, softmax, uniform_init

__all__ = [
    "AdamState", "adam_step", "finite_diff_check", "BACKEND",
    "CheckpointFormatError", "load_checkpoint", "save_checkpoint",
    "LstmParams", "init_lstm", "lstm_backward", "lstm_forward",
    "NtnParams", "init_ntn", "ntn_backward", "ntn_forward",
    "bce_with_logits", "sigmoid", "softmax", "uniform_init",
]
