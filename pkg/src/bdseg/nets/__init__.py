from .gradcheck import grad_check
from .losses import loss_crossentropy, loss_distance, loss_multi, schedule
from .model import Architecture, LayerSpec, SegNet, init_params
from .optim import AdamState, adam_step
from .train import TrainConfig, predict_distance, predict_mask, train

__all__ = [
    "AdamState", "Architecture", "LayerSpec", "SegNet", "TrainConfig", "adam_step", "grad_check",
    "init_params", "loss_crossentropy", "loss_distance", "loss_multi", "predict_distance",
    "predict_mask", "schedule", "train",
]
