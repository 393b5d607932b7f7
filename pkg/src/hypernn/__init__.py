"""Differentiable hyperbox classifiers trained end to end with Adam."""
from .model import (ContractViolation, ForwardTrace, HyperNNModel, Hyperbox, ModelGradients,
                    backward, backward_batch, crisp_contains, crisp_predict, crisp_predict_batch,
                    forward, forward_batch, sigmoid_tau, smooth_max, soft_containment,
                    soft_predict, soft_predict_batch)
from .training import (AdamState, TrainConfig, TrainingDiverged, TrainReport, adam_step,
                       bce_grad, bce_loss, init_params, train)

__version__ = "0.1.0"

__all__ = [
    "ContractViolation", "ForwardTrace", "HyperNNModel", "Hyperbox", "ModelGradients",
    "backward", "backward_batch", "crisp_contains", "crisp_predict", "crisp_predict_batch",
    "forward", "forward_batch", "sigmoid_tau", "smooth_max", "soft_containment",
    "soft_predict", "soft_predict_batch",
    "AdamState", "TrainConfig", "TrainingDiverged", "TrainReport", "adam_step",
    "bce_grad", "bce_loss", "init_params", "train",
]
