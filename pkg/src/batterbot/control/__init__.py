"""Pouring policy: speed and time regressors, spout vision and plan execution."""
from .execution import TRAVEL_SPEED, PourPlan, Segment, execute_plan, plan_execution
from .mlp import (
    MlpModel,
    ModelFormatError,
    TrainConfig,
    TrainingDiverged,
    gradient_check,
    init_mlp,
    loss_and_grads,
    mlp_forward,
    train,
)
from .policy import (
    SPEED_LIMITS,
    TIME_LIMITS,
    ControlModel,
    ExtrapolationWarning,
    UntrainedModelError,
    load_dataset,
    predict_pour_time,
    predict_speed,
    save_dataset,
    speed_dataset,
    time_dataset,
    train_control_model,
)
from .vision import (
    TILT_RATE,
    KMeansResult,
    NoFlowDetected,
    PourStart,
    PourStartError,
    detect_drip,
    initial_angle,
    kmeans,
    mask_extents,
    segment_batter,
    start_pour,
)

__all__ = [
    "MlpModel", "TrainConfig", "TrainingDiverged", "ModelFormatError", "init_mlp", "mlp_forward",
    "loss_and_grads", "gradient_check", "train",
    "ControlModel", "UntrainedModelError", "ExtrapolationWarning", "SPEED_LIMITS", "TIME_LIMITS",
    "speed_dataset", "time_dataset", "save_dataset", "load_dataset", "train_control_model",
    "predict_speed", "predict_pour_time",
    "kmeans", "KMeansResult", "segment_batter", "mask_extents", "detect_drip", "NoFlowDetected",
    "TILT_RATE", "initial_angle", "PourStart", "PourStartError", "start_pour",
    "TRAVEL_SPEED", "Segment", "PourPlan", "plan_execution", "execute_plan",
]
