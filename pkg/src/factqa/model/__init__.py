from .params import ModelConfig, ModelParameters, Vocabulary
from .network import (
    AnswerResult,
    HopTrace,
    MemoryCell,
    QAModel,
    answer,
    attend_hop,
    encode_kb_fact,
    encode_sequence,
    encode_text_fact,
    logit,
    masked_logits,
)
from .training import TrainResult, evaluate_accuracy, train
from .gradcheck import GradCheckCase, gradient_check, make_toy_case
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ModelConfig", "ModelParameters", "Vocabulary",
    "AnswerResult", "HopTrace", "MemoryCell", "QAModel",
    "answer", "attend_hop", "encode_kb_fact", "encode_sequence",
    "encode_text_fact", "logit", "masked_logits",
    "TrainResult", "evaluate_accuracy", "train",
    "GradCheckCase", "gradient_check", "make_toy_case",
    "load_checkpoint", "save_checkpoint",
]
