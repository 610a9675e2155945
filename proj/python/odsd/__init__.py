"""Open-world pool scoring and denoising relational distillation primitives."""

from ._core import (
    ContractViolation,
    DegenerateVectorError,
    Mlp,
    ReduceKSignal,
    cosine,
    denoise_loss,
    gram_embed,
    huber,
    instance_discrimination_loss,
    kd_loss,
    kmeans,
    score_pool,
    select_top,
    softmax,
    sym_eig,
    sym_eig_backward,
    synth_benchmark,
    total_loss,
    ts_consistency_loss,
)

__all__ = [
    "ContractViolation",
    "DegenerateVectorError",
    "Mlp",
    "ReduceKSignal",
    "cosine",
    "denoise_loss",
    "gram_embed",
    "huber",
    "instance_discrimination_loss",
    "kd_loss",
    "kmeans",
    "score_pool",
    "select_top",
    "softmax",
    "sym_eig",
    "sym_eig_backward",
    "synth_benchmark",
    "total_loss",
    "ts_consistency_loss",
]

__version__ = "0.1.0"
