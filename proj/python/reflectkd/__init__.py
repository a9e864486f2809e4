"""Selective reflection distillation toolkit."""

from reflectkd._core import (
    DomainError,
    ParseError,
    ValidationError,
    cost_model,
    divergence,
    effective_config,
    generate_synthetic,
    kd_grad,
    kd_loss,
    lcs_length,
    partition,
    retained_count,
    rouge_l,
    rrf_fuse,
    run_cli,
    schedule,
    step_budget,
    temp_softmax,
)

__all__ = [
    "DomainError",
    "ParseError",
    "ValidationError",
    "cost_model",
    "divergence",
    "effective_config",
    "generate_synthetic",
    "kd_grad",
    "kd_loss",
    "lcs_length",
    "partition",
    "retained_count",
    "rouge_l",
    "rrf_fuse",
    "run_cli",
    "schedule",
    "step_budget",
    "temp_softmax",
]
