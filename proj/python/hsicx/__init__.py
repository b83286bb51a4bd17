"""HSIC attributions for black-box models."""

from ._hsicx import (
    InvalidArgument,
    IoError,
    TransportError,
    UndefinedCorrelation,
    attribute,
    builtin_models,
    exhaustive_masks,
    explain,
    hsic_subset,
    interaction,
    interaction_matrix,
    pearson,
    sample_bernoulli_masks,
    sample_lhs_masks,
    spearman,
)

__all__ = [
    "InvalidArgument",
    "IoError",
    "TransportError",
    "UndefinedCorrelation",
    "attribute",
    "builtin_models",
    "exhaustive_masks",
    "explain",
    "hsic_subset",
    "interaction",
    "interaction_matrix",
    "pearson",
    "sample_bernoulli_masks",
    "sample_lhs_masks",
    "spearman",
]
