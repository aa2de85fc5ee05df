"""Large-deviation rate functions for the Laplacian norm of inhomogeneous
Erdos-Renyi graphs with a graphon reference."""

from .graphon import (
    BlockGraphon,
    ReferenceGraphon,
    DegreeProfile,
    constant,
    rank1,
    grid,
    bilinear,
    reference_from_dict,
    evaluate,
    degree_function,
    cut_norm,
    cut_distance,
    cut_metric_blocks,
    bernoulli_relative_entropy,
    rate_I,
    block_average,
    lp_distance,
)

__version__ = "0.1.0"
