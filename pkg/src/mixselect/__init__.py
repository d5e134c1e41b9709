"""MixSelect: Bayesian semiparametric regression for exposure mixtures.

The response surface is split into linear main effects, heredity-constrained
pairwise interactions, covariate adjustments and a Gaussian-process deviation
projected orthogonally to the main-effects design.  Inference is by MCMC with
spike-and-slab selection on every component.
"""
from . import backend
from .data import Dataset, TransformSpec, from_arrays, load_csv
from .kernel import KernelParams, covariance, gram_matrix
from .sampler import PosteriorSamples, PriorConfig, predict, run_chain

__version__ = "0.1.0"
