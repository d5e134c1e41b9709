"""MixSelect MCMC engine."""
from .chain import (
    PosteriorSamples,
    SamplerError,
    initial_state,
    pair_labels,
    run_chain,
    run_chains,
    sweep,
)
from .model import ModelData, interaction_effect
from .predict import Prediction, mean_draws, predict
from .state import (
    GammaSlab,
    ModelState,
    PriorConfig,
    count_models,
    heredity_mask,
)
from .steps import (
    step_alpha,
    step_beta,
    step_gamma_main,
    step_lambda,
    step_pi,
    step_rho_add_delete,
    step_rho_gibbs_refresh,
    step_sigma2,
    step_tau,
    step_varphi,
)
