"""Multitask diffusion LMS over asynchronous clustered networks.

Simulation of the stochastic adapt-then-combine recursion under random
agent and link failures, plus the matching closed-form mean and
mean-square performance engine.
"""

from .activation import (
    ActivationDraw,
    BernoulliModel,
    BernoulliParams,
    MomentSet,
    moments,
    sample,
    uniform_inter_factors,
    uniform_intra_weights,
    validate_params,
    verify_stochastic_moments,
)
from .engine import (
    MsdCurve,
    NetworkState,
    SignalModel,
    atc_step_async,
    atc_step_sync,
    draw_data,
    initial_state,
    make_signal_model,
    run_monte_carlo,
    to_db,
)
from .network import ClusteredNetwork, NeighborhoodView, build_network
from .theory import (
    MeanArtifacts,
    MsArtifacts,
    cluster_weighting,
    mean_artifacts,
    mean_stability,
    moment_propagation_oracle,
    ms_artifacts,
    ms_stability,
    network_weighting,
    steady_state_msd,
    transient_msd,
)

__all__ = [
    "ActivationDraw",
    "BernoulliModel",
    "BernoulliParams",
    "ClusteredNetwork",
    "MeanArtifacts",
    "MomentSet",
    "MsArtifacts",
    "MsdCurve",
    "NeighborhoodView",
    "NetworkState",
    "SignalModel",
    "atc_step_async",
    "atc_step_sync",
    "build_network",
    "cluster_weighting",
    "draw_data",
    "initial_state",
    "make_signal_model",
    "mean_artifacts",
    "mean_stability",
    "moment_propagation_oracle",
    "moments",
    "ms_artifacts",
    "ms_stability",
    "network_weighting",
    "run_monte_carlo",
    "sample",
    "steady_state_msd",
    "to_db",
    "transient_msd",
    "uniform_inter_factors",
    "uniform_intra_weights",
    "validate_params",
    "verify_stochastic_moments",
]
