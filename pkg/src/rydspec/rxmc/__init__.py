from .free_energy import (
    bar_log_z,
    FreeEnergyCurve,
    ModelSelection,
    free_energy_curve,
    free_energy_curve_for_model,
    free_energy_from_samples,
    posterior_summary,
    select_model,
    stepping_log_z,
)
from .likelihood import error_energy, log_likelihood, log_likelihood_from_error
from .models import ConstantModel, FanoUrbachModel, ForwardModel, LinearModel, SpectralPrior
from .sampler import (
    NoiseLadder,
    ReplicaExchange,
    ReplicaState,
    RunConfig,
    default_ladder,
    exchange_log_acceptance,
    metropolis_chains,
    metropolis_step,
    replica_exchange,
)

__all__ = [
    "bar_log_z",
    "ConstantModel",
    "FanoUrbachModel",
    "ForwardModel",
    "FreeEnergyCurve",
    "LinearModel",
    "ModelSelection",
    "NoiseLadder",
    "ReplicaExchange",
    "ReplicaState",
    "RunConfig",
    "SpectralPrior",
    "default_ladder",
    "error_energy",
    "exchange_log_acceptance",
    "free_energy_curve",
    "free_energy_curve_for_model",
    "free_energy_from_samples",
    "log_likelihood",
    "log_likelihood_from_error",
    "metropolis_chains",
    "metropolis_step",
    "posterior_summary",
    "replica_exchange",
    "select_model",
    "stepping_log_z",
]
