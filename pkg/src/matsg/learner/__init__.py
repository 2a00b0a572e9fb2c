"""Independent PPO learners over birdview observations."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .network import N_INPUTS, PARAM_ORDER, PolicyNetwork, obs_matrix, obs_vector, policy_forward
from .ppo import Adam, PPOAgent, PpoConfig, PpoError, advantages_for, compute_gae, normalize, ppo_loss, ppo_update
from .rollouts import EpisodeRecord, ReturnStats, collect_batch, evaluate_policy, run_episode, summarize

TRAINING_LOG_COLUMNS = ("update", "agent", "mean_return", "route_completion", "collisions",
                        "policy_loss", "value_loss", "entropy", "clip_frac", "approx_kl")

__all__ = [
    "Adam", "CheckpointError", "EpisodeRecord", "N_INPUTS", "PARAM_ORDER", "PPOAgent", "PolicyNetwork",
    "PpoConfig", "PpoError", "ReturnStats", "TRAINING_LOG_COLUMNS", "advantages_for", "collect_batch",
    "compute_gae", "evaluate_policy", "load_checkpoint", "normalize", "obs_matrix", "obs_vector",
    "policy_forward", "ppo_loss", "ppo_update", "run_episode", "save_checkpoint", "summarize",
]
