"""Actor-critic networks and PPO training."""
from .network import PolicyValueNet, entropy, log_prob, sample_action
from .ppo import Adam, PPOConfig, adam_step, compute_gae, ppo_loss_and_grad
from .train import Agent, TrainingError, train

__all__ = [
    "Adam", "Agent", "PPOConfig", "PolicyValueNet", "TrainingError", "adam_step",
    "compute_gae", "entropy", "log_prob", "ppo_loss_and_grad", "sample_action", "train",
]
