"""Simulation, sensing, reward and PPO training stack for ASV path following with obstacle avoidance."""

__version__ = "0.1.0"
