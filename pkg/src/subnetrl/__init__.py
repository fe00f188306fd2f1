"""Distributed dynamic channel allocation for mobile in-factory subnetworks.

Simulation and training framework combining an indoor-factory radio model,
robot mobility, per-subnetwork DDQN/PPO learners, federated averaging and
non-learning baselines, with a CLI experiment harness.
"""

__version__ = "0.1.0"
