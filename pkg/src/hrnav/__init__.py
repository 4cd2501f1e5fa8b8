"""Hierarchical DQN+TD3 navigation for a differential-drive robot in a 2-D arena."""

from .kernels import BACKEND
from .simworld import Action, EnvConfig, NavEnv, Outcome, Pose, World, bundled_world, load_world

__version__ = "0.1.0"

__all__ = ["BACKEND", "Action", "EnvConfig", "NavEnv", "Outcome", "Pose", "World", "bundled_world",
           "load_world", "__version__"]
