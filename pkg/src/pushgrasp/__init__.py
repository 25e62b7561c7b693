"""Goal-oriented push-grasp learning on a deterministic 2D tabletop."""
from .config import Config, load_config
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "Config", "load_config", "__version__"]
