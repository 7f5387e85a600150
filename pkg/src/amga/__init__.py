"""Forward-Forward training with adaptive multi-scale goodness aggregation."""
from .config import ExperimentConfig, Toggles, parse_config
from .curriculum import CurriculumConfig, band_radius, mine_negatives
from .engine import FFLayer, GoodnessFn, layer_forward, layer_train_step, predict, train
from .goodness import aggregate_goodness, depth_weights
from .kernels import BACKEND
from .schedules import adaptive_threshold, learning_rate

__version__ = "0.1.0"
