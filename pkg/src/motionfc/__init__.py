"""Multi-class, multi-modal trajectory forecasting with anchor/prediction
transformer decoding, endpoint k-means ensembling and challenge metrics."""

from .config import ModelConfig
from .dataio import SynthConfig, generate_synthetic, parse_scenario, read_scenarios, write_scenario
from .geometry import Pose2, from_agent_frame, normalize_angle, to_agent_frame
from .model import ForecastOutput, forward, init_params
from .scenario import AgentState, AgentTrack, Scenario
from .train import TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "AgentState", "AgentTrack", "ForecastOutput", "ModelConfig", "Pose2", "Scenario", "SynthConfig",
    "TrainConfig", "forward", "from_agent_frame", "generate_synthetic", "init_params", "load_checkpoint",
    "normalize_angle", "parse_scenario", "read_scenarios", "save_checkpoint", "to_agent_frame", "train",
    "write_scenario",
]
