"""Adaptive LSTM traffic-forecast orchestration for a simulated O-RAN RIC."""

from .lstm_core import ArchSpec, LstmModel, TrainConfig, forward, init_model, param_count, train
from .nas_rapp import candidate_space, efficiency_score, run_search
from .orchestrator import PolicyConfig, complexity_reduction
from .ric_sim import ScenarioConfig, replay_counterfactual, run_simulation
from .traffic import TraceConfig, generate_trace, window_dataset

__version__ = "0.1.0"
