"""Numpy TF-GridNet inference, DNN-supported linear filters, separation
losses and a synthetic scene generator."""
from .filters import FilterSpec, compute_lambda, convbf, mfwf, wpe
from .model import ModelConfig, WeightStore, count_params, forward
from .objective import EvalReport, LossKind, pit_assign, si_sdr, si_sdr_se
from .pipeline import PipelineConfig, run
from .scene import SceneSpec, simulate
from .stft import StftConfig, istft, stft

__version__ = '0.1.0'
