"""Simulator for RIS-assisted mono-static ISAC target detection."""

from .channel import ArrayGeometry, ChannelSet, Direction, RisPhases
from .config import ScenarioConfig, apply_snr_point, load_config
from .errors import RisIsacError
from .harness import CurveTable, run_curve
from .optimizer import optimize_phases, optimize_precoder, solve_norm_constrained_qp
from .sensing import RcsVariances, gain_matrix, target_covariance

__version__ = "0.1.0"
