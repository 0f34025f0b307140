"""Sum-rate maximization for a movable-antenna downlink with a reflecting surface.

Two-layer transmission (a shared stream on top of per-user streams) is
optimized jointly over transmit beamformers, surface reflection phases,
the shared-rate split, and the 1-D antenna positions, by alternating
closed-form and first-order blocks. See maris.ao_driver for the loop.
"""

from .ao_driver import SolveOptions, SolveResult, default_state, solve
from .channel import (ChannelRealization, CompositeChannel, assemble_channel,
                      sample_scenario)
from .config import SystemConfig, dbm_to_watts, watts_to_dbm
from .rates import DecisionState, RateReport, evaluate

__version__ = "0.1.0"

__all__ = [
    "SystemConfig", "dbm_to_watts", "watts_to_dbm",
    "ChannelRealization", "CompositeChannel", "sample_scenario",
    "assemble_channel",
    "DecisionState", "RateReport", "evaluate",
    "SolveOptions", "SolveResult", "default_state", "solve",
    "__version__",
]
