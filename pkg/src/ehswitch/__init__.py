"""Transmitter switching for multi-transmitter energy-harvesting links.

Modules map onto the pipeline: ``energy_model`` samples harvest traces,
``power_schedule`` builds the whole-transmitter optimal power staircase,
``prediction`` estimates working times, ``policies`` decides switches,
``sim_engine`` runs and compares them, and ``cli`` drives experiments.
"""

from .energy_model import HarvestTrace, SystemConfig, TransmitterConfig, merge_epochs, sample_trace
from .policies import POLICY_NAMES, make_policy
from .power_schedule import PowerSchedule, RateModel, bits_by, completion_time, optimal_powers
from .prediction import PredictionInput, mean_working_time, tail_prob
from .sim_engine import RunResult, count_switches, monte_carlo, run

__version__ = "0.1.0"
