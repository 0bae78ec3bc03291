"""Analytic and Monte Carlo models of DLT-based data trading over NB-IoT."""

from .access import AccessParams, ContentionSolution, solve_contention
from .channel import PopulationModel, RadioEnvironment, delivery_probability
from .config import Config
from .dlt import DltParams, DltRoundCost, dlt_round_cost
from .errors import ConfigError, NbTradeError, NumericError, UnstableQueueError
from .link import EnergyProfile, LinkContext, TrafficModel
from .model import SystemModel
from .montecarlo import SampleStats, SimConfig, run_campaign
from .scenario import Scenario, compare_engines, load_scenario, run_scenario
from .trading import ProtocolKind, ProtocolSpec, battery_lifetime, trade_cost

__version__ = "0.1.0"
