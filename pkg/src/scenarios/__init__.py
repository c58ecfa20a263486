"""
Executable user scenarios and the capability matrix.
"""

from ..utils.embedding import test_embed
from .capabilities import DIMENSIONS, CapabilityReport, eval_capabilities
from .runner import Scenario, ScenarioTranscript, run_all, run_scenario, scenario_engine

__all__ = [
    'test_embed',
    'DIMENSIONS',
    'CapabilityReport',
    'eval_capabilities',
    'Scenario',
    'ScenarioTranscript',
    'run_all',
    'run_scenario',
    'scenario_engine',
]
