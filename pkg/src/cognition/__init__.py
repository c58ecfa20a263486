"""
Cognition layer: recall, association, reasoning, prediction, reflection and updating.
"""

from .types import (
    Cue,
    ReconstructionResult,
    Rule,
    ProofResult,
    Strategy,
    Suggestion,
    Prediction,
    TaskOutcome,
    StrategyWeights,
    UpdateProposal,
    UpdateOutcome,
    Decision,
)
from .association import Associator
from .recall import Recaller
from .reasoning import CaseBase, Reasoner, forward_chain, load_rules, parse_rules
from .prediction import Predictor
from .reflection import Reflector
from .updating import MemoryUpdater, candidate_scores
from .layer import CognitionLayer

__all__ = [
    'Cue',
    'ReconstructionResult',
    'Rule',
    'ProofResult',
    'Strategy',
    'Suggestion',
    'Prediction',
    'TaskOutcome',
    'StrategyWeights',
    'UpdateProposal',
    'UpdateOutcome',
    'Decision',
    'Associator',
    'Recaller',
    'CaseBase',
    'Reasoner',
    'forward_chain',
    'load_rules',
    'parse_rules',
    'Predictor',
    'Reflector',
    'MemoryUpdater',
    'candidate_scores',
    'CognitionLayer',
]
