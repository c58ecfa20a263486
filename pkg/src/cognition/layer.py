"""
Cognitive operations of one namespace.
"""

from typing import Dict, List, Optional, Sequence

from ..core.config import CognitionConfig
from ..coordination.coordinator import Coordinator
from ..knowledge.layer import KnowledgeLayer
from ..knowledge.vectors import ScoredId
from .association import Associator
from .prediction import Predictor
from .reasoning import CaseBase, Reasoner
from .recall import Recaller
from .reflection import Reflector
from .types import (
    Cue,
    Prediction,
    ProofResult,
    ReconstructionResult,
    Rule,
    StrategyWeights,
    Suggestion,
    TaskOutcome,
    UpdateOutcome,
    UpdateProposal,
    Validator,
)
from .updating import MemoryUpdater


class CognitionLayer:
    def __init__(self, knowledge: KnowledgeLayer, coordinator: Coordinator,
                 config: Optional[CognitionConfig] = None):
        self.config = config or CognitionConfig()
        self.knowledge = knowledge
        self.coordinator = coordinator
        self.associator = Associator(knowledge, self.config)
        self.recaller = Recaller(knowledge, coordinator, self.associator, self.config)
        self.reflector = Reflector(knowledge, self.config.ema_alpha)
        self.case_base = CaseBase(knowledge)
        self.reasoner = Reasoner(knowledge, self.reflector, self.config, self.case_base)
        self.predictor = Predictor(knowledge)
        self.updater = MemoryUpdater(knowledge, coordinator, self.config)

    def recall(self, cue: Cue, max_rounds: Optional[int] = None,
               accept_threshold: Optional[float] = None) -> ReconstructionResult:
        return self.recaller.recall(cue, max_rounds, accept_threshold)

    def associate(self, cue: Cue, k: int) -> List[ScoredId]:
        return self.associator.associate(cue, k)

    def reason(self, goal: Sequence[str], rules: Sequence[Rule],
               max_depth: Optional[int] = None) -> ProofResult:
        return self.reasoner.reason(goal, rules, max_depth)

    def heuristic_suggest(self, goal: Sequence[str]) -> Optional[Suggestion]:
        return self.reasoner.heuristic_suggest(goal)

    def predict(self, stream_id: str, context: Sequence[str], order: int = 1) -> Optional[Prediction]:
        return self.predictor.predict(stream_id, context, order)

    def successor_distribution(self, stream_id: str, label: str) -> Dict[str, float]:
        return self.predictor.successor_distribution(stream_id, label)

    def reflect(self, outcome: TaskOutcome) -> StrategyWeights:
        return self.reflector.reflect(outcome)

    def strategy_weights(self) -> StrategyWeights:
        return self.reflector.weights()

    def update_memory(self, proposal: UpdateProposal, max_rounds: Optional[int] = None,
                      accept_q: Optional[float] = None,
                      validator: Optional[Validator] = None) -> UpdateOutcome:
        return self.updater.update_memory(proposal, max_rounds, accept_q, validator)
