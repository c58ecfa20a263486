"""
Strategy weights adjusted by task outcomes, persisted as facts.
"""

from typing import Dict, Optional

from ..core.exceptions import ValidationException
from ..core.logger import StructuredLogger
from ..knowledge.layer import KnowledgeLayer
from .types import STRATEGIES, StrategyWeights, TaskOutcome

log = StructuredLogger(__name__)

WEIGHT_PREFIX = "strategy_weight:"
INITIAL_WEIGHT = 0.5


class Reflector:
    def __init__(self, knowledge: KnowledgeLayer, ema_alpha: float = 0.2):
        self.knowledge = knowledge
        self.ema_alpha = ema_alpha

    def weight(self, strategy: str) -> float:
        raw = self.knowledge.get_fact(WEIGHT_PREFIX + strategy)
        return float(raw.decode('utf-8')) if raw is not None else INITIAL_WEIGHT

    def weights(self) -> StrategyWeights:
        values: Dict[str, float] = {name: self.weight(name) for name in STRATEGIES}
        return StrategyWeights(values, self.ema_alpha)

    def reflect(self, outcome: TaskOutcome, alpha: Optional[float] = None) -> StrategyWeights:
        """w <- (1 - alpha) * w + alpha * [success] for the strategy that was used."""
        if outcome.strategy not in STRATEGIES:
            raise ValidationException(f"Unknown strategy {outcome.strategy!r}")
        alpha = self.ema_alpha if alpha is None else alpha
        current = self.weight(outcome.strategy)
        updated = (1.0 - alpha) * current + alpha * (1.0 if outcome.success else 0.0)
        updated = min(1.0, max(0.0, updated))
        self.knowledge.put_fact(WEIGHT_PREFIX + outcome.strategy, repr(updated).encode('utf-8'))
        log.debug("Strategy weight updated", task_id=outcome.task_id, strategy=outcome.strategy,
                  success=outcome.success, weight=updated)
        return self.weights()
