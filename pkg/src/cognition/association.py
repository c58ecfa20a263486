"""
Spreading activation over live triples plus a vector-neighbor path.
"""

from typing import Dict, List, Optional

from ..core.config import CognitionConfig
from ..core.exceptions import ValidationException
from ..core.logger import StructuredLogger
from ..knowledge.layer import KnowledgeLayer
from ..knowledge.vectors import ScoredId, rank
from .types import Cue

log = StructuredLogger(__name__)


class Associator:
    """Activation = sum over simple paths of hop_decay ** length, clamped to 1."""

    def __init__(self, knowledge: KnowledgeLayer, config: Optional[CognitionConfig] = None):
        self.knowledge = knowledge
        self.config = config or CognitionConfig()

    def spread(self, seeds: List[str]) -> Dict[str, float]:
        """Graph activation from seed nodes, before clamping."""
        activation: Dict[str, float] = {}
        if not seeds:
            return activation
        adjacency: Dict[str, List[str]] = {}

        def neighbors(node: str) -> List[str]:
            if node not in adjacency:
                adjacency[node] = self.knowledge.adjacency(node)
            return adjacency[node]

        decay = self.config.hop_decay
        max_hops = self.config.max_hops
        for seed in sorted(set(seeds)):
            activation[seed] = activation.get(seed, 0.0) + 1.0
            if not self.knowledge.graph_enabled:
                continue
            # depth-first enumeration of simple paths from the seed
            stack = [(seed, 0, 1.0, frozenset([seed]))]
            while stack:
                node, hops, weight, visited = stack.pop()
                if hops == max_hops:
                    continue
                for nxt in neighbors(node):
                    if nxt in visited:
                        continue
                    contribution = weight * decay
                    activation[nxt] = activation.get(nxt, 0.0) + contribution
                    stack.append((nxt, hops + 1, contribution, visited | {nxt}))
        return activation

    def associate(self, cue: Cue, k: int) -> List[ScoredId]:
        if k < 1:
            raise ValidationException("k must be at least 1")
        if not cue.entities and cue.embedding is None:
            raise ValidationException("association needs seed entities or an embedding")

        activation = self.spread(list(cue.entities))
        if cue.embedding is not None:
            for hit in self.knowledge.knn(cue.embedding, k, mode='exact'):
                if hit.score > 0.0:
                    activation[hit.id] = activation.get(hit.id, 0.0) + hit.score * self.config.knn_weight

        clamped = {node: min(1.0, value) for node, value in activation.items() if value > 0.0}
        ranked = rank(clamped, k)
        log.debug("Association", seeds=len(cue.entities), activated=len(clamped), returned=len(ranked))
        return ranked
