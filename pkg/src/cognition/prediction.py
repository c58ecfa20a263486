"""
First-order transition model over event streams.
"""

from collections import Counter
from typing import Dict, List, Optional, Sequence

from ..core.exceptions import ValidationException
from ..knowledge.layer import KnowledgeLayer
from .types import Prediction


def _best(counts: Counter) -> Optional[Prediction]:
    total = sum(counts.values())
    if not total:
        return None
    label, count = min(counts.items(), key=lambda item: (-item[1], item[0]))
    return Prediction(label, count / total)


class Predictor:
    def __init__(self, knowledge: KnowledgeLayer):
        self.knowledge = knowledge

    def labels(self, stream_id: str) -> List[str]:
        return [label for _, label in self.knowledge.stream_labels(stream_id)]

    def initial_labels(self, stream_id: str) -> List[str]:
        """First label of every episode; events without an episode share the stream's first one."""
        initial = []
        previous = object()
        for _, label, episode in self.knowledge.stream_events(stream_id):
            if not initial or episode != previous:
                initial.append(label)
            previous = episode
        return initial

    def transitions(self, stream_id: str) -> Dict[str, Counter]:
        labels = self.labels(stream_id)
        table: Dict[str, Counter] = {}
        for current, following in zip(labels, labels[1:]):
            table.setdefault(current, Counter())[following] += 1
        return table

    def successor_distribution(self, stream_id: str, label: str) -> Dict[str, float]:
        counts = self.transitions(stream_id).get(label)
        if not counts:
            return {}
        total = sum(counts.values())
        return {name: counts[name] / total for name in sorted(counts)}

    def predict(self, stream_id: str, context: Sequence[str], order: int = 1) -> Optional[Prediction]:
        """Most frequent successor of the last context label; ties go to the smaller label.

        With an empty context the most frequent episode-initial label is returned.
        """
        if order != 1:
            raise ValidationException("only first-order prediction is supported")
        labels = self.labels(stream_id)
        if not labels:
            return None
        if not context:
            return _best(Counter(self.initial_labels(stream_id)))
        return _best(self.transitions(stream_id).get(context[-1], Counter()))
