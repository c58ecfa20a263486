"""
Cue-driven iterative reconstruction.
"""

import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from ..core.config import CognitionConfig
from ..core.exceptions import NotFoundException
from ..core.logger import StructuredLogger
from ..coordination.coordinator import Coordinator
from ..knowledge.layer import KnowledgeLayer
from ..knowledge.records import MemoryRecord, Tier
from ..knowledge.vectors import cosine_similarity
from ..utils.embedding import tokens
from .association import Associator
from .types import Cue, ReconstructionResult

log = StructuredLogger(__name__)

MATCH_WEIGHT = 0.6
SIMILARITY_WEIGHT = 0.25
SALIENCE_WEIGHT = 0.15
SIMILARITY_FALLBACK = 0.5


def record_tokens(record: MemoryRecord) -> Set[str]:
    content = record.json_content()
    if content is None:
        return set(tokens(record.text()))
    words: Set[str] = set()

    def walk(value):
        if isinstance(value, dict):
            for key, item in value.items():
                words.update(tokens(str(key)))
                walk(item)
        elif isinstance(value, list):
            for item in value:
                walk(item)
        elif value is not None:
            words.update(tokens(str(value)))

    walk(content)
    return words


def slot_match(record: MemoryRecord, slot: str) -> bool:
    """A structured key named like the slot, a ``slot`` field naming it, or a matching text token."""
    content = record.json_content()
    if isinstance(content, dict):
        if slot in content or content.get('slot') == slot:
            return True
    return slot.lower() in record_tokens(record)


def coherence(records: List[MemoryRecord]) -> float:
    """Mean pairwise cosine of embedded fragments, clamped to [0, 1]."""
    vectors = [r.embedding for r in records if r.embedding is not None]
    if len(vectors) < 2:
        return 1.0
    pairs = [cosine_similarity(a, b) for a, b in itertools.combinations(vectors, 2)]
    return min(1.0, max(0.0, sum(pairs) / len(pairs)))


@dataclass
class _Candidate:
    record: MemoryRecord
    similarity: float
    overlap: float


class Recaller:
    def __init__(self, knowledge: KnowledgeLayer, coordinator: Coordinator,
                 associator: Associator, config: Optional[CognitionConfig] = None):
        self.knowledge = knowledge
        self.coordinator = coordinator
        self.associator = associator
        self.config = config or CognitionConfig()

    def gather(self, cue: Cue) -> List[str]:
        """Round-one fragments: time window, vector neighbors, linked entities."""
        found: List[str] = []
        if cue.time_window is not None:
            found.extend(self.knowledge.timeline(int(cue.time_window[0]), int(cue.time_window[1])))
        if cue.embedding is not None:
            found.extend(h.id for h in self.knowledge.knn(cue.embedding, self.config.recall_knn_k, mode='exact'))
        if cue.entities and self.knowledge.graph_enabled:
            for entity in cue.entities:
                found.extend(self.knowledge.records_of_entity(entity))
        return list(dict.fromkeys(found))

    def _candidate(self, cue: Cue, cue_words: Set[str], record: MemoryRecord) -> _Candidate:
        similarity = 0.0
        if cue.embedding is not None and record.embedding is not None:
            similarity = cosine_similarity(cue.embedding, record.embedding)
        overlap = 0.0
        if cue_words:
            overlap = len(cue_words & record_tokens(record)) / len(cue_words)
        return _Candidate(record, similarity, overlap)

    @staticmethod
    def _confidence(candidate: _Candidate, matched: bool) -> float:
        relevance = max(candidate.similarity, candidate.overlap, 0.0)
        score = (MATCH_WEIGHT * (1.0 if matched else 0.0)
                 + SIMILARITY_WEIGHT * relevance
                 + SALIENCE_WEIGHT * candidate.record.salience)
        return min(1.0, max(0.0, score))

    def _fill(self, cue: Cue, fragments: List[str]) -> ReconstructionResult:
        cue_words = {w for t in cue.text_tokens for w in tokens(t)}
        candidates = []
        for record_id in fragments:
            record = self.knowledge.peek_record(record_id)
            if record is not None and record.tier is not Tier.ARCHIVED:
                candidates.append(self._candidate(cue, cue_words, record))

        result = ReconstructionResult()
        if not candidates:
            result.completeness = 0.0
            return result

        if not cue.slots:
            ranked = sorted(candidates, key=lambda c: (-self._confidence(c, False), c.record.id))
            chosen = [c.record for c in ranked[:self.config.recall_knn_k]]
            result.completeness = 1.0
        else:
            chosen_ids: Dict[str, MemoryRecord] = {}
            for slot in cue.slots:
                best: Optional[Tuple[float, str, MemoryRecord]] = None
                for candidate in candidates:
                    matched = slot_match(candidate.record, slot)
                    if not matched and candidate.similarity < SIMILARITY_FALLBACK:
                        continue
                    confidence = self._confidence(candidate, matched)
                    key = (-confidence, candidate.record.id, candidate.record)
                    if best is None or key[:2] < best[:2]:
                        best = key
                if best is not None:
                    result.filled_slots[slot] = (best[1], -best[0])
                    chosen_ids[best[1]] = best[2]
            chosen = [chosen_ids[i] for i in sorted(chosen_ids)]
            result.completeness = len(result.filled_slots) / len(cue.slots)

        result.fragments = [r.id for r in chosen]
        result.coherence = coherence(chosen)
        return result

    def _expand(self, cue: Cue, result: ReconstructionResult, fragments: List[str]) -> List[str]:
        """Fragments reachable by association from the most confident slot fillers."""
        by_confidence = sorted(result.filled_slots.values(), key=lambda item: (-item[1], item[0]))
        seeds = list(dict.fromkeys([rid for rid, _ in by_confidence] + list(cue.entities)))
        if not seeds and cue.embedding is None:
            return fragments
        seeded = Cue(entities=seeds, embedding=cue.embedding)
        extra = [hit.id for hit in self.associator.associate(seeded, self.config.recall_knn_k)
                 if self.knowledge.peek_record(hit.id) is not None]
        return list(dict.fromkeys(fragments + extra))

    def recall(self, cue: Cue, max_rounds: Optional[int] = None,
               accept_threshold: Optional[float] = None) -> ReconstructionResult:
        cue.validate()
        max_rounds = max_rounds or self.config.recall_max_rounds
        threshold = self.config.recall_accept_threshold if accept_threshold is None else accept_threshold

        fragments = self.gather(cue)
        best: Optional[ReconstructionResult] = None
        rounds = 0
        while rounds < max_rounds:
            rounds += 1
            current = self._fill(cue, fragments)
            if best is None or current.score > best.score:
                best = current
            if current.score >= threshold or rounds == max_rounds:
                break
            expanded = self._expand(cue, current, fragments)
            if len(expanded) == len(fragments):
                break
            fragments = expanded

        best.rounds_used = rounds
        for record_id in best.fragments:
            try:
                self.coordinator.reinforce(record_id, self.config.recall_reinforce)
            except NotFoundException:
                log.debug("Fragment vanished before reinforcement", record_id=record_id)

        log.debug("Recall finished", rounds=rounds, completeness=best.completeness,
                  coherence=round(best.coherence, 4), fragments=len(best.fragments))
        return best
