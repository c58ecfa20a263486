"""
Memory coordination: encoding, consolidation, reinforcement and forgetting.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from ..core.config import RetentionPolicy
from ..core.exceptions import NotFoundException, ValidationException
from ..core.logger import StructuredLogger
from ..knowledge.layer import KnowledgeLayer
from ..knowledge.records import MemoryRecord, Modality, Tier
from .policy import eviction_key, retention_score

log = StructuredLogger(__name__)


@dataclass
class Stimulus:
    """External input before it becomes a short-term record."""
    modality: Modality
    content: Union[bytes, str]
    embedding: Optional[Sequence[float]] = None
    salience: Optional[float] = None
    entities: List[str] = field(default_factory=list)
    occurred_at: Optional[int] = None
    provenance: List[str] = field(default_factory=list)

    def content_bytes(self) -> bytes:
        if isinstance(self.content, str):
            return self.content.encode('utf-8')
        return bytes(self.content)


@dataclass
class TickReport:
    promoted: List[Tuple[str, str, str]] = field(default_factory=list)
    archived: List[str] = field(default_factory=list)
    evaluated: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'promoted': [list(p) for p in self.promoted],
            'archived': list(self.archived),
            'evaluated': self.evaluated,
        }


class Coordinator:
    """Moves records between tiers of one namespace."""

    def __init__(self, knowledge: KnowledgeLayer, policy: Optional[RetentionPolicy] = None):
        self.knowledge = knowledge
        self.policy = policy or RetentionPolicy()
        self.clock = knowledge.clock

    def retention_score(self, record: MemoryRecord, now: Optional[int] = None) -> float:
        return retention_score(record, self.clock.now_us() if now is None else now, self.policy)

    def encode(self, stimulus: Stimulus) -> MemoryRecord:
        """Store a stimulus as a short-term record and link its entities."""
        salience = 0.5 if stimulus.salience is None else stimulus.salience
        if not 0.0 <= salience <= 1.0:
            raise ValidationException("salience must lie in [0, 1]")

        with self.knowledge.lock:
            now = self.clock.now_us()
            occurred = stimulus.occurred_at if stimulus.occurred_at is not None else now
            record = MemoryRecord(
                id=None,
                namespace=self.knowledge.namespace,
                modality=Modality(stimulus.modality),
                content=stimulus.content_bytes(),
                embedding=tuple(stimulus.embedding) if stimulus.embedding is not None else None,
                created_at=occurred,
                last_access=occurred,
                salience=salience,
                tier=Tier.SHORT,
                provenance=list(stimulus.provenance),
            )
            record_id, _ = self.knowledge.upsert_record(record)

            if stimulus.entities:
                if self.knowledge.graph_enabled:
                    for entity in sorted(set(stimulus.entities)):
                        self.knowledge.link_record_entity(record_id, entity)
                else:
                    log.debug("Graph disabled, entity links skipped", record_id=record_id)

            self._enforce_capacity(max(now, occurred))
            encoded = self.knowledge.peek_record(record_id)

        log.debug("Stimulus encoded", namespace=self.knowledge.namespace, record_id=record_id,
                  modality=encoded.modality.value, tier=encoded.tier.value)
        return encoded

    def _enforce_capacity(self, now: int):
        shorts = [r for r in self.knowledge.list_records() if r.tier is Tier.SHORT]
        overflow = len(shorts) - self.policy.short_capacity
        if overflow <= 0:
            return
        for record in sorted(shorts, key=lambda r: eviction_key(r, now, self.policy))[:overflow]:
            score = retention_score(record, now, self.policy)
            if score < self.policy.archive_threshold:
                self.knowledge.update_state(record.id, tier=Tier.ARCHIVED, promoted_at=now)
                log.info("Short tier full, record archived", record_id=record.id, score=round(score, 4))
            else:
                self.knowledge.update_state(record.id, tier=Tier.MEDIUM, promoted_at=now)
                log.info("Short tier full, record promoted", record_id=record.id, score=round(score, 4))

    def consolidate_tick(self, now: Optional[int] = None) -> TickReport:
        """Promote records at or above the promote threshold, archive those under the archive threshold.

        A record already moved at ``now`` or later is left alone, so ticks at
        a fixed time are idempotent. Every tier above short takes one tick,
        so a record pushed to medium by a full short tier still needs two
        ticks to reach long.
        """
        report = TickReport()
        with self.knowledge.lock:
            now = self.clock.now_us() if now is None else now
            for record in self.knowledge.list_records():
                if record.promoted_at >= now and record.promoted_at > 0:
                    continue
                report.evaluated += 1
                score = retention_score(record, now, self.policy)
                if score >= self.policy.promote_threshold:
                    if record.tier is Tier.LONG:
                        continue
                    ladder_ticks = record.ladder_ticks + 1
                    target = record.tier.promoted()
                    if target.rank > ladder_ticks:
                        # moved up by capacity pressure: this tick only counts
                        self.knowledge.update_state(record.id, promoted_at=now, ladder_ticks=ladder_ticks)
                        continue
                    self.knowledge.update_state(record.id, tier=target, promoted_at=now,
                                                ladder_ticks=ladder_ticks)
                    report.promoted.append((record.id, record.tier.value, target.value))
                elif score < self.policy.archive_threshold:
                    self.knowledge.update_state(record.id, tier=Tier.ARCHIVED, promoted_at=now)
                    report.archived.append(record.id)

        log.info("Consolidation tick", namespace=self.knowledge.namespace, evaluated=report.evaluated,
                 promoted=len(report.promoted), archived=len(report.archived))
        return report

    def reinforce(self, record_id: str, delta_salience: float) -> MemoryRecord:
        """Adjust salience and count an access; no new version is written."""
        with self.knowledge.lock:
            record = self.knowledge.peek_record(record_id)
            if record is None or record.tier is Tier.ARCHIVED:
                raise NotFoundException(f"No live record {record_id}", {'id': record_id})
            now = self.clock.now_us()
            salience = min(1.0, max(0.0, record.salience + delta_salience))
            return self.knowledge.update_state(
                record_id,
                salience=salience,
                access_count=record.access_count + 1,
                last_access=max(now, record.last_access),
            )

    def forget_tick(self, now: Optional[int] = None) -> List[str]:
        """Archive records whose retention fell under the archive threshold."""
        archived = []
        with self.knowledge.lock:
            now = self.clock.now_us() if now is None else now
            for record in self.knowledge.list_records():
                if retention_score(record, now, self.policy) < self.policy.archive_threshold:
                    self.knowledge.update_state(record.id, tier=Tier.ARCHIVED, promoted_at=now)
                    archived.append(record.id)
        if archived:
            log.info("Records archived", namespace=self.knowledge.namespace, count=len(archived))
        return archived
