"""
Retrieve, compare, verify and reconsolidate incoming knowledge.
"""

import threading
from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Tuple

from ..core.config import CognitionConfig
from ..core.exceptions import NotFoundException
from ..core.logger import StructuredLogger
from ..coordination.coordinator import Coordinator
from ..knowledge.layer import KnowledgeLayer
from ..knowledge.triples import LINK_PREDICATE, Triple
from .types import Decision, UpdateOutcome, UpdateProposal, Validator

log = StructuredLogger(__name__)

CONTEXT_DEPTH = 2
EMPTY_CONTEXT_CORROBORATION = 0.5
CANDIDATES = ('keep_old', 'replace', 'coexist')


def candidate_scores(evidence_confidence: float, old_confidence: float,
                     corroboration: float) -> Dict[str, float]:
    """Consistency of each resolution, from corroborated new weight against old weight."""
    new = evidence_confidence * corroboration
    old = old_confidence * (1.0 - corroboration)
    total = new + old
    if total <= 0.0:
        return {name: 0.5 for name in CANDIDATES}

    def clamp(value: float) -> float:
        return min(1.0, max(0.0, value))

    return {
        'keep_old': clamp(0.5 + (old - new) / total),
        'replace': clamp(0.5 + (new - old) / total),
        'coexist': 1.0 - abs(new - old) / total,
    }


def supersedes_entry(triple: Triple) -> str:
    return f"supersedes:{triple.subject}|{triple.predicate}|{triple.object}|{triple.asserted_at}"


class MemoryUpdater:
    def __init__(self, knowledge: KnowledgeLayer, coordinator: Coordinator,
                 config: Optional[CognitionConfig] = None):
        self.knowledge = knowledge
        self.coordinator = coordinator
        self.config = config or CognitionConfig()
        # slot -> [lock, holders and waiters]; dropped when nobody uses it
        self._locks: Dict[Tuple[str, str], List] = {}
        self._locks_guard = threading.Lock()

    @contextmanager
    def _key_lock(self, subject: str, predicate: str) -> Iterator[None]:
        key = (subject, predicate)
        with self._locks_guard:
            entry = self._locks.setdefault(key, [threading.Lock(), 0])
            entry[1] += 1
        try:
            with entry[0]:
                yield
        finally:
            with self._locks_guard:
                entry[1] -= 1
                if not entry[1]:
                    del self._locks[key]

    def context_triples(self, subject: str, predicate: str) -> List[Triple]:
        """Live triples around the subject, minus the (s, p, *) slot and record links."""
        around = self.knowledge.neighbors(subject, CONTEXT_DEPTH, 'both')
        seen = {}
        for entity in sorted(around):
            for triple in (self.knowledge.query_triples(entity, None, None)
                           + self.knowledge.query_triples(None, None, entity)):
                if triple.predicate == LINK_PREDICATE:
                    continue
                if triple.subject == subject and triple.predicate == predicate:
                    continue
                seen[triple.key] = triple
        return [seen[k] for k in sorted(seen)]

    @staticmethod
    def corroboration(context: List[Triple], evidence: List[str]) -> float:
        if not context:
            return EMPTY_CONTEXT_CORROBORATION
        sources = set(evidence)
        shared = sum(1 for t in context if sources.intersection(t.provenance))
        return shared / len(context)

    def completeness_q(self, proposal: UpdateProposal) -> float:
        q = 0.0
        if any(e.strip() for e in proposal.evidence):
            q += 0.5
        if proposal.source_record and self.knowledge.peek_record(proposal.source_record) is not None:
            q += 0.25
        if proposal.triple.asserted_at > 0:
            q += 0.25
        return q

    def _slot_version(self, subject: str, predicate: str) -> int:
        return sum(1 for t in self.knowledge.all_triples()
                   if t.subject == subject and t.predicate == predicate)

    def _new_triple(self, proposal: UpdateProposal, extra: List[str]) -> Triple:
        t = proposal.triple
        return Triple(t.subject, t.predicate, t.object, confidence=proposal.evidence_confidence,
                      source_record=proposal.source_record or t.source_record,
                      provenance=list(dict.fromkeys(list(proposal.evidence) + extra)))

    def _reinforce_sources(self, *record_ids: Optional[str]):
        for record_id in dict.fromkeys(r for r in record_ids if r):
            try:
                self.coordinator.reinforce(record_id, self.config.update_reinforce)
            except NotFoundException:
                log.debug("Source record not live, not reinforced", record_id=record_id)

    def update_memory(self, proposal: UpdateProposal, max_rounds: Optional[int] = None,
                      accept_q: Optional[float] = None,
                      validator: Optional[Validator] = None) -> UpdateOutcome:
        proposal.validate()
        max_rounds = max_rounds or self.config.update_max_rounds
        accept_q = self.config.update_accept_q if accept_q is None else accept_q
        s, p, o = proposal.triple.spo

        with self._key_lock(s, p):
            q = self.completeness_q(proposal)
            slot = self.knowledge.query_triples(s, p, None)
            exact = next((t for t in slot if t.object == o), None)

            if exact is not None:
                if proposal.evidence_confidence > exact.confidence:
                    self.knowledge.set_triple_confidence(exact, proposal.evidence_confidence)
                self._reinforce_sources(exact.source_record, proposal.source_record)
                log.debug("Update reinforced existing triple", subject=s, predicate=p)
                return UpdateOutcome(Decision.REINFORCED, consistency=1.0, completeness_q=q)

            if not slot:
                added = self.knowledge.assert_triple(self._new_triple(proposal, []))
                return UpdateOutcome(Decision.COEXISTS, new_version=(added.key, self._slot_version(s, p)),
                                     consistency=1.0, completeness_q=q)

            old = min(slot, key=lambda t: (-t.confidence, t.key))
            c = self.corroboration(self.context_triples(s, p), list(proposal.evidence))
            choice = None
            consistency = 0.0
            rounds = 0
            while rounds < max_rounds:
                rounds += 1
                scores = candidate_scores(proposal.evidence_confidence, old.confidence, c)
                consistency = max(scores.values())
                for name in CANDIDATES:
                    if scores[name] * q >= accept_q:
                        choice, consistency = name, scores[name]
                        break
                if choice is not None or validator is None:
                    break
                c = (c + min(1.0, max(0.0, float(validator(proposal, old))))) / 2.0

            outcome = UpdateOutcome(Decision.REJECTED, conflict_with=old, verification_rounds=rounds,
                                    consistency=consistency, completeness_q=q)
            if choice == 'replace':
                at = max(self.knowledge.clock.now_us(), old.asserted_at + 1)
                self.knowledge.retract_triple(old.subject, old.predicate, old.object, at=at)
                replacement = self._new_triple(proposal, [supersedes_entry(old)]).copy(asserted_at=at)
                added = self.knowledge.assert_triple(replacement)
                outcome.decision = Decision.REPLACED
                outcome.new_version = (added.key, self._slot_version(s, p))
            elif choice == 'coexist':
                added = self.knowledge.assert_triple(self._new_triple(proposal, []))
                outcome.decision = Decision.COEXISTS
                outcome.new_version = (added.key, self._slot_version(s, p))

        log.info("Conflicting update verified", subject=s, predicate=p, decision=outcome.decision.value,
                 rounds=rounds, consistency=round(consistency, 4), completeness_q=q)
        return outcome
