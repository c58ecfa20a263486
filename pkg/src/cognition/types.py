"""
Inputs and results of the cognitive operations.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..core.exceptions import RuleException, ValidationException
from ..knowledge.triples import Triple

TriplePattern = Tuple[str, str, str]
Bindings = Dict[str, str]

MAX_PREMISES = 5


def is_variable(term: str) -> bool:
    return term.startswith('?') and len(term) > 1


def pattern_variables(pattern: Sequence[str]) -> set:
    return {term for term in pattern if is_variable(term)}


def as_pattern(value: Sequence[str]) -> TriplePattern:
    if len(value) != 3 or not all(isinstance(t, str) and t for t in value):
        raise ValidationException(f"a triple pattern has three non-empty terms, got {value!r}")
    return (value[0], value[1], value[2])


@dataclass
class Cue:
    text_tokens: List[str] = field(default_factory=list)
    embedding: Optional[Sequence[float]] = None
    entities: List[str] = field(default_factory=list)
    time_window: Optional[Tuple[int, int]] = None
    slots: List[str] = field(default_factory=list)
    salience_tags: List[str] = field(default_factory=list)

    def validate(self):
        if not (self.text_tokens or self.embedding is not None or self.entities or self.time_window):
            raise ValidationException("cue needs tokens, an embedding, entities or a time window")
        if self.time_window is not None and len(self.time_window) != 2:
            raise ValidationException("time_window is a (t_lo, t_hi) pair")


@dataclass
class ReconstructionResult:
    filled_slots: Dict[str, Tuple[str, float]] = field(default_factory=dict)
    completeness: float = 0.0
    coherence: float = 1.0
    rounds_used: int = 1
    fragments: List[str] = field(default_factory=list)

    @property
    def score(self) -> float:
        return self.completeness * self.coherence

    def to_dict(self) -> Dict[str, Any]:
        return {
            'filled_slots': {slot: [rid, conf] for slot, (rid, conf) in sorted(self.filled_slots.items())},
            'completeness': self.completeness,
            'coherence': self.coherence,
            'rounds_used': self.rounds_used,
            'fragments': list(self.fragments),
        }


@dataclass
class Rule:
    id: str
    premises: List[TriplePattern]
    conclusion: TriplePattern
    confidence: float = 1.0

    def validate(self):
        if not self.premises:
            raise RuleException(f"rule {self.id} has no premises")
        if len(self.premises) > MAX_PREMISES:
            raise RuleException(f"rule {self.id} has {len(self.premises)} premises, at most {MAX_PREMISES}")
        if not (0.0 < self.confidence <= 1.0):
            raise RuleException(f"rule {self.id} confidence must lie in (0, 1]")
        bound = set()
        for premise in self.premises:
            bound |= pattern_variables(premise)
        unsafe = pattern_variables(self.conclusion) - bound
        if unsafe:
            raise RuleException(f"rule {self.id} is unsafe: {sorted(unsafe)} not bound by a premise")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Rule':
        rule = cls(
            id=str(data['id']),
            premises=[as_pattern(p) for p in data['premises']],
            conclusion=as_pattern(data['conclusion']),
            confidence=float(data.get('confidence', 1.0)),
        )
        rule.validate()
        return rule

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'premises': [list(p) for p in self.premises],
            'conclusion': list(self.conclusion),
            'confidence': self.confidence,
        }


class Strategy(str, Enum):
    DEDUCTIVE = "deductive"
    HEURISTIC = "heuristic"
    NONE = "none"


STRATEGIES = (Strategy.HEURISTIC.value, Strategy.DEDUCTIVE.value)


@dataclass
class Suggestion:
    answer: List[Bindings]
    confidence: float
    case_goal: TriplePattern


@dataclass
class ProofResult:
    answer: List[Bindings] = field(default_factory=list)
    strategy: Strategy = Strategy.NONE
    conflict_logged: bool = False
    trace: List[Dict[str, Any]] = field(default_factory=list)
    confidence: float = 0.0
    derived: List[Triple] = field(default_factory=list)
    attempts: List[Strategy] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'answer': [dict(sorted(b.items())) for b in self.answer],
            'strategy': self.strategy.value,
            'attempts': [s.value for s in self.attempts],
            'conflict_logged': self.conflict_logged,
            'trace': self.trace,
            'confidence': self.confidence,
            'derived': [t.to_dict() for t in self.derived],
        }


@dataclass
class Prediction:
    label: str
    confidence: float

    def to_dict(self) -> Dict[str, Any]:
        return {'label': self.label, 'confidence': self.confidence}


@dataclass
class TaskOutcome:
    task_id: str
    strategy: str
    success: bool


@dataclass
class StrategyWeights:
    weights: Dict[str, float]
    ema_alpha: float = 0.2

    def to_dict(self) -> Dict[str, Any]:
        return {'weights': dict(sorted(self.weights.items())), 'ema_alpha': self.ema_alpha}


@dataclass
class UpdateProposal:
    triple: Triple
    evidence: List[str]
    evidence_confidence: float
    source_record: Optional[str] = None

    def validate(self):
        if not self.triple.subject or not self.triple.predicate or not self.triple.object:
            raise ValidationException("proposal triple terms must be non-empty")
        if not self.evidence:
            raise ValidationException("proposal needs evidence")
        if not (0.0 < self.evidence_confidence <= 1.0):
            raise ValidationException("evidence_confidence must lie in (0, 1]")


class Decision(str, Enum):
    REINFORCED = "reinforced"
    REPLACED = "replaced"
    COEXISTS = "coexists"
    REJECTED = "rejected"


@dataclass
class UpdateOutcome:
    decision: Decision
    new_version: Optional[Tuple[Tuple[str, str, str, int], int]] = None
    conflict_with: Optional[Triple] = None
    verification_rounds: int = 0
    consistency: float = 0.0
    completeness_q: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'decision': self.decision.value,
            'new_version': ({'triple': list(self.new_version[0]), 'version': self.new_version[1]}
                            if self.new_version else None),
            'conflict_with': self.conflict_with.to_dict() if self.conflict_with else None,
            'verification_rounds': self.verification_rounds,
            'consistency': self.consistency,
            'completeness_q': self.completeness_q,
        }


# Called with (proposal, conflicting triple); returns a corroboration estimate in [0, 1].
Validator = Callable[[UpdateProposal, Triple], float]
