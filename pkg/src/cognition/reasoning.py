"""
Dual-path reasoning: bounded forward chaining and case-based heuristics.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import jsonschema

from ..core.config import CognitionConfig
from ..core.exceptions import RuleException, ValidationException
from ..core.logger import StructuredLogger
from ..knowledge.layer import CASES, KnowledgeLayer
from ..knowledge.triples import Triple
from ..knowledge.vectors import ExactVectorIndex
from ..storage.types import Cell
from ..utils.embedding import DEFAULT_DIM, test_embed
from ..utils.serialization import canonical_json, loads
from .reflection import Reflector
from .types import (
    Bindings,
    ProofResult,
    Rule,
    Strategy,
    Suggestion,
    TaskOutcome,
    TriplePattern,
    as_pattern,
    is_variable,
)

log = StructuredLogger(__name__)

Fact = Tuple[str, str, str]

_PATTERN_SCHEMA = {
    'type': 'array',
    'items': {'type': 'string', 'minLength': 1},
    'minItems': 3,
    'maxItems': 3,
}

RULE_SCHEMA = {
    'type': 'object',
    'required': ['id', 'premises', 'conclusion'],
    'properties': {
        'id': {'type': 'string', 'minLength': 1},
        'premises': {'type': 'array', 'items': _PATTERN_SCHEMA, 'minItems': 1, 'maxItems': 5},
        'conclusion': _PATTERN_SCHEMA,
        'confidence': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
    },
    'additionalProperties': False,
}


def parse_rules(lines: Iterable[str]) -> List[Rule]:
    """Rules from JSON Lines text; blank lines and ``#`` comments are skipped."""
    rules = []
    for number, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        try:
            data = loads(line)
            jsonschema.validate(data, RULE_SCHEMA)
        except ValidationException as e:
            raise RuleException(f"line {number}: {e.message}")
        except jsonschema.ValidationError as e:
            raise RuleException(f"line {number}: {e.message}")
        rules.append(Rule.from_dict(data))
    return rules


def load_rules(path: Union[str, Path]) -> List[Rule]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return parse_rules(f)
    except OSError as e:
        raise RuleException(f"Cannot read rule file {path}: {e}")


def match_pattern(pattern: Sequence[str], fact: Fact, bindings: Bindings) -> Optional[Bindings]:
    out = bindings
    for term, value in zip(pattern, fact):
        if is_variable(term):
            bound = out.get(term)
            if bound is None:
                if out is bindings:
                    out = dict(bindings)
                out[term] = value
            elif bound != value:
                return None
        elif term != value:
            return None
    return out


def substitute(pattern: Sequence[str], bindings: Bindings) -> Fact:
    return tuple(bindings.get(term, term) if is_variable(term) else term for term in pattern)


@dataclass
class Derivation:
    fact: Fact
    confidence: float
    depth: int = 0
    rule_id: Optional[str] = None
    premises: List[Fact] = field(default_factory=list)


class _FactIndex:
    def __init__(self):
        self.by_predicate: Dict[str, List[Fact]] = {}
        self.all: List[Fact] = []

    def add(self, fact: Fact):
        self.by_predicate.setdefault(fact[1], []).append(fact)
        self.all.append(fact)

    def candidates(self, pattern: Sequence[str]) -> List[Fact]:
        if is_variable(pattern[1]):
            return self.all
        return self.by_predicate.get(pattern[1], [])


def _join(premises: Sequence[TriplePattern], delta_position: int, delta: _FactIndex,
          known: _FactIndex) -> Iterator[Tuple[Bindings, List[Fact]]]:
    def walk(i: int, bindings: Bindings, used: List[Fact]):
        if i == len(premises):
            yield bindings, used
            return
        source = delta if i == delta_position else known
        for fact in source.candidates(premises[i]):
            extended = match_pattern(premises[i], fact, bindings)
            if extended is not None:
                yield from walk(i + 1, extended, used + [fact])

    yield from walk(0, {}, [])


def forward_chain(facts: Dict[Fact, float], rules: Sequence[Rule], max_depth: int) -> Dict[Fact, Derivation]:
    """Semi-naive saturation; a fact derived at depth d uses a premise derived at d - 1."""
    known: Dict[Fact, Derivation] = {f: Derivation(f, c) for f, c in sorted(facts.items())}
    known_index = _FactIndex()
    for fact in known:
        known_index.add(fact)
    delta_index = known_index

    for depth in range(1, max_depth + 1):
        fresh: Dict[Fact, Derivation] = {}
        for rule in rules:
            for position in range(len(rule.premises)):
                for bindings, used in _join(rule.premises, position, delta_index, known_index):
                    conclusion = substitute(rule.conclusion, bindings)
                    if conclusion in known:
                        continue
                    confidence = rule.confidence * math.prod(known[f].confidence for f in used)
                    current = fresh.get(conclusion)
                    if current is None or confidence > current.confidence:
                        fresh[conclusion] = Derivation(conclusion, confidence, depth, rule.id, list(used))
        if not fresh:
            break
        delta_index = _FactIndex()
        for fact in sorted(fresh):
            known[fact] = fresh[fact]
            known_index.add(fact)
            delta_index.add(fact)
    return known


def answer_bindings(goal: TriplePattern, known: Iterable[Fact]) -> List[Bindings]:
    variables = sorted({t for t in goal if is_variable(t)})
    seen: Set[Tuple[str, ...]] = set()
    answers = []
    for fact in sorted(known):
        bindings = match_pattern(goal, fact, {})
        if bindings is None:
            continue
        row = tuple(bindings[v] for v in variables)
        if row not in seen:
            seen.add(row)
            answers.append({v: bindings[v] for v in variables})
    answers.sort(key=lambda b: tuple(b[v] for v in variables))
    return answers


def derivation_tree(fact: Fact, known: Dict[Fact, Derivation]) -> Dict[str, Any]:
    node = known[fact]
    return {
        'triple': list(fact),
        'confidence': node.confidence,
        'rule': node.rule_id,
        'premises': [derivation_tree(p, known) for p in node.premises],
    }


def goal_text(goal: TriplePattern) -> str:
    return " ".join('?' if is_variable(t) else t for t in goal)


def _answer_key(answer: List[Bindings]) -> List[Tuple[Tuple[str, str], ...]]:
    return sorted(tuple(sorted(b.items())) for b in answer)


class CaseBase:
    """Previously solved goals, searchable by embedded goal text."""

    PARTITION = CASES

    def __init__(self, knowledge: KnowledgeLayer, dim: int = DEFAULT_DIM):
        self.knowledge = knowledge
        self.dim = dim
        self._index: Optional[ExactVectorIndex] = None
        self._cases: Dict[str, Dict[str, Any]] = {}
        self._generation = -1

    def _load(self):
        """Read the case partition once per knowledge index generation."""
        if self._index is not None and self._generation == self.knowledge.generation:
            return
        self._cases = {}
        self._generation = self.knowledge.generation
        index = ExactVectorIndex(self.dim)
        for cell in self.knowledge.store.scan_partition(self.knowledge.pk(self.PARTITION)):
            case = loads(cell.value)
            key = cell.clustering.decode('utf-8')
            self._cases[key] = case
            index.add(key, test_embed(case['text'], self.dim))
        self._index = index

    def __len__(self) -> int:
        with self.knowledge.lock:
            self._load()
            return len(self._cases)

    def record(self, goal: TriplePattern, answer: List[Bindings]):
        text = goal_text(goal)
        try:
            vector = test_embed(text, self.dim)
        except ValidationException:
            return
        key = canonical_json(list(goal)).decode('utf-8')
        case = {'goal': list(goal), 'text': text, 'answer': answer}
        with self.knowledge.lock:
            self._load()
            self.knowledge.store.put(self.knowledge.pk(self.PARTITION),
                                     Cell(key.encode('utf-8'), 'case', canonical_json(case),
                                          self.knowledge.clock.now_us()))
            self._cases[key] = case
            self._index.add(key, vector)

    def suggest(self, goal: TriplePattern) -> Optional[Suggestion]:
        try:
            vector = test_embed(goal_text(goal), self.dim)
        except ValidationException:
            return None
        with self.knowledge.lock:
            self._load()
            if not self._cases:
                return None
            hits = self._index.search(vector, 1)
        if not hits or hits[0].score <= 0.0:
            return None
        case = self._cases[hits[0].id]
        return Suggestion(answer=[dict(b) for b in case['answer']],
                          confidence=min(1.0, hits[0].score),
                          case_goal=as_pattern(case['goal']))


class Reasoner:
    def __init__(self, knowledge: KnowledgeLayer, reflector: Reflector,
                 config: Optional[CognitionConfig] = None, case_base: Optional[CaseBase] = None):
        self.knowledge = knowledge
        self.reflector = reflector
        self.config = config or CognitionConfig()
        self.case_base = case_base or CaseBase(knowledge)

    def heuristic_suggest(self, goal: Sequence[str]) -> Optional[Suggestion]:
        return self.case_base.suggest(as_pattern(goal))

    def _deduce(self, goal: TriplePattern, rules: List[Rule], max_depth: int):
        facts: Dict[Fact, float] = {}
        for triple in self.knowledge.query_triples():
            facts[triple.spo] = max(facts.get(triple.spo, 0.0), triple.confidence)
        known = forward_chain(facts, rules, max_depth)
        return known, answer_bindings(goal, known)

    def attempt_order(self) -> List[Strategy]:
        """Strategies by descending reflection weight; ties go to deduction."""
        weights = self.reflector.weights().weights
        names = sorted(weights, key=lambda name: (-weights[name], name))
        return [Strategy(name) for name in names]

    def reason(self, goal: Sequence[str], rules: Sequence[Rule],
               max_depth: Optional[int] = None) -> ProofResult:
        """Try both strategies in weight order. A deductive answer always wins over a suggestion."""
        goal = as_pattern(goal)
        rules = list(rules)
        for rule in rules:
            rule.validate()
        max_depth = max_depth or self.config.reason_max_depth

        result = ProofResult()
        suggestion: Optional[Suggestion] = None
        known: Dict[Fact, Derivation] = {}
        deduced: List[Bindings] = []
        for strategy in self.attempt_order():
            result.attempts.append(strategy)
            if strategy is Strategy.HEURISTIC:
                suggestion = self.case_base.suggest(goal)
            else:
                known, deduced = self._deduce(goal, rules, max_depth)
        log.debug("Reasoning", goal=list(goal), rules=len(rules),
                  attempts=[s.value for s in result.attempts])

        if deduced:
            result.answer = deduced
            result.strategy = Strategy.DEDUCTIVE
            answered = [substitute(goal, b) for b in deduced]
            result.trace = [derivation_tree(f, known) for f in answered]
            result.confidence = max(known[f].confidence for f in answered)
            result.derived = self._reinforce_derivations(known)
            self.case_base.record(goal, deduced)
            if suggestion is not None:
                agrees = _answer_key(suggestion.answer) == _answer_key(deduced)
                result.conflict_logged = not agrees
                self.reflector.reflect(TaskOutcome(goal_text(goal), Strategy.HEURISTIC.value, agrees))
                if not agrees:
                    log.info("Heuristic conflicts with deduction", goal=list(goal),
                             heuristic=suggestion.answer, deductive=deduced)
        elif suggestion is not None and suggestion.answer:
            result.answer = suggestion.answer
            result.strategy = Strategy.HEURISTIC
            result.confidence = suggestion.confidence * self.config.heuristic_confidence
            result.trace = [{'case': list(suggestion.case_goal), 'similarity': suggestion.confidence}]
        return result

    def _reinforce_derivations(self, known: Dict[Fact, Derivation]) -> List[Triple]:
        """Store every derived fact as a triple carrying its derivation confidence."""
        asserted = []
        for fact, node in sorted(known.items()):
            if node.rule_id is None:
                continue
            triple = Triple(fact[0], fact[1], fact[2], confidence=node.confidence,
                            provenance=[f"rule:{node.rule_id}"])
            asserted.append(self.knowledge.assert_triple(triple))
        return asserted
