"""
Triple model and the in-memory SPO / POS / OSP pattern indexes.
"""

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Set, Tuple

from ..core.exceptions import ValidationException
from .records import u64be

LITERAL_PREFIX = "lit:"
ENTITY_PREFIX = "ent:"
LINK_PREDICATE = "mentionedIn"

Pattern = Tuple[Optional[str], Optional[str], Optional[str]]
TripleKey = Tuple[str, str, str, int]


def is_literal(term: str) -> bool:
    return term.startswith(LITERAL_PREFIX)


@dataclass
class Triple:
    subject: str
    predicate: str
    object: str
    confidence: float = 1.0
    asserted_at: int = 0
    retracted_at: Optional[int] = None
    source_record: Optional[str] = None
    provenance: List[str] = field(default_factory=list)

    @property
    def key(self) -> TripleKey:
        return (self.subject, self.predicate, self.object, self.asserted_at)

    @property
    def spo(self) -> Tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)

    @property
    def live(self) -> bool:
        return self.retracted_at is None

    def live_at(self, as_of: Optional[int]) -> bool:
        if as_of is None:
            return self.live
        if self.asserted_at > as_of:
            return False
        return self.retracted_at is None or self.retracted_at > as_of

    def validate(self):
        if not self.subject or not self.predicate or not self.object:
            raise ValidationException("triple terms must be non-empty")
        if not (0.0 < self.confidence <= 1.0):
            raise ValidationException("triple confidence must lie in (0, 1]")
        if self.retracted_at is not None and self.retracted_at <= self.asserted_at:
            raise ValidationException("retracted_at must be later than asserted_at")

    def copy(self, **changes) -> 'Triple':
        changes.setdefault('provenance', list(self.provenance))
        return replace(self, **changes)

    def clustering(self) -> bytes:
        return (self.subject.encode('utf-8') + b'\x00' + self.predicate.encode('utf-8') + b'\x00'
                + self.object.encode('utf-8') + b'\x00' + u64be(self.asserted_at))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'subject': self.subject,
            'predicate': self.predicate,
            'object': self.object,
            'confidence': self.confidence,
            'asserted_at': self.asserted_at,
            'retracted_at': self.retracted_at,
            'source_record': self.source_record,
            'provenance': list(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Triple':
        try:
            return cls(
                subject=data['subject'],
                predicate=data['predicate'],
                object=data['object'],
                confidence=float(data.get('confidence', 1.0)),
                asserted_at=int(data.get('asserted_at') or 0),
                retracted_at=data.get('retracted_at'),
                source_record=data.get('source_record'),
                provenance=list(data.get('provenance') or []),
            )
        except KeyError as e:
            raise ValidationException(f"triple is missing field {e}")


class TripleIndex:
    """Three nested-dict permutation indexes over the same triple set."""

    ORDERS = {
        'spo': (0, 1, 2),
        'pos': (1, 2, 0),
        'osp': (2, 0, 1),
    }

    def __init__(self):
        self._triples: Dict[TripleKey, Triple] = {}
        self._indexes: Dict[str, Dict[str, Dict[str, Dict[str, Set[int]]]]] = {
            name: {} for name in self.ORDERS
        }
        self._live: Dict[Tuple[str, str, str], TripleKey] = {}

    def __len__(self) -> int:
        return len(self._triples)

    def get(self, key: TripleKey) -> Optional[Triple]:
        return self._triples.get(key)

    def put(self, triple: Triple):
        """Insert or replace a triple (same key)."""
        key = triple.key
        if key not in self._triples:
            terms = triple.spo
            for name, order in self.ORDERS.items():
                a, b, c = (terms[i] for i in order)
                self._indexes[name].setdefault(a, {}).setdefault(b, {}).setdefault(c, set()).add(key[3])
        self._triples[key] = triple
        if triple.live:
            self._live[triple.spo] = key
        elif self._live.get(triple.spo) == key:
            del self._live[triple.spo]

    def live_match(self, subject: str, predicate: str, obj: str) -> Optional[Triple]:
        key = self._live.get((subject, predicate, obj))
        return self._triples[key] if key is not None else None

    @staticmethod
    def choose_index(pattern: Pattern) -> str:
        s, p, o = pattern
        if s is not None and p is None and o is not None:
            return 'osp'
        if s is not None:
            return 'spo'
        if p is not None:
            return 'pos'
        if o is not None:
            return 'osp'
        return 'spo'

    def candidates(self, pattern: Pattern, index: Optional[str] = None) -> Iterator[Triple]:
        """Triples matching the bound positions, walked through one index."""
        name = index or self.choose_index(pattern)
        if name not in self.ORDERS:
            raise ValidationException(f"Unknown index {name!r}")
        order = self.ORDERS[name]
        bound = [pattern[i] for i in order]

        def level(mapping: Dict, value: Optional[str]):
            if value is None:
                return list(mapping.items())
            child = mapping.get(value)
            return [(value, child)] if child is not None else []

        for a, second in level(self._indexes[name], bound[0]):
            for b, third in level(second, bound[1]):
                for c, stamps in level(third, bound[2]):
                    terms = [None, None, None]
                    terms[order[0]], terms[order[1]], terms[order[2]] = a, b, c
                    for stamp in list(stamps):
                        yield self._triples[(terms[0], terms[1], terms[2], stamp)]

    def match(self, pattern: Pattern, as_of: Optional[int] = None,
              index: Optional[str] = None) -> List[Triple]:
        found = [t for t in self.candidates(pattern, index) if t.live_at(as_of)]
        found.sort(key=lambda t: t.key)
        return found

    def all(self) -> List[Triple]:
        return sorted(self._triples.values(), key=lambda t: t.key)

    def out_neighbors(self, entity: str) -> Set[str]:
        found = set()
        for t in self.candidates((entity, None, None), 'spo'):
            if t.live and not is_literal(t.object):
                found.add(t.object)
        return found

    def in_neighbors(self, entity: str) -> Set[str]:
        found = set()
        for t in self.candidates((None, None, entity), 'osp'):
            if t.live:
                found.add(t.subject)
        return found

    def bfs(self, entity: str, max_depth: int, direction: str = 'both') -> Dict[str, int]:
        """Hop distances over live triples; literals are never nodes."""
        distances = {entity: 0}
        frontier = deque([entity])
        while frontier:
            node = frontier.popleft()
            depth = distances[node]
            if depth >= max_depth:
                continue
            nexts: Set[str] = set()
            if direction in ('out', 'both'):
                nexts |= self.out_neighbors(node)
            if direction in ('in', 'both'):
                nexts |= self.in_neighbors(node)
            for nxt in sorted(nexts):
                if nxt not in distances:
                    distances[nxt] = depth + 1
                    frontier.append(nxt)
        return distances
