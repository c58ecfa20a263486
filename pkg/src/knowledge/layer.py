"""
Knowledge layer: records, triples, vectors and facts of one namespace, persisted on the store.

Partition layout inside a namespace::

    meta              b"ns"                      dim
    rec:<id>          b"v" + u64be(version)      body     (immutable, one per version)
    rec:<id>          b"s"                       state    (tier, salience, counters)
    timeline          u64be(created_at) + id     ref
    stream:<name>     u64be(created_at) + id     label, episode (optional)
    triples           s \\0 p \\0 o \\0 u64be(asserted_at)   t
    facts             key                        v
    cases             canonical goal             case
"""

import threading
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from ..core.config import KnowledgeConfig
from ..core.exceptions import (
    CapabilityDisabledException,
    DimensionMismatchException,
    NotFoundException,
    ValidationException,
    VersionConflictException,
)
from ..core.logger import StructuredLogger
from ..storage.store import Store
from ..storage.types import Cell, PartitionKey
from ..utils.clock import Clock, SystemClock
from ..utils.ids import IdFactory
from ..utils.serialization import b64decode, b64encode, canonical_json, loads
from .facts import Fact, FactTable
from .records import (
    STATE_CLUSTERING,
    MemoryRecord,
    Modality,
    Tier,
    canonical_content,
    normalize_embedding,
    u64be,
    validate_record,
    version_clustering,
)
from .triples import LINK_PREDICATE, Pattern, Triple, TripleIndex
from .vectors import ExactVectorIndex, ScoredId, SmallWorldIndex

log = StructuredLogger(__name__)

META = "meta"
TRIPLES = "triples"
FACTS = "facts"
CASES = "cases"
TIMELINE = "timeline"
RECORD_PREFIX = "rec:"
STREAM_PREFIX = "stream:"
MAX_NEIGHBOR_DEPTH = 8


def record_entity(record_id: str) -> str:
    return RECORD_PREFIX + record_id


def stream_entity(stream_id: str) -> str:
    return STREAM_PREFIX + stream_id


class KnowledgeLayer:
    """Fused triple / vector / fact representation over one namespace."""

    def __init__(self, store: Store, namespace: str, config: Optional[KnowledgeConfig] = None,
                 clock: Optional[Clock] = None, id_factory: Optional[Callable[[], str]] = None,
                 dim: Optional[int] = None, lock: Optional[threading.RLock] = None):
        self.store = store
        self.namespace = namespace
        self.config = config or KnowledgeConfig()
        self.clock = clock or store.clock or SystemClock()
        self.id_factory = id_factory or IdFactory()
        self._lock = lock or threading.RLock()
        self.dim = self._load_meta(dim)
        self._records: Dict[str, MemoryRecord] = {}
        self._triples = TripleIndex()
        self._facts = FactTable()
        self._exact = ExactVectorIndex(self.dim)
        self._approx: Optional[SmallWorldIndex] = None
        self.generation = 0
        self.rebuild_indexes()

    def pk(self, entity: str) -> PartitionKey:
        return PartitionKey(self.namespace, entity)

    @property
    def lock(self) -> threading.RLock:
        return self._lock

    @property
    def graph_enabled(self) -> bool:
        return self.config.graph_enabled

    def _load_meta(self, dim: Optional[int]) -> int:
        cell = self.store.get(self.pk(META), b'ns', 'dim')
        if cell is not None:
            stored = loads(cell.value)['dim']
            if dim is not None and dim != stored:
                raise DimensionMismatchException(
                    f"Namespace {self.namespace} has dimension {stored}, requested {dim}",
                    {'namespace': self.namespace, 'expected': stored})
            return stored
        chosen = dim or self.config.default_dim
        self.store.put(self.pk(META), Cell(b'ns', 'dim', canonical_json({'dim': chosen}),
                                           self.clock.now_us()))
        return chosen

    # Index maintenance

    def rebuild_indexes(self):
        """Rebuild every in-memory index from storage and swap them in."""
        bodies: Dict[str, Dict[int, Dict[str, Any]]] = {}
        states: Dict[str, Dict[str, Any]] = {}
        triples = TripleIndex()
        facts = FactTable()
        for partition, cell in self.store.iter_visible(self.namespace):
            entity = partition.entity
            if entity.startswith(RECORD_PREFIX):
                record_id = entity[len(RECORD_PREFIX):]
                if cell.clustering == STATE_CLUSTERING:
                    states[record_id] = loads(cell.value)
                elif cell.column == 'body':
                    body = loads(cell.value)
                    bodies.setdefault(record_id, {})[body['version']] = body
            elif entity == TRIPLES:
                triples.put(Triple.from_dict(loads(cell.value)))
            elif entity == FACTS:
                facts.put(Fact(cell.clustering.decode('utf-8'), cell.value, cell.timestamp))

        records = {}
        for record_id, state in states.items():
            body = bodies.get(record_id, {}).get(state['version'])
            if body is None:
                log.warning("Record state without body", namespace=self.namespace, record_id=record_id)
                continue
            records[record_id] = MemoryRecord.from_parts(self.namespace, body, state)

        exact = ExactVectorIndex(self.dim)
        for record_id in sorted(records):
            record = records[record_id]
            if record.embedding is not None and record.tier is not Tier.ARCHIVED:
                exact.add(record_id, record.embedding)

        with self._lock:
            self._records = records
            self._triples = triples
            self._facts = facts
            self._exact = exact
            self._approx = None
            self.generation += 1
        log.debug("Indexes rebuilt", namespace=self.namespace, records=len(records),
                  triples=len(triples), facts=len(facts))

    def _index_vector(self, record: MemoryRecord):
        if record.embedding is None or record.tier is Tier.ARCHIVED:
            self._exact.remove(record.id)
            if self._approx is not None:
                self._approx.remove(record.id)
            return
        self._exact.add(record.id, record.embedding)
        if self._approx is not None:
            self._approx.add(record.id, record.embedding)

    def _approx_index(self) -> SmallWorldIndex:
        if self._approx is None:
            h = self.config.hnsw
            index = SmallWorldIndex(self.dim, h.m, h.ef_construction, h.ef_search, h.seed)
            for record_id in sorted(self._records):
                record = self._records[record_id]
                if record.embedding is not None and record.tier is not Tier.ARCHIVED:
                    index.add(record_id, record.embedding)
            self._approx = index
        return self._approx

    # Records

    def upsert_record(self, record: MemoryRecord) -> Tuple[str, int]:
        """Create a record (version 1) or add the next version of an existing one."""
        record = record.copy(modality=Modality(record.modality), tier=Tier(record.tier))
        validate_record(record)
        embedding = normalize_embedding(record.embedding, self.dim)
        try:
            content = canonical_content(record.modality, bytes(record.content))
        except ValidationException as e:
            raise ValidationException(f"structured content must be JSON: {e.message}")

        with self._lock:
            now = self.clock.now_us()
            record_id = record.id or self.id_factory()
            current = self._records.get(record_id)
            if current is None:
                if record.version != 1 or record.supersedes is not None:
                    raise VersionConflictException(
                        f"Record {record_id} does not exist; first version must be 1",
                        current_version=0, details={'id': record_id})
                stored = record.copy(
                    id=record_id, namespace=self.namespace, content=content, embedding=embedding,
                    created_at=record.created_at or now,
                    last_access=record.last_access or record.created_at or now)
            else:
                expected = (record_id, current.version)
                if record.version != current.version + 1 or tuple(record.supersedes or ()) != expected:
                    raise VersionConflictException(
                        f"Record {record_id} is at version {current.version}",
                        current_version=current.version, details={'id': record_id})
                stored = current.copy(
                    content=content, embedding=embedding, version=record.version,
                    supersedes=expected, provenance=list(record.provenance),
                    salience=record.salience, modality=record.modality)

            partition = self.pk(record_entity(record_id))
            self.store.put(partition, Cell(version_clustering(stored.version), 'body',
                                           canonical_json(stored.body()), now))
            self.store.put(partition, Cell(STATE_CLUSTERING, 'state', canonical_json(stored.state()), now))
            if current is None:
                self._write_time_indexes(stored, now)
            self._records[record_id] = stored
            self._index_vector(stored)

        log.debug("Record upserted", namespace=self.namespace, record_id=record_id,
                  version=stored.version, modality=stored.modality.value)
        return record_id, stored.version

    def _write_time_indexes(self, record: MemoryRecord, now: int):
        clustering = u64be(record.created_at) + record.id.encode('ascii')
        self.store.put(self.pk(TIMELINE), Cell(clustering, 'ref', record.id.encode('ascii'), now))
        if record.modality is Modality.EVENT:
            content = record.json_content()
            if isinstance(content, dict) and content.get('stream') and content.get('label'):
                stream = self.pk(stream_entity(str(content['stream'])))
                self.store.put(stream, Cell(clustering, 'label', str(content['label']).encode('utf-8'), now))
                if content.get('episode') is not None:
                    self.store.put(stream, Cell(clustering, 'episode',
                                                str(content['episode']).encode('utf-8'), now))

    def get_record(self, record_id: str, version: Optional[int] = None) -> Optional[MemoryRecord]:
        """Newest non-archived version (counting the access), or an explicit version."""
        if version is not None:
            return self._read_version(record_id, version)
        with self._lock:
            current = self._records.get(record_id)
            if current is None or current.tier is Tier.ARCHIVED:
                return None
            now = self.clock.now_us()
            return self.update_state(record_id, access_count=current.access_count + 1,
                                     last_access=max(now, current.last_access))

    def _read_version(self, record_id: str, version: int) -> Optional[MemoryRecord]:
        cell = self.store.get(self.pk(record_entity(record_id)), version_clustering(version), 'body')
        if cell is None:
            return None
        with self._lock:
            current = self._records.get(record_id)
        state = current.state() if current is not None else {}
        return MemoryRecord.from_parts(self.namespace, loads(cell.value), state)

    def peek_record(self, record_id: str) -> Optional[MemoryRecord]:
        """Current version in any tier, without counting an access."""
        with self._lock:
            current = self._records.get(record_id)
            return current.copy() if current is not None else None

    def update_state(self, record_id: str, **changes) -> MemoryRecord:
        """Persist mutable bookkeeping (tier, salience, counters) without a new version."""
        allowed = {'tier', 'salience', 'access_count', 'last_access', 'promoted_at', 'ladder_ticks'}
        unknown = set(changes) - allowed
        if unknown:
            raise ValidationException(f"Not mutable in place: {sorted(unknown)}")
        with self._lock:
            current = self._records.get(record_id)
            if current is None:
                raise NotFoundException(f"Unknown record {record_id}", {'id': record_id})
            if 'tier' in changes:
                changes['tier'] = Tier(changes['tier'])
            updated = current.copy(**changes)
            validate_record(updated)
            self.store.put(self.pk(record_entity(record_id)),
                           Cell(STATE_CLUSTERING, 'state', canonical_json(updated.state()),
                                self.clock.now_us()))
            self._records[record_id] = updated
            if updated.tier is not current.tier:
                self._index_vector(updated)
            return updated.copy()

    def list_records(self, include_archived: bool = False) -> List[MemoryRecord]:
        with self._lock:
            return [r.copy() for _, r in sorted(self._records.items())
                    if include_archived or r.tier is not Tier.ARCHIVED]

    def record_versions(self, record_id: str) -> List[int]:
        cells = self.store.range_scan(self.pk(record_entity(record_id)), b'v', b'v' + b'\xff' * 8)
        return [int.from_bytes(c.clustering[1:], 'big') for c in cells if c.column == 'body']

    def timeline(self, t_lo: int, t_hi: int) -> List[str]:
        """Ids of records created within [t_lo, t_hi], oldest first."""
        if t_lo > t_hi:
            return []
        cells = self.store.range_scan(self.pk(TIMELINE), u64be(max(t_lo, 0)), u64be(t_hi) + b'\xff')
        return [c.value.decode('ascii') for c in cells]

    def stream_labels(self, stream_id: str) -> List[Tuple[str, str]]:
        """(record id, label) of a stream's events in time order."""
        return [(record_id, label) for record_id, label, _ in self.stream_events(stream_id)]

    def stream_events(self, stream_id: str) -> List[Tuple[str, str, Optional[str]]]:
        """(record id, label, episode) of a stream's events in time order."""
        rows: Dict[bytes, Dict[str, str]] = {}
        for cell in self.store.scan_partition(self.pk(stream_entity(stream_id))):
            rows.setdefault(cell.clustering, {})[cell.column] = cell.value.decode('utf-8')
        return [(clustering[8:].decode('ascii'), row['label'], row.get('episode'))
                for clustering, row in rows.items() if 'label' in row]

    def is_empty(self) -> bool:
        with self._lock:
            return not self._records and not len(self._triples) and not len(self._facts)

    # Vectors

    def knn(self, query: Sequence[float], k: int, mode: Optional[str] = None) -> List[ScoredId]:
        """Top-k cosine neighbors among non-archived embedded records."""
        mode = mode or self.config.knn_mode
        if k < 1:
            raise ValidationException("k must be at least 1")
        with self._lock:
            if mode == 'exact':
                return self._exact.search(query, k)
            if mode == 'approx':
                return self._approx_index().search(query, k)
        raise ValidationException(f"Unknown knn mode {mode!r}")

    def similarity_scores(self, query: Sequence[float]) -> Dict[str, float]:
        with self._lock:
            return self._exact.scores(query)

    # Triples

    def _require_graph(self):
        if not self.config.graph_enabled:
            raise CapabilityDisabledException("The graph layer is disabled for this engine")

    def assert_triple(self, triple: Triple) -> Triple:
        """Assert a triple; a live identical (s, p, o) makes this a no-op."""
        self._require_graph()
        with self._lock:
            if not triple.asserted_at:
                triple = triple.copy(asserted_at=self.clock.now_us())
            if triple.retracted_at is not None:
                raise ValidationException("assert_triple takes live triples only")
            triple.validate()
            existing = self._triples.get(triple.key) or self._triples.live_match(*triple.spo)
            if existing is not None and existing.live:
                return existing.copy()
            if existing is not None:
                raise ValidationException("a retracted triple with this key already exists")
            self._write_triple(triple)
        log.debug("Triple asserted", namespace=self.namespace, subject=triple.subject,
                  predicate=triple.predicate, object=triple.object)
        return triple.copy()

    def _write_triple(self, triple: Triple):
        self.store.put(self.pk(TRIPLES), Cell(triple.clustering(), 't', canonical_json(triple.to_dict()),
                                              self.clock.now_us()))
        self._triples.put(triple)

    def retract_triple(self, subject: str, predicate: str, obj: str, at: Optional[int] = None) -> bool:
        """Timestamp the live triple as retracted. Returns False when it was not live."""
        self._require_graph()
        with self._lock:
            live = self._triples.live_match(subject, predicate, obj)
            if live is None:
                log.debug("Retract on non-live triple", subject=subject, predicate=predicate, object=obj)
                return False
            if at is None:
                at = max(self.clock.now_us(), live.asserted_at + 1)
            elif at <= live.asserted_at:
                raise ValidationException("retraction must be later than the assertion")
            self._write_triple(live.copy(retracted_at=at))
        return True

    def set_triple_confidence(self, triple: Triple, confidence: float) -> Triple:
        self._require_graph()
        with self._lock:
            current = self._triples.get(triple.key)
            if current is None:
                raise NotFoundException("Unknown triple", {'subject': triple.subject})
            updated = current.copy(confidence=confidence)
            updated.validate()
            self._write_triple(updated)
            return updated.copy()

    def query_triples(self, subject: Optional[str] = None, predicate: Optional[str] = None,
                      obj: Optional[str] = None, as_of: Optional[int] = None,
                      index: Optional[str] = None) -> List[Triple]:
        """Triples live at ``as_of`` matching the bound positions, in (s, p, o) order."""
        self._require_graph()
        pattern: Pattern = (subject, predicate, obj)
        with self._lock:
            return [t.copy() for t in self._triples.match(pattern, as_of, index)]

    def all_triples(self) -> List[Triple]:
        """Every stored triple, retracted ones included."""
        with self._lock:
            return [t.copy() for t in self._triples.all()]

    def neighbors(self, entity: str, max_depth: int = 1, direction: str = 'both') -> Dict[str, int]:
        self._require_graph()
        if not 1 <= max_depth <= MAX_NEIGHBOR_DEPTH:
            raise ValidationException(f"max_depth must lie in [1, {MAX_NEIGHBOR_DEPTH}]")
        if direction not in ('out', 'in', 'both'):
            raise ValidationException(f"Unknown direction {direction!r}")
        with self._lock:
            return self._triples.bfs(entity, max_depth, direction)

    def adjacency(self, entity: str) -> List[str]:
        """Distinct live non-literal neighbors in either direction, sorted."""
        with self._lock:
            return sorted(self._triples.out_neighbors(entity) | self._triples.in_neighbors(entity))

    # Links

    def link_record_entity(self, record_id: str, entity: str) -> Triple:
        with self._lock:
            if record_id not in self._records:
                raise NotFoundException(f"Unknown record {record_id}", {'id': record_id})
        return self.assert_triple(Triple(entity, LINK_PREDICATE, record_id, source_record=record_id))

    def records_of_entity(self, entity: str) -> List[str]:
        return sorted({t.object for t in self.query_triples(entity, LINK_PREDICATE, None)})

    def entities_of_record(self, record_id: str) -> List[str]:
        return sorted({t.subject for t in self.query_triples(None, LINK_PREDICATE, record_id)})

    # Facts

    def put_fact(self, key: str, value: bytes, updated_at: Optional[int] = None) -> Fact:
        if not key:
            raise ValidationException("fact key must be non-empty")
        with self._lock:
            stamp = updated_at if updated_at is not None else self.clock.now_us()
            self.store.put(self.pk(FACTS), Cell(key.encode('utf-8'), 'v', bytes(value), stamp))
            fact = Fact(key, bytes(value), stamp)
            self._facts.put(fact)
            return self._facts.get(key)

    def get_fact(self, key: str) -> Optional[bytes]:
        with self._lock:
            fact = self._facts.get(key)
            return fact.value if fact is not None else None

    def facts_with_prefix(self, prefix: str) -> List[Fact]:
        with self._lock:
            return self._facts.with_prefix(prefix)

    # Export / import

    def export_rows(self) -> Iterator[Dict[str, Any]]:
        """JSON Lines objects: meta, then records, triples, facts and reasoning cases in key order."""
        yield {'kind': 'meta', 'namespace': self.namespace, 'dim': self.dim}
        with self._lock:
            records = sorted(self._records.items())
            triples = self._triples.all()
            facts = self._facts.with_prefix('')
        for record_id, record in records:
            versions = []
            for version in self.record_versions(record_id):
                cell = self.store.get(self.pk(record_entity(record_id)), version_clustering(version), 'body')
                if cell is not None:
                    versions.append(loads(cell.value))
            yield {'kind': 'record', 'id': record_id, 'state': record.state(), 'versions': versions}
        for triple in triples:
            row = triple.to_dict()
            row['kind'] = 'triple'
            yield row
        for fact in facts:
            yield {'kind': 'fact', 'key': fact.key, 'value': b64encode(fact.value),
                   'updated_at': fact.updated_at}
        for cell in self.store.scan_partition(self.pk(CASES)):
            yield {'kind': 'case', 'key': cell.clustering.decode('utf-8'), 'case': loads(cell.value),
                   'updated_at': cell.timestamp}

    def import_rows(self, rows: Iterable[Dict[str, Any]]) -> Dict[str, int]:
        """Write exported rows verbatim, then rebuild the indexes."""
        counts = {'record': 0, 'triple': 0, 'fact': 0, 'case': 0}
        with self._lock:
            now = self.clock.now_us()
            for row in rows:
                kind = row.get('kind')
                if kind == 'meta':
                    if row.get('dim') != self.dim:
                        raise DimensionMismatchException(
                            f"Export has dimension {row.get('dim')}, namespace has {self.dim}")
                elif kind == 'record':
                    self._import_record(row, now)
                elif kind == 'triple':
                    triple = Triple.from_dict(row)
                    triple.validate()
                    self._write_triple(triple)
                elif kind == 'fact':
                    self.store.put(self.pk(FACTS), Cell(row['key'].encode('utf-8'), 'v',
                                                        b64decode(row['value']), int(row['updated_at'])))
                elif kind == 'case':
                    self.store.put(self.pk(CASES), Cell(row['key'].encode('utf-8'), 'case',
                                                        canonical_json(row['case']), int(row['updated_at'])))
                else:
                    raise ValidationException(f"Unknown row kind {kind!r}")
                if kind in counts:
                    counts[kind] += 1
            self.rebuild_indexes()
        log.info("Import finished", namespace=self.namespace, **counts)
        return counts

    def _import_record(self, row: Dict[str, Any], now: int):
        record_id = row['id']
        partition = self.pk(record_entity(record_id))
        versions = sorted(row['versions'], key=lambda b: b['version'])
        if not versions:
            raise ValidationException(f"Record {record_id} has no versions")
        for body in versions:
            normalize_embedding(body.get('embedding'), self.dim)
            self.store.put(partition, Cell(version_clustering(body['version']), 'body',
                                           canonical_json(body), now))
        state = dict(row['state'])
        self.store.put(partition, Cell(STATE_CLUSTERING, 'state', canonical_json(state), now))
        first = MemoryRecord.from_parts(self.namespace, versions[0], state)
        self._write_time_indexes(first, now)

    def stats(self) -> Dict[str, int]:
        with self._lock:
            tiers = {tier.value: 0 for tier in Tier}
            for record in self._records.values():
                tiers[record.tier.value] += 1
            return {
                'records': len(self._records),
                'triples': len(self._triples),
                'live_triples': sum(1 for t in self._triples.all() if t.live),
                'facts': len(self._facts),
                'vectors': len(self._exact),
                **{f"tier_{name}": count for name, count in tiers.items()},
            }
