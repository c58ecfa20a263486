"""
Wire protocol: one JSON object per line in each direction.

Request::

    {"v": 1, "op": "knn", "namespace": "team.a", "payload": {...}, "request_id": "r1", "token": "..."}

Response::

    {"v": 1, "request_id": "r1", "status": "ok", "payload": {...}}
    {"v": 1, "request_id": "r1", "status": "error", "error": {"code": "not_found", "message": "..."}}
"""

from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from ..cognition.types import Cue, UpdateProposal
from ..coordination.coordinator import Stimulus
from ..core.exceptions import (
    AuthenticationException,
    AuthorizationException,
    CapabilityDisabledException,
    ColmaException,
    NotFoundException,
    ProtocolException,
    ValidationException,
    VersionConflictException,
)
from ..knowledge.records import MemoryRecord, Modality
from ..knowledge.triples import Triple
from ..storage.types import Cell, Mutation, MutationBatch, PartitionKey
from ..utils.serialization import b64decode, b64encode

PROTOCOL_VERSION = 1

Json = Union[Dict[str, Any], List[Any], str, int, float, bool, None]


class _Params(BaseModel):
    model_config = ConfigDict(extra='forbid')


class Request(BaseModel):
    v: int
    op: str = Field(..., min_length=1)
    namespace: str = Field(..., min_length=1)
    payload: Dict[str, Any] = Field(default_factory=dict)
    request_id: Optional[Union[str, int]] = None
    token: Optional[str] = None


def _content(text: Optional[str], b64: Optional[str]) -> bytes:
    if b64 is not None:
        return b64decode(b64)
    if text is not None:
        return text.encode('utf-8')
    raise ValidationException("content or content_b64 is required")


class RecordParams(_Params):
    id: Optional[str] = None
    modality: Modality = Modality.TEXT
    content: Optional[str] = None
    content_b64: Optional[str] = None
    embedding: Optional[List[float]] = None
    salience: float = Field(default=0.5, ge=0.0, le=1.0)
    version: int = Field(default=1, ge=1)
    supersedes: Optional[Tuple[str, int]] = None
    provenance: List[str] = Field(default_factory=list)
    created_at: int = Field(default=0, ge=0)

    def to_record(self, namespace: str) -> MemoryRecord:
        return MemoryRecord(
            id=self.id, namespace=namespace, modality=self.modality,
            content=_content(self.content, self.content_b64),
            embedding=tuple(self.embedding) if self.embedding is not None else None,
            created_at=self.created_at, salience=self.salience, version=self.version,
            supersedes=self.supersedes, provenance=list(self.provenance))


class StimulusParams(_Params):
    modality: Modality = Modality.TEXT
    content: Optional[str] = None
    content_b64: Optional[str] = None
    embedding: Optional[List[float]] = None
    salience: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    entities: List[str] = Field(default_factory=list)
    occurred_at: Optional[int] = Field(default=None, ge=0)
    provenance: List[str] = Field(default_factory=list)

    def to_stimulus(self) -> Stimulus:
        return Stimulus(self.modality, _content(self.content, self.content_b64), self.embedding,
                        self.salience, list(self.entities), self.occurred_at, list(self.provenance))


class GetRecordParams(_Params):
    id: str
    version: Optional[int] = Field(default=None, ge=1)


class TripleParams(_Params):
    subject: str = Field(..., min_length=1)
    predicate: str = Field(..., min_length=1)
    object: str = Field(..., min_length=1)
    confidence: float = Field(default=1.0, gt=0.0, le=1.0)
    asserted_at: int = Field(default=0, ge=0)
    source_record: Optional[str] = None
    provenance: List[str] = Field(default_factory=list)

    def to_triple(self) -> Triple:
        return Triple(self.subject, self.predicate, self.object, self.confidence, self.asserted_at,
                      None, self.source_record, list(self.provenance))


class RetractParams(_Params):
    subject: str
    predicate: str
    object: str
    at: Optional[int] = None


class QueryTriplesParams(_Params):
    subject: Optional[str] = None
    predicate: Optional[str] = None
    object: Optional[str] = None
    as_of: Optional[int] = None
    index: Optional[str] = Field(default=None, pattern='^(spo|pos|osp)$')


class NeighborsParams(_Params):
    entity: str
    max_depth: int = Field(default=1, ge=1, le=8)
    direction: str = Field(default='both', pattern='^(out|in|both)$')


class LinkParams(_Params):
    record_id: str
    entity: str


class PutFactParams(_Params):
    key: str = Field(..., min_length=1)
    value: Optional[str] = None
    value_b64: Optional[str] = None


class GetFactParams(_Params):
    key: str


class TimelineParams(_Params):
    t_lo: int
    t_hi: int


class KnnParams(_Params):
    query: List[float]
    k: int = Field(default=10, ge=1)
    mode: Optional[str] = Field(default=None, pattern='^(exact|approx)$')


class CueParams(_Params):
    text_tokens: List[str] = Field(default_factory=list)
    embedding: Optional[List[float]] = None
    entities: List[str] = Field(default_factory=list)
    time_window: Optional[Tuple[int, int]] = None
    slots: List[str] = Field(default_factory=list)
    salience_tags: List[str] = Field(default_factory=list)

    def to_cue(self) -> Cue:
        return Cue(list(self.text_tokens), self.embedding, list(self.entities), self.time_window,
                   list(self.slots), list(self.salience_tags))


class RecallParams(_Params):
    cue: CueParams
    max_rounds: Optional[int] = Field(default=None, ge=1)
    accept_threshold: Optional[float] = Field(default=None, ge=0.0, le=1.0)


class AssociateParams(_Params):
    cue: CueParams
    k: int = Field(default=10, ge=1)


class ReasonParams(_Params):
    goal: Tuple[str, str, str]
    rules: List[Dict[str, Any]] = Field(default_factory=list)
    max_depth: Optional[int] = Field(default=None, ge=1)


class GoalParams(_Params):
    goal: Tuple[str, str, str]


class PredictParams(_Params):
    stream_id: str
    context: List[str] = Field(default_factory=list)
    order: int = 1


class ReflectParams(_Params):
    task_id: str
    strategy: str
    success: bool


class UpdateParams(_Params):
    triple: TripleParams
    evidence: List[str]
    evidence_confidence: float = Field(..., gt=0.0, le=1.0)
    source_record: Optional[str] = None
    max_rounds: Optional[int] = Field(default=None, ge=1)
    accept_q: Optional[float] = Field(default=None, ge=0.0, le=1.0)

    def to_proposal(self) -> UpdateProposal:
        return UpdateProposal(self.triple.to_triple(), list(self.evidence),
                              self.evidence_confidence, self.source_record)


class ReinforceParams(_Params):
    id: str
    delta_salience: float


class TickParams(_Params):
    now: Optional[int] = Field(default=None, ge=0)


class SyncDeltaParams(_Params):
    entity: str = Field(..., min_length=1)
    since_seqno: int = Field(default=0, ge=0)


class ApplyDeltaParams(_Params):
    batch: Dict[str, Any]


class ImportParams(_Params):
    rows: List[Dict[str, Any]]


class EmptyParams(_Params):
    pass


def batch_to_wire(batch: MutationBatch) -> Dict[str, Any]:
    return {
        'namespace': batch.partition.namespace,
        'entity': batch.partition.entity,
        'mutations': [
            {
                'clustering': m.cell.clustering.hex(),
                'column': m.cell.column,
                'value': b64encode(m.cell.value),
                'timestamp': m.cell.timestamp,
                'ttl_s': m.cell.ttl_s,
                'tombstone': m.cell.tombstone,
                'seqno': m.seqno,
            }
            for m in batch.mutations
        ],
    }


def batch_from_wire(data: Dict[str, Any]) -> MutationBatch:
    try:
        partition = PartitionKey(data['namespace'], data['entity'])
        mutations = [
            Mutation(partition,
                     Cell(bytes.fromhex(m['clustering']), m['column'], b64decode(m['value']),
                          int(m['timestamp']), m.get('ttl_s'), bool(m.get('tombstone', False))),
                     int(m['seqno']))
            for m in data['mutations']
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationException(f"Malformed mutation batch: {e}")
    return MutationBatch(partition, mutations)


ERROR_CODES = (
    (AuthenticationException, 'unauthorized'),
    (AuthorizationException, 'forbidden'),
    (NotFoundException, 'not_found'),
    (VersionConflictException, 'version_conflict'),
    (CapabilityDisabledException, 'capability_disabled'),
    (ValidationException, 'bad_request'),
)


def error_code(exc: Exception) -> str:
    if isinstance(exc, ProtocolException):
        return exc.code
    for exc_type, code in ERROR_CODES:
        if isinstance(exc, exc_type):
            return code
    return 'engine_error'


def ok_response(request_id: Any, payload: Json) -> Dict[str, Any]:
    return {'v': PROTOCOL_VERSION, 'request_id': request_id, 'status': 'ok', 'payload': payload}


def error_response(request_id: Any, code: str, message: str,
                   details: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    error: Dict[str, Any] = {'code': code, 'message': message}
    if details:
        error['details'] = details
    return {'v': PROTOCOL_VERSION, 'request_id': request_id, 'status': 'error', 'error': error}


def exception_response(request_id: Any, exc: Exception) -> Dict[str, Any]:
    code = error_code(exc)
    details = None
    if isinstance(exc, VersionConflictException):
        details = {'current_version': exc.current_version}
    message = exc.message if isinstance(exc, ColmaException) else str(exc)
    return error_response(request_id, code, message, details)
