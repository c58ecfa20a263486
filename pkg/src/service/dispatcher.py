"""
Operation dispatch shared by the NDJSON server and in-process callers.
"""

import threading
from typing import Any, Dict, Optional

import orjson
from pydantic import ValidationError

from ..cognition.types import Rule, TaskOutcome
from ..core.exceptions import (
    ColmaException,
    NotFoundException,
    ProtocolException,
    ValidationException,
)
from ..core.logger import StructuredLogger
from ..core.security import ADMIN_OPS, Principal, Role, SecurityManager
from ..engine import MemoryEngine, NamespaceEngine
from ..monitoring.metrics import MetricsCollector
from ..utils.serialization import b64decode, b64encode
from .protocol import (
    PROTOCOL_VERSION,
    ApplyDeltaParams,
    AssociateParams,
    EmptyParams,
    GetFactParams,
    GetRecordParams,
    GoalParams,
    ImportParams,
    Json,
    KnnParams,
    LinkParams,
    NeighborsParams,
    PredictParams,
    PutFactParams,
    QueryTriplesParams,
    ReasonParams,
    RecallParams,
    RecordParams,
    ReflectParams,
    ReinforceParams,
    Request,
    RetractParams,
    StimulusParams,
    SyncDeltaParams,
    TickParams,
    TimelineParams,
    TripleParams,
    UpdateParams,
    batch_from_wire,
    batch_to_wire,
    error_response,
    exception_response,
    ok_response,
)

log = StructuredLogger(__name__)

OPERATIONS = ADMIN_OPS


def _params(model, payload: Dict[str, Any]):
    try:
        return model(**payload)
    except ValidationError as e:
        raise ValidationException(f"Invalid payload: {e.errors(include_url=False)[0]['msg']}",
                                  {'errors': len(e.errors())})


class Dispatcher:
    """Runs one operation against a namespace and returns its JSON-ready result."""

    def __init__(self, engine: MemoryEngine, security: Optional[SecurityManager] = None,
                 metrics: Optional[MetricsCollector] = None):
        self.engine = engine
        self.security = security
        self.metrics = metrics
        self._tick_lock = threading.Lock()

    def call(self, op: str, namespace: str, payload: Optional[Dict[str, Any]] = None,
             principal: Optional[Principal] = None) -> Json:
        """In-process entry point. Raises engine exceptions unchanged.

        ``principal`` is the authorized caller, None for trusted in-process use.
        """
        if op not in OPERATIONS:
            raise ProtocolException(f"Unknown operation {op!r}", code='unknown_op')
        ns = self.engine.namespace(namespace)
        return self._execute(op, ns, payload or {}, principal)

    def _execute(self, op: str, ns: NamespaceEngine, payload: Dict[str, Any],
                 principal: Optional[Principal] = None) -> Json:
        knowledge = ns.knowledge
        cognition = ns.cognition

        # Records
        if op == "put_record":
            params = _params(RecordParams, payload)
            record_id, version = knowledge.upsert_record(params.to_record(ns.name))
            result: Json = {'id': record_id, 'version': version}

        elif op == "encode":
            params = _params(StimulusParams, payload)
            with ns.lock:
                result = ns.coordinator.encode(params.to_stimulus()).to_dict()

        elif op == "get_record":
            params = _params(GetRecordParams, payload)
            record = knowledge.get_record(params.id, params.version)
            if record is None:
                raise NotFoundException(f"Record {params.id} not found", {'id': params.id})
            result = record.to_dict()

        elif op == "timeline":
            params = _params(TimelineParams, payload)
            result = {'ids': knowledge.timeline(params.t_lo, params.t_hi)}

        elif op == "knn":
            params = _params(KnnParams, payload)
            result = {'results': [s.to_dict() for s in knowledge.knn(params.query, params.k, params.mode)]}

        # Triples
        elif op == "assert_triple":
            params = _params(TripleParams, payload)
            result = knowledge.assert_triple(params.to_triple()).to_dict()

        elif op == "retract_triple":
            params = _params(RetractParams, payload)
            result = {'retracted': knowledge.retract_triple(params.subject, params.predicate,
                                                            params.object, params.at)}

        elif op == "query_triples":
            params = _params(QueryTriplesParams, payload)
            triples = knowledge.query_triples(params.subject, params.predicate, params.object,
                                              params.as_of, params.index)
            result = {'triples': [t.to_dict() for t in triples]}

        elif op == "neighbors":
            params = _params(NeighborsParams, payload)
            distances = knowledge.neighbors(params.entity, params.max_depth, params.direction)
            result = {'distances': dict(sorted(distances.items()))}

        elif op == "link_record_entity":
            params = _params(LinkParams, payload)
            result = knowledge.link_record_entity(params.record_id, params.entity).to_dict()

        # Facts
        elif op == "put_fact":
            params = _params(PutFactParams, payload)
            if params.value_b64 is not None:
                value = b64decode(params.value_b64)
            elif params.value is not None:
                value = params.value.encode('utf-8')
            else:
                raise ValidationException("value or value_b64 is required")
            fact = knowledge.put_fact(params.key, value)
            result = {'key': fact.key, 'value_b64': b64encode(fact.value), 'updated_at': fact.updated_at}

        elif op == "get_fact":
            params = _params(GetFactParams, payload)
            value = knowledge.get_fact(params.key)
            if value is None:
                raise NotFoundException(f"Fact {params.key} not found", {'key': params.key})
            result = {'key': params.key, 'value_b64': b64encode(value)}

        # Cognition
        elif op == "recall":
            params = _params(RecallParams, payload)
            result = cognition.recall(params.cue.to_cue(), params.max_rounds,
                                      params.accept_threshold).to_dict()

        elif op == "associate":
            params = _params(AssociateParams, payload)
            result = {'results': [s.to_dict() for s in cognition.associate(params.cue.to_cue(), params.k)]}

        elif op == "reason":
            params = _params(ReasonParams, payload)
            rules = [Rule.from_dict(r) for r in params.rules]
            with ns.lock:
                result = cognition.reason(params.goal, rules, params.max_depth).to_dict()

        elif op == "heuristic_suggest":
            params = _params(GoalParams, payload)
            suggestion = cognition.heuristic_suggest(params.goal)
            result = None if suggestion is None else {
                'answer': [dict(sorted(b.items())) for b in suggestion.answer],
                'confidence': suggestion.confidence,
                'case_goal': list(suggestion.case_goal),
            }

        elif op == "predict":
            params = _params(PredictParams, payload)
            prediction = cognition.predict(params.stream_id, params.context, params.order)
            result = prediction.to_dict() if prediction is not None else None

        elif op == "reflect":
            params = _params(ReflectParams, payload)
            outcome = TaskOutcome(params.task_id, params.strategy, params.success)
            result = cognition.reflect(outcome).to_dict()

        elif op == "update_memory":
            params = _params(UpdateParams, payload)
            result = cognition.update_memory(params.to_proposal(), params.max_rounds,
                                             params.accept_q).to_dict()

        # Coordination
        elif op == "reinforce":
            params = _params(ReinforceParams, payload)
            with ns.lock:
                result = ns.coordinator.reinforce(params.id, params.delta_salience).to_dict()

        elif op == "consolidate_tick":
            params = _params(TickParams, payload)
            with self._tick_lock, ns.lock:
                report = ns.coordinator.consolidate_tick(params.now)
            if self.metrics is not None:
                self.metrics.record_tick('consolidate', len(report.promoted), len(report.archived))
            result = report.to_dict()

        elif op == "forget_tick":
            params = _params(TickParams, payload)
            with self._tick_lock, ns.lock:
                archived = ns.coordinator.forget_tick(params.now)
            if self.metrics is not None:
                self.metrics.record_tick('forget', 0, len(archived))
            result = {'archived': archived}

        # Replication
        elif op == "sync_delta":
            params = _params(SyncDeltaParams, payload)
            batch = self.engine.store.sync_delta(knowledge.pk(params.entity), params.since_seqno)
            result = batch_to_wire(batch)

        elif op == "apply_delta":
            params = _params(ApplyDeltaParams, payload)
            batch = batch_from_wire(params.batch)
            if batch.partition.namespace != ns.name:
                raise ValidationException("batch partition belongs to another namespace")
            with ns.lock:
                seqno = self.engine.store.apply_delta(batch)
                knowledge.rebuild_indexes()
            result = {'seqno': seqno, 'applied': len(batch)}

        # Maintenance
        elif op == "stats":
            _params(EmptyParams, payload)
            result = {'namespace': knowledge.stats()}
            # store-wide counters span every tenant
            if principal is None or principal.role is Role.ADMIN:
                result['storage'] = self.engine.store.stats()
            if self.metrics is not None:
                self.metrics.set_records(ns.name, result['namespace']['records'])

        elif op == "export":
            _params(EmptyParams, payload)
            result = {'rows': list(knowledge.export_rows())}

        elif op == "import":
            params = _params(ImportParams, payload)
            result = knowledge.import_rows(params.rows)

        else:
            raise ProtocolException(f"Unknown operation {op!r}", code='unknown_op')

        return result

    def run_ticks(self) -> Dict[str, Any]:
        """Consolidation then forgetting over every namespace; used by the tick timer."""
        reports = {}
        for name in self.engine.namespaces():
            ns = self.engine.namespace(name)
            with self._tick_lock, ns.lock:
                report = ns.coordinator.consolidate_tick()
                archived = ns.coordinator.forget_tick()
            if self.metrics is not None:
                self.metrics.record_tick('consolidate', len(report.promoted), len(report.archived))
                self.metrics.record_tick('forget', 0, len(archived))
            reports[name] = {'consolidate': report.to_dict(), 'forget': archived}
        return reports

    def handle(self, request: Dict[str, Any], peer: Optional[str] = None) -> Dict[str, Any]:
        """Authenticated request handling; always returns a response object."""
        request_id = request.get('request_id') if isinstance(request, dict) else None
        try:
            req = Request(**request)
        except (ValidationError, TypeError) as e:
            return error_response(request_id, 'bad_request', f"Malformed request: {e}")
        if req.v != PROTOCOL_VERSION:
            return error_response(req.request_id, 'bad_request',
                                  f"Unsupported protocol version {req.v}")
        if req.op not in OPERATIONS:
            return error_response(req.request_id, 'unknown_op', f"Unknown operation {req.op!r}")

        if self.metrics is not None:
            with self.metrics.track(req.op) as tracked:
                response = self._handle_request(req, peer)
                tracked['status'] = response['status'] if response['status'] == 'ok' \
                    else response['error']['code']
            return response
        return self._handle_request(req, peer)

    def _handle_request(self, req: Request, peer: Optional[str]) -> Dict[str, Any]:
        try:
            principal = None
            if self.security is not None:
                principal = self.security.check(req.token, req.namespace, req.op, peer)
            log.debug("Dispatching", op=req.op, namespace=req.namespace, request_id=req.request_id)
            payload = self.call(req.op, req.namespace, req.payload, principal)
            return ok_response(req.request_id, payload)
        except ColmaException as e:
            log.info("Request failed", op=req.op, namespace=req.namespace, error=e.message)
            return exception_response(req.request_id, e)
        except Exception as e:
            log.error(f"Unexpected error in {req.op}: {e}", exception=e)
            return exception_response(req.request_id, e)

    def handle_line(self, line: bytes, peer: Optional[str] = None) -> Dict[str, Any]:
        try:
            request = orjson.loads(line)
        except orjson.JSONDecodeError as e:
            return error_response(None, 'malformed_json', f"Malformed JSON: {e}")
        if not isinstance(request, dict):
            return error_response(None, 'bad_request', "A request must be a JSON object")
        return self.handle(request, peer)
