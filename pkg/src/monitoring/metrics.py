"""
Metrics collection for the COLMA memory engine.
"""

import time
from contextlib import contextmanager
from typing import Dict, Any, Iterator, Optional

from prometheus_client import (
    CollectorRegistry,
    Counter,
    Gauge,
    Histogram,
    generate_latest,
    start_http_server,
)

from ..core.config import MonitoringConfig
from ..core.logger import StructuredLogger

log = StructuredLogger(__name__)


class MetricsCollector:
    """Request, tick and record metrics held in a private registry."""

    def __init__(self, config: Optional[MonitoringConfig] = None):
        self.config = config or MonitoringConfig()
        self.registry = CollectorRegistry()
        self.requests = Counter(
            'colma_requests_total', 'Requests handled', ['op', 'status'], registry=self.registry)
        self.latency = Histogram(
            'colma_request_seconds', 'Request latency', ['op'], registry=self.registry)
        self.ticks = Counter(
            'colma_ticks_total', 'Coordination ticks run', ['kind'], registry=self.registry)
        self.tier_moves = Counter(
            'colma_tier_moves_total', 'Records moved by ticks', ['kind'], registry=self.registry)
        self.records = Gauge(
            'colma_records', 'Records per namespace', ['namespace'], registry=self.registry)
        self._server_started = False

    @contextmanager
    def track(self, op: str) -> Iterator[Dict[str, str]]:
        """Time a request; the caller sets ``status`` in the yielded dict."""
        outcome = {'status': 'ok'}
        start = time.perf_counter()
        try:
            yield outcome
        except Exception:
            outcome['status'] = 'error'
            raise
        finally:
            if self.config.enabled:
                self.latency.labels(op=op).observe(time.perf_counter() - start)
                self.requests.labels(op=op, status=outcome['status']).inc()

    def record_tick(self, kind: str, promoted: int = 0, archived: int = 0):
        if not self.config.enabled:
            return
        self.ticks.labels(kind=kind).inc()
        if promoted:
            self.tier_moves.labels(kind='promoted').inc(promoted)
        if archived:
            self.tier_moves.labels(kind='archived').inc(archived)

    def set_records(self, namespace: str, count: int):
        if self.config.enabled:
            self.records.labels(namespace=namespace).set(count)

    def request_count(self, op: str, status: str = 'ok') -> float:
        value = self.registry.get_sample_value('colma_requests_total', {'op': op, 'status': status})
        return value or 0.0

    def snapshot(self) -> Dict[str, Any]:
        """Counter values keyed by metric and labels."""
        out: Dict[str, Any] = {}
        for family in self.registry.collect():
            for sample in family.samples:
                if sample.name.endswith('_created') or sample.name.endswith('_bucket'):
                    continue
                labels = ','.join(f"{k}={v}" for k, v in sorted(sample.labels.items()))
                out[f"{sample.name}{{{labels}}}" if labels else sample.name] = sample.value
        return out

    def export(self) -> bytes:
        return generate_latest(self.registry)

    def start_http(self, port: Optional[int] = None, addr: str = '127.0.0.1'):
        port = self.config.metrics_port if port is None else port
        if port <= 0 or self._server_started:
            return
        start_http_server(port, addr=addr, registry=self.registry)
        self._server_started = True
        log.info("Metrics endpoint started", port=port)
