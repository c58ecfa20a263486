"""
Request and tick metrics.
"""

import pytest

from src.core.config import MonitoringConfig
from src.monitoring.metrics import MetricsCollector


def test_track_counts_outcomes():
    metrics = MetricsCollector()
    with metrics.track("knn"):
        pass
    with metrics.track("knn") as outcome:
        outcome['status'] = 'not_found'
    with pytest.raises(RuntimeError):
        with metrics.track("knn"):
            raise RuntimeError("boom")
    assert metrics.request_count("knn") == 1
    assert metrics.request_count("knn", "not_found") == 1
    assert metrics.request_count("knn", "error") == 1
    assert metrics.request_count("recall") == 0


def test_ticks_and_gauges():
    metrics = MetricsCollector()
    metrics.record_tick("consolidate", promoted=3, archived=1)
    metrics.record_tick("forget", archived=2)
    metrics.set_records("team.a", 7)
    snapshot = metrics.snapshot()
    assert snapshot['colma_ticks_total{kind=consolidate}'] == 1
    assert snapshot['colma_tier_moves_total{kind=promoted}'] == 3
    assert snapshot['colma_tier_moves_total{kind=archived}'] == 3
    assert snapshot['colma_records{namespace=team.a}'] == 7
    assert b'colma_requests_total' in metrics.export()


def test_disabled_collector_records_nothing():
    metrics = MetricsCollector(MonitoringConfig(enabled=False))
    with metrics.track("stats"):
        pass
    metrics.record_tick("consolidate", promoted=1)
    assert metrics.request_count("stats") == 0
    assert 'colma_ticks_total{kind=consolidate}' not in metrics.snapshot()


def test_collectors_do_not_share_state():
    first, second = MetricsCollector(), MetricsCollector()
    with first.track("stats"):
        pass
    assert second.request_count("stats") == 0
