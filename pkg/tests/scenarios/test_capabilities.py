"""
Capability matrix trials.
"""

from src.core.config import Config
from src.scenarios import DIMENSIONS, eval_capabilities
from src.scenarios.capabilities import PARTIAL, SUPPORTED, UNSUPPORTED, run_trial
from src.utils.serialization import loads


def test_full_engine_supports_every_dimension():
    report = eval_capabilities(Config())
    assert report.dimensions == {name: SUPPORTED for name in DIMENSIONS}
    assert report.supported == 12
    data = loads(report.to_json())
    assert data['supported'] == 12 and data['total'] == 12
    assert list(data['dimensions']) == list(DIMENSIONS)
    assert set(data['footnotes']) == {"Indexing", "Sync", "Versioning"}


def test_disabled_graph_loses_graph_dimensions():
    config = Config()
    config = config.model_copy(update={'knowledge': config.knowledge.model_copy(update={'graph_enabled': False})})
    report = eval_capabilities(config)
    for name in ("Reasoning", "Linking", "Entity Model"):
        assert report.dimensions[name] == UNSUPPORTED
    for name in ("Indexing", "Versioning"):
        assert report.dimensions[name] == PARTIAL
    for name in ("Multi-modal", "Similarity", "Sync", "Time Series", "Distributed", "Compression",
                 "Online Update"):
        assert report.dimensions[name] == SUPPORTED
    assert report.supported == 7
    assert "Indexing" not in report.footnotes


def test_trial_reports_check_counts():
    status, detail = run_trial("Time Series", Config())
    assert status == SUPPORTED
    assert detail == "2/2 checks"
