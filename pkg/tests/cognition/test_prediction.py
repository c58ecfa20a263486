"""
Next-label prediction over event streams, and strategy reflection.
"""

import json

import pytest

from src.cognition.types import TaskOutcome
from src.coordination.coordinator import Stimulus
from src.core.exceptions import ValidationException
from src.engine import MemoryEngine
from src.knowledge.records import Modality
from src.utils.ids import IdFactory


def _stream(ns, stream, labels, start=1_000):
    for i, label in enumerate(labels):
        ns.coordinator.encode(Stimulus(Modality.EVENT, json.dumps({'stream': stream, 'label': label}),
                                       occurred_at=start + i))


def test_most_frequent_successor(ns):
    _stream(ns, "door", ["open", "close", "open", "close", "open", "lock"])
    prediction = ns.cognition.predict("door", ["open"])
    assert prediction.label == "close"
    assert prediction.confidence == pytest.approx(2 / 3)
    assert ns.cognition.successor_distribution("door", "open") == pytest.approx({'close': 2 / 3, 'lock': 1 / 3})


def test_events_are_ordered_by_occurrence(ns):
    for i, label in [(2, "c"), (0, "a"), (1, "b")]:
        ns.coordinator.encode(Stimulus(Modality.EVENT, json.dumps({'stream': 's', 'label': label}),
                                       occurred_at=500 + i))
    assert ns.cognition.predict("s", ["a"]).label == "b"
    assert ns.cognition.predict("s", ["b"]).label == "c"


def test_ties_go_to_the_smaller_label(ns):
    _stream(ns, "s", ["x", "b", "x", "a"])
    assert ns.cognition.predict("s", ["x"]).label == "a"
    assert ns.cognition.predict("s", ["x"]).confidence == pytest.approx(0.5)


def test_empty_context_predicts_most_frequent_initial_label(ns):
    episodes = [["wake", "coffee", "coffee", "coffee"], ["wake", "coffee"], ["alarm", "coffee"]]
    at = 1_000
    for n, labels in enumerate(episodes):
        for label in labels:
            ns.coordinator.encode(Stimulus(Modality.EVENT, json.dumps({'stream': "day", 'label': label,
                                                                       'episode': f"d{n}"}),
                                           occurred_at=at))
            at += 1
    prediction = ns.cognition.predict("day", [])
    assert (prediction.label, prediction.confidence) == ("wake", pytest.approx(2 / 3))


def test_empty_context_without_episodes_is_the_first_label(ns):
    _stream(ns, "s", ["b", "a", "a", "c", "a"])
    prediction = ns.cognition.predict("s", [])
    assert (prediction.label, prediction.confidence) == ("b", pytest.approx(1.0))


def test_unknown_streams_and_labels(ns):
    _stream(ns, "s", ["a", "b"])
    assert ns.cognition.predict("missing", ["a"]) is None
    assert ns.cognition.predict("s", ["b"]) is None
    assert ns.cognition.predict("s", ["zzz"]) is None
    assert ns.cognition.successor_distribution("s", "zzz") == {}


def test_only_first_order(ns):
    _stream(ns, "s", ["a", "b"])
    with pytest.raises(ValidationException):
        ns.cognition.predict("s", ["a", "b"], order=2)


def test_events_without_stream_are_ignored(ns):
    ns.coordinator.encode(Stimulus(Modality.EVENT, json.dumps({'label': 'orphan'}), occurred_at=10))
    ns.coordinator.encode(Stimulus(Modality.EVENT, "not json", occurred_at=11))
    assert ns.cognition.predict("s", []) is None


def test_reflection_moves_weights_by_ema(ns):
    assert ns.cognition.strategy_weights().weights == {'deductive': 0.5, 'heuristic': 0.5}
    weights = ns.cognition.reflect(TaskOutcome("t1", "deductive", True))
    assert weights.weights['deductive'] == pytest.approx(0.6)
    weights = ns.cognition.reflect(TaskOutcome("t2", "deductive", False))
    assert weights.weights['deductive'] == pytest.approx(0.48)
    assert weights.weights['heuristic'] == 0.5
    assert weights.ema_alpha == ns.cognition.config.ema_alpha


def test_reflection_weights_stay_in_unit_interval(ns):
    for i in range(60):
        weights = ns.cognition.reflect(TaskOutcome(f"t{i}", "heuristic", True))
    assert 0.99 < weights.weights['heuristic'] <= 1.0


def test_reflection_rejects_unknown_strategy(ns):
    with pytest.raises(ValidationException):
        ns.cognition.reflect(TaskOutcome("t", "guessing", True))


def test_reflection_persists(config, ticking_clock):
    with MemoryEngine(config, ticking_clock, IdFactory(1)) as engine:
        engine.namespace("mind", dim=8).cognition.reflect(TaskOutcome("t", "heuristic", False))
    with MemoryEngine(config, ticking_clock, IdFactory(1)) as engine:
        assert engine.namespace("mind").cognition.strategy_weights().weights['heuristic'] == pytest.approx(0.4)
