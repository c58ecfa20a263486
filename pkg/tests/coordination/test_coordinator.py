"""
Encoding, consolidation, reinforcement and forgetting over a live namespace.
"""

import random

import pytest

from src.core.config import RetentionPolicy
from src.core.exceptions import NotFoundException, ValidationException
from src.coordination.coordinator import Coordinator, Stimulus
from src.coordination.policy import retention_score
from src.engine import MemoryEngine
from src.knowledge.records import Modality, Tier
from src.utils.clock import US_PER_DAY
from src.utils.embedding import test_embed
from src.utils.ids import IdFactory


def _stimulus(text, salience=0.5, **kwargs):
    return Stimulus(Modality.TEXT, text, embedding=test_embed(text, 8), salience=salience, **kwargs)


def test_encode_writes_short_term_record(ns):
    record = ns.coordinator.encode(_stimulus("first snow", salience=0.8, provenance=["sensor-1"]))
    assert record.tier is Tier.SHORT
    assert record.salience == 0.8
    assert record.provenance == ["sensor-1"]
    assert record.last_access == record.created_at
    assert ns.knowledge.knn(test_embed("first snow", 8), 1)[0].id == record.id


def test_encode_links_entities(ns):
    record = ns.coordinator.encode(_stimulus("alice met bob", entities=["ent:bob", "ent:alice", "ent:bob"]))
    assert ns.knowledge.entities_of_record(record.id) == ["ent:alice", "ent:bob"]


def test_encode_defaults_and_bounds(ns):
    record = ns.coordinator.encode(Stimulus(Modality.TEXT, "plain"))
    assert record.salience == 0.5 and record.embedding is None
    with pytest.raises(ValidationException):
        ns.coordinator.encode(_stimulus("too loud", salience=1.2))


def test_encode_skips_links_when_graph_disabled(config, ticking_clock):
    knowledge_config = config.knowledge.model_copy(update={'graph_enabled': False})
    flat = config.model_copy(update={'knowledge': knowledge_config})
    with MemoryEngine(flat, ticking_clock, IdFactory(3)) as engine:
        stack = engine.namespace("flat", dim=8)
        record = stack.coordinator.encode(_stimulus("alice again", entities=["ent:alice"]))
        assert stack.knowledge.peek_record(record.id) is not None
        assert stack.knowledge.all_triples() == []


def test_consolidation_promotes_and_archives(ns, ticking_clock):
    strong = ns.coordinator.encode(_stimulus("wedding day", salience=0.9))
    plain = ns.coordinator.encode(_stimulus("bus ride", salience=0.5))
    faint = ns.coordinator.encode(_stimulus("background hum", salience=0.0))

    now = ticking_clock.now_us()
    report = ns.coordinator.consolidate_tick(now)
    assert report.promoted == [(strong.id, "short", "medium")]
    assert report.archived == []
    assert report.evaluated == 3

    later = now + US_PER_DAY
    report = ns.coordinator.consolidate_tick(later)
    assert faint.id in report.archived
    assert ns.knowledge.peek_record(faint.id).tier is Tier.ARCHIVED
    assert ns.knowledge.peek_record(plain.id).tier is Tier.SHORT


def test_consolidation_at_fixed_time_is_idempotent(ns, ticking_clock):
    ns.coordinator.encode(_stimulus("promotable", salience=0.95))
    now = ticking_clock.now_us()
    first = ns.coordinator.consolidate_tick(now)
    second = ns.coordinator.consolidate_tick(now)
    assert len(first.promoted) == 1
    assert second.promoted == [] and second.archived == []


def test_consolidation_matches_score_oracle(ns, ticking_clock):
    rng = random.Random(11)
    for i in range(25):
        record = ns.coordinator.encode(_stimulus(f"event {i}", salience=round(rng.random(), 3)))
        for _ in range(rng.randrange(4)):
            ns.coordinator.reinforce(record.id, 0.0)
    now = ticking_clock.now_us() + rng.randrange(3 * US_PER_DAY)
    policy = ns.coordinator.policy

    expected_promoted, expected_archived = [], []
    for record in ns.knowledge.list_records():
        score = retention_score(record, now, policy)
        if score >= policy.promote_threshold and record.tier is not Tier.LONG:
            expected_promoted.append((record.id, record.tier.value, record.tier.promoted().value))
        elif score < policy.archive_threshold:
            expected_archived.append(record.id)

    report = ns.coordinator.consolidate_tick(now)
    assert report.promoted == expected_promoted
    assert report.archived == expected_archived


def test_promotion_climbs_one_tier_per_tick(ns, ticking_clock):
    record = ns.coordinator.encode(_stimulus("graduation", salience=1.0))
    now = ticking_clock.now_us()
    ns.coordinator.consolidate_tick(now)
    ns.coordinator.consolidate_tick(now + 1)
    assert ns.knowledge.peek_record(record.id).tier is Tier.LONG
    assert ns.coordinator.consolidate_tick(now + 2).promoted == []


def test_full_short_tier_moves_weakest_out(ns):
    coordinator = Coordinator(ns.knowledge, RetentionPolicy(short_capacity=3))
    ids = [coordinator.encode(_stimulus(f"note {i}", salience=s)).id
           for i, s in enumerate([0.1, 0.2, 0.3, 0.4, 0.5])]
    tiers = [ns.knowledge.peek_record(i).tier for i in ids]
    assert tiers == [Tier.MEDIUM, Tier.MEDIUM, Tier.SHORT, Tier.SHORT, Tier.SHORT]


def test_capacity_promotion_still_needs_two_ticks_to_long(ns, ticking_clock):
    coordinator = Coordinator(ns.knowledge, RetentionPolicy(short_capacity=1))
    pushed = coordinator.encode(_stimulus("first insight", salience=1.0))
    coordinator.encode(_stimulus("second insight", salience=1.0))
    assert ns.knowledge.peek_record(pushed.id).tier is Tier.MEDIUM

    now = ticking_clock.now_us()
    first = coordinator.consolidate_tick(now)
    assert pushed.id not in [record_id for record_id, _, _ in first.promoted]
    assert ns.knowledge.peek_record(pushed.id).tier is Tier.MEDIUM
    assert coordinator.consolidate_tick(now).promoted == []

    second = coordinator.consolidate_tick(now + 1)
    assert (pushed.id, "medium", "long") in second.promoted
    assert ns.knowledge.peek_record(pushed.id).tier is Tier.LONG


def test_full_short_tier_archives_forgotten_records(ns, ticking_clock):
    coordinator = Coordinator(ns.knowledge, RetentionPolicy(short_capacity=1))
    stale = coordinator.encode(_stimulus("old noise", salience=0.0,
                                         occurred_at=ticking_clock.now_us() - 10 * US_PER_DAY))
    fresh = coordinator.encode(_stimulus("new signal", salience=0.6))
    assert ns.knowledge.peek_record(stale.id).tier is Tier.ARCHIVED
    assert ns.knowledge.peek_record(fresh.id).tier is Tier.SHORT


def test_reinforce_clamps_and_counts(ns):
    record = ns.coordinator.encode(_stimulus("practice", salience=0.5))
    updated = ns.coordinator.reinforce(record.id, 0.8)
    assert updated.salience == 1.0 and updated.access_count == 1
    lowered = ns.coordinator.reinforce(record.id, -2.0)
    assert lowered.salience == 0.0 and lowered.access_count == 2
    assert ns.knowledge.record_versions(record.id) == [1]


def test_reinforce_refuses_archived(ns):
    record = ns.coordinator.encode(_stimulus("lost", salience=0.5))
    ns.knowledge.update_state(record.id, tier=Tier.ARCHIVED)
    with pytest.raises(NotFoundException):
        ns.coordinator.reinforce(record.id, 0.1)


def test_forget_tick_archives_low_retention(ns, ticking_clock):
    faint = ns.coordinator.encode(_stimulus("whisper", salience=0.0))
    kept = ns.coordinator.encode(_stimulus("anchor", salience=0.5))
    archived = ns.coordinator.forget_tick(ticking_clock.now_us() + US_PER_DAY)
    assert archived == [faint.id]
    assert ns.knowledge.get_record(faint.id) is None
    assert ns.knowledge.get_record(kept.id) is not None
    assert ns.coordinator.forget_tick(ticking_clock.now_us() + US_PER_DAY) == []
