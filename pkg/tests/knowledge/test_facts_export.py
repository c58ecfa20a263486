"""
Facts and JSON Lines export / import.
"""

import pytest

from src.cognition.types import Rule
from src.core.config import Config
from src.core.exceptions import DimensionMismatchException, ValidationException
from src.engine import MemoryEngine
from src.knowledge.facts import Fact, FactTable
from src.knowledge.records import MemoryRecord, Modality, Tier
from src.knowledge.triples import Triple
from src.utils.embedding import test_embed
from src.utils.ids import IdFactory
from src.utils.serialization import canonical_json


def test_fact_table_last_write_wins():
    table = FactTable()
    table.put(Fact("k", b'new', 20))
    table.put(Fact("k", b'old', 10))
    assert table.get("k").value == b'new'
    table.put(Fact("k", b'tie', 20))
    assert table.get("k").value == b'tie'
    table.put(Fact("k2", b'x', 1))
    assert [f.key for f in table.with_prefix("k")] == ["k", "k2"]


def test_put_and_get_fact(ns):
    ns.knowledge.put_fact("capital:france", b'paris')
    assert ns.knowledge.get_fact("capital:france") == b'paris'
    ns.knowledge.put_fact("capital:france", b'lyon', updated_at=1)
    assert ns.knowledge.get_fact("capital:france") == b'paris'
    assert ns.knowledge.get_fact("missing") is None
    with pytest.raises(ValidationException):
        ns.knowledge.put_fact("", b'x')


def _populate(knowledge):
    first, _ = knowledge.upsert_record(MemoryRecord(
        id=None, namespace=knowledge.namespace, modality=Modality.TEXT, content=b'the lake was frozen',
        embedding=test_embed("the lake was frozen", 8), salience=0.7))
    knowledge.upsert_record(MemoryRecord(
        id=first, namespace=knowledge.namespace, modality=Modality.TEXT, content=b'the lake thawed',
        embedding=test_embed("the lake thawed", 8), version=2, supersedes=(first, 1)))
    second, _ = knowledge.upsert_record(MemoryRecord(
        id=None, namespace=knowledge.namespace, modality=Modality.STRUCTURED, content=b'{"temp": -3}'))
    knowledge.update_state(second, tier=Tier.MEDIUM)
    knowledge.assert_triple(Triple("ent:lake", "state", "lit:frozen", source_record=first))
    knowledge.retract_triple("ent:lake", "state", "lit:frozen")
    knowledge.link_record_entity(first, "ent:lake")
    knowledge.put_fact("season", b'spring')
    return first, second


def _export_bytes(knowledge):
    return b'\n'.join(canonical_json(row) for row in knowledge.export_rows())


def test_export_rows_shape(ns):
    first, second = _populate(ns.knowledge)
    rows = list(ns.knowledge.export_rows())
    assert rows[0] == {'kind': 'meta', 'namespace': 'test', 'dim': 8}
    kinds = [row['kind'] for row in rows]
    assert kinds == ['meta', 'record', 'record', 'triple', 'triple', 'fact']
    by_id = {row['id']: row for row in rows if row['kind'] == 'record'}
    assert [v['version'] for v in by_id[first]['versions']] == [1, 2]
    assert by_id[second]['state']['tier'] == 'medium'


def test_import_into_fresh_engine_round_trips(ns, tmp_path, ticking_clock):
    first, _ = _populate(ns.knowledge)
    exported = _export_bytes(ns.knowledge)
    rows = list(ns.knowledge.export_rows())

    config = Config().with_data_dir(tmp_path / "copy")
    with MemoryEngine(config, ticking_clock, IdFactory(9)) as engine:
        target = engine.namespace("test", dim=8).knowledge
        counts = target.import_rows(rows)
        assert counts == {'record': 2, 'triple': 2, 'fact': 1, 'case': 0}
        assert _export_bytes(target) == exported
        assert target.peek_record(first).text() == "the lake thawed"
        assert target.get_record(first, version=1).text() == "the lake was frozen"
        assert target.records_of_entity("ent:lake") == [first]
        assert target.get_fact("season") == b'spring'
        assert target.knn(test_embed("the lake thawed", 8), 1)[0].id == first


def test_reasoning_cases_travel_with_the_export(ns, tmp_path, ticking_clock):
    ns.knowledge.assert_triple(Triple("ent:ann", "parent", "ent:bob"))
    rule = Rule("par", [("?x", "parent", "?y")], ("?x", "anc", "?y"))
    ns.cognition.reason(("ent:ann", "anc", "?who"), [rule])
    rows = list(ns.knowledge.export_rows())
    assert [row['kind'] for row in rows].count('case') == 1

    config = Config().with_data_dir(tmp_path / "cases")
    with MemoryEngine(config, ticking_clock, IdFactory(3)) as engine:
        target = engine.namespace("test", dim=8)
        assert target.cognition.heuristic_suggest(("ent:ann", "anc", "?who")) is None
        assert target.knowledge.import_rows(rows)['case'] == 1
        suggestion = target.cognition.heuristic_suggest(("ent:ann", "anc", "?who"))
        assert suggestion.answer == [{'?who': "ent:bob"}]


def test_import_into_same_namespace_is_stable(ns):
    _populate(ns.knowledge)
    exported = _export_bytes(ns.knowledge)
    ns.knowledge.import_rows(list(ns.knowledge.export_rows()))
    assert _export_bytes(ns.knowledge) == exported


def test_import_checks_dimension(ns, engine):
    rows = list(ns.knowledge.export_rows())
    other = engine.namespace("wide", dim=16).knowledge
    with pytest.raises(DimensionMismatchException):
        other.import_rows(rows)


def test_import_rejects_unknown_rows(ns):
    with pytest.raises(ValidationException):
        ns.knowledge.import_rows([{'kind': 'mystery'}])


def test_stats_count_tiers(ns):
    _populate(ns.knowledge)
    stats = ns.knowledge.stats()
    assert stats['records'] == 2
    assert stats['triples'] == 2 and stats['live_triples'] == 1
    assert stats['facts'] == 1
    assert stats['vectors'] == 1
    assert stats['tier_short'] == 1 and stats['tier_medium'] == 1
