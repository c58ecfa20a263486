"""
Deterministic embedder, ids, clocks and canonical JSON.
"""

import math

import pytest

from src.core.exceptions import ValidationException
from src.utils.clock import ManualClock, SystemClock
from src.knowledge.vectors import cosine_similarity
from src.utils.embedding import test_embed, tokens
from src.utils.ids import IdFactory, is_record_id
from src.utils.serialization import b64decode, canonical_dumps, digest


def test_embedding_is_deterministic_unit_vector():
    first = test_embed("Red cap, white spots", 32)
    assert first == test_embed("red CAP white spots", 32)
    assert len(first) == 32
    assert math.isclose(math.sqrt(sum(x * x for x in first)), 1.0, rel_tol=1e-12)
    assert first != test_embed("red cap", 32)


def test_shared_tokens_raise_similarity():
    base = test_embed("mushroom red cap")
    near = test_embed("red cap")
    far = test_embed("quarterly tax filing")
    assert cosine_similarity(base, near) > cosine_similarity(base, far)


def test_embedding_rejects_empty_text():
    for text in ("", "   ", "!!!"):
        with pytest.raises(ValidationException):
            test_embed(text)
    assert tokens("It's 9 o'clock") == ["it", "s", "9", "o", "clock"]


def test_seeded_ids_repeat():
    assert [IdFactory(5)() for _ in range(2)] == [IdFactory(5)()] * 2
    factory = IdFactory(5)
    assert factory() != factory()
    assert is_record_id(IdFactory()())
    assert not is_record_id("not-an-id")


def test_clocks():
    clock = ManualClock(100, 10)
    assert [clock.now_us(), clock.now_us()] == [100, 110]
    clock.advance(seconds=1)
    assert clock.now_us() == 1_000_120
    with pytest.raises(ValueError):
        clock.set(5)
    wall = SystemClock()
    assert wall.now_us() <= wall.now_us()


def test_canonical_json():
    assert canonical_dumps({'b': 1, 'a': [1, 2]}) == '{"a":[1,2],"b":1}'
    assert digest({'b': 1, 'a': 2}) == digest({'a': 2, 'b': 1})
    with pytest.raises(ValidationException):
        canonical_dumps({'x': object()})
    with pytest.raises(ValidationException):
        b64decode("***")
