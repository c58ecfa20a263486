"""
Cosine similarity, exact ranking and the small-world index.
"""

import numpy as np
import pytest

from src.core.exceptions import DimensionMismatchException, ValidationException
from src.knowledge.vectors import ExactVectorIndex, SmallWorldIndex, cosine_similarity, rank


def _random_unit(rng, n, dim):
    vectors = rng.normal(size=(n, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def _brute_force(vectors, ids, query, k):
    q = query / np.linalg.norm(query)
    scored = [(float(np.dot(v, q)), i) for v, i in zip(vectors, ids)]
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [i for _, i in scored[:k]]


def test_cosine_similarity_basics():
    assert cosine_similarity([1, 0], [1, 0]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 2]) == pytest.approx(0.0)
    assert cosine_similarity([1, 1], [-1, -1]) == pytest.approx(-1.0)
    with pytest.raises(ValidationException):
        cosine_similarity([0, 0], [1, 0])
    with pytest.raises(DimensionMismatchException):
        cosine_similarity([1, 0], [1, 0, 0])


def test_rank_breaks_ties_by_id():
    ranked = rank({'b': 0.5, 'a': 0.5, 'c': 0.9}, 2)
    assert [s.id for s in ranked] == ['c', 'a']


def test_exact_index_matches_brute_force():
    rng = np.random.default_rng(1)
    vectors = _random_unit(rng, 500, 16)
    ids = [f"{i:04d}" for i in range(500)]
    index = ExactVectorIndex(16)
    for i, v in zip(ids, vectors):
        index.add(i, v)
    for query in rng.normal(size=(20, 16)):
        got = [s.id for s in index.search(query, 10)]
        assert got == _brute_force(vectors, ids, query, 10)


def test_exact_index_identical_vectors_order_by_id():
    index = ExactVectorIndex(3)
    index.add('b', [1, 0, 0])
    index.add('a', [2, 0, 0])
    index.add('c', [0, 1, 0])
    assert [s.id for s in index.search([1, 0, 0], 3)] == ['a', 'b', 'c']


def test_exact_index_remove_and_replace():
    index = ExactVectorIndex(2)
    index.add('a', [1, 0])
    index.add('b', [0, 1])
    index.add('c', [1, 1])
    index.remove('a')
    assert 'a' not in index and len(index) == 2
    index.add('b', [1, 0])
    assert index.search([1, 0], 1)[0].id == 'b'


def test_exact_index_rejects_bad_queries():
    index = ExactVectorIndex(2)
    index.add('a', [1, 0])
    with pytest.raises(DimensionMismatchException):
        index.search([1, 0, 0], 1)
    with pytest.raises(ValidationException):
        index.search([0, 0], 1)
    with pytest.raises(ValidationException):
        index.search([1, 0], 0)


def test_k_larger_than_population():
    index = ExactVectorIndex(2)
    index.add('a', [1, 0])
    assert len(index.search([1, 0], 50)) == 1


def _recall(n, dim, queries, m, ef_construction, ef_search, seed=0):
    rng = np.random.default_rng(seed)
    vectors = _random_unit(rng, n, dim)
    ids = [f"{i:05d}" for i in range(n)]
    index = SmallWorldIndex(dim, m=m, ef_construction=ef_construction, ef_search=ef_search, seed=seed)
    for i, v in zip(ids, vectors):
        index.add(i, v)
    hits = 0
    for query in rng.normal(size=(queries, dim)):
        truth = set(_brute_force(vectors, ids, query, 10))
        hits += len(truth & {s.id for s in index.search(query, 10)})
    return hits / (10 * queries)


def test_small_world_recall():
    assert _recall(1000, 32, 40, m=16, ef_construction=100, ef_search=100) >= 0.95


@pytest.mark.slow
def test_small_world_recall_desk_scale():
    assert _recall(10_000, 64, 100, m=16, ef_construction=200, ef_search=128) >= 0.95


def test_small_world_filters_removed_ids():
    rng = np.random.default_rng(3)
    vectors = _random_unit(rng, 200, 8)
    index = SmallWorldIndex(8, m=8, ef_construction=50, ef_search=50)
    for i, v in enumerate(vectors):
        index.add(str(i), v)
    best = index.search(vectors[0], 1)[0]
    assert best.id == '0'
    index.remove('0')
    assert '0' not in {s.id for s in index.search(vectors[0], 10)}
    assert len(index) == 199


def test_small_world_empty_index():
    assert SmallWorldIndex(4).search([1, 0, 0, 0], 3) == []
