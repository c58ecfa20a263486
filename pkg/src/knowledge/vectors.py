"""
Vector similarity: cosine helper, exact index and a layered small-world graph index.
"""

import heapq
import math
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..core.exceptions import DimensionMismatchException, ValidationException


@dataclass(frozen=True)
class ScoredId:
    id: str
    score: float

    def to_dict(self) -> dict:
        return {'id': self.id, 'score': self.score}


def rank(scores: Dict[str, float], k: Optional[int] = None) -> List[ScoredId]:
    """Descending score, ties by ascending id."""
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    if k is not None:
        ordered = ordered[:k]
    return [ScoredId(i, s) for i, s in ordered]


def as_vector(values: Sequence[float], dim: Optional[int] = None) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1:
        raise DimensionMismatchException("vector must be one-dimensional")
    if dim is not None and vector.shape[0] != dim:
        raise DimensionMismatchException(f"vector has dimension {vector.shape[0]}, expected {dim}",
                                         {'expected': dim, 'actual': int(vector.shape[0])})
    return vector


def unit(values: Sequence[float], dim: Optional[int] = None) -> np.ndarray:
    vector = as_vector(values, dim)
    norm = float(np.linalg.norm(vector))
    if norm == 0.0 or not math.isfinite(norm):
        raise ValidationException("undefined direction: query vector has zero norm")
    return vector / norm


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """dot(a, b) / (|a| |b|) accumulated in 64-bit reals."""
    va = as_vector(a)
    vb = as_vector(b)
    if va.shape != vb.shape:
        raise DimensionMismatchException(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValidationException("undefined direction: zero-norm vector")
    return float(min(1.0, max(-1.0, float(np.dot(va, vb)) / (na * nb))))


class ExactVectorIndex:
    """Brute-force cosine index over unit-normalized rows."""

    def __init__(self, dim: int):
        self.dim = dim
        self._ids: List[str] = []
        self._rows: List[np.ndarray] = []
        self._position: Dict[str, int] = {}
        self._matrix: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._position

    def add(self, record_id: str, vector: Sequence[float]):
        row = unit(vector, self.dim)
        if record_id in self._position:
            self._rows[self._position[record_id]] = row
        else:
            self._position[record_id] = len(self._ids)
            self._ids.append(record_id)
            self._rows.append(row)
        self._matrix = None

    def remove(self, record_id: str):
        position = self._position.pop(record_id, None)
        if position is None:
            return
        last = len(self._ids) - 1
        if position != last:
            self._ids[position] = self._ids[last]
            self._rows[position] = self._rows[last]
            self._position[self._ids[position]] = position
        self._ids.pop()
        self._rows.pop()
        self._matrix = None

    def scores(self, query: Sequence[float]) -> Dict[str, float]:
        q = unit(query, self.dim)
        if not self._ids:
            return {}
        if self._matrix is None:
            self._matrix = np.vstack(self._rows)
        values = np.clip(self._matrix @ q, -1.0, 1.0)
        return dict(zip(self._ids, (float(v) for v in values)))

    def search(self, query: Sequence[float], k: int) -> List[ScoredId]:
        if k < 1:
            raise ValidationException("k must be at least 1")
        return rank(self.scores(query), k)


class SmallWorldIndex:
    """Hierarchical navigable small-world graph over cosine distance.

    Removed ids stay in the graph as routing nodes and are filtered from results.
    """

    def __init__(self, dim: int, m: int = 16, ef_construction: int = 200,
                 ef_search: int = 64, seed: int = 0):
        self.dim = dim
        self.m = m
        self.m_max0 = 2 * m
        self.ef_construction = ef_construction
        self.ef_search = ef_search
        self._ml = 1.0 / math.log(m)
        self._rng = random.Random(seed)
        self._vectors = np.zeros((16, dim), dtype=np.float64)
        self._labels: List[str] = []
        self._links: List[List[List[int]]] = []
        self._node_of: Dict[str, int] = {}
        self._deleted: Set[int] = set()
        self._entry: Optional[int] = None
        self._max_level = -1

    def __len__(self) -> int:
        return len(self._node_of)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._node_of

    def _random_level(self) -> int:
        return min(int(-math.log(1.0 - self._rng.random()) * self._ml), 32)

    def _distances(self, query: np.ndarray, nodes: Sequence[int]) -> np.ndarray:
        return 1.0 - self._vectors[list(nodes)] @ query

    def _search_layer(self, query: np.ndarray, entry_points: Sequence[int],
                      ef: int, level: int) -> List[Tuple[float, int]]:
        visited = set(entry_points)
        dists = self._distances(query, entry_points)
        candidates = [(float(d), n) for d, n in zip(dists, entry_points)]
        heapq.heapify(candidates)
        results = [(-d, n) for d, n in candidates]
        heapq.heapify(results)
        while len(results) > ef:
            heapq.heappop(results)

        while candidates:
            dist_c, current = heapq.heappop(candidates)
            if dist_c > -results[0][0] and len(results) >= ef:
                break
            fresh = [n for n in self._links[current][level] if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            for dist_n, neighbor in zip(self._distances(query, fresh), fresh):
                dist_n = float(dist_n)
                if len(results) < ef or dist_n < -results[0][0]:
                    heapq.heappush(candidates, (dist_n, neighbor))
                    heapq.heappush(results, (-dist_n, neighbor))
                    if len(results) > ef:
                        heapq.heappop(results)
        return sorted((-d, n) for d, n in results)

    def _select_neighbors(self, candidates: List[Tuple[float, int]], m: int) -> List[int]:
        """Keep candidates closer to the base than to any already selected neighbor."""
        if len(candidates) <= m:
            return [n for _, n in candidates]
        selected: List[int] = []
        pruned: List[int] = []
        for dist, node in candidates:
            if len(selected) >= m:
                break
            if selected:
                to_selected = self._distances(self._vectors[node], selected)
                if float(np.min(to_selected)) < dist:
                    pruned.append(node)
                    continue
            selected.append(node)
        for node in pruned:
            if len(selected) >= m:
                break
            selected.append(node)
        return selected

    def _grow(self):
        if len(self._labels) >= self._vectors.shape[0]:
            grown = np.zeros((self._vectors.shape[0] * 2, self.dim), dtype=np.float64)
            grown[:self._vectors.shape[0]] = self._vectors
            self._vectors = grown

    def add(self, record_id: str, vector: Sequence[float]):
        row = unit(vector, self.dim)
        self.remove(record_id)
        self._grow()
        node = len(self._labels)
        self._vectors[node] = row
        self._labels.append(record_id)
        level = self._random_level()
        self._links.append([[] for _ in range(level + 1)])
        self._node_of[record_id] = node

        if self._entry is None:
            self._entry = node
            self._max_level = level
            return

        entry = self._entry
        for lc in range(self._max_level, level, -1):
            entry = self._search_layer(row, [entry], 1, lc)[0][1]

        for lc in range(min(level, self._max_level), -1, -1):
            found = self._search_layer(row, [entry], self.ef_construction, lc)
            cap = self.m_max0 if lc == 0 else self.m
            neighbors = self._select_neighbors(found, cap)
            self._links[node][lc] = list(neighbors)
            for neighbor in neighbors:
                links = self._links[neighbor][lc]
                links.append(node)
                if len(links) > cap:
                    dists = self._distances(self._vectors[neighbor], links)
                    ordered = sorted(zip((float(d) for d in dists), links))
                    self._links[neighbor][lc] = self._select_neighbors(ordered, cap)
            entry = found[0][1]

        if level > self._max_level:
            self._entry = node
            self._max_level = level

    def remove(self, record_id: str):
        node = self._node_of.pop(record_id, None)
        if node is not None:
            self._deleted.add(node)

    def search(self, query: Sequence[float], k: int, ef: Optional[int] = None) -> List[ScoredId]:
        if k < 1:
            raise ValidationException("k must be at least 1")
        q = unit(query, self.dim)
        if self._entry is None or not self._node_of:
            return []
        ef = max(ef or self.ef_search, k) + min(len(self._deleted), self.ef_search)
        entry = self._entry
        for lc in range(self._max_level, 0, -1):
            entry = self._search_layer(q, [entry], 1, lc)[0][1]
        found = self._search_layer(q, [entry], ef, 0)
        scores = {}
        for dist, node in found:
            if node in self._deleted:
                continue
            scores[self._labels[node]] = float(min(1.0, max(-1.0, 1.0 - dist)))
        return rank(scores, k)
