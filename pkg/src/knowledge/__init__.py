"""
Knowledge layer: multimodal records, triples, vectors and facts.
"""

from .records import MemoryRecord, Modality, Tier, normalize_embedding
from .triples import Triple, TripleIndex, LINK_PREDICATE, LITERAL_PREFIX, ENTITY_PREFIX, is_literal
from .vectors import ScoredId, ExactVectorIndex, SmallWorldIndex, cosine_similarity, rank
from .facts import Fact, FactTable
from .layer import KnowledgeLayer

__all__ = [
    'MemoryRecord',
    'Modality',
    'Tier',
    'normalize_embedding',
    'Triple',
    'TripleIndex',
    'LINK_PREDICATE',
    'LITERAL_PREFIX',
    'ENTITY_PREFIX',
    'is_literal',
    'ScoredId',
    'ExactVectorIndex',
    'SmallWorldIndex',
    'cosine_similarity',
    'rank',
    'Fact',
    'FactTable',
    'KnowledgeLayer',
]
