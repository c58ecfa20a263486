"""
Memory records and their persisted layout.
"""

import math
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import DimensionMismatchException, ValidationException
from ..utils.serialization import b64decode, b64encode, canonical_json, loads

_U64BE = struct.Struct('>Q')


class Modality(str, Enum):
    TEXT = "text"
    IMAGE_DESCRIPTOR = "image_descriptor"
    STRUCTURED = "structured"
    EVENT = "event"


class Tier(str, Enum):
    SHORT = "short"
    MEDIUM = "medium"
    LONG = "long"
    ARCHIVED = "archived"

    @property
    def rank(self) -> int:
        return _TIER_RANK[self]

    def promoted(self) -> 'Tier':
        if self is Tier.SHORT:
            return Tier.MEDIUM
        if self is Tier.MEDIUM:
            return Tier.LONG
        return self


_TIER_RANK = {Tier.SHORT: 0, Tier.MEDIUM: 1, Tier.LONG: 2, Tier.ARCHIVED: 3}


def u64be(value: int) -> bytes:
    return _U64BE.pack(value)


def version_clustering(version: int) -> bytes:
    return b'v' + u64be(version)


STATE_CLUSTERING = b's'


@dataclass
class MemoryRecord:
    id: Optional[str]
    namespace: str
    modality: Modality
    content: bytes
    embedding: Optional[Tuple[float, ...]] = None
    created_at: int = 0
    last_access: int = 0
    access_count: int = 0
    salience: float = 0.5
    tier: Tier = Tier.SHORT
    version: int = 1
    supersedes: Optional[Tuple[str, int]] = None
    provenance: List[str] = field(default_factory=list)
    promoted_at: int = 0
    ladder_ticks: int = 0

    def copy(self, **changes) -> 'MemoryRecord':
        changes.setdefault('provenance', list(self.provenance))
        return replace(self, **changes)

    def text(self) -> str:
        return self.content.decode('utf-8', errors='replace')

    def json_content(self) -> Optional[Any]:
        """Parsed content for JSON-bearing modalities, else None."""
        if self.modality not in (Modality.STRUCTURED, Modality.EVENT):
            return None
        try:
            return loads(self.content)
        except ValidationException:
            return None

    def body(self) -> Dict[str, Any]:
        """Immutable per-version part."""
        return {
            'id': self.id,
            'modality': self.modality.value,
            'content': b64encode(self.content),
            'embedding': list(self.embedding) if self.embedding is not None else None,
            'created_at': self.created_at,
            'version': self.version,
            'supersedes': list(self.supersedes) if self.supersedes else None,
            'provenance': list(self.provenance),
        }

    def state(self) -> Dict[str, Any]:
        """Mutable bookkeeping shared by all versions."""
        return {
            'version': self.version,
            'tier': self.tier.value,
            'salience': self.salience,
            'access_count': self.access_count,
            'last_access': self.last_access,
            'promoted_at': self.promoted_at,
            'ladder_ticks': self.ladder_ticks,
        }

    def to_dict(self) -> Dict[str, Any]:
        out = self.body()
        out.update(self.state())
        out['namespace'] = self.namespace
        out['version'] = self.version
        return out

    @classmethod
    def from_parts(cls, namespace: str, body: Dict[str, Any], state: Dict[str, Any]) -> 'MemoryRecord':
        supersedes = body.get('supersedes')
        embedding = body.get('embedding')
        return cls(
            id=body['id'],
            namespace=namespace,
            modality=Modality(body['modality']),
            content=b64decode(body['content']),
            embedding=tuple(embedding) if embedding is not None else None,
            created_at=body['created_at'],
            last_access=state.get('last_access', body['created_at']),
            access_count=state.get('access_count', 0),
            salience=state.get('salience', 0.5),
            tier=Tier(state.get('tier', Tier.SHORT.value)),
            version=body['version'],
            supersedes=tuple(supersedes) if supersedes else None,
            provenance=list(body.get('provenance') or []),
            promoted_at=state.get('promoted_at', 0),
            ladder_ticks=state.get('ladder_ticks', 0),
        )


def normalize_embedding(embedding: Optional[Sequence[float]], dim: int) -> Optional[Tuple[float, ...]]:
    """Validate and round an embedding to 32-bit reals."""
    if embedding is None:
        return None
    vector = np.asarray(embedding, dtype=np.float32)
    if vector.ndim != 1 or vector.shape[0] != dim:
        raise DimensionMismatchException(
            f"Embedding has dimension {vector.shape[-1] if vector.ndim else 0}, namespace expects {dim}",
            {'expected': dim})
    if not np.all(np.isfinite(vector)):
        raise ValidationException("Embedding components must be finite")
    return tuple(float(x) for x in vector)


def canonical_content(modality: Modality, content: bytes) -> bytes:
    """Structured content is stored as canonical JSON so byte equality is meaningful."""
    if modality is Modality.STRUCTURED:
        return canonical_json(loads(content))
    if modality is Modality.EVENT:
        try:
            return canonical_json(loads(content))
        except ValidationException:
            return content
    return content


def validate_record(record: MemoryRecord):
    if not isinstance(record.modality, Modality):
        raise ValidationException(f"Unknown modality {record.modality!r}")
    if not isinstance(record.content, (bytes, bytearray)):
        raise ValidationException("Record content must be bytes")
    if not (0.0 <= record.salience <= 1.0) or math.isnan(record.salience):
        raise ValidationException("salience must lie in [0, 1]")
    if record.version < 1:
        raise ValidationException("version must be a positive integer")
    if record.access_count < 0:
        raise ValidationException("access_count must be non-negative")
