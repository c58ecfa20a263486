"""
Deterministic bag-of-tokens embedder used by fixtures and the case base.

Each token ``[a-z0-9]+`` of the lowercased text is hashed with 64-bit
BLAKE2b; the hash seeds a splitmix64 stream whose outputs become the
token's components in [-1, 1). Token vectors are summed and L2-normalized.
"""

import hashlib
import re
from typing import List

import numpy as np

from ..core.exceptions import ValidationException

TOKEN_RE = re.compile(r'[a-z0-9]+')
DEFAULT_DIM = 64

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def tokens(text: str) -> List[str]:
    return TOKEN_RE.findall(text.lower())


def splitmix64(state: int):
    """One step of splitmix64: returns (next state, output)."""
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return state, z ^ (z >> 31)


def token_vector(token: str, dim: int) -> np.ndarray:
    state = int.from_bytes(hashlib.blake2b(token.encode('utf-8'), digest_size=8).digest(), 'little')
    out = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        state, value = splitmix64(state)
        out[i] = (value >> 11) / float(1 << 53) * 2.0 - 1.0
    return out


def test_embed(text: str, dim: int = DEFAULT_DIM) -> List[float]:
    """Unit vector for ``text``; equal texts give identical vectors."""
    if not text or not text.strip():
        raise ValidationException("cannot embed empty text")
    words = tokens(text)
    if not words:
        raise ValidationException(f"text has no tokens: {text!r}")
    total = np.zeros(dim, dtype=np.float64)
    for word in words:
        total += token_vector(word, dim)
    norm = float(np.linalg.norm(total))
    if norm == 0.0:
        raise ValidationException("token vectors cancel out")
    return [float(x) for x in total / norm]


# not a pytest test
test_embed.__test__ = False
