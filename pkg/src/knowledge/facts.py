"""
Common-knowledge key/value facts.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional


@dataclass(frozen=True)
class Fact:
    key: str
    value: bytes
    updated_at: int


class FactTable:
    """Last-write-wins view of a namespace's facts, keyed by storage timestamp."""

    def __init__(self):
        self._facts: Dict[str, Fact] = {}

    def put(self, fact: Fact):
        current = self._facts.get(fact.key)
        if current is None or fact.updated_at >= current.updated_at:
            self._facts[fact.key] = fact

    def get(self, key: str) -> Optional[Fact]:
        return self._facts.get(key)

    def with_prefix(self, prefix: str) -> List[Fact]:
        return [self._facts[k] for k in sorted(self._facts) if k.startswith(prefix)]

    def __len__(self) -> int:
        return len(self._facts)
