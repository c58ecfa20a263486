"""
Assembled memory engine: one store shared by per-namespace layer stacks.
"""

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

from .cognition.layer import CognitionLayer
from .coordination.coordinator import Coordinator
from .core.config import Config
from .core.exceptions import DimensionMismatchException, ValidationException
from .core.logger import StructuredLogger
from .knowledge.layer import META, KnowledgeLayer
from .storage.store import Store
from .utils.clock import Clock, SystemClock
from .utils.ids import IdFactory

log = StructuredLogger(__name__)


@dataclass
class NamespaceEngine:
    """Layers of one namespace. Writers and ticks share ``lock``."""
    name: str
    knowledge: KnowledgeLayer
    coordinator: Coordinator
    cognition: CognitionLayer
    lock: threading.RLock


class MemoryEngine:
    def __init__(self, config: Optional[Config] = None, clock: Optional[Clock] = None,
                 id_factory: Optional[Callable[[], str]] = None,
                 data_dir: Optional[Union[str, Path]] = None):
        self.config = config or Config()
        self.clock = clock or SystemClock()
        self.id_factory = id_factory or IdFactory()
        self.store = Store.open(self.config.storage, self.clock, data_dir)
        self._namespaces: Dict[str, NamespaceEngine] = {}
        self._lock = threading.Lock()
        log.info("Memory engine opened", data_dir=str(self.store.directory),
                 graph_enabled=self.config.knowledge.graph_enabled)

    def namespace(self, name: str, dim: Optional[int] = None) -> NamespaceEngine:
        """Layer stack of a namespace, creating the namespace on first use."""
        if not name or '\x1f' in name:
            raise ValidationException(f"Invalid namespace {name!r}")
        with self._lock:
            stack = self._namespaces.get(name)
            if stack is not None:
                if dim is not None and dim != stack.knowledge.dim:
                    raise DimensionMismatchException(
                        f"Namespace {name} has dimension {stack.knowledge.dim}, requested {dim}",
                        {"namespace": name, "expected": stack.knowledge.dim})
                return stack
            lock = threading.RLock()
            knowledge = KnowledgeLayer(self.store, name, self.config.knowledge, self.clock,
                                       self.id_factory, dim, lock)
            coordinator = Coordinator(knowledge, self.config.coordination)
            cognition = CognitionLayer(knowledge, coordinator, self.config.cognition)
            stack = NamespaceEngine(name, knowledge, coordinator, cognition, lock)
            self._namespaces[name] = stack
            log.debug("Namespace opened", namespace=name, dim=knowledge.dim)
            return stack

    def namespaces(self) -> List[str]:
        """Namespaces present in storage or opened in this process."""
        found = set(self._namespaces)
        for partition, _ in self.store.iter_visible():
            if partition.entity == META:
                found.add(partition.namespace)
        return sorted(found)

    def stats(self, namespace: Optional[str] = None) -> Dict[str, object]:
        out: Dict[str, object] = {'storage': self.store.stats()}
        names = self.namespaces()
        if namespace is not None:
            names = [n for n in names if n == namespace]
        out['namespaces'] = {name: self.namespace(name).knowledge.stats() for name in names}
        return out

    def close(self):
        self.store.close()
        log.info("Memory engine closed")

    def __enter__(self) -> 'MemoryEngine':
        return self

    def __exit__(self, *exc):
        self.close()
