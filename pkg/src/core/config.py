"""
Configuration management for the COLMA memory engine.
"""

import os
from pathlib import Path
from typing import Dict, Any, Optional, List, Tuple, Union
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
import yaml
from dotenv import load_dotenv

from .exceptions import ConfigurationException
from .logger import StructuredLogger

log = StructuredLogger(__name__)

CONFIG_ENV_VAR = "COLMA_CONFIG"


class ServerConfig(BaseModel):
    """Server configuration."""
    name: str = Field(default="colma")
    version: str = Field(default="1.0.0")
    host: str = Field(default="127.0.0.1")
    port: int = Field(default=7411, ge=0, le=65535)
    log_level: str = Field(default="INFO", pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")
    log_format: Optional[str] = Field(default=None)
    log_dir: Optional[str] = Field(default=None)
    max_connections: int = Field(default=64, gt=0)
    max_line_bytes: int = Field(default=8 * 1024 * 1024, gt=0)
    tick_interval_seconds: float = Field(default=0.0, ge=0.0)


class StorageConfig(BaseModel):
    """Storage engine configuration."""
    data_dir: str = Field(default="./data")
    max_cell_bytes: int = Field(default=1024 * 1024, gt=0)  # 1 MiB
    grace_seconds: int = Field(default=86400, ge=0)
    retention_horizon_seconds: int = Field(default=604800, ge=0)
    memtable_flush_bytes: int = Field(default=4 * 1024 * 1024, gt=0)
    codec: int = Field(default=1, ge=0, le=1)
    block_entries: int = Field(default=128, gt=0)
    wal_fsync: bool = Field(default=False)
    auto_compact_segments: int = Field(default=8, ge=0)

    @field_validator('data_dir')
    @classmethod
    def expand_data_dir(cls, v):
        return str(Path(v).expanduser())


StoreConfig = StorageConfig


class RingConfig(BaseModel):
    """Placement ring for the simulated cluster."""
    model_config = ConfigDict(frozen=True)

    node_count: int = Field(default=1, gt=0)
    vnodes_per_node: int = Field(default=64, gt=0)
    replication_factor: int = Field(default=1, gt=0)
    node_ids: Optional[Tuple[str, ...]] = Field(default=None)

    @model_validator(mode='after')
    def check_replication(self):
        if self.replication_factor > self.node_count:
            raise ValueError("replication_factor must not exceed node_count")
        if self.node_ids is not None and len(set(self.node_ids)) != self.node_count:
            raise ValueError("node_ids must list node_count distinct ids")
        return self

    def nodes(self) -> List[str]:
        if self.node_ids is not None:
            return [str(n) for n in self.node_ids]
        return [f"node-{i}" for i in range(self.node_count)]


class HnswConfig(BaseModel):
    """Approximate index parameters."""
    m: int = Field(default=16, ge=2)
    ef_construction: int = Field(default=200, gt=0)
    ef_search: int = Field(default=64, gt=0)
    seed: int = Field(default=0)


class KnowledgeConfig(BaseModel):
    """Knowledge layer configuration."""
    default_dim: int = Field(default=64, gt=0)
    graph_enabled: bool = Field(default=True)
    knn_mode: str = Field(default="exact", pattern="^(exact|approx)$")
    hnsw: HnswConfig = Field(default_factory=HnswConfig)


class RetentionPolicy(BaseModel):
    """Consolidation and forgetting policy."""
    lambda_short: float = Field(default=2.0, gt=0)
    lambda_medium: float = Field(default=0.2, gt=0)
    lambda_long: float = Field(default=0.02, gt=0)
    promote_threshold: float = Field(default=0.6, gt=0, lt=1)
    archive_threshold: float = Field(default=0.05, gt=0, lt=1)
    short_capacity: int = Field(default=64, gt=0)
    w_recency: float = Field(default=0.3, ge=0)
    w_frequency: float = Field(default=0.3, ge=0)
    w_salience: float = Field(default=0.4, ge=0)

    @model_validator(mode='after')
    def check_ordering(self):
        if not self.lambda_short > self.lambda_medium > self.lambda_long:
            raise ValueError("decay rates must satisfy short > medium > long")
        if not self.archive_threshold < self.promote_threshold:
            raise ValueError("archive_threshold must be below promote_threshold")
        if abs(self.w_recency + self.w_frequency + self.w_salience - 1.0) > 1e-9:
            raise ValueError("retention weights must sum to 1")
        return self


class CognitionConfig(BaseModel):
    """Cognitive operation parameters."""
    recall_max_rounds: int = Field(default=5, gt=0)
    recall_accept_threshold: float = Field(default=0.7, ge=0, le=1)
    recall_knn_k: int = Field(default=16, gt=0)
    recall_reinforce: float = Field(default=0.05)
    hop_decay: float = Field(default=0.5, gt=0, le=1)
    max_hops: int = Field(default=3, gt=0, le=8)
    knn_weight: float = Field(default=0.8, ge=0, le=1)
    reason_max_depth: int = Field(default=4, gt=0)
    heuristic_confidence: float = Field(default=0.8, gt=0, le=1)
    ema_alpha: float = Field(default=0.2, gt=0, le=1)
    update_max_rounds: int = Field(default=3, gt=0)
    update_accept_q: float = Field(default=0.7, ge=0, le=1)
    update_reinforce: float = Field(default=0.05)


class SecurityConfig(BaseModel):
    """Security configuration."""
    enabled: bool = Field(default=True)
    auth_file: Optional[str] = Field(default="config/principals.json")
    audit: bool = Field(default=True)


class MonitoringConfig(BaseModel):
    """Monitoring configuration."""
    enabled: bool = Field(default=True)
    metrics_port: int = Field(default=0, ge=0, le=65535)


class Config(BaseModel):
    """Main configuration model."""
    server: ServerConfig = Field(default_factory=ServerConfig)
    storage: StorageConfig = Field(default_factory=StorageConfig)
    ring: RingConfig = Field(default_factory=RingConfig)
    knowledge: KnowledgeConfig = Field(default_factory=KnowledgeConfig)
    coordination: RetentionPolicy = Field(default_factory=RetentionPolicy)
    cognition: CognitionConfig = Field(default_factory=CognitionConfig)
    security: SecurityConfig = Field(default_factory=SecurityConfig)
    monitoring: MonitoringConfig = Field(default_factory=MonitoringConfig)

    def with_data_dir(self, data_dir: Union[str, Path]) -> 'Config':
        """Copy of this configuration pointing at another data directory."""
        storage = self.storage.model_copy(update={'data_dir': str(data_dir)})
        return self.model_copy(update={'storage': storage})


# environment variable -> dotted config key
ENV_OVERRIDES: Dict[str, str] = {
    'COLMA_LOG_LEVEL': 'server.log_level',
    'COLMA_LOG_DIR': 'server.log_dir',
    'COLMA_HOST': 'server.host',
    'COLMA_PORT': 'server.port',
    'COLMA_TICK_INTERVAL': 'server.tick_interval_seconds',
    'COLMA_DATA_DIR': 'storage.data_dir',
    'COLMA_WAL_FSYNC': 'storage.wal_fsync',
    'COLMA_GRAPH_ENABLED': 'knowledge.graph_enabled',
    'COLMA_KNN_MODE': 'knowledge.knn_mode',
    'COLMA_SECURITY_ENABLED': 'security.enabled',
    'COLMA_AUTH_FILE': 'security.auth_file',
    'COLMA_METRICS_PORT': 'monitoring.metrics_port',
}

SEARCH_PATHS = (
    Path("config/default.yaml"),
    Path(__file__).resolve().parents[2] / "config" / "default.yaml",
)


def _validated(data: Dict[str, Any], source: str) -> Config:
    try:
        return Config.model_validate(data)
    except ValidationError as e:
        raise ConfigurationException(f"Invalid configuration from {source}: {e}")


class ConfigManager:
    """YAML file, then ``COLMA_*`` environment overrides, validated as one ``Config``.

    The file is the explicit path, else ``$COLMA_CONFIG``, else the first
    ``config/default.yaml`` found; with none of them the defaults apply.
    A ``.env`` file in the working directory is read first.
    """

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        load_dotenv()
        self.config_path = self._resolve_config_path(config_path)
        self.config = self._load()

    def __getattr__(self, name: str):
        if name == 'config':
            raise AttributeError(name)
        return getattr(self.config, name)

    @staticmethod
    def _resolve_config_path(config_path: Optional[Union[str, Path]]) -> Optional[Path]:
        explicit = config_path or os.getenv(CONFIG_ENV_VAR)
        if explicit:
            path = Path(explicit)
            if not path.is_file():
                raise ConfigurationException(f"Configuration file not found: {path}", {'path': str(path)})
            return path
        found = next((p for p in SEARCH_PATHS if p.is_file()), None)
        if found is None:
            log.warning("No configuration file found, using defaults")
        else:
            log.debug("Configuration file located", path=str(found))
        return found

    def _read_file(self) -> Dict[str, Any]:
        if self.config_path is None:
            return {}
        try:
            data = yaml.safe_load(self.config_path.read_text()) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigurationException(f"Cannot read configuration {self.config_path}: {e}")
        if not isinstance(data, dict):
            raise ConfigurationException(f"Configuration {self.config_path} must be a mapping")
        return data

    def _load(self) -> Config:
        source = str(self.config_path or 'defaults')
        data = _validated(self._read_file(), source).model_dump()
        overridden = []
        for env_var, key in ENV_OVERRIDES.items():
            value = os.getenv(env_var)
            if value is None:
                continue
            section, field = key.split('.')
            data[section][field] = value
            overridden.append(key)
        config = _validated(data, 'environment') if overridden else Config.model_validate(data)
        for key in overridden:
            log.info("Configuration override", key=key)
        return config

    def get(self, path: str, default: Any = None) -> Any:
        """Value at a dotted path such as ``storage.data_dir``."""
        node: Any = self.config
        for key in path.split('.'):
            if not hasattr(node, key):
                return default
            node = getattr(node, key)
        return node

    def reload(self):
        self.config = self._load()
        log.info("Configuration reloaded", path=str(self.config_path))

    def to_dict(self) -> Dict[str, Any]:
        return self.config.model_dump()


_manager: Optional[ConfigManager] = None


def get_config() -> ConfigManager:
    """Process-wide manager, created on first use."""
    global _manager
    if _manager is None:
        _manager = ConfigManager()
    return _manager


def set_config(config_manager: Optional[ConfigManager]):
    global _manager
    _manager = config_manager
