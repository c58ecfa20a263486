"""
Core functionality for the COLMA memory engine.
"""

from .exceptions import (
    ColmaException,
    StorageException,
    IntegrityException,
    StoreClosedException,
    CellTooLargeException,
    ValidationException,
    DimensionMismatchException,
    RuleException,
    ConfigurationException,
    NotFoundException,
    VersionConflictException,
    CapabilityDisabledException,
    SecurityException,
    AuthenticationException,
    AuthorizationException,
    ProtocolException,
    ScenarioException,
    DirtyNamespaceException,
    ScenarioAssertionError,
)

from .logger import (
    StructuredLogger,
    AuditLogger,
    setup_logging
)

from .config import (
    Config,
    ConfigManager,
    get_config,
    set_config,
    ServerConfig,
    StorageConfig,
    RingConfig,
    HnswConfig,
    KnowledgeConfig,
    RetentionPolicy,
    CognitionConfig,
    SecurityConfig,
    MonitoringConfig,
)

from .security import (
    SecurityManager,
    Principal,
    Role,
    authorize,
    hash_token,
)

__all__ = [
    # Exceptions
    'ColmaException',
    'StorageException',
    'IntegrityException',
    'StoreClosedException',
    'CellTooLargeException',
    'ValidationException',
    'DimensionMismatchException',
    'RuleException',
    'ConfigurationException',
    'NotFoundException',
    'VersionConflictException',
    'CapabilityDisabledException',
    'SecurityException',
    'AuthenticationException',
    'AuthorizationException',
    'ProtocolException',
    'ScenarioException',
    'DirtyNamespaceException',
    'ScenarioAssertionError',

    # Logger
    'StructuredLogger',
    'AuditLogger',
    'setup_logging',

    # Config
    'Config',
    'ConfigManager',
    'get_config',
    'set_config',
    'ServerConfig',
    'StorageConfig',
    'RingConfig',
    'HnswConfig',
    'KnowledgeConfig',
    'RetentionPolicy',
    'CognitionConfig',
    'SecurityConfig',
    'MonitoringConfig',

    # Security
    'SecurityManager',
    'Principal',
    'Role',
    'authorize',
    'hash_token',
]
