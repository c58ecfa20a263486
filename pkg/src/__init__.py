"""
COLMA - A hierarchical memory engine for cognitive agents.
"""

__version__ = "1.0.0"
__author__ = "COLMA Team"

from .core import (
    # Exceptions
    ColmaException,
    StorageException,
    IntegrityException,
    ValidationException,
    ConfigurationException,
    NotFoundException,
    VersionConflictException,
    CapabilityDisabledException,
    SecurityException,
    AuthenticationException,
    AuthorizationException,
    ProtocolException,
    ScenarioException,

    # Core components
    StructuredLogger,
    AuditLogger,
    setup_logging,
    Config,
    ConfigManager,
    get_config,
    SecurityManager,
    Principal,
    Role,
)

from .engine import MemoryEngine, NamespaceEngine

from .monitoring import MetricsCollector

__all__ = [
    # Version
    '__version__',
    '__author__',

    # Exceptions
    'ColmaException',
    'StorageException',
    'IntegrityException',
    'ValidationException',
    'ConfigurationException',
    'NotFoundException',
    'VersionConflictException',
    'CapabilityDisabledException',
    'SecurityException',
    'AuthenticationException',
    'AuthorizationException',
    'ProtocolException',
    'ScenarioException',

    # Core
    'StructuredLogger',
    'AuditLogger',
    'setup_logging',
    'Config',
    'ConfigManager',
    'get_config',
    'SecurityManager',
    'Principal',
    'Role',

    # Engine
    'MemoryEngine',
    'NamespaceEngine',

    # Monitoring
    'MetricsCollector',
]
