"""
Logging for the COLMA memory engine: loguru sinks, structured and audit loggers.
"""

import sys
import traceback
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Optional, Union

import orjson
from loguru import logger

if TYPE_CHECKING:
    from .config import SecurityConfig, ServerConfig

DEFAULT_FORMAT = ('{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | '
                  '{extra[name]}:{function}:{line} - {message} | {extra}')
AUDIT_FORMAT = '{time:YYYY-MM-DD HH:mm:ss} | AUDIT | {message}'
MASK = '***MASKED***'

logger.configure(extra={'name': 'colma'})


class LoggerConfig:
    """Installs the stderr sink and, with ``log_dir`` set, rotating engine and audit files."""

    def __init__(self, server: 'ServerConfig', security: Optional['SecurityConfig'] = None):
        self.server = server
        self.security = security
        self._setup_logger()

    @property
    def level(self) -> str:
        return self.server.log_level

    @property
    def verbose(self) -> bool:
        return self.level == 'DEBUG'

    def _setup_logger(self):
        logger.remove()
        log_format = self.server.log_format or DEFAULT_FORMAT
        logger.add(sys.stderr, format=log_format, level=self.level, colorize=True,
                   backtrace=self.verbose, diagnose=self.verbose, enqueue=True)

        if not self.server.log_dir:
            return
        log_dir = Path(self.server.log_dir).expanduser()
        log_dir.mkdir(parents=True, exist_ok=True)
        self._rotating(log_dir / 'colma_{time:YYYY-MM-DD}.log', log_format, self.level,
                       backtrace=self.verbose, diagnose=self.verbose, enqueue=True)
        if self.security is None or self.security.audit:
            self._rotating(log_dir / 'audit_{time:YYYY-MM-DD}.log', AUDIT_FORMAT, 'INFO',
                           filter=lambda record: 'audit' in record['extra'])

    @staticmethod
    def _rotating(path: Path, log_format: str, level: str, **options):
        logger.add(path, rotation='1 day', retention='30 days', compression='zip',
                   format=log_format, level=level, **options)


def mask_sensitive(data: Any, fields=('password', 'token', 'api_key', 'secret', 'credential')) -> Any:
    """Copy of ``data`` with values under credential-like keys replaced."""
    if isinstance(data, dict):
        return {key: MASK if any(f in str(key).lower() for f in fields) else mask_sensitive(value, fields)
                for key, value in data.items()}
    if isinstance(data, list):
        return [mask_sensitive(item, fields) for item in data]
    return data


class AuditLogger:
    """One JSON line per authorization decision, credentials masked."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.logger = logger.bind(audit=True, name='audit')

    def log_operation(self,
                      principal: Optional[str],
                      action: str,
                      namespace: str,
                      result: str,
                      details: Optional[Dict[str, Any]] = None,
                      peer: Optional[str] = None):
        if not self.enabled:
            return
        entry = mask_sensitive({
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'principal': principal or 'anonymous',
            'action': action,
            'namespace': namespace,
            'result': result,
            'peer': peer,
            'details': details or {},
        })
        line = orjson.dumps(entry, option=orjson.OPT_SORT_KEYS, default=str).decode('utf-8')
        self.logger.info(f"AUDIT: {line}")


class StructuredLogger:
    """Module logger taking keyword context: ``log.info("segment sealed", segment_id=3)``."""

    def __init__(self, name: str):
        self.logger = logger.bind(name=name)

    def debug(self, message: str, **kwargs):
        self._emit('DEBUG', message, None, kwargs)

    def info(self, message: str, **kwargs):
        self._emit('INFO', message, None, kwargs)

    def warning(self, message: str, **kwargs):
        self._emit('WARNING', message, None, kwargs)

    def error(self, message: str, exception: Optional[Exception] = None, **kwargs):
        self._emit('ERROR', message, exception, kwargs)

    def critical(self, message: str, exception: Optional[Exception] = None, **kwargs):
        self._emit('CRITICAL', message, exception, kwargs)

    def _emit(self, level: str, message: str, exception: Optional[Exception], context: Dict[str, Any]):
        extra = {k: v for k, v in context.items() if v is not None}
        if exception is not None:
            extra.update(exception_type=type(exception).__name__,
                         exception_message=str(exception),
                         traceback=traceback.format_exc())
        self.logger.bind(**extra).opt(depth=2).log(level, message)


def setup_logging(server: 'ServerConfig', security: Optional['SecurityConfig'] = None):
    LoggerConfig(server, security)


def enable_test_logging(project_root: Optional[Union[str, Path]] = None,
                        level: str = 'DEBUG') -> Path:
    """Add a verbose sink writing to ``logs/test_<utc stamp>.log`` and return its path."""
    logs_dir = (Path(project_root) if project_root else Path.cwd()) / 'logs'
    logs_dir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime('%Y%m%d_%H%M%S_%f')
    log_path = logs_dir / f'test_{stamp}.log'
    logger.add(log_path, level=level, backtrace=True, diagnose=True, enqueue=True,
               format=('{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {thread.name}:{thread.id} | '
                       '{extra[name]}:{function}:{line} - {message} | {extra}'))
    return log_path
