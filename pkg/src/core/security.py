"""
Security management for the COLMA memory engine: token principals and namespace grants.
"""

import hashlib
import hmac
from enum import Enum
from fnmatch import fnmatchcase
from pathlib import Path
from typing import Dict, Any, Optional, List, Union

import aiofiles
import bcrypt
import jsonschema
import orjson
from pydantic import BaseModel, Field, ValidationError, model_validator

from .config import SecurityConfig
from .logger import StructuredLogger, AuditLogger
from .exceptions import (
    AuthenticationException,
    AuthorizationException,
    ConfigurationException,
)

log = StructuredLogger(__name__)


class Role(str, Enum):
    READER = "reader"
    WRITER = "writer"
    ADMIN = "admin"


READ_OPS = frozenset({
    'get_record', 'query_triples', 'knn', 'recall', 'associate', 'heuristic_suggest',
    'predict', 'neighbors', 'timeline', 'get_fact', 'stats', 'export',
})
# reason stores derivations, cases and strategy weights
WRITE_OPS = READ_OPS | frozenset({
    'put_record', 'encode', 'reason', 'assert_triple', 'retract_triple', 'link_record_entity',
    'put_fact', 'reinforce', 'reflect', 'update_memory', 'import',
})
ADMIN_OPS = WRITE_OPS | frozenset({
    'consolidate_tick', 'forget_tick', 'sync_delta', 'apply_delta',
})

ROLE_OPS = {
    Role.READER: READ_OPS,
    Role.WRITER: WRITE_OPS,
    Role.ADMIN: ADMIN_OPS,
}

PRINCIPALS_SCHEMA = {
    'type': 'array',
    'items': {
        'type': 'object',
        'required': ['role', 'namespaces'],
        'properties': {
            'name': {'type': 'string'},
            'token': {'type': 'string', 'minLength': 1},
            'token_hash': {'type': 'string', 'minLength': 1},
            'role': {'enum': [r.value for r in Role]},
            'namespaces': {'type': 'array', 'items': {'type': 'string', 'minLength': 1}},
        },
        'additionalProperties': False,
    },
}


class Principal(BaseModel):
    """A caller identity: one token, one role, a list of namespace globs."""
    name: Optional[str] = Field(default=None)
    token: Optional[str] = Field(default=None, repr=False)
    token_hash: Optional[str] = Field(default=None, repr=False)
    role: Role = Field(default=Role.READER)
    namespaces: List[str] = Field(default_factory=list)

    @model_validator(mode='after')
    def check_secret(self):
        if (self.token is None) == (self.token_hash is None):
            raise ValueError("a principal has exactly one of token or token_hash")
        return self

    @property
    def label(self) -> str:
        return self.name or f"{self.role.value}-principal"

    def grants(self, namespace: str) -> bool:
        return any(fnmatchcase(namespace, pattern) for pattern in self.namespaces)


ANONYMOUS = Principal(name="anonymous", token="", role=Role.ADMIN, namespaces=["*"])


def authorize(principal: Principal, namespace: str, op: str) -> bool:
    """Namespace grant first; then the role's operation set. Admins pass any role check."""
    if not principal.grants(namespace):
        return False
    if principal.role is Role.ADMIN:
        return True
    return op in ROLE_OPS[principal.role]


def hash_token(token: str) -> str:
    """bcrypt hash suitable for a ``token_hash`` entry."""
    return bcrypt.hashpw(token.encode('utf-8'), bcrypt.gensalt()).decode('utf-8')


def parse_principals(raw: Union[str, bytes]) -> List[Principal]:
    try:
        data = orjson.loads(raw)
        jsonschema.validate(data, PRINCIPALS_SCHEMA)
        return [Principal(**item) for item in data]
    except orjson.JSONDecodeError as e:
        raise ConfigurationException(f"Auth file is not valid JSON: {e}")
    except jsonschema.ValidationError as e:
        raise ConfigurationException(f"Invalid auth file: {e.message}")
    except ValidationError as e:
        raise ConfigurationException(f"Invalid principal: {e}")


class SecurityManager:
    """Resolves request tokens to principals and audits every decision."""

    def __init__(self, config: Optional[SecurityConfig] = None,
                 principals: Optional[List[Principal]] = None):
        self.config = config or SecurityConfig()
        self.audit_logger = AuditLogger(self.config.audit)
        self.principals: List[Principal] = list(principals or [])
        self._verified: Dict[bytes, int] = {}

    def load_principals(self, path: Optional[Union[str, Path]] = None) -> List[Principal]:
        path = Path(path or self.config.auth_file)
        try:
            raw = path.read_bytes()
        except OSError as e:
            raise ConfigurationException(f"Cannot read auth file {path}: {e}")
        self._install(parse_principals(raw), path)
        return self.principals

    async def load_principals_async(self, path: Optional[Union[str, Path]] = None) -> List[Principal]:
        path = Path(path or self.config.auth_file)
        try:
            async with aiofiles.open(path, 'rb') as f:
                raw = await f.read()
        except OSError as e:
            raise ConfigurationException(f"Cannot read auth file {path}: {e}")
        self._install(parse_principals(raw), path)
        return self.principals

    def _install(self, principals: List[Principal], path: Path):
        self.principals = principals
        self._verified.clear()
        log.info("Principals loaded", path=str(path), count=len(principals))

    def resolve(self, token: Optional[str]) -> Principal:
        """The single principal owning ``token``."""
        if not self.config.enabled:
            return ANONYMOUS
        if not token:
            raise AuthenticationException("A token is required")
        presented = token.encode('utf-8')
        digest = hashlib.sha256(presented).digest()
        cached = self._verified.get(digest)
        if cached is not None and cached < len(self.principals):
            return self.principals[cached]

        match = None
        # no early exit over plain tokens
        for i, principal in enumerate(self.principals):
            if principal.token is not None:
                if hmac.compare_digest(principal.token.encode('utf-8'), presented) and match is None:
                    match = i
        if match is None:
            for i, principal in enumerate(self.principals):
                if principal.token_hash is not None and bcrypt.checkpw(
                        presented, principal.token_hash.encode('utf-8')):
                    match = i
                    break
        if match is None:
            raise AuthenticationException("Unknown token")
        self._verified[digest] = match
        return self.principals[match]

    def check(self, token: Optional[str], namespace: str, op: str, peer: Optional[str] = None) -> Principal:
        """Resolve and authorize, raising on denial. Both outcomes are audited."""
        try:
            principal = self.resolve(token)
        except AuthenticationException:
            self.audit_logger.log_operation(None, op, namespace, 'unauthorized',
                                            {'token': token}, peer)
            raise
        if not authorize(principal, namespace, op):
            self.audit_logger.log_operation(principal.label, op, namespace, 'forbidden', None, peer)
            raise AuthorizationException(f"{op} is not permitted on namespace {namespace}")
        self.audit_logger.log_operation(principal.label, op, namespace, 'allowed', None, peer)
        return principal

    @staticmethod
    def hash_token(token: str) -> str:
        return hash_token(token)

    def describe(self) -> Dict[str, Any]:
        return {
            'enabled': self.config.enabled,
            'principals': [{'name': p.label, 'role': p.role.value, 'namespaces': p.namespaces}
                           for p in self.principals],
        }
