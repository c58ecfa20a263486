"""
Canonical JSON encoding used wherever byte equality matters.
"""

import base64
import hashlib
from typing import Any

import orjson

from ..core.exceptions import ValidationException

_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def canonical_json(obj: Any) -> bytes:
    """Sorted keys, no insignificant whitespace, UTF-8."""
    try:
        return orjson.dumps(obj, option=_OPTIONS)
    except TypeError as e:
        raise ValidationException(f"Value is not JSON serializable: {e}")


def canonical_dumps(obj: Any) -> str:
    return canonical_json(obj).decode('utf-8')


def loads(data: Any) -> Any:
    try:
        return orjson.loads(data)
    except orjson.JSONDecodeError as e:
        raise ValidationException(f"Malformed JSON: {e}")


def digest(obj: Any) -> str:
    """SHA-256 hex digest of the canonical encoding."""
    return hashlib.sha256(canonical_json(obj)).hexdigest()


def b64encode(data: bytes) -> str:
    return base64.b64encode(data).decode('ascii')


def b64decode(text: str) -> bytes:
    try:
        return base64.b64decode(text.encode('ascii'), validate=True)
    except (ValueError, UnicodeEncodeError) as e:
        raise ValidationException(f"Invalid base64 payload: {e}")
