"""
Line-delimited JSON service over the memory engine.
"""

from .dispatcher import OPERATIONS, Dispatcher
from .protocol import PROTOCOL_VERSION, batch_from_wire, batch_to_wire, error_code
from .server import ColmaClient, ColmaServer, encode_line

__all__ = [
    'OPERATIONS',
    'Dispatcher',
    'PROTOCOL_VERSION',
    'batch_from_wire',
    'batch_to_wire',
    'error_code',
    'ColmaClient',
    'ColmaServer',
    'encode_line',
]
