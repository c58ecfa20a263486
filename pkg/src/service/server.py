"""
Asyncio NDJSON server in front of the memory engine.
"""

import asyncio
from typing import Any, Dict, List, Optional

import orjson

from ..core.config import Config
from ..core.logger import StructuredLogger
from ..core.security import SecurityManager
from ..engine import MemoryEngine
from ..monitoring.metrics import MetricsCollector
from .dispatcher import Dispatcher
from .protocol import error_response

log = StructuredLogger(__name__)


def encode_line(message: Dict[str, Any]) -> bytes:
    return orjson.dumps(message) + b'\n'


class ColmaServer:
    """One request per line, one response per line, in order, per connection."""

    def __init__(self, config: Config, engine: Optional[MemoryEngine] = None,
                 security: Optional[SecurityManager] = None,
                 metrics: Optional[MetricsCollector] = None):
        log.debug("ColmaServer.__init__ called")
        self.config = config
        self.engine = engine or MemoryEngine(config)
        self.security = security or SecurityManager(config.security)
        self.metrics = metrics or MetricsCollector(config.monitoring)
        self.dispatcher = Dispatcher(self.engine, self.security, self.metrics)
        self._server: Optional[asyncio.base_events.Server] = None
        self._tick_task: Optional[asyncio.Task] = None
        self._connections = 0
        log.debug("Dispatcher created", security=self.security.config.enabled)

    @property
    def port(self) -> int:
        if self._server is None or not self._server.sockets:
            return self.config.server.port
        return self._server.sockets[0].getsockname()[1]

    async def start(self):
        server_config = self.config.server
        if self.security.config.enabled and not self.security.principals:
            await self.security.load_principals_async()
        self._server = await asyncio.start_server(
            self._handle_connection, server_config.host, server_config.port,
            limit=server_config.max_line_bytes)
        if self.config.monitoring.enabled:
            self.metrics.start_http()
        if server_config.tick_interval_seconds > 0:
            self._tick_task = asyncio.create_task(self._tick_loop(server_config.tick_interval_seconds))
        log.info("Server listening", host=server_config.host, port=self.port)

    async def serve_forever(self):
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self):
        if self._tick_task is not None:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
            self._tick_task = None
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        log.info("Server stopped")

    async def _tick_loop(self, interval: float):
        loop = asyncio.get_running_loop()
        while True:
            await asyncio.sleep(interval)
            try:
                # ticks never overlap
                await loop.run_in_executor(None, self.dispatcher.run_ticks)
            except Exception as e:
                log.error(f"Tick failed: {e}", exception=e)

    async def _handle_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        peername = writer.get_extra_info('peername')
        peer = f"{peername[0]}:{peername[1]}" if isinstance(peername, tuple) else str(peername)
        if self._connections >= self.config.server.max_connections:
            writer.write(encode_line(error_response(None, 'too_many_connections', "Too many connections")))
            await writer.drain()
            writer.close()
            return
        self._connections += 1
        log.debug("Connection opened", peer=peer)
        loop = asyncio.get_running_loop()
        try:
            while True:
                try:
                    line = await reader.readline()
                except (ValueError, asyncio.LimitOverrunError):
                    writer.write(encode_line(error_response(
                        None, 'bad_request',
                        f"Request exceeds {self.config.server.max_line_bytes} bytes")))
                    await writer.drain()
                    break
                if not line:
                    break
                if not line.strip():
                    continue
                response = await loop.run_in_executor(None, self.dispatcher.handle_line, line, peer)
                writer.write(encode_line(response))
                await writer.drain()
        except ConnectionError as e:
            log.debug("Connection lost", peer=peer, error=str(e))
        finally:
            self._connections -= 1
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass
            log.debug("Connection closed", peer=peer)


class ColmaClient:
    """Minimal line client, used by the CLI and the tests."""

    def __init__(self, host: str, port: int, token: Optional[str] = None):
        self.host = host
        self.port = port
        self.token = token
        self._reader: Optional[asyncio.StreamReader] = None
        self._writer: Optional[asyncio.StreamWriter] = None
        self._next_id = 0

    async def connect(self):
        self._reader, self._writer = await asyncio.open_connection(self.host, self.port)

    async def close(self):
        if self._writer is not None:
            self._writer.close()
            await self._writer.wait_closed()
            self._writer = None

    async def send_raw(self, line: bytes) -> Dict[str, Any]:
        self._writer.write(line if line.endswith(b'\n') else line + b'\n')
        await self._writer.drain()
        return orjson.loads(await self._reader.readline())

    async def request(self, op: str, namespace: str, payload: Optional[Dict[str, Any]] = None,
                      token: Optional[str] = None) -> Dict[str, Any]:
        self._next_id += 1
        message = {'v': 1, 'op': op, 'namespace': namespace, 'payload': payload or {},
                   'request_id': self._next_id, 'token': token if token is not None else self.token}
        return await self.send_raw(encode_line(message))

    async def pipeline(self, messages: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
        """Write every request before reading any response."""
        for message in messages:
            self._writer.write(encode_line(message))
        await self._writer.drain()
        return [orjson.loads(await self._reader.readline()) for _ in messages]

    async def __aenter__(self) -> 'ColmaClient':
        await self.connect()
        return self

    async def __aexit__(self, *exc):
        await self.close()
