"""
Administrative command line for the COLMA memory engine.
"""

import asyncio
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable, Iterator, List, Optional, Sequence

import click
import orjson
import yaml

from .core.config import CONFIG_ENV_VAR, Config, ConfigManager
from .core.exceptions import ColmaException, ProtocolException
from .core.logger import StructuredLogger, setup_logging
from .engine import MemoryEngine
from .scenarios import Scenario, eval_capabilities, run_scenario
from .service import ColmaClient, ColmaServer, Dispatcher
from .utils.serialization import canonical_json

log = StructuredLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ENGINE = 2


@dataclass
class CliContext:
    config: Config
    namespace: str
    token: Optional[str]
    fmt: str

    @contextmanager
    def dispatcher(self) -> Iterator[Dispatcher]:
        with MemoryEngine(self.config) as engine:
            yield Dispatcher(engine)

    def emit(self, data: Any, text: Optional[Callable[[Any], str]] = None):
        if self.fmt == 'json':
            click.echo(orjson.dumps(data, option=orjson.OPT_SORT_KEYS).decode('utf-8'))
        elif text is not None:
            click.echo(text(data))
        else:
            click.echo(yaml.safe_dump(data, sort_keys=True, allow_unicode=True).rstrip())


def _read_jsonl(stream) -> Iterator[Any]:
    for number, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith(b'#'):
            continue
        try:
            yield orjson.loads(line)
        except orjson.JSONDecodeError as e:
            raise click.UsageError(f"line {number}: invalid JSON ({e})")


def _payload(raw: Optional[str]) -> dict:
    if not raw:
        return {}
    try:
        payload = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise click.UsageError(f"PAYLOAD is not valid JSON: {e}")
    if not isinstance(payload, dict):
        raise click.UsageError("PAYLOAD must be a JSON object")
    return payload


@click.group(context_settings={'help_option_names': ['-h', '--help']})
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), envvar=CONFIG_ENV_VAR,
              help="YAML configuration file (falls back to $COLMA_CONFIG).")
@click.option('--namespace', default='default', show_default=True, help="Target namespace.")
@click.option('--token', default=None, help="Token presented to a remote service.")
@click.option('--format', 'fmt', type=click.Choice(['json', 'text']), default='json', show_default=True)
@click.option('--data-dir', type=click.Path(file_okay=False), default=None,
              help="Override storage.data_dir.")
@click.pass_context
def colma(ctx: click.Context, config_path: Optional[str], namespace: str, token: Optional[str],
          fmt: str, data_dir: Optional[str]):
    """Hierarchical memory engine."""
    config = ConfigManager(config_path).config
    if data_dir is not None:
        config = config.with_data_dir(data_dir)
    setup_logging(config.server, config.security)
    ctx.obj = CliContext(config, namespace, token, fmt)


@colma.command()
@click.option('--host', default=None)
@click.option('--port', type=int, default=None)
@click.pass_obj
def serve(obj: CliContext, host: Optional[str], port: Optional[int]):
    """Run the line-protocol service until interrupted."""
    updates = {k: v for k, v in (('host', host), ('port', port)) if v is not None}
    config = obj.config
    if updates:
        config = config.model_copy(update={'server': config.server.model_copy(update=updates)})

    async def run():
        server = ColmaServer(config)
        try:
            await server.serve_forever()
        finally:
            await server.stop()
            server.engine.close()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        log.info("Server stopped by user")


@colma.command()
@click.argument('source', type=click.File('rb'), default='-')
@click.option('--encode', 'through_coordinator', is_flag=True,
              help="Route each line through the coordinator as a stimulus.")
@click.pass_obj
def ingest(obj: CliContext, source, through_coordinator: bool):
    """Store JSON Lines records from SOURCE (standard input by default)."""
    op = 'encode' if through_coordinator else 'put_record'
    ids: List[str] = []
    with obj.dispatcher() as dispatcher:
        for row in _read_jsonl(source):
            if not isinstance(row, dict):
                raise click.UsageError("each line must be a JSON object")
            result = dispatcher.call(op, obj.namespace, row)
            ids.append(result['id'])
    obj.emit({'namespace': obj.namespace, 'ingested': len(ids), 'ids': ids},
             lambda d: f"ingested {d['ingested']} records into {d['namespace']}")


@colma.command()
@click.argument('op')
@click.argument('payload', required=False)
@click.option('--connect', default=None, metavar='HOST:PORT', help="Send to a running service.")
@click.pass_obj
def query(obj: CliContext, op: str, payload: Optional[str], connect: Optional[str]):
    """Run one operation OP with a JSON object PAYLOAD."""
    body = _payload(payload)
    if connect is None:
        with obj.dispatcher() as dispatcher:
            result = dispatcher.call(op, obj.namespace, body)
        obj.emit(result)
        return

    host, _, port = connect.rpartition(':')
    if not host or not port.isdigit():
        raise click.UsageError("--connect expects HOST:PORT")

    async def remote():
        async with ColmaClient(host, int(port), obj.token) as client:
            return await client.request(op, obj.namespace, body)

    response = asyncio.run(remote())
    if response['status'] != 'ok':
        error = response['error']
        raise ProtocolException(error['message'], code=error['code'], details=error.get('details'))
    obj.emit(response['payload'])


@colma.command()
@click.option('--kind', type=click.Choice(['consolidate', 'forget', 'both']), default='both',
              show_default=True)
@click.option('--now', type=int, default=None, help="Tick time in microseconds.")
@click.pass_obj
def tick(obj: CliContext, kind: str, now: Optional[int]):
    """Run consolidation and/or forgetting on the namespace."""
    out = {}
    with obj.dispatcher() as dispatcher:
        if kind in ('consolidate', 'both'):
            out['consolidate'] = dispatcher.call('consolidate_tick', obj.namespace, {'now': now})
        if kind in ('forget', 'both'):
            out['forget'] = dispatcher.call('forget_tick', obj.namespace, {'now': now})
    obj.emit(out)


@colma.command('export')
@click.argument('target', type=click.File('wb'), default='-')
@click.pass_obj
def export_cmd(obj: CliContext, target):
    """Write the namespace as JSON Lines to TARGET (standard output by default)."""
    with MemoryEngine(obj.config) as engine:
        knowledge = engine.namespace(obj.namespace).knowledge
        for row in knowledge.export_rows():
            target.write(canonical_json(row) + b'\n')
    target.flush()


@colma.command('import')
@click.argument('source', type=click.File('rb'), default='-')
@click.pass_obj
def import_cmd(obj: CliContext, source):
    """Load JSON Lines written by ``export`` into the namespace."""
    rows = list(_read_jsonl(source))
    dim = next((row.get('dim') for row in rows if isinstance(row, dict) and row.get('kind') == 'meta'), None)
    with MemoryEngine(obj.config) as engine:
        counts = engine.namespace(obj.namespace, dim).knowledge.import_rows(rows)
    obj.emit(counts)


@colma.command()
@click.argument('which', type=click.Choice([s.value for s in Scenario]))
@click.option('--seed', type=int, default=0, show_default=True)
@click.pass_obj
def scenario(obj: CliContext, which: str, seed: int):
    """Run scenario WHICH on a throwaway engine and print its transcript."""
    transcript = run_scenario(which, seed, config=obj.config)
    if obj.fmt == 'json':
        sys.stdout.buffer.write(transcript.to_jsonl())
        sys.stdout.buffer.flush()
        return
    for step in transcript.steps:
        click.echo(f"{step.op}: {orjson.dumps(step.outputs, option=orjson.OPT_SORT_KEYS).decode()}")
    click.echo(f"assertions passed: {transcript.assertions_passed}")


def _report_text(report: dict) -> str:
    lines = [f"{name:<14} {status}" for name, status in report['dimensions'].items()]
    lines.append(f"supported {report['supported']}/{report['total']}")
    for name, note in report['footnotes'].items():
        lines.append(f"  [{name}] {note}")
    return "\n".join(lines)


@colma.command('eval')
@click.pass_obj
def eval_cmd(obj: CliContext):
    """Exercise the twelve capability dimensions and print the matrix."""
    report = eval_capabilities(obj.config)
    obj.emit(report.to_dict(), _report_text)


@colma.command()
@click.option('--all', 'everything', is_flag=True, help="Every namespace, not only --namespace.")
@click.pass_obj
def stats(obj: CliContext, everything: bool):
    """Storage and namespace counters."""
    with MemoryEngine(obj.config) as engine:
        obj.emit(engine.stats(None if everything else obj.namespace))


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit code."""
    try:
        result = colma.main(args=list(argv) if argv is not None else None, prog_name='colma',
                            standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except ColmaException as e:
        log.error(f"{type(e).__name__}: {e.message}", details=e.details)
        click.echo(f"error: {e.message}", err=True)
        return EXIT_ENGINE
    return result if isinstance(result, int) else EXIT_OK
