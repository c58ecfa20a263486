#!/usr/bin/env python3
"""
COLMA memory engine - Main entry point.
"""

import sys
import traceback
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.core.logger import StructuredLogger

log = StructuredLogger(__name__)

# Optional verbose test logging via CLI flag
if '--test-log' in sys.argv:
    sys.argv.remove('--test-log')
    try:
        from src.core.logger import enable_test_logging
        TEST_LOG = enable_test_logging(Path(__file__).parent)
        log.info("Test logging enabled", path=str(TEST_LOG))
    except Exception as _e:
        log.warning("Failed to enable test logging", error=str(_e))


def main() -> int:
    """Main entry point."""
    from src.cli import cli
    try:
        return cli(sys.argv[1:])
    except KeyboardInterrupt:
        log.info("Stopped by user")
        return 0
    except Exception as e:
        full_trace = traceback.format_exc()
        log.error(f"Unhandled error: {e}\nFull traceback:\n{full_trace}", exception=e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
