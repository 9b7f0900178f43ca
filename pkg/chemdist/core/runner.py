"""
Runner - replicate farm and ordered CSV sink

Replicates are pure functions of (master seed, index), so they can run in any process.
Results come back in index order; the sink appends them as they arrive and keeps what was
written when a run is interrupted.
"""
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, TypeVar

from chemdist.core.config import worker_count
from chemdist.core.seeding import mix_seed

logger = logging.getLogger(__name__)

T = TypeVar("T")

HEADER_PREFIX = "# generated "


def replicate_seed(master: int, index: int, *tags: int) -> int:
    """Seed of replicate `index`; depends only on (master, tags, index)."""
    return mix_seed(master, *tags, index)


def map_replicates(task: Callable[[int], T], indices: Iterable[int], workers: Optional[int] = None) -> Iterator[T]:
    """
    Apply `task` to every replicate index, yielding results in index order.

    Args:
        task: Picklable callable (module-level function or functools.partial of one)
        indices: Replicate indices
        workers: Pool size; defaults to CHEMDIST_THREADS. One worker runs in-process.
    """
    indices = list(indices)
    workers = worker_count() if workers is None else max(1, workers)
    workers = min(workers, max(1, len(indices)))
    if workers == 1:
        for index in indices:
            yield task(index)
        return

    pool = ProcessPoolExecutor(max_workers=workers)
    try:
        chunk = max(1, len(indices) // (8 * workers))
        yield from pool.map(task, indices, chunksize=chunk)
    except BaseException:
        pool.shutdown(wait=False, cancel_futures=True)
        raise
    pool.shutdown()


def format_value(value: Any) -> str:
    """CSV cell: floats with 17 significant digits, booleans as 0/1, None as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


class CsvSink:
    """
    Append-only CSV writer with a timestamped comment line and a replicate-index column.

    With resume=True an existing file is kept and `completed` holds the keys (values of
    `key_fields`) of the rows already on disk; otherwise the file is truncated.
    """

    def __init__(
        self,
        path: str,
        fieldnames: Sequence[str],
        resume: bool = False,
        key_fields: Sequence[str] = ("replicate",),
        buffer_size: int = 64,
    ):
        self.path = path
        self.fieldnames = list(fieldnames)
        self.buffer_size = buffer_size
        self.buffer: List[Dict[str, Any]] = []
        self.key_fields = list(key_fields)
        self.completed: set = set()
        self._existing: List[Dict[str, str]] = []

        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        if resume and os.path.exists(path):
            self._existing = read_csv_rows(path)
            self.completed = {self.key(row) for row in self._existing}
            logger.warning("Resuming %s: %d rows already present", path, len(self._existing))
        else:
            with open(path, "w", newline="") as fh:
                fh.write(f"{HEADER_PREFIX}{datetime.now(timezone.utc).isoformat()}\n")
                csv.writer(fh).writerow(self.fieldnames)

    def key(self, row: Dict[str, Any]) -> tuple:
        return tuple(format_value(row.get(name)) for name in self.key_fields)

    def existing_rows(self) -> List[Dict[str, str]]:
        return list(self._existing)

    def write(self, row: Dict[str, Any]) -> None:
        self.buffer.append(row)
        if len(self.buffer) >= self.buffer_size:
            self.flush()

    def flush(self) -> None:
        if not self.buffer:
            return
        with open(self.path, "a", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.buffer:
                writer.writerow([format_value(row.get(name)) for name in self.fieldnames])
        self.buffer.clear()

    def __enter__(self) -> "CsvSink":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.flush()
        if exc_type is KeyboardInterrupt:
            logger.warning("Interrupted; partial results kept in %s", self.path)
        return False


def write_table(path: str, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    """Whole-table CSV (summaries and fits) with the timestamped comment line."""
    with CsvSink(path, fieldnames) as sink:
        for row in rows:
            sink.write(row)
    return path


def read_csv_rows(path: str) -> List[Dict[str, str]]:
    """Rows of a CSV written by CsvSink, comment lines skipped."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))
