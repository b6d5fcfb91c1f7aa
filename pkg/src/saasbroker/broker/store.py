"""Append-only JSON-lines persistence, one log per entity family."""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path
from typing import Iterator

log = logging.getLogger(__name__)

FAMILIES = ("providers", "profiles", "sessions", "slas", "metrics", "mappings", "policies")


class EventLog:
    """A single-writer JSON-lines log. Writes are serialised by a lock and fsynced."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n"
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())

    def replay(self) -> Iterator[dict]:
        if not self.path.exists():
            return
        with self.path.open(encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError:
                    # a torn final write after a crash; earlier events stand
                    log.warning("%s:%d: skipping unreadable event", self.path, n)


class Store:
    """In-memory index over the event logs in ``data_dir``, rebuilt on open.

    Every family maps key -> latest value, except ``metrics`` which
    accumulates lists of sample dicts per SLA.
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.logs = {f: EventLog(self.data_dir / f"{f}.jsonl") for f in FAMILIES}
        self.tables: dict[str, dict[str, object]] = {f: {} for f in FAMILIES}
        self._locks = {f: threading.Lock() for f in FAMILIES}
        self._replay()

    def _replay(self) -> None:
        for family, log_ in self.logs.items():
            table = self.tables[family]
            for event in log_.replay():
                key, value = event.get("key"), event.get("value")
                if family == "metrics":
                    table.setdefault(key, []).extend(value)
                else:
                    table[key] = value

    def put(self, family: str, key: str, value) -> None:
        with self._locks[family]:
            self.logs[family].append({"op": "put", "key": key, "value": value})
            self.tables[family][key] = value

    def extend(self, family: str, key: str, values: list) -> None:
        with self._locks[family]:
            self.logs[family].append({"op": "extend", "key": key, "value": values})
            self.tables[family].setdefault(key, []).extend(values)

    def get(self, family: str, key: str, default=None):
        return self.tables[family].get(key, default)

    def all(self, family: str) -> dict:
        return dict(self.tables[family])
