"""Deterministic file writing: CSV with metadata header lines, atomic rename.

Output files embed run metadata as ``# key=value`` comment lines above the
CSV header so that reruns with the same configuration are byte-identical and
self-describing.  Floats are written with ``repr`` (shortest round-trip), so
loading a written file recovers the exact values.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from typing import Iterable, Mapping, Sequence


def format_value(v) -> str:
    if isinstance(v, float):
        # normalize numpy scalars; their repr carries the type name
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def metadata_lines(metadata: Mapping | None) -> str:
    if not metadata:
        return ""
    return "".join(f"# {k}={format_value(v)}\n" for k, v in metadata.items())


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], metadata: Mapping | None = None) -> None:
    lines = [metadata_lines(metadata)]
    lines.append(",".join(header) + "\n")
    for row in rows:
        lines.append(",".join(format_value(v) for v in row) + "\n")
    atomic_write_text(path, "".join(lines))


def write_json(path, payload, metadata: Mapping | None = None) -> None:
    if metadata:
        payload = {"metadata": dict(metadata), **payload}
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def config_hash(config: Mapping) -> str:
    """Stable sha256 of a JSON-serializable mapping (sorted keys)."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
