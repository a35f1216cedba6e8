"""
File operations module for writing run outputs and formatting values.
"""

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence, Union


def format_duration(seconds: float) -> str:
    """
    Convert a duration in seconds to human-readable format.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted string (e.g., "850 ms", "12.3 s", "4 min 05 s")
    """
    if seconds < 1:
        return f"{seconds * 1000:.0f} ms"
    elif seconds < 60:
        return f"{seconds:.1f} s"
    elif seconds < 3600:
        return f"{int(seconds // 60)} min {int(seconds % 60):02d} s"
    else:
        return f"{int(seconds // 3600)} h {int(seconds % 3600 // 60):02d} min"


def format_float(value: float) -> str:
    """
    Shortest text that parses back to exactly the same float.

    Args:
        value: Number to format

    Returns:
        repr-style string ('nan' and 'inf' for non-finite values)
    """
    value = float(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return repr(value)


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """
    Render rows as CSV text with '\\n' line endings.

    Floats use shortest round-trip formatting and booleans are written as
    true/false, so the same data always produces the same bytes.

    Args:
        header: Column names
        rows: Row values

    Returns:
        CSV document
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(value) for value in row])
    return buffer.getvalue()


def to_json_text(data: Any) -> str:
    """Stable JSON text (sorted keys, trailing newline)."""
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + '\n'


def config_hash(data: Any) -> str:
    """
    SHA-256 of the canonical JSON form of a config.

    Args:
        data: JSON-compatible config

    Returns:
        Hex digest
    """
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def atomic_write_bytes(file_path: Union[str, Path], data: bytes):
    """
    Write a file so that it appears complete or not at all.

    The data goes to a temporary file in the target directory which is then
    renamed over the final name.

    Args:
        file_path: Final path
        data: File contents

    Raises:
        OSError: If the file cannot be written
    """
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(temp_name, path)
    except BaseException:
        try:
            os.remove(temp_name)
        except OSError:
            pass
        raise


def atomic_write_text(file_path: Union[str, Path], text: str):
    """Text variant of atomic_write_bytes (UTF-8)."""
    atomic_write_bytes(file_path, text.encode('utf-8'))
