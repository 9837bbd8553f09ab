"""Schema-versioned result files: delimited tables and JSON documents.

Every table starts with a ``# logbandit-schema N`` line followed by the
column header; readers refuse files whose version they do not know.
Floats are rendered with ``%.10g`` so identical computations produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import SchemaError

__all__ = [
    "SCHEMA_VERSION",
    "format_value",
    "write_table",
    "read_table",
    "write_json",
    "read_json",
]

SCHEMA_VERSION = 1
_HEADER_PREFIX = "# logbandit-schema "


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.10g" % value
    return str(value)


def write_table(path, columns, rows):
    """Write rows (dicts keyed by column) as versioned CSV."""
    lines = [_HEADER_PREFIX + str(SCHEMA_VERSION), ",".join(columns)]
    for row in rows:
        lines.append(",".join(format_value(row[c]) for c in columns))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path):
    """Read a versioned CSV back as (columns, rows of string dicts)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise SchemaError("%s: missing schema-version header" % path)
    try:
        version = int(lines[0][len(_HEADER_PREFIX):].strip())
    except ValueError:
        raise SchemaError("%s: malformed schema-version header" % path)
    if version != SCHEMA_VERSION:
        raise SchemaError("%s: unknown schema version %d" % (path, version))
    if len(lines) < 2:
        raise SchemaError("%s: missing column header" % path)
    columns = lines[1].split(",")
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(columns):
            raise SchemaError("%s: row width %d != %d columns" % (path, len(cells), len(columns)))
        rows.append(dict(zip(columns, cells)))
    return columns, rows


def write_json(path, payload):
    """Write a JSON document stamped with the schema version."""
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(payload)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError("%s: unknown schema version %r" % (path, doc.get("schema_version")))
    return doc
