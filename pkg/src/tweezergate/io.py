"""Plot-ready table output in CSV or JSON."""
import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

__all__ = ["Table", "emit", "format_value"]


@dataclass
class Table:
    """Named table with a fixed column order."""
    name: str
    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, **values):
        missing = set(self.columns) ^ set(values)
        if missing:
            raise ValueError(f"{self.name}: column mismatch {sorted(missing)}")
        self.rows.append(values)


def format_value(value):
    """CSV cell text; floats at 12 significant digits, lists joined by ';'."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, (list, tuple)):
        return ";".join(format_value(v) for v in value)
    if value is None:
        return ""
    if hasattr(value, "item"):          # numpy scalars
        return format_value(value.item())
    return str(value)


def _jsonable(value):
    if hasattr(value, "item") and not isinstance(value, (list, tuple, dict)):
        value = value.item()
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(format(value, ".12g"))
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def _csv_text(table):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_value(row[c]) for c in table.columns])
    return buf.getvalue()


def _json_text(table, metadata):
    doc = {"metadata": _jsonable(metadata),
           "data": [{c: _jsonable(row[c]) for c in table.columns} for row in table.rows]}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def emit(tables, out_dir, fmt="csv", metadata=None):
    """Write each table to ``out_dir/<name>.<fmt>``; returns the written paths.

    Raises
    ------
    OSError
        If the directory or a file cannot be written.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for table in tables:
        path = os.path.join(out_dir, f"{table.name}.{fmt}")
        text = _csv_text(table) if fmt == "csv" else _json_text(
            table, dict(metadata or {}, table=table.name))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        paths.append(path)
    return paths
