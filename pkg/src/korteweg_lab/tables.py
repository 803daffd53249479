"""Result tables shared by the verifiers and the command line runner."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

REPORT_COLUMNS = ("j", "eps", "regime", "fitted_C", "argmax_t")


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if hasattr(v, "item"):
        return _clean(v.item())
    return v


@dataclass
class ResultTable:
    """Named columns and rows, plus metadata that is not serialized row-wise."""

    columns: Sequence[str]
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, **row: Any) -> None:
        missing = set(self.columns) - set(row)
        extra = set(row) - set(self.columns)
        if missing or extra:
            raise KeyError(f"row keys do not match columns (missing={sorted(missing)}, extra={sorted(extra)})")
        self.rows.append({c: row[c] for c in self.columns})

    def extend(self, rows: Iterable[dict]) -> None:
        for r in rows:
            self.add(**r)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)

    def with_column(self, name: str, value: Any) -> "ResultTable":
        """Copy with a constant column appended (used for the config hash)."""
        out = ResultTable(tuple(self.columns) + (name,), [], dict(self.metadata))
        for r in self.rows:
            out.rows.append({**r, name: value})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([{c: _clean(r[c]) for c in self.columns} for r in self.rows], indent=2) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_table() -> ResultTable:
    return ResultTable(REPORT_COLUMNS)
