"""Result rows and deterministic CSV emission."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from pathlib import Path

NA = "NA"


@dataclass
class ResultRow:
    experiment: str
    curve: str
    channel: str
    snr_db: float | None
    pnr_db: float | None
    attack: str | None
    blocks: int | None
    errors: int | None
    bler: float | None
    ci95: float | None
    analytic_bler: float | None
    outage_prob: float | None
    seed: int
    config_hash: str

    def __post_init__(self):
        if self.blocks is not None and self.errors is not None:
            if not 0 <= self.errors <= self.blocks:
                raise ValueError("errors must lie in [0, blocks]")


COLUMNS = [f.name for f in fields(ResultRow)]


def bler_fields(errors: int, blocks: int) -> dict:
    p = errors / blocks
    return {"blocks": blocks, "errors": errors, "bler": p,
            "ci95": 1.96 * math.sqrt(p * (1.0 - p) / blocks)}


def fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv(rows, columns=None) -> str:
    """Rows are dataclasses or dicts; output uses LF line endings and NA for None."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if columns is None:
        columns = COLUMNS
    writer.writerow(columns)
    for row in rows:
        get = row.get if isinstance(row, dict) else lambda k, r=row: getattr(r, k)
        writer.writerow([fmt(get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_csv(rows, columns), encoding="utf-8", newline="")
    return path


class ProvenanceError(ValueError):
    pass


def merge_result_files(paths) -> str:
    """Concatenate result CSVs for plotting; refuses mixed config hashes."""
    header, rows, hashes = None, [], set()
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            file_header = next(reader)
            if "config_hash" not in file_header:
                raise ProvenanceError(f"{path} has no config_hash column")
            if header is None:
                header = file_header
            elif file_header != header:
                raise ProvenanceError(f"{path} has a different column layout")
            col = file_header.index("config_hash")
            for row in reader:
                hashes.add(row[col])
                rows.append(row)
    if header is None:
        raise ProvenanceError("no input files")
    if len(hashes) > 1:
        raise ProvenanceError(f"mixed provenance: config hashes {sorted(hashes)}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()
