"""Deterministic CSV/JSON writers and gnuplot script emission.

Every file starts with a provenance block (tool version, config hash, seed):
``#`` comment lines for CSV and gnuplot, a ``meta`` object for JSON.  Floats
are written with ``repr`` so output is byte-stable and round-trips exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__

__all__ = ["Provenance", "config_hash", "write_csv", "write_json", "write_gnuplot", "to_jsonable"]


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    seed: int | None = None
    command: str = ""

    def lines(self) -> list[str]:
        out = [f"tool: dtdq_aoi {__version__}", f"config_sha256: {self.config_hash}"]
        out.append(f"seed: {self.seed if self.seed is not None else 'none'}")
        if self.command:
            out.append(f"command: {self.command}")
        return out

    def as_dict(self) -> dict:
        return {
            "tool": "dtdq_aoi",
            "version": __version__,
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "command": self.command,
        }


def to_jsonable(value):
    """Plain-Python copy of ``value`` (numpy scalars/arrays, tuples, NaN -> None)."""
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(val) for val in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(val) for val in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if hasattr(value, "value") and hasattr(value, "name"):
        return value.value
    return value


def config_hash(document) -> str:
    canonical = json.dumps(to_jsonable(document), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else "nan"
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], prov: Provenance) -> Path:
    """Comma separated, ``.`` decimals, LF endings, ``#`` provenance lines then a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {line}" for line in prov.lines()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return path


def write_records_csv(path, records: Sequence[Mapping], prov: Provenance) -> Path:
    header = list(records[0].keys()) if records else []
    return write_csv(path, header, ([rec.get(col) for col in header] for rec in records), prov)


def write_json(path, document: Mapping, prov: Provenance) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"meta": prov.as_dict(), **to_jsonable(document)}
    path.write_bytes((json.dumps(body, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return path


@dataclass
class Series:
    """One gnuplot curve: a CSV file and the columns to plot."""

    data: str
    x: str
    y: str
    title: str
    style: str = "linespoints"
    where: str = ""


def write_gnuplot(
    path,
    series: Sequence[Series],
    prov: Provenance,
    title: str,
    xlabel: str,
    ylabel: str,
    columns: Mapping[str, Sequence[str]],
    splot: bool = False,
    z: str = "",
) -> Path:
    """Emit a gnuplot script that reads the CSV files by column name.

    ``columns`` maps each data file to its header so columns are addressed
    by position; ``where`` filters rows with a ``column==value`` condition.
    """
    path = Path(path)
    out = [f"# {line}" for line in prov.lines()]
    out += [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key outside right",
        "set grid",
        f"set title {json.dumps(title)}",
        f"set xlabel {json.dumps(xlabel)}",
        f"set ylabel {json.dumps(ylabel)}",
        f"set terminal pngcairo size 900,600",
        f"set output {json.dumps(path.with_suffix('.png').name)}",
    ]
    parts = []
    for s in series:
        cols = list(columns[s.data])
        xi, yi = cols.index(s.x) + 1, cols.index(s.y) + 1
        if splot:
            zi = cols.index(z) + 1
            using = f"{xi}:{yi}:{zi}"
        elif s.where:
            key, val = s.where.split("==")
            ki = cols.index(key) + 1
            using = f"(${ki}=={val} ? ${xi} : 1/0):{yi}"
        else:
            using = f"{xi}:{yi}"
        parts.append(f"{json.dumps(s.data)} every ::1 using {using} with {s.style} title {json.dumps(s.title)}")
    if splot:
        out.append("set dgrid3d 30,30")
        out.append(f"set zlabel {json.dumps(z)}")
        out.append("splot " + ", \\\n      ".join(parts))
    else:
        out.append("plot " + ", \\\n     ".join(parts))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(("\n".join(out) + "\n").encode("utf-8"))
    return path
