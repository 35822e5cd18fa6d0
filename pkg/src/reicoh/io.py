"""CSV ingestion and text output records.

Input CSVs are self-describing: the header names each column with a unit
suffix (``T_K,gamma_kHz,sigma_kHz``). Values are converted to the canonical
units of :mod:`reicoh.quantities` on load and never guessed. Amplitude-like
columns (``amp``, ``area``, ``signal``...) carry arbitrary units and need no
suffix.

Params records are plain text::

    # reicoh params record
    T2_us = 421.50000000000006 ± 3.7  # us
    ...
    # structured
    {"model": "mims", ...}

The human-readable lines and the JSON line carry the same numbers at full
precision.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fitting import Dataset, FitResult

RECORD_HEADER = "# reicoh params record"
STRUCTURED_MARK = "# structured"

# dimension -> {unit suffix: factor to canonical}
UNITS = {
    "temperature": {"K": 1.0, "mK": 1e-3},
    "field": {"T": 1.0, "mT": 1e-3, "G": 1e-4},
    "time": {"us": 1.0, "µs": 1.0, "ns": 1e-3, "ms": 1e3, "s": 1e6},
    "hours": {"h": 1.0, "min": 1.0 / 60.0, "s": 1.0 / 3600.0, "d": 24.0},
    "linewidth": {"kHz": 1.0, "Hz": 1e-3, "MHz": 1e3},
    "frequency": {"GHz": 1.0, "MHz": 1e-3, "THz": 1e3},
    "arb": {"arb": 1.0, "au": 1.0, "counts": 1.0},
}
CANONICAL = {
    "temperature": "K",
    "field": "T",
    "time": "us",
    "hours": "h",
    "linewidth": "kHz",
    "frequency": "GHz",
    "arb": "arb",
}
ARB_NAMES = {"amp", "amplitude", "area", "signal", "counts", "intensity", "absorption", "od", "y"}

#: (x dimension, y dimension) per subcommand
SCHEMAS = {
    "fit-decay": ("time", "arb"),
    "fit-temperature": ("temperature", "linewidth"),
    "fit-field": ("field", "linewidth"),
    "fit-hole": ("hours", "arb"),
    "fit-line": ("frequency", "arb"),
}


class SchemaError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class LoadedData:
    dataset: Dataset
    sha256: str
    columns: tuple


def _split_header(name):
    name = name.strip()
    if "_" in name:
        base, unit = name.rsplit("_", 1)
        return base, unit
    return name, None


def _column_factor(name, dim, line, role):
    base, unit = _split_header(name)
    if dim == "arb":
        if unit is None:
            if base.lower() in ARB_NAMES or base.lower().startswith("sigma"):
                return 1.0
            raise SchemaError(f"{role} column {name!r} is not a recognised amplitude name", line)
        if unit in UNITS["arb"]:
            return 1.0
        raise SchemaError(f"{role} column {name!r}: unit {unit!r} is not an arbitrary-unit tag", line)
    if unit is None:
        raise SchemaError(
            f"{role} column {name!r} has no unit suffix; expected one of {sorted(UNITS[dim])}", line
        )
    table = UNITS[dim]
    if unit not in table:
        raise SchemaError(
            f"{role} column {name!r}: unit {unit!r} unknown for {dim}; expected one of {sorted(table)}",
            line,
        )
    return table[unit]


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def load_dataset(path, schema) -> LoadedData:
    """Read a ``x, y[, sigma]`` CSV, validate units and convert to canonical units.

    ``schema`` is a subcommand name from :data:`SCHEMAS` or an explicit
    ``(x_dim, y_dim)`` pair. Lines starting with ``#`` are skipped.
    """
    x_dim, y_dim = SCHEMAS[schema] if isinstance(schema, str) else schema
    raw = Path(path).read_bytes()
    text = raw.decode("utf-8-sig")
    header = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        cells = [c.strip() for c in next(csv.reader([s]))]
        if header is None:
            header = (cells, lineno)
            continue
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise SchemaError(f"non-numeric value in {cells!r}", lineno) from None
        if len(vals) != len(header[0]):
            raise SchemaError(f"expected {len(header[0])} columns, found {len(vals)}", lineno)
        rows.append(vals)
    if header is None:
        raise SchemaError("file has no header row")
    names, hline = header
    if len(names) not in (2, 3):
        raise SchemaError(f"expected 2 or 3 columns (x, y[, sigma]), found {len(names)}", hline)
    fx = _column_factor(names[0], x_dim, hline, "x")
    fy = _column_factor(names[1], y_dim, hline, "y")
    fs = None
    if len(names) == 3:
        if not names[2].lower().startswith("sigma"):
            raise SchemaError(f"third column must be sigma_<unit>, got {names[2]!r}", hline)
        fs = _column_factor(names[2], y_dim, hline, "sigma")
    if not rows:
        raise SchemaError("file has no data rows")
    arr = np.array(rows, dtype=float)
    sigma = arr[:, 2] * fs if fs is not None else None
    if sigma is not None and np.any(~(sigma > 0)):
        raise SchemaError("sigma values must be > 0")
    ds = Dataset(arr[:, 0] * fx, arr[:, 1] * fy, sigma, CANONICAL[x_dim], CANONICAL[y_dim])
    return LoadedData(ds, sha256_bytes(raw), tuple(names))


def write_dataset(path, dataset: Dataset, x_name, y_name, comments=()):
    """Write a Dataset as CSV with a ``name_unit`` header (canonical units)."""
    buf = _io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    cols = [f"{x_name}_{dataset.x_unit}", y_name if dataset.y_unit == "arb" else f"{y_name}_{dataset.y_unit}"]
    if dataset.sigma is not None:
        cols.append("sigma" if dataset.y_unit == "arb" else f"sigma_{dataset.y_unit}")
    buf.write(",".join(cols) + "\n")
    for i in range(len(dataset)):
        vals = [dataset.x[i], dataset.y[i]]
        if dataset.sigma is not None:
            vals.append(dataset.sigma[i])
        buf.write(",".join(repr(float(v)) for v in vals) + "\n")
    Path(path).write_text(buf.getvalue())


# --------------------------------------------------------------------------
# params records


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def record_lines(entries):
    """``key = value ± stderr  # unit`` lines from ``(key, value, stderr|None, unit)``."""
    out = []
    for key, value, err, unit in entries:
        line = f"{key} = {_fmt(value)}"
        if err is not None:
            line += f" ± {_fmt(err)}"
        if unit:
            line += f"  # {unit}"
        out.append(line)
    return out


def format_record(entries, structured, provenance):
    lines = [RECORD_HEADER]
    for k in sorted(provenance):
        lines.append(f"# {k}: {provenance[k]}")
    lines += record_lines(entries)
    lines.append(STRUCTURED_MARK)
    payload = dict(structured)
    payload["provenance"] = provenance
    lines.append(json.dumps(payload, sort_keys=True, allow_nan=True))
    return "\n".join(lines) + "\n"


def unit_key(name, unit):
    """Record key with a unit suffix, mirroring CSV headers: ``T2_us``, ``alpha_tls_kHz_per_K``."""
    if unit in ("", "arb"):
        return name
    suffix = unit.replace("/", "_per_").replace("^", "")
    return name if name.endswith("_" + suffix) else f"{name}_{suffix}"


def fit_record(result: FitResult, units, provenance):
    """Params record for a fit; frozen and bound-pinned parameters are written without ``±``."""
    entries = []
    pinned = set(result.flags.get("at_bound", ()))
    for i, (name, v, e, u) in enumerate(zip(result.param_names, result.params, result.stderr, units)):
        entries.append((unit_key(name, u), v, e if result.free[i] and name not in pinned else None, u))
    structured = {
        "kind": "fit",
        "model": result.model,
        "param_names": list(result.param_names),
        "params": [float(v) for v in result.params],
        "stderr": [float(v) for v in result.stderr],
        "covariance": [[float(v) for v in row] for row in result.covariance],
        "free": [bool(v) for v in result.free],
        "chi2": float(result.chi2),
        "n_iter": int(result.n_iter),
        "n_points": int(result.n_points),
        "converged": bool(result.converged),
        "condition_warning": bool(result.condition_warning),
        "message": result.message,
        "flags": {k: v for k, v in sorted(result.flags.items())},
        "stderr_kind": "1-sigma, covariance-based",
    }
    entries.append(("chi2", result.chi2, None, ""))
    return format_record(entries, structured, provenance)


def read_record(path_or_text):
    """Parse a params record into ``(lines, structured)``.

    ``lines`` maps key -> ``(value, stderr|None, unit)``.
    """
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(text).read_text()
    lines = {}
    structured = None
    it = iter(text.splitlines())
    for line in it:
        if line == STRUCTURED_MARK:
            structured = json.loads(next(it))
            break
        if line.startswith("#") or not line.strip():
            continue
        body, _, unit = line.partition("  # ")
        key, _, rest = body.partition(" = ")
        val, _, err = rest.partition(" ± ")
        lines[key.strip()] = (float(val), float(err) if err else None, unit.strip())
    return lines, structured


def fit_result_from_record(structured) -> FitResult:
    return FitResult(
        model=structured["model"],
        param_names=tuple(structured["param_names"]),
        params=np.array(structured["params"], dtype=float),
        stderr=np.array(structured["stderr"], dtype=float),
        covariance=np.array(structured["covariance"], dtype=float),
        chi2=float(structured["chi2"]),
        n_iter=int(structured["n_iter"]),
        converged=bool(structured["converged"]),
        condition_warning=bool(structured["condition_warning"]),
        free=np.array(structured["free"], dtype=bool),
        n_points=int(structured["n_points"]),
        message=structured["message"],
        flags=dict(structured["flags"]),
    )


def write_table(path, header, columns, comments=()):
    """Write equal-length columns as CSV with ``# key: value`` comment lines."""
    buf = _io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())
