"""CSV dataset loading, deterministic result tables and YAML experiment configs."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .dataset import TrialDataset
from .errors import DatasetParseError, InvalidInputError
from .simgen import ScenarioSpec, TailDist

FLOAT_FORMAT = "{:.9g}"


def load_dataset(path) -> TrialDataset:
    """Read a ``y,t,x`` CSV file; errors name the offending line."""
    path = Path(path)
    if not path.is_file():
        raise DatasetParseError(f"no such file: {path}")
    ys, ts, xs = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetParseError("file is empty", 1)
        cols = [h.strip().lower() for h in header]
        if sorted(cols) != ["t", "x", "y"]:
            raise DatasetParseError(f"expected header with columns y,t,x, got {header}", 1)
        iy, it, ix = cols.index("y"), cols.index("t"), cols.index("x")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DatasetParseError(f"expected 3 fields, got {len(row)}", line)
            try:
                y = float(row[iy])
                x = float(row[ix])
                t_val = float(row[it])
            except ValueError as exc:
                raise DatasetParseError(f"non-numeric field ({exc})", line) from None
            if not math.isfinite(y):
                raise DatasetParseError(f"outcome must be finite, got {row[iy]!r}", line)
            if t_val not in (0.0, 1.0):
                raise DatasetParseError(f"arm indicator must be 0 or 1, got {row[it]!r}", line)
            if not math.isfinite(x) or x < 0:
                raise DatasetParseError(f"biomarker must be finite and >= 0, got {row[ix]!r}", line)
            ys.append(y)
            ts.append(int(t_val))
            xs.append(x)
    if not ys:
        raise DatasetParseError("no data rows", 2)
    return TrialDataset(y=np.array(ys), t=np.array(ts), x=np.array(xs))


def write_dataset(ds: TrialDataset, path) -> None:
    rows = [{"y": y, "t": int(t), "x": x} for y, t, x in zip(ds.y, ds.t, ds.x)]
    write_results(rows, path, columns=("y", "t", "x"))


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if v == 0:
            return "0"
        return FLOAT_FORMAT.format(v)
    return str(value)


def _as_mapping(row) -> Mapping[str, Any]:
    if isinstance(row, Mapping):
        return row
    if hasattr(row, "as_row"):
        return row.as_row()
    if dataclasses.is_dataclass(row):
        return dataclasses.asdict(row)
    raise TypeError(f"cannot serialise row of type {type(row).__name__}")


def write_results(rows: Iterable, path, columns: Sequence[str] | None = None) -> None:
    """Write a tidy CSV with fixed column order, 9 significant digits and a trailing newline."""
    mappings = [_as_mapping(r) for r in rows]
    if columns is None:
        if not mappings:
            raise InvalidInputError("columns must be given when writing an empty table")
        columns = list(mappings[0].keys())
    lines = [",".join(columns)]
    for m in mappings:
        lines.append(",".join(_quote(format_value(m.get(c))) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def _quote(text: str) -> str:
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_results(path) -> list[dict]:
    """Parse a table written by :func:`write_results`, converting numeric cells."""
    with Path(path).open(newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# --- experiment configuration -------------------------------------------------

_EXPERIMENT_KEYS = {"methods", "replicates", "n_perms", "alpha", "threads", "master_seed", "seed"}
_GRID_KEYS = {"kind", "n", "pi0", "tail", "delta", "delta_a", "delta_b", "k_scale", "base"}


def _listify(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def expand_grid_block(block: Mapping[str, Any]) -> list[ScenarioSpec]:
    """Cartesian product over every list-valued field of one grid block."""
    unknown = set(block) - _GRID_KEYS
    if unknown:
        raise InvalidInputError(f"unknown grid keys {sorted(unknown)}")
    if "kind" not in block or "n" not in block:
        raise InvalidInputError("each grid block needs 'kind' and 'n'")
    keys = list(block)
    specs = []
    for combo in itertools.product(*(_listify(block[k]) for k in keys)):
        fields = dict(zip(keys, combo))
        if "tail" in fields:
            fields["tail"] = TailDist.parse(str(fields["tail"]))
        for k in ("pi0", "delta", "delta_a", "delta_b", "k_scale"):
            if k in fields:
                fields[k] = float(fields[k])
        fields["n"] = int(fields["n"])
        specs.append(ScenarioSpec(**fields))
    return specs


def load_experiment_config(path) -> dict:
    """Parse a YAML experiment file into ExperimentConfig keyword arguments.

    Layout::

        experiment: {methods: [aksa, fisher, brown], replicates: 500, n_perms: 500,
                     alpha: 0.05, threads: 1, master_seed: 7}
        grid:
          - {kind: null, n: 60, pi0: [0, 0.4, 0.8], tail: uniform}
          - {kind: tail_only, n: 120, pi0: [0.2, 0.5], delta: 5, tail: "beta 2 5"}
    """
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise InvalidInputError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise InvalidInputError(f"malformed config: {exc}") from None
    if not isinstance(raw, Mapping):
        raise InvalidInputError("config must be a mapping with 'experiment' and 'grid' sections")
    exp = raw.get("experiment") or {}
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise InvalidInputError(f"unknown experiment keys {sorted(unknown)}")
    grid_blocks = raw.get("grid")
    if not grid_blocks:
        raise InvalidInputError("config has no grid blocks")
    grid = []
    for block in grid_blocks:
        block = dict(block)
        # YAML reads a bare `null` as None
        if block.get("kind", "") is None:
            block["kind"] = "null"
        if isinstance(block.get("kind"), list):
            block["kind"] = ["null" if k is None else k for k in block["kind"]]
        grid.extend(expand_grid_block(block))
    out: dict[str, Any] = {"grid": tuple(grid)}
    for key in ("replicates", "n_perms", "threads"):
        if key in exp:
            out[key] = int(exp[key])
    if "alpha" in exp:
        out["alpha"] = float(exp["alpha"])
    if "methods" in exp:
        out["methods"] = tuple(_listify(exp["methods"]))
    seed = exp.get("master_seed", exp.get("seed"))
    if seed is not None:
        out["master_seed"] = int(seed)
    return out
