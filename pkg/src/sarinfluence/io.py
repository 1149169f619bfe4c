"""CSV and JSON readers/writers used by the command line.

Matrices are headerless CSV; tidy tables carry a header row. Floats are
written with 17 significant digits so files round-trip exactly.
"""

import csv
import json
from pathlib import Path

import numpy as np


class InputError(ValueError):
    """Unreadable or malformed input file; message carries file and line."""


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def read_matrix(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: file not found")
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise InputError(
                    f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}"
                )
    if not rows:
        raise InputError(f"{path}: no data")
    return np.array(rows)


def read_vector(path):
    m = read_matrix(path)
    if m.shape[1] != 1:
        raise InputError(f"{path}: expected a single column, got {m.shape[1]}")
    return m[:, 0]


def matrix_text(M):
    M = np.atleast_2d(np.asarray(M))
    return "".join(",".join(_fmt(float(v)) for v in row) + "\n" for row in M)


def vector_text(v):
    return matrix_text(np.asarray(v, dtype=float).reshape(-1, 1))


def table_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        if isinstance(row, dict):
            row = [row[h] for h in header]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_draws(path):
    """Headered draws table ``rho, sigma, beta0, ..., chain``."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "chain" or header[:2] != ["rho", "sigma"]:
            raise InputError(f"{path}:1: expected header 'rho,sigma,beta0,...,chain'")
        chains, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} columns")
            try:
                chains.append(int(row[-1]))
                values.append([float(c) for c in row[:-1]])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not values:
        raise InputError(f"{path}: no draws")
    return np.array(values), np.array(chains), tuple(header[:-1])


def draws_text(draws):
    header = [*draws.names, "chain"]
    rows = ([*map(float, v), int(c)] for c, v in zip(draws.chain_ids, draws.values))
    return table_text(header, rows)


def json_text(obj):
    return json.dumps(_plain(obj), indent=2) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: config file not found")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: config must be a JSON object")
    return cfg


def write_outputs(out_dir, files):
    """Write ``{name: text}`` into ``out_dir``; called only after all work succeeded."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)
    return [out_dir / name for name in files]
