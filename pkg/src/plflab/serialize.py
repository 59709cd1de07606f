"""Deterministic serialization: canonical JSON, 17-digit CSV, atomic writes.

Outputs are byte-stable: JSON keys are sorted and floats use the shortest
exact decimal representation; CSV floats are printed with 17 significant
digits.  Non-finite floats serialize as the strings "inf", "-inf", "nan"
to stay inside standard JSON.  Files are written to a temporary name and
renamed into place.
"""

from __future__ import annotations

import hashlib
import math
import os
import tempfile

import numpy as np

from . import __version__


def _float_token(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return repr(float(x))


def _emit(obj, parts: list, indent: int) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        keys = sorted(obj.keys())
        for i, k in enumerate(keys):
            if not isinstance(k, str):
                raise TypeError(f"JSON keys must be strings, got {type(k)}")
            parts.append(f'{pad}  "{k}": ')
            _emit(obj[k], parts, indent + 1)
            parts.append(",\n" if i + 1 < len(keys) else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, (list, tuple)) or isinstance(obj, np.ndarray):
        seq = list(obj)
        if not seq:
            parts.append("[]")
            return
        parts.append("[\n")
        for i, v in enumerate(seq):
            parts.append(pad + "  ")
            _emit(v, parts, indent + 1)
            parts.append(",\n" if i + 1 < len(seq) else "\n")
        parts.append(pad + "]")
    elif isinstance(obj, (bool, np.bool_)):
        parts.append("true" if obj else "false")
    elif obj is None:
        parts.append("null")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(_float_token(float(obj)))
    elif isinstance(obj, str):
        import json

        parts.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj)} canonically")


def canonical_json(obj) -> str:
    parts: list[str] = []
    _emit(obj, parts, 0)
    parts.append("\n")
    return "".join(parts)


def sha256_of(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def csv_float(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix=".part")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj: dict, config_hash: str | None = None) -> None:
    payload = dict(obj)
    payload.setdefault("version", __version__)
    if config_hash is not None:
        payload.setdefault("config_hash", config_hash)
    atomic_write_text(path, canonical_json(payload))


def _csv_header_lines(config_hash: str | None) -> list[str]:
    lines = [f"# plflab {__version__}"]
    if config_hash is not None:
        lines.append(f"# config_hash={config_hash}")
    return lines


def write_csv(path: str, columns, rows, config_hash: str | None = None) -> None:
    lines = _csv_header_lines(config_hash)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(csv_float(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_trajectory_csv(path: str, record, config_hash: str | None = None, with_coefficients: bool = False) -> None:
    columns = list(record.CSV_COLUMNS)
    rows = [list(r) for r in record.rows()]
    if with_coefficients and record.snapshots is not None:
        columns += [f"c{i:03d}" for i in range(record.snapshots.shape[1])]
        rows = [r + list(s) for r, s in zip(rows, record.snapshots)]
    write_csv(path, columns, rows, config_hash)


def write_coupled_csv(path: str, record, config_hash: str | None = None) -> None:
    write_csv(path, record.CSV_COLUMNS, record.rows(), config_hash)


def write_measure(path_csv: str, path_meta: str, measure, config_hash: str | None = None) -> None:
    """Flattened coefficient rows plus a JSON metadata sidecar."""
    dim = measure.samples.shape[1]
    columns = [f"c{i:03d}" for i in range(dim)]
    write_csv(path_csv, columns, measure.samples, config_hash)
    meta = dict(measure.metadata)
    meta["n"] = measure.n
    meta["n_samples"] = len(measure)
    write_json(path_meta, meta, config_hash)


def load_measure(path_csv: str):
    """Read back a measure written by write_measure (CSV + JSON sidecar)."""
    import json

    from .kolmogorov import EmpiricalMeasure

    rows = []
    with open(path_csv) as f:
        header = None
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line
                continue
            rows.append([float(v) for v in line.split(",")])
    meta_path = path_csv[: -len(".csv")] + "_meta.json" if path_csv.endswith(".csv") else path_csv + "_meta.json"
    with open(meta_path) as f:
        meta = json.load(f)
    n = int(meta.pop("n"))
    meta.pop("n_samples", None)
    meta.pop("version", None)
    return EmpiricalMeasure(n=n, samples=np.array(rows), metadata=meta)


def config_hash(config) -> str:
    """Stable hash of a simulation config (dataclass tree of plain fields)."""
    return sha256_of(sim_config_dict(config))


def sim_config_dict(config) -> dict:
    return {
        "p": config.params.p,
        "nu0": config.params.nu0,
        "diagnostic": config.params.diagnostic,
        "sigma0": config.noise.sigma0,
        "gamma": config.noise.gamma,
        "n": config.n,
        "M": config.grid.M,
        "dt": config.dt,
        "T": config.T,
        "seed": config.seed,
        "scheme": config.scheme,
        "record_stride": config.record_stride,
    }
