"""CSV / JSON writers and run manifests.

CSV is RFC 4180 (CRLF line ends, dot decimal) with floats at 17 significant
digits; JSON is key-sorted with NaN/inf mapped to null.  Both are byte-stable
for identical inputs.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__

CSV_HEADERS = {
    "lambda": ["d", "h", "lambda_h", "h_prime_final", "residual", "gap"],
    "critical": ["d", "h_star", "h_delta", "h_square", "u_star", "sqrt_2u_star", "lambda_0", "chain_ok"],
    "spectrum": ["d", "n", "eigenvalue", "exact"],
    "front_run": ["replica", "n", "front_count", "M_n", "survived", "censored"],
    "arcsine": ["n", "mc_estimate", "se", "exact", "z_score"],
    "verify": ["criterion", "name", "passed"],
}


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def json_text(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    return path


def write_csv(path, header, rows):
    return write_text(path, csv_text(header, rows))


def write_json(path, obj):
    return write_text(path, json_text(obj))


def load_schema(name: str) -> dict:
    """Shipped JSON schema ``name`` (e.g. ``"critical_report"``)."""
    text = resources.files("treegff").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


@dataclass
class RunManifest:
    """What was run, with which parameters, and where its outputs went.

    Runtimes live only here so that the data files stay byte-reproducible.
    """

    command: str
    parameters: dict
    seed: int | None = None
    duration_s: float = 0.0
    outputs: list = field(default_factory=list)
    version: str = __version__
    timings: dict = field(default_factory=dict)

    def write(self, path):
        return write_json(path, asdict(self))


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def gnuplot_script(csv_path, x_col: str, y_col: str, header, title: str) -> str:
    xi = header.index(x_col) + 1
    yi = header.index(y_col) + 1
    return (
        "set datafile separator ','\n"
        f"set title '{title}'\n"
        f"set xlabel '{x_col}'\nset ylabel '{y_col}'\n"
        f"plot '{Path(csv_path).name}' every ::1 using {xi}:{yi} with linespoints title '{y_col}'\n"
    )
