"""CSV/JSON writers that embed run metadata.

CSV files start with ``#``-prefixed metadata lines (tool version, resolved
config, seed, variance-param provenance) followed by the mandatory header
row; read them with :func:`read_csv_table` or ``pandas.read_csv(...,
comment="#")``.  Floats are written with ``repr`` so files round-trip
exactly and reruns are byte-identical.
"""

import csv
import json
import math


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def write_csv(path, header, rows, meta=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if meta is not None:
            for line in json.dumps(meta, indent=1, sort_keys=False).splitlines():
                fh.write("# " + line + "\r\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv_table(path):
    """Header and rows of a file written by :func:`write_csv` (metadata lines skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [dict(zip(header, r)) for r in reader]


def read_csv_meta(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = "".join(ln[2:] for ln in fh if ln.startswith("# "))
    return json.loads(text) if text else {}


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, payload, meta=None) -> None:
    doc = {"meta": meta, **payload} if meta is not None else payload
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=False)
        fh.write("\n")
