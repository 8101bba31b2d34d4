"""Schema-stable CSV/JSON output with atomic overwrite."""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
from fractions import Fraction

from .errors import GaplabError, InvalidParameter

SWEEP_HEADER = ("N", "m", "mean_sq_split", "stderr", "samples", "discarded")
GAP_CURVE_HEADER = ("lambda", "gap", "e0", "e1")


class ReportError(GaplabError):
    kind = "io-error"


def fmt_real(x):
    """17 significant digits, which is enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _json_default(obj):
    if isinstance(obj, Fraction):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class _Real(float):
    def __repr__(self):
        return fmt_real(self)


def _normalise(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return _Real(obj) if math.isfinite(obj) else None
    if isinstance(obj, Fraction):
        return _Real(float(obj))
    if isinstance(obj, dict):
        return {str(k): _normalise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalise(v) for v in obj]
    if hasattr(obj, "item") and not hasattr(obj, "__len__"):
        return _normalise(obj.item())
    return _normalise(_json_default(obj))


def _render(obj, depth):
    pad = "  " * (depth + 1)
    end = "  " * depth
    if isinstance(obj, _Real):
        return fmt_real(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_render(obj[k], depth + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_render(v, depth + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _render(v, depth + 1) for v in obj) + "\n" + end + "]"
    return json.dumps(obj)


def dumps_json(obj):
    """Sorted-key, indented JSON with 17-digit reals; non-finite reals become null."""
    return _render(_normalise(obj), 0) + "\n"


def atomic_write(path, text):
    """Write via a temp file in the target directory, then os.replace."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def sweep_csv(result):
    buf = io.StringIO()
    buf.write(",".join(SWEEP_HEADER) + "\n")
    for p in result.points:
        for m in range(1, result.config.max_order + 1):
            buf.write(",".join([
                str(p.n_bits), str(m), fmt_real(p.mean_sq(m)), fmt_real(p.stderr_sq(m)),
                str(len(p.samples)), str(p.discarded),
            ]) + "\n")
    return buf.getvalue()


def gap_curve_csv(rows):
    buf = io.StringIO()
    buf.write(",".join(GAP_CURVE_HEADER) + "\n")
    for row in rows:
        buf.write(",".join(fmt_real(v) for v in row) + "\n")
    return buf.getvalue()


def render(result, format):
    from .harness import CrossingReport, SweepResult

    if format == "csv":
        if isinstance(result, SweepResult):
            return sweep_csv(result)
        if isinstance(result, list):
            return gap_curve_csv(result)
        raise InvalidParameter(f"no CSV schema for {type(result).__name__}")
    if format == "json":
        if isinstance(result, CrossingReport):
            result.validate()
        data = result.to_dict() if hasattr(result, "to_dict") else result
        return dumps_json(data)
    raise InvalidParameter(f"unknown format {format!r}")


def emit_report(result, path, format="json"):
    """Render ``result`` and write it to ``path`` atomically ("-" means stdout)."""
    text = render(result, format)
    if path in (None, "-"):
        import sys

        sys.stdout.write(text)
    else:
        atomic_write(path, text)
    return text
