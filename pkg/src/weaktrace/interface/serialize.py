"""Result envelopes and their JSON/CSV encodings.

JSON carries the whole envelope.  Complex numbers become ``{"re": x, "im": y}``
and floats are written with ``repr`` precision, so decoding gives back the
same envelope.  CSV carries only tabular payloads: a ``rows`` list of flat
records, or a single flat record.  Complex columns are split into ``<name>_re``
and ``<name>_im``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

SCHEMA_VERSION = 1

# Column order of the tabular payloads, fixed as part of the output contract.
CSV_COLUMNS = {
    "pointer-sweep": ("lambda", "mean_shift", "first_order_mean_shift", "residual_norm", "success_probability"),
    "fringe-sweep": ("theta_b", "theta_c", "D", "V", "leak", "dv_sum"),
    "trace-map": ("segment", "cut", "weak_value", "conditional", "sign"),
    "ensemble": ("n_particles", "n_postselected", "estimate", "stderr", "target", "success_probability"),
    "ensemble-histogram": ("bin_lo", "bin_hi", "count"),
    "weakvalue": ("value", "numerator", "denominator", "postselection_probability"),
    "scenario-list": ("name", "description"),
}


class UnsupportedFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ResultEnvelope:
    tool_version: str
    scenario_name: str
    analysis: str
    payload: Mapping[str, Any]
    seed: int | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))


def _encode(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, complex):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, int):
        return int(v)
    if isinstance(v, float):
        return float(v)
    if isinstance(v, Mapping):
        return {str(k): _encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if hasattr(v, "item"):  # numpy scalar
        return _encode(v.item())
    if hasattr(v, "tolist"):
        return _encode(v.tolist())
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _decode(v):
    if isinstance(v, dict):
        if set(v) == {"re", "im"}:
            return complex(v["re"], v["im"])
        return {k: _decode(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode(x) for x in v]
    return v


def _to_json(env: ResultEnvelope) -> bytes:
    doc = {
        "version": SCHEMA_VERSION,
        "tool_version": env.tool_version,
        "scenario": env.scenario_name,
        "analysis": env.analysis,
        "seed": env.seed,
        "notes": list(env.notes),
        "payload": _encode(env.payload),
    }
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _rows(env: ResultEnvelope) -> list[Mapping[str, Any]]:
    p = env.payload
    rows = p["rows"] if set(p) == {"rows"} else [p]
    for r in rows:
        for k, v in r.items():
            if isinstance(v, (Mapping, list, tuple)):
                raise UnsupportedFormatError(
                    f"{env.analysis} payload field {k!r} is not scalar; use json")
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _to_csv(env: ResultEnvelope) -> bytes:
    rows = _rows(env)
    cols = [c for c in CSV_COLUMNS.get(env.analysis, ()) if any(c in r for r in rows)]
    for r in rows:
        cols += [k for k in r if k not in cols]
    is_complex = {c: any(isinstance(r.get(c), complex) for r in rows) for c in cols}
    header = []
    for c in cols:
        header += [f"{c}_re", f"{c}_im"] if is_complex[c] else [c]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        line = []
        for c in cols:
            v = r.get(c)
            if is_complex[c]:
                v = complex(v) if v is not None else None
                line += [_cell(None if v is None else v.real), _cell(None if v is None else v.imag)]
            else:
                line.append(_cell(_encode(v)))
        w.writerow(line)
    return buf.getvalue().encode("utf-8")


def emit(env: ResultEnvelope, fmt: str = "json") -> bytes:
    """Deterministic bytes for ``env`` in ``json`` or ``csv``."""
    if fmt == "json":
        return _to_json(env)
    if fmt == "csv":
        return _to_csv(env)
    raise UnsupportedFormatError(f"unknown format {fmt!r}")


def load_json(data: bytes | str) -> ResultEnvelope:
    doc = json.loads(data)
    if doc.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported envelope version {doc.get('version')!r}")
    return ResultEnvelope(
        tool_version=doc["tool_version"], scenario_name=doc["scenario"], analysis=doc["analysis"],
        payload=_decode(doc["payload"]), seed=doc["seed"], notes=tuple(doc["notes"]),
    )


def _parse_cell(text: str):
    if text == "":
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def load_csv(data: bytes | str) -> list[dict[str, Any]]:
    """Rows of a CSV payload, with ``_re``/``_im`` column pairs merged back into complex values."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    header = next(reader)
    out = []
    for line in reader:
        raw = dict(zip(header, line))
        row: dict[str, Any] = {}
        for h in header:
            if h.endswith("_re") and h[:-3] + "_im" in raw:
                re_, im = _parse_cell(raw[h]), _parse_cell(raw[h[:-3] + "_im"])
                row[h[:-3]] = None if re_ is None else complex(re_, im)
            elif h.endswith("_im") and h[:-3] + "_re" in raw:
                continue
            else:
                row[h] = _parse_cell(raw[h])
        out.append(row)
    return out

