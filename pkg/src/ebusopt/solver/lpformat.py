"""Writer for the CPLEX LP text format."""
from __future__ import annotations

import math
import re

from .model import EQ, GE, LE, LinearModel

_BAD = re.compile(r"[^A-Za-z0-9_.]")
_SENSE = {LE: "<=", GE: ">=", EQ: "="}


def _names(raw: list[str], prefix: str) -> list[str]:
    """LP-safe, unique names; a name may not start with a digit, '.', or 'e'/'E'."""
    out, seen = [], set()
    for k, name in enumerate(raw):
        clean = _BAD.sub("_", name) or f"{prefix}{k}"
        if clean[0].isdigit() or clean[0] in ".eE":
            clean = f"{prefix}_{clean}"
        if clean in seen:
            clean = f"{clean}__{k}"
        seen.add(clean)
        out.append(clean)
    return out


def _num(v: float) -> str:
    return repr(float(v))


def _terms(idx, val, names) -> str:
    parts = []
    for j, a in zip(idx, val):
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {_num(abs(a))} {names[j]}")
    if parts:
        return " ".join(parts)
    return f"0 {names[0]}" if names else "0"


def _wrap(text: str, width: int = 200) -> str:
    words, lines, cur = text.split(" "), [], ""
    for w in words:
        if cur and len(cur) + 1 + len(w) > width:
            lines.append(cur)
            cur = "  " + w
        else:
            cur = f"{cur} {w}" if cur else w
    lines.append(cur)
    return "\n".join(lines)


def write_lp(model: LinearModel) -> str:
    """Serialize model; a nonzero objective offset becomes a variable fixed at 1."""
    names = _names(model.var_names, "x")
    rows = _names(model.row_names, "r")
    obj_idx = [j for j, c in enumerate(model.obj) if c != 0]
    obj_val = [model.obj[j] for j in obj_idx]
    offset_name = None
    if model.offset:
        offset_name = "OBJ_OFFSET"
        while offset_name in names:
            offset_name += "_"
    out = [f"\\ model {model.name}", "Minimize"]
    objective = " obj: " + _terms(obj_idx, obj_val, names)
    if offset_name:
        sign = "-" if model.offset < 0 else "+"
        objective += f" {sign} {_num(abs(model.offset))} {offset_name}"
    out.append(_wrap(objective))
    out.append("Subject To")
    for r in range(model.num_rows):
        lhs = _terms(model.row_idx[r], model.row_val[r], names)
        out.append(_wrap(f" {rows[r]}: {lhs} {_SENSE[model.senses[r]]} {_num(model.rhs[r])}"))
    out.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = model.lb[j], model.ub[j]
        if lo == -math.inf and hi == math.inf:
            out.append(f" {name} free")
        elif lo == hi:
            out.append(f" {name} = {_num(lo)}")
        else:
            lo_s = "-inf" if lo == -math.inf else _num(lo)
            hi_s = "+inf" if hi == math.inf else _num(hi)
            out.append(f" {lo_s} <= {name} <= {hi_s}")
    if offset_name:
        out.append(f" {offset_name} = 1")
    ints = [names[j] for j, flag in enumerate(model.integer) if flag]
    if ints:
        out.append("General")
        out.extend(_wrap(" " + " ".join(ints[k:k + 20])) for k in range(0, len(ints), 20))
    out.append("End")
    return "\n".join(out) + "\n"
