"""CPLEX-LP text writer and reader, plus the plain ``name value`` solution format."""
from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path
from typing import Mapping

from .model import Constraint, MilpError, MilpModel, Variable

MAX_LINE = 255


class LpFormatError(MilpError):
    pass


def _num(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _expr(terms) -> list[str]:
    out = []
    for pos, (name, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = name if mag == 1 else f"{_num(mag)} {name}"
        if pos == 0 and sign == "+":
            out.append(body)
        else:
            out.append(f"{sign} {body}")
    return out


def _wrap(head: str, pieces: list[str]) -> list[str]:
    lines, cur = [], head
    for piece in pieces:
        if len(cur) + 1 + len(piece) > MAX_LINE and cur.strip():
            lines.append(cur)
            cur = "   " + piece
        else:
            cur = f"{cur} {piece}" if cur else piece
    lines.append(cur)
    return lines


def lp_text(model: MilpModel) -> str:
    """The model in CPLEX-LP syntax. Identical models give identical text."""
    out = ["\\ oran-placer model", f"\\ big_M: {_num(model.big_m)}", "Minimize"]
    obj = [(n, c) for n, c in model.objective.items() if c != 0]
    out += _wrap(" obj:", _expr(obj) if obj else ["0"])
    out.append("Subject To")
    for con in model.constraints:
        out += _wrap(f" {con.name}:", _expr(con.terms) + [con.sense, _num(con.rhs)])
    bounds, binaries, generals = [], [], []
    for var in sorted(model.variables.values(), key=lambda v: v.name):
        if var.kind == "binary":
            binaries.append(var.name)
            continue
        if var.kind == "integer":
            generals.append(var.name)
        if var.lb == 0.0 and var.ub is None:
            continue
        lb = "-inf" if var.lb == float("-inf") else _num(var.lb)
        if var.ub is None:
            bounds.append(f" {var.name} >= {lb}" if lb != "-inf" else f" {var.name} free")
        else:
            bounds.append(f" {lb} <= {var.name} <= {_num(var.ub)}")
    out.append("Bounds")
    out += bounds
    if binaries:
        out.append("Binaries")
        out += _wrap("", binaries)
    if generals:
        out.append("Generals")
        out += _wrap("", generals)
    out.append("End")
    return "\n".join(out) + "\n"


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_lp(model: MilpModel, path) -> Path:
    try:
        _atomic_write(path, lp_text(model))
    except OSError as exc:
        raise LpFormatError(f"cannot write {path}: {exc}") from exc
    return Path(path)


# -- reader ------------------------------------------------------------------------

_SECTIONS = {
    "minimize": "min", "minimum": "min", "min": "min",
    "maximize": "max", "maximum": "max", "max": "max",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "gen": "gen",
    "end": "end",
}
_TOKEN = re.compile(r"""
    (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<op><=|>=|=<|=>|<|>|=)
  | (?P<sign>[+-])
  | (?P<colon>:)
  | (?P<name>[A-Za-z_!"\#$%&()/,;?@`'{}|~][A-Za-z0-9_!"\#$%&()/,.;?@`'{}|~\[\]]*)
  | (?P<ws>\s+)
""", re.VERBOSE)
_SENSE = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}


def _tokens(text: str) -> list[tuple[str, str]]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LpFormatError(f"unexpected character {text[pos]!r}")
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group()))
        pos = m.end()
    return out


def _linear(toks, i):
    """Parse ``[+-] [num] name ...`` from ``toks[i]`` until an operator or the end."""
    terms: dict[str, float] = {}
    while i < len(toks) and toks[i][0] != "op":
        sign = 1.0
        while i < len(toks) and toks[i][0] == "sign":
            sign = -sign if toks[i][1] == "-" else sign
            i += 1
        coef = 1.0
        if i < len(toks) and toks[i][0] == "num":
            coef = float(toks[i][1])
            i += 1
        if i >= len(toks) or toks[i][0] != "name":
            if coef == 0.0:  # a bare zero objective
                continue
            raise LpFormatError("constant term without variable")
        terms[toks[i][1]] = terms.get(toks[i][1], 0.0) + sign * coef
        i += 1
    return terms, i


def _signed_number(toks, i):
    sign = 1.0
    while i < len(toks) and toks[i][0] == "sign":
        sign = -sign if toks[i][1] == "-" else sign
        i += 1
    if i < len(toks) and toks[i][0] == "name" and toks[i][1].lower() in ("inf", "infinity"):
        return sign * float("inf"), i + 1
    if i >= len(toks) or toks[i][0] != "num":
        raise LpFormatError("number expected")
    return sign * float(toks[i][1]), i + 1


def _label(toks, i):
    if i + 1 < len(toks) and toks[i][0] == "name" and toks[i + 1][0] == "colon":
        return toks[i][1], i + 2
    return None, i


def parse_lp(text: str) -> MilpModel:
    """Read CPLEX-LP text produced by :func:`emit_lp` (and the common subset of the dialect)."""
    sections: dict[str, list[str]] = {k: [] for k in ("min", "st", "bounds", "bin", "gen")}
    current = None
    big_m = 1.0
    seen_end = False
    for raw in text.splitlines():
        if raw.startswith("\\ big_M:"):
            big_m = float(raw.split(":", 1)[1])
        line = raw.split("\\", 1)[0]
        key = " ".join(line.lower().split())
        if key in _SECTIONS:
            current = _SECTIONS[key]
            if current == "max":
                raise LpFormatError("maximization models are not supported")
            if current == "end":
                seen_end = True
                break
            continue
        if not line.strip():
            continue
        if current is None:
            raise LpFormatError(f"text before the objective section: {line.strip()!r}")
        sections[current].append(line)
    if not seen_end:
        raise LpFormatError("missing End")

    model = MilpModel(big_m=big_m)
    order: dict[str, None] = {}

    toks = _tokens(" ".join(sections["min"]))
    _, i = _label(toks, 0)
    objective, i = _linear(toks, i)
    if i != len(toks):
        raise LpFormatError("malformed objective")
    order.update(dict.fromkeys(objective))

    constraints = []
    toks = _tokens(" ".join(sections["st"]))
    i = 0
    while i < len(toks):
        name, i = _label(toks, i)
        terms, i = _linear(toks, i)
        if i >= len(toks):
            raise LpFormatError(f"constraint {name} lacks a sense")
        sense = _SENSE[toks[i][1]]
        rhs, i = _signed_number(toks, i + 1)
        name = name or f"c{len(constraints)}"
        constraints.append((name, terms, sense, rhs))
        order.update(dict.fromkeys(terms))

    bounds: dict[str, tuple[float, float | None]] = {}
    for line in sections["bounds"]:
        toks = _tokens(line)
        if len(toks) == 2 and toks[1][1].lower() == "free":
            bounds[toks[0][1]] = (float("-inf"), None)
            order.setdefault(toks[0][1])
            continue
        if toks and toks[0][0] == "name":
            name = toks[0][1]
            sense = _SENSE[toks[1][1]]
            val, _ = _signed_number(toks, 2)
            lb, ub = bounds.get(name, (0.0, None))
            if sense == ">=":
                lb = val
            elif sense == "<=":
                ub = val
            else:
                lb = ub = val
        else:
            lo, j = _signed_number(toks, 0)
            if toks[j][0] != "op" or toks[j + 1][0] != "name":
                raise LpFormatError(f"malformed bound {line.strip()!r}")
            name = toks[j + 1][1]
            lb, ub = lo, None
            if j + 2 < len(toks):
                ub, _ = _signed_number(toks, j + 3)
        bounds[name] = (lb, None if ub == float("inf") else ub)
        order.setdefault(name)
    binaries = {n for line in sections["bin"] for n in line.split()}
    generals = {n for line in sections["gen"] for n in line.split()}
    for n in list(binaries) + list(generals):
        order.setdefault(n)

    for name in order:
        kind = "binary" if name in binaries else "integer" if name in generals else "continuous"
        lb, ub = bounds.get(name, (0.0, None))
        if kind == "binary":
            lb, ub = 0.0, 1.0
        model.variables[name] = Variable(name, kind, float(lb), None if ub is None else float(ub))
    model.objective = {n: c for n, c in objective.items() if c != 0}
    for name, terms, sense, rhs in constraints:
        model.constraints.append(Constraint(name, tuple(terms.items()), sense, rhs))
    return model


def read_lp(path) -> MilpModel:
    return parse_lp(Path(path).read_text())


# -- solutions ---------------------------------------------------------------------

def parse_solution(text: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise LpFormatError(f"solution line {lineno}: expected 'name value'")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            raise LpFormatError(f"solution line {lineno}: bad value {parts[1]!r}") from None
    return values


def read_solution(path) -> dict[str, float]:
    return parse_solution(Path(path).read_text())


def solution_text(values: Mapping[str, float], comment: str = "") -> str:
    out = [f"# {line}" for line in comment.splitlines()]
    out += [f"{name} {_num(values[name])}" for name in values if values[name] != 0]
    return "\n".join(out) + "\n"


def write_solution(values: Mapping[str, float], path, comment: str = "") -> Path:
    _atomic_write(path, solution_text(values, comment))
    return Path(path)
