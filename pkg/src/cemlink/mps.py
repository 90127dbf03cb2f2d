"""MPS export/import for LinearProgram.

Writer emits classic fixed-field layout with generated 8-character names
(R0000001, C0000001, COST) plus a JSON sidecar mapping them back to the
original registry names. Numeric fields use %.17g so values survive the
round trip bit-for-bit; a field can overflow its historical column width,
which whitespace-tolerant (free-format) readers accept. The importer
tokenizes on whitespace and therefore reads both layouts. Nonfinite row
RHS values are written as ``inf``/``-inf`` tokens (Python-parseable).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from scipy import sparse

from .lp import SENSE_EQ, SENSE_GE, SENSE_LE, LinearProgram


class MpsError(Exception):
    pass


class MalformedMps(MpsError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no else message)


_SENSE_TO_TYPE = {SENSE_LE: "L", SENSE_EQ: "E", SENSE_GE: "G"}
_OBJ_NAME = "COST"


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _row_name(i: int) -> str:
    return f"R{i + 1:07d}"


def _col_name(j: int) -> str:
    return f"C{j + 1:07d}"


def _pair_line(name1: str, name2: str, value: float) -> str:
    # name fields pinned at the classic offsets (cols 5 and 15), value free width
    return f"    {name1:<8}  {name2:<8}  {_num(value)}"


def export_mps(lp: LinearProgram, path: str | Path, name: str = "CEMLINK") -> Path:
    """Write lp to path in MPS form; sidecar name map goes to path + '.names.json'."""
    lp.validate()
    path = Path(path)
    lines = [f"NAME          {name}", "ROWS", f" N  {_OBJ_NAME}"]
    for i, sense in enumerate(lp.senses):
        lines.append(f" {_SENSE_TO_TYPE[str(sense)]}  {_row_name(i)}")

    lines.append("COLUMNS")
    csc = lp.A.tocsc()
    for j in range(lp.n_cols):
        cname = _col_name(j)
        # objective entry always written (even 0.0) so empty columns survive
        lines.append(_pair_line(cname, _OBJ_NAME, float(lp.c[j])))
        for k in range(csc.indptr[j], csc.indptr[j + 1]):
            lines.append(_pair_line(cname, _row_name(int(csc.indices[k])), float(csc.data[k])))

    lines.append("RHS")
    for i, b in enumerate(lp.rhs):
        if b != 0.0:
            lines.append(_pair_line("RHS", _row_name(i), float(b)))

    lines.append("BOUNDS")
    for j in range(lp.n_cols):
        lo, hi = float(lp.lb[j]), float(lp.ub[j])
        cname = _col_name(j)
        if lo == 0.0 and math.isinf(hi):
            continue
        if lo == hi:
            lines.append(f" FX {'BND':<8}  {cname:<8}  {_num(lo)}")
            continue
        if math.isinf(lo) and math.isinf(hi):
            lines.append(f" FR {'BND':<8}  {cname:<8}")
            continue
        if math.isinf(lo):
            lines.append(f" MI {'BND':<8}  {cname:<8}")
        elif lo != 0.0:
            lines.append(f" LO {'BND':<8}  {cname:<8}  {_num(lo)}")
        if not math.isinf(hi):
            lines.append(f" UP {'BND':<8}  {cname:<8}  {_num(hi)}")

    lines.append("ENDATA")
    path.write_text("\n".join(lines) + "\n")

    sidecar = {
        "rows": {_row_name(i): (lp.row_names[i] if lp.row_names else f"r{i}") for i in range(lp.n_rows)},
        "cols": {_col_name(j): (lp.col_names[j] if lp.col_names else f"x{j}") for j in range(lp.n_cols)},
    }
    Path(str(path) + ".names.json").write_text(json.dumps(sidecar, indent=0, sort_keys=True))
    return path


def _parse_value(tok: str, line_no: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MalformedMps(f"bad numeric field {tok!r}", line_no) from None


_TYPE_TO_SENSE = {"L": SENSE_LE, "E": SENSE_EQ, "G": SENSE_GE}


def import_mps(path: str | Path) -> LinearProgram:
    """Read an MPS file (fixed or free format). Raises MalformedMps with a line number."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise MpsError(f"cannot read {path}: {exc}") from exc

    obj_row = None
    row_sense: dict[str, str] = {}
    row_idx: dict[str, int] = {}
    row_order: list[str] = []
    col_order: list[str] = []
    col_idx: dict[str, int] = {}
    obj_coef: dict[int, float] = {}
    entries: list[tuple[int, int, float]] = []
    rhs: dict[str, float] = {}
    bounds_lo: dict[int, float] = {}
    bounds_hi: dict[int, float] = {}

    section = None
    saw_endata = False
    line_no = 0
    for line_no, rawline in enumerate(raw.splitlines(), start=1):
        if not rawline.strip() or rawline.lstrip().startswith("*"):
            continue
        is_header = not rawline[0].isspace()
        toks = rawline.split()
        if is_header:
            head = toks[0].upper()
            if head == "NAME":
                continue
            if head == "ENDATA":
                saw_endata = True
                break
            if head == "OBJSENSE":
                section = "OBJSENSE"
                continue
            if head in ("ROWS", "COLUMNS", "RHS", "BOUNDS"):
                section = head
                continue
            if head == "RANGES":
                raise MalformedMps("RANGES section not supported", line_no)
            raise MalformedMps(f"unknown section {head!r}", line_no)

        if section == "OBJSENSE":
            if toks[0].upper() in ("MAX", "MAXIMIZE"):
                raise MalformedMps("maximization not supported", line_no)
            continue
        if section == "ROWS":
            if len(toks) != 2:
                raise MalformedMps("ROWS entry needs type and name", line_no)
            rtype, rname = toks[0].upper(), toks[1]
            if rtype == "N":
                if obj_row is None:
                    obj_row = rname
                    continue
                raise MalformedMps("multiple objective (N) rows", line_no)
            if rtype not in _TYPE_TO_SENSE:
                raise MalformedMps(f"unknown row type {rtype!r}", line_no)
            if rname in row_sense:
                raise MalformedMps(f"duplicate row {rname!r}", line_no)
            row_sense[rname] = _TYPE_TO_SENSE[rtype]
            row_idx[rname] = len(row_order)
            row_order.append(rname)
        elif section == "COLUMNS":
            if "'MARKER'" in rawline:
                raise MalformedMps("integer markers not supported", line_no)
            if len(toks) not in (3, 5):
                raise MalformedMps("COLUMNS entry needs 1 or 2 (row, value) pairs", line_no)
            cname = toks[0]
            if cname not in col_idx:
                col_idx[cname] = len(col_order)
                col_order.append(cname)
            j = col_idx[cname]
            for off in range(1, len(toks), 2):
                rname, val = toks[off], _parse_value(toks[off + 1], line_no)
                if rname == obj_row:
                    obj_coef[j] = obj_coef.get(j, 0.0) + val
                elif rname in row_sense:
                    entries.append((row_idx[rname], j, val))
                else:
                    raise MalformedMps(f"unknown row {rname!r} in COLUMNS", line_no)
        elif section == "RHS":
            if len(toks) not in (3, 5):
                raise MalformedMps("RHS entry needs 1 or 2 (row, value) pairs", line_no)
            for off in range(1, len(toks), 2):
                rname, val = toks[off], _parse_value(toks[off + 1], line_no)
                if rname == obj_row:
                    continue
                if rname not in row_sense:
                    raise MalformedMps(f"unknown row {rname!r} in RHS", line_no)
                rhs[rname] = val
        elif section == "BOUNDS":
            btype = toks[0].upper()
            if btype in ("FR", "MI", "PL"):
                if len(toks) != 3:
                    raise MalformedMps(f"{btype} bound needs set and column", line_no)
                val = None
            else:
                if len(toks) != 4:
                    raise MalformedMps(f"{btype} bound needs set, column, value", line_no)
                val = _parse_value(toks[3], line_no)
            cname = toks[2]
            if cname not in col_idx:
                raise MalformedMps(f"unknown column {cname!r} in BOUNDS", line_no)
            j = col_idx[cname]
            if btype == "UP":
                bounds_hi[j] = val
            elif btype == "LO":
                bounds_lo[j] = val
            elif btype == "FX":
                bounds_lo[j] = val
                bounds_hi[j] = val
            elif btype == "FR":
                bounds_lo[j] = -np.inf
                bounds_hi[j] = np.inf
            elif btype == "MI":
                bounds_lo[j] = -np.inf
            elif btype == "PL":
                bounds_hi[j] = np.inf
            else:
                raise MalformedMps(f"unknown bound type {btype!r}", line_no)
        elif section is None:
            raise MalformedMps("data before any section header", line_no)

    if not saw_endata:
        raise MalformedMps("missing ENDATA (truncated file)", line_no)
    if obj_row is None:
        raise MalformedMps("no objective (N) row declared", line_no)

    m, n = len(row_order), len(col_order)
    c = np.zeros(n)
    for j, v in obj_coef.items():
        c[j] = v
    if entries:
        ri, ci, vv = zip(*entries)
        A = sparse.coo_matrix((vv, (ri, ci)), shape=(m, n)).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
    else:
        A = sparse.csr_matrix((m, n))
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for j, v in bounds_lo.items():
        lb[j] = v
    for j, v in bounds_hi.items():
        ub[j] = v

    row_names = list(row_order)
    col_names = list(col_order)
    sidecar = Path(str(path) + ".names.json")
    if sidecar.exists():
        names = json.loads(sidecar.read_text())
        row_names = [names["rows"].get(r, r) for r in row_order]
        col_names = [names["cols"].get(cn, cn) for cn in col_order]

    lp = LinearProgram(
        c=c,
        A=A,
        senses=np.array([row_sense[r] for r in row_order], dtype="U1"),
        rhs=np.array([rhs.get(r, 0.0) for r in row_order]),
        lb=lb,
        ub=ub,
        col_names=col_names,
        row_names=row_names,
    )
    lp.validate()
    return lp
