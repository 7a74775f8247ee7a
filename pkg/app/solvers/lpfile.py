"""
Plain-text exports of a MilpProblem for cross-checking with external tools.

`write_lp` emits CPLEX LP format with a fixed ordering: objective terms by
column index, rows in problem order with terms by column index, bounds for
every column in column order, then the binaries. Numbers use repr precision.
`write_triplets` emits the raw (row, col, coeff) dump plus one sense/rhs line
per row.
"""
import re
from pathlib import Path
from typing import Union

import numpy as np

from app.models.milp import MilpProblem

_SENSES = {"L": "<=", "G": ">=", "E": "="}
_UNSAFE = re.compile(r"[^A-Za-z0-9_.()]")


def lp_name(name: str) -> str:
    return _UNSAFE.sub("_", name.replace("[", "(").replace("]", ")"))


def _num(value: float) -> str:
    return repr(float(value))


def _terms(coeffs: np.ndarray, cols: np.ndarray, names: list[str]) -> str:
    parts = []
    for c, j in zip(coeffs, cols):
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_num(abs(c))} {names[j]}")
    return " ".join(parts) if parts else "0"


def render_lp(problem: MilpProblem, title: str = "dispatch") -> str:
    names = [lp_name(n) for n in problem.names]
    lines = [f"\\ {title}", "Minimize"]
    nz = np.flatnonzero(problem.cost)
    objective = _terms(problem.cost[nz], nz, names)
    if problem.offset:
        objective += f" + {_num(problem.offset)} __offset"
    lines.append(f" obj: {objective}")

    lines.append("Subject To")
    A = problem.A.tocsr()
    A.sort_indices()
    for i in range(problem.num_rows):
        start, end = A.indptr[i], A.indptr[i + 1]
        lhs = _terms(A.data[start:end], A.indices[start:end], names)
        lines.append(f" {lp_name(problem.row_names[i])}: {lhs} {_SENSES[problem.senses[i]]} {_num(problem.rhs[i])}")

    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = problem.lower[j], problem.upper[j]
        if problem.binary_mask[j]:
            continue
        if np.isneginf(lo) and np.isposinf(hi):
            lines.append(f" {name} free")
        elif lo == hi:
            lines.append(f" {name} = {_num(lo)}")
        else:
            lo_text = "-inf" if np.isneginf(lo) else _num(lo)
            hi_text = "+inf" if np.isposinf(hi) else _num(hi)
            lines.append(f" {lo_text} <= {name} <= {hi_text}")
    if problem.offset:
        lines.append(" __offset = 1")

    binaries = [names[j] for j in np.flatnonzero(problem.binary_mask)]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {name}" for name in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(problem: MilpProblem, path: Union[str, Path], title: str = "dispatch") -> Path:
    path = Path(path)
    path.write_text(render_lp(problem, title))
    return path


def write_triplets(problem: MilpProblem, path: Union[str, Path]) -> Path:
    path = Path(path)
    coo = problem.A.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with path.open("w") as fh:
        fh.write("row,col,coeff\n")
        for k in order:
            fh.write(f"{coo.row[k]},{coo.col[k]},{_num(coo.data[k])}\n")
        fh.write("row,sense,rhs\n")
        for i in range(problem.num_rows):
            fh.write(f"{i},{problem.senses[i]},{_num(problem.rhs[i])}\n")
    return path
