"""
Solver-agnostic MILP container and the builder the grid and dispatch
services use to lay out variables and constraint rows block by block.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from app.utils.exceptions import InvalidArgumentError

MatrixLike = Union[np.ndarray, sp.spmatrix, sp.sparray]


class VarKind(str, Enum):
    CONTINUOUS = "C"
    BINARY = "B"


class Sense(str, Enum):
    LE = "L"
    GE = "G"
    EQ = "E"


@dataclass(slots=True, frozen=True)
class VariableLayout:
    """
    Named index groups over the variable vector.

    `groups` maps a series name (for example "p_buy" or "bla.BLA1.u") to the
    column indices holding that series, one per period. `grid_cost_cols` and
    `om_cost_cols` split the objective into purchase/sale cost and O&M cost.
    """
    groups: dict[str, np.ndarray]
    cost: np.ndarray
    grid_cost_cols: np.ndarray
    om_cost_cols: np.ndarray
    bla_ids: tuple[str, ...] = ()
    mode: str = "grid"


@dataclass(slots=True, frozen=True)
class MilpProblem:
    """min cost·v + offset  s.t.  lhs rows of A compared to rhs by `senses`, lower <= v <= upper."""
    names: tuple[str, ...]
    kinds: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    row_names: tuple[str, ...]
    layout: VariableLayout
    offset: float = 0.0

    @property
    def num_variables(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def binary_mask(self) -> np.ndarray:
        return self.kinds == VarKind.BINARY.value

    @property
    def num_binaries(self) -> int:
        return int(self.binary_mask.sum())


@dataclass(slots=True)
class _RowBlock:
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray


class ProblemBuilder:
    """Incrementally declares variables and sparse constraint rows."""

    def __init__(self):
        self._names: list[str] = []
        self._kinds: list[np.ndarray] = []
        self._lower: list[np.ndarray] = []
        self._upper: list[np.ndarray] = []
        self._cost: list[np.ndarray] = []
        self._blocks: list[_RowBlock] = []
        self._senses: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self._row_names: list[str] = []
        self.groups: dict[str, np.ndarray] = {}
        self.grid_cost_cols: list[np.ndarray] = []
        self.om_cost_cols: list[np.ndarray] = []

    @classmethod
    def from_problem(cls, problem: MilpProblem) -> "ProblemBuilder":
        builder = cls()
        builder._names = list(problem.names)
        builder._kinds = [problem.kinds.copy()]
        builder._lower = [problem.lower.copy()]
        builder._upper = [problem.upper.copy()]
        builder._cost = [problem.cost.copy()]
        coo = problem.A.tocoo()
        builder._blocks = [_RowBlock(coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy())]
        builder._senses = [problem.senses.copy()]
        builder._rhs = [problem.rhs.copy()]
        builder._row_names = list(problem.row_names)
        builder.groups = dict(problem.layout.groups)
        builder.grid_cost_cols = [problem.layout.grid_cost_cols]
        builder.om_cost_cols = [problem.layout.om_cost_cols]
        return builder

    @property
    def num_variables(self) -> int:
        return len(self._names)

    @property
    def num_rows(self) -> int:
        return len(self._row_names)

    def add_variables(
        self,
        group: str,
        count: int,
        kind: VarKind = VarKind.CONTINUOUS,
        lower: Union[float, Sequence[float], np.ndarray] = -np.inf,
        upper: Union[float, Sequence[float], np.ndarray] = np.inf,
        cost: Union[float, Sequence[float], np.ndarray] = 0.0,
        cost_class: Optional[str] = None,
    ) -> np.ndarray:
        """Declare `count` variables named `group[i]` and return their column indices."""
        if group in self.groups:
            raise InvalidArgumentError(f"variable group {group!r} declared twice")
        start = len(self._names)
        cols = np.arange(start, start + count, dtype=np.int64)
        self._names.extend(f"{group}[{i}]" for i in range(count))
        if kind is VarKind.BINARY:
            lower, upper = 0.0, 1.0
        self._kinds.append(np.full(count, kind.value, dtype="<U1"))
        self._lower.append(np.broadcast_to(np.asarray(lower, dtype=float), (count,)).copy())
        self._upper.append(np.broadcast_to(np.asarray(upper, dtype=float), (count,)).copy())
        self._cost.append(np.broadcast_to(np.asarray(cost, dtype=float), (count,)).copy())
        self.groups[group] = cols
        if cost_class == "grid":
            self.grid_cost_cols.append(cols)
        elif cost_class == "om":
            self.om_cost_cols.append(cols)
        return cols

    def add_rows(
        self,
        name: str,
        terms: Iterable[tuple[MatrixLike, np.ndarray]],
        sense: Sense,
        rhs: Union[float, Sequence[float], np.ndarray],
    ) -> np.ndarray:
        """
        Append rows sum_i M_i · v[cols_i] (sense) rhs.

        Every M_i must have the same row count; its column count must match
        len(cols_i).
        """
        terms = list(terms)
        if not terms:
            raise InvalidArgumentError(f"row block {name!r} has no terms")
        num = terms[0][0].shape[0]
        start = self.num_rows
        for matrix, cols in terms:
            cols = np.asarray(cols, dtype=np.int64)
            if matrix.shape != (num, cols.shape[0]):
                raise InvalidArgumentError(
                    f"row block {name!r}: coefficient shape {matrix.shape} does not match ({num}, {cols.shape[0]})"
                )
            if cols.size and cols.max() >= self.num_variables:
                raise InvalidArgumentError(f"row block {name!r} references an undeclared variable")
            coo = sp.coo_matrix(matrix)
            keep = coo.data != 0.0
            self._blocks.append(_RowBlock(
                rows=coo.row[keep].astype(np.int64) + start,
                cols=cols[coo.col[keep]],
                vals=coo.data[keep].astype(float),
            ))
        self._senses.append(np.full(num, sense.value, dtype="<U1"))
        self._rhs.append(np.broadcast_to(np.asarray(rhs, dtype=float), (num,)).copy())
        self._row_names.extend(f"{name}[{i}]" for i in range(num))
        return np.arange(start, start + num, dtype=np.int64)

    def set_bounds(self, cols: np.ndarray, lower=None, upper=None) -> None:
        lo = np.concatenate(self._lower) if self._lower else np.empty(0)
        hi = np.concatenate(self._upper) if self._upper else np.empty(0)
        if lower is not None:
            lo[cols] = lower
        if upper is not None:
            hi[cols] = upper
        self._lower, self._upper = [lo], [hi]

    def build(self, mode: str = "grid", bla_ids: tuple[str, ...] = ()) -> MilpProblem:
        n = self.num_variables
        m = self.num_rows
        if self._blocks:
            rows = np.concatenate([b.rows for b in self._blocks])
            cols = np.concatenate([b.cols for b in self._blocks])
            vals = np.concatenate([b.vals for b in self._blocks])
        else:
            rows = cols = np.empty(0, dtype=np.int64)
            vals = np.empty(0)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        A.sum_duplicates()

        def _cat(parts: list[np.ndarray], dtype) -> np.ndarray:
            return np.concatenate(parts).astype(dtype) if parts else np.empty(0, dtype=dtype)

        cost = _cat(self._cost, float)
        layout = VariableLayout(
            groups=dict(self.groups),
            cost=cost,
            grid_cost_cols=_cat(self.grid_cost_cols, np.int64),
            om_cost_cols=_cat(self.om_cost_cols, np.int64),
            bla_ids=bla_ids,
            mode=mode,
        )
        return MilpProblem(
            names=tuple(self._names),
            kinds=_cat(self._kinds, "<U1"),
            lower=_cat(self._lower, float),
            upper=_cat(self._upper, float),
            cost=cost,
            A=A,
            senses=_cat(self._senses, "<U1"),
            rhs=_cat(self._rhs, float),
            row_names=tuple(self._row_names),
            layout=layout,
        )


def identity(n: int) -> sp.csr_matrix:
    return sp.identity(n, format="csr")


def diagonal(values: Union[Sequence[float], np.ndarray]) -> sp.csr_matrix:
    return sp.diags(np.asarray(values, dtype=float), format="csr")


__all__ = [
    "VarKind",
    "Sense",
    "VariableLayout",
    "MilpProblem",
    "ProblemBuilder",
    "identity",
    "diagonal",
]

