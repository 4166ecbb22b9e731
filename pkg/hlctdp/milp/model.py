"""
A small solver-agnostic MILP container.

Variables are addressed either by dense id or by (family, indices), where indices are the 0-based subscripts
of the formulation symbol, e.g. ("x", (i, j, k, m, r)). Names are derived from them with 1-based subscripts
("x_1_2_3_4_1"), so the name of a variable alone is enough to recover its family and indices.

Two-sided constraints are stored as two rows named "<group>[lo]" and "<group>[up]"; `num_constraints`
counts such a pair once, `num_rows` counts rows.
"""
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from hlctdp.config import FEASIBILITY_TOL

Indices = Tuple[int, ...]
Assignment = Union[Mapping[int, float], Sequence[float], np.ndarray]

_NAME_RE = re.compile(r"^([A-Za-z]+)((?:_\d+)*)$")

SENSES = ("<=", "=", ">=")


class VarKind(str, Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    kind: VarKind
    lower: float = 0.0
    upper: float = 1.0

    def is_binary(self) -> bool:
        return self.kind == VarKind.BINARY


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: Tuple[Tuple[int, float], ...]
    sense: str
    rhs: float

    @property
    def group(self) -> str:
        return self.name.split("[", 1)[0]


@dataclass(frozen=True)
class RowViolation:
    name: str
    residual: float

    def __str__(self):
        return f"{self.name}: residual {self.residual:.6g}"


def var_name(family: str, indices: Indices) -> str:
    return "_".join([family] + [str(i + 1) for i in indices])


def split_name(name: str) -> Optional[Tuple[str, Indices]]:
    """ Inverse of `var_name`; None for names outside the family naming scheme. """
    match = _NAME_RE.match(name)
    if not match:
        return None
    family, subscripts = match.groups()
    return family, tuple(int(s) - 1 for s in subscripts.split("_")[1:])


class Model:
    def __init__(self, name: str = "hlctdp", maximize: bool = True):
        self.name = name
        self.maximize = maximize
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self.objective: Dict[int, float] = {}
        self.objective_constant = 0.0
        self.var_index: Dict[Tuple[str, Indices], int] = {}
        self._ids_by_name: Dict[str, int] = {}
        self._frozen = False
        self._matrix = None

    # Build phase

    def _check_mutable(self):
        assert not self._frozen, f"model {self.name} is frozen"
        self._matrix = None

    def add_variable(self, family: str, indices: Indices, kind: VarKind, lower: float = 0.0,
                     upper: Optional[float] = None) -> int:
        """ Add a variable of a formulation family; binaries default to [0,1], continuous ones to [0,inf). """
        key = (family, tuple(indices))
        assert key not in self.var_index, f"duplicate variable {key}"
        vid = self.add_named_variable(var_name(family, indices), kind, lower, upper)
        self.var_index[key] = vid
        return vid

    def add_named_variable(self, name: str, kind: VarKind, lower: float = 0.0, upper: Optional[float] = None) -> int:
        self._check_mutable()
        if name in self._ids_by_name:
            raise ValueError(f"duplicate variable name {name}")
        if upper is None:
            upper = 1.0 if kind == VarKind.BINARY else math.inf
        vid = len(self.variables)
        self.variables.append(Variable(vid, name, VarKind(kind), float(lower), float(upper)))
        self._ids_by_name[name] = vid
        return vid

    def add_constraint(self, name: str, terms: Iterable[Tuple[int, float]], sense: str, rhs: float) -> Constraint:
        self._check_mutable()
        if sense not in SENSES:
            raise ValueError(f"unknown constraint sense {sense!r}")
        aggregated: Dict[int, float] = {}
        for vid, coef in terms:
            if not 0 <= vid < len(self.variables):
                raise IndexError(f"constraint {name} references unknown variable id {vid}")
            aggregated[vid] = aggregated.get(vid, 0.0) + coef
        row = Constraint(name, tuple((v, c) for v, c in aggregated.items() if c != 0), sense, float(rhs))
        self.constraints.append(row)
        return row

    def set_objective(self, terms: Iterable[Tuple[int, float]], constant: float = 0.0):
        self._check_mutable()
        self.objective = {}
        for vid, coef in terms:
            self.objective[vid] = self.objective.get(vid, 0.0) + coef
        self.objective_constant = float(constant)

    def set_upper_bound(self, vid: int, upper: float):
        self._check_mutable()
        var = self.variables[vid]
        self.variables[vid] = Variable(var.id, var.name, var.kind, var.lower, float(upper))

    def freeze(self) -> 'Model':
        self._frozen = True
        return self

    # Queries

    def var(self, family: str, *indices: int) -> int:
        return self.var_index[(family, tuple(indices))]

    def var_by_name(self, name: str) -> Optional[int]:
        return self._ids_by_name.get(name)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_binary(self) -> int:
        return sum(1 for v in self.variables if v.is_binary())

    @property
    def num_continuous(self) -> int:
        return self.num_variables - self.num_binary

    @property
    def num_rows(self) -> int:
        return len(self.constraints)

    @property
    def num_constraints(self) -> int:
        """ Number of constraints, counting each two-sided constraint once. """
        return len({row.group for row in self.constraints})

    def _coo(self):
        if self._matrix is None:
            rows, cols, vals = [], [], []
            for r, row in enumerate(self.constraints):
                for vid, coef in row.terms:
                    rows.append(r)
                    cols.append(vid)
                    vals.append(coef)
            self._matrix = (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64),
                            np.asarray(vals, dtype=float))
        return self._matrix

    def dense_assignment(self, assignment: Assignment) -> np.ndarray:
        if isinstance(assignment, Mapping):
            missing = [v.name for v in self.variables if v.id not in assignment]
            if missing:
                raise ValueError(f"assignment misses {len(missing)} variables, e.g. {missing[:3]}")
            return np.asarray([float(assignment[v.id]) for v in self.variables])
        x = np.asarray(assignment, dtype=float)
        if x.shape != (self.num_variables,):
            raise ValueError(f"assignment has shape {x.shape}, expected ({self.num_variables},)")
        return x

    def evaluate(self, assignment: Assignment, tol: float = FEASIBILITY_TOL) -> Tuple[float, List[RowViolation]]:
        """ Objective value of `assignment` and the rows (and variable bounds) it violates by more than `tol`. """
        x = self.dense_assignment(assignment)
        objective = math.fsum(coef * x[vid] for vid, coef in self.objective.items()) + self.objective_constant
        rows, cols, vals = self._coo()
        activity = np.bincount(rows, weights=vals * x[cols], minlength=self.num_rows) if self.num_rows else np.zeros(0)
        violations = []
        for row, act in zip(self.constraints, activity):
            if row.sense == "<=":
                residual = act - row.rhs
            elif row.sense == ">=":
                residual = row.rhs - act
            else:
                residual = abs(act - row.rhs)
            if residual > tol:
                violations.append(RowViolation(row.name, float(residual)))
        for var in self.variables:
            value = x[var.id]
            residual = max(var.lower - value, value - var.upper)
            if residual > tol:
                violations.append(RowViolation(f"bound:{var.name}", float(residual)))
        return objective, violations

    def __repr__(self):
        return (f"Model({self.name}: {self.num_binary} binary + {self.num_continuous} continuous variables, "
                f"{self.num_constraints} constraints in {self.num_rows} rows)")


def evaluate(model: Model, assignment: Assignment) -> Tuple[float, List[RowViolation]]:
    return model.evaluate(assignment)
