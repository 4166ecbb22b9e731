"""
MPS export/import for `Model`, and plain-text solution files of external MILP solvers.

Written MPS files use the fixed section layout (NAME, OBJSENSE, ROWS, COLUMNS, RHS, BOUNDS, ENDATA) with
whitespace separated fields, integer MARKER blocks around binaries and explicit bounds for them.
Names longer than MAX_NAME_LENGTH are truncated and made unique; `name_map` gives the translation back,
and is stored next to the MPS file as a JSON sidecar.
"""
import json
import logging
import math
import re
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from hlctdp.milp.model import Assignment, Model, VarKind, split_name

logger = logging.getLogger(__name__)

MAX_NAME_LENGTH = 255
OBJECTIVE_ROW = "OBJ"
SECTIONS = ("NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")
_ROW_TYPES = {"<=": "L", ">=": "G", "=": "E"}
_OBJECTIVE_RE = re.compile(r"objective\s+value\s*[=:]\s*(\S+)", re.IGNORECASE)


class MpsFormatError(ValueError):
    pass


class SolutionFormatError(ValueError):
    pass


def _unique_names(names: Iterable[str], reserved=()) -> List[str]:
    used = set(reserved)
    result = []
    for name in names:
        candidate = name.replace(" ", "_")[:MAX_NAME_LENGTH]
        suffix = 1
        while candidate in used:
            tag = f"~{suffix}"
            candidate = name.replace(" ", "_")[:MAX_NAME_LENGTH - len(tag)] + tag
            suffix += 1
        used.add(candidate)
        result.append(candidate)
    return result


def _mps_names(model: Model) -> Tuple[List[str], List[str]]:
    columns = _unique_names(v.name for v in model.variables)
    rows = _unique_names((c.name for c in model.constraints), reserved=(OBJECTIVE_ROW,))
    return columns, rows


def name_map(model: Model) -> Dict[str, str]:
    """ MPS name -> model name, for every name that had to be changed on export. """
    columns, rows = _mps_names(model)
    mapping = {mps: var.name for mps, var in zip(columns, model.variables) if mps != var.name}
    mapping.update({mps: row.name for mps, row in zip(rows, model.constraints) if mps != row.name})
    return mapping


def _num(value: float) -> str:
    return repr(float(value))


def export_mps(model: Model) -> str:
    columns, rows = _mps_names(model)
    lines = [f"NAME          {model.name.replace(' ', '_') or 'hlctdp'}",
             "OBJSENSE",
             "    MAX" if model.maximize else "    MIN",
             "ROWS",
             f" N  {OBJECTIVE_ROW}"]
    lines.extend(f" {_ROW_TYPES[row.sense]}  {name}" for row, name in zip(model.constraints, rows))

    entries: List[List[Tuple[str, float]]] = [[] for _ in model.variables]
    for vid, coef in model.objective.items():
        entries[vid].append((OBJECTIVE_ROW, coef))
    for row, name in zip(model.constraints, rows):
        for vid, coef in row.terms:
            entries[vid].append((name, coef))

    lines.append("COLUMNS")
    in_marker = False
    marker_count = 0
    for var, column in zip(model.variables, columns):
        if var.is_binary() != in_marker:
            tag = "'INTORG'" if var.is_binary() else "'INTEND'"
            lines.append(f"    MARKER{marker_count:<6d}  'MARKER'                 {tag}")
            marker_count += 1
            in_marker = var.is_binary()
        for row_name, coef in entries[var.id] or [(OBJECTIVE_ROW, 0.0)]:
            lines.append(f"    {column:<10}  {row_name:<10}  {_num(coef)}")
    if in_marker:
        lines.append(f"    MARKER{marker_count:<6d}  'MARKER'                 'INTEND'")

    lines.append("RHS")
    if model.objective_constant:
        lines.append(f"    RHS       {OBJECTIVE_ROW:<10}  {_num(-model.objective_constant)}")
    for row, name in zip(model.constraints, rows):
        if row.rhs:
            lines.append(f"    RHS       {name:<10}  {_num(row.rhs)}")

    lines.append("BOUNDS")
    for var, column in zip(model.variables, columns):
        if var.lower == var.upper:
            lines.append(f" FX BND       {column:<10}  {_num(var.lower)}")
            continue
        if var.lower == -math.inf:
            lines.append(f" MI BND       {column}")
        elif var.lower != 0:
            lines.append(f" LO BND       {column:<10}  {_num(var.lower)}")
        if var.upper != math.inf:
            lines.append(f" UP BND       {column:<10}  {_num(var.upper)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def parse_mps(text: str, names: Optional[Dict[str, str]] = None) -> Model:
    """ Parse MPS text written by `export_mps`; `names` is the sidecar name map (MPS name -> model name). """
    names = names or {}
    section_pos = -1
    section = None
    model_name, maximize = "hlctdp", False
    row_types: Dict[str, str] = {}
    row_order: List[str] = []
    objective_row = None
    columns: Dict[str, dict] = {}
    col_order: List[str] = []
    rhs: Dict[str, float] = {}
    in_marker = False

    def fail(line_no, message):
        raise MpsFormatError(f"line {line_no}: {message}")

    def number(token, line_no):
        try:
            return float(token)
        except ValueError:
            fail(line_no, f"not a number: {token!r}")

    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        tokens = raw.split()
        if not raw[0].isspace():
            header = tokens[0].upper()
            if header not in SECTIONS:
                fail(line_no, f"unknown section {tokens[0]!r}")
            pos = SECTIONS.index(header)
            if pos <= section_pos:
                fail(line_no, f"section {header} out of order")
            section_pos, section = pos, header
            if header == "NAME" and len(tokens) > 1:
                model_name = tokens[1]
            elif header == "OBJSENSE" and len(tokens) > 1:
                maximize = tokens[1].upper() in ("MAX", "MAXIMIZE")
            elif header == "RANGES":
                fail(line_no, "RANGES are not supported")
            elif header == "ENDATA":
                break
            continue
        if section in (None, "NAME"):
            fail(line_no, "data line before ROWS")
        if section == "OBJSENSE":
            maximize = tokens[0].upper() in ("MAX", "MAXIMIZE")
        elif section == "ROWS":
            if len(tokens) != 2 or tokens[0].upper() not in ("N", "L", "G", "E"):
                fail(line_no, f"malformed row declaration {raw.strip()!r}")
            kind, name = tokens[0].upper(), tokens[1]
            if kind == "N":
                if objective_row is None:
                    objective_row = name
                continue
            row_types[name] = kind
            row_order.append(name)
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1].strip("'\"").upper() == "MARKER":
                in_marker = tokens[2].strip("'\"").upper() == "INTORG"
                continue
            if len(tokens) not in (3, 5):
                fail(line_no, f"malformed column entry {raw.strip()!r}")
            col = tokens[0]
            if col not in columns:
                columns[col] = {"binary": in_marker, "entries": {}, "lower": 0.0, "upper": None}
                col_order.append(col)
            for row, value in zip(tokens[1::2], tokens[2::2]):
                if row != objective_row and row not in row_types:
                    fail(line_no, f"unknown row {row!r}")
                columns[col]["entries"][row] = columns[col]["entries"].get(row, 0.0) + number(value, line_no)
        elif section == "RHS":
            pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
            for row, value in zip(pairs[0::2], pairs[1::2]):
                if row != objective_row and row not in row_types:
                    fail(line_no, f"unknown row {row!r}")
                rhs[row] = number(value, line_no)
        elif section == "BOUNDS":
            if len(tokens) < 3:
                fail(line_no, f"malformed bound {raw.strip()!r}")
            kind, col = tokens[0].upper(), tokens[2]
            if col not in columns:
                fail(line_no, f"unknown column {col!r}")
            value = number(tokens[3], line_no) if len(tokens) > 3 else None
            spec = columns[col]
            if kind == "UP":
                spec["upper"] = value
            elif kind == "LO":
                spec["lower"] = value
            elif kind == "FX":
                spec["lower"] = spec["upper"] = value
            elif kind == "MI":
                spec["lower"] = -math.inf
            elif kind == "PL":
                spec["upper"] = math.inf
            elif kind == "BV":
                spec["binary"], spec["lower"], spec["upper"] = True, 0.0, 1.0
            elif kind == "FR":
                spec["lower"], spec["upper"] = -math.inf, math.inf
            else:
                fail(line_no, f"unsupported bound type {kind}")
    if section != "ENDATA":
        raise MpsFormatError("missing ENDATA")

    model = Model(names.get(model_name, model_name), maximize=maximize)
    objective_terms = []
    row_terms: Dict[str, List[Tuple[int, float]]] = {row: [] for row in row_order}
    for col in col_order:
        spec = columns[col]
        name = names.get(col, col)
        kind = VarKind.BINARY if spec["binary"] else VarKind.CONTINUOUS
        parsed = split_name(name)
        if parsed is not None:
            vid = model.add_variable(parsed[0], parsed[1], kind, spec["lower"], spec["upper"])
        else:
            vid = model.add_named_variable(name, kind, spec["lower"], spec["upper"])
        for row, coef in spec["entries"].items():
            if row == objective_row:
                objective_terms.append((vid, coef))
            else:
                row_terms[row].append((vid, coef))
    senses = {"L": "<=", "G": ">=", "E": "="}
    for row in row_order:
        model.add_constraint(names.get(row, row), row_terms[row], senses[row_types[row]], rhs.get(row, 0.0))
    model.set_objective(objective_terms, constant=-rhs.get(objective_row, 0.0) if objective_row else 0.0)
    return model.freeze()


def write_mps(model: Model, path: str) -> str:
    """ Write the MPS file and its name-map sidecar; returns the sidecar path. """
    with open(path, "w", encoding="utf-8") as f:
        f.write(export_mps(model))
    sidecar = path + ".names.json"
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump(name_map(model), f, indent=1, sort_keys=True)
    return sidecar


def read_mps(path: str) -> Model:
    names = {}
    try:
        with open(path + ".names.json", encoding="utf-8") as f:
            names = json.load(f)
    except FileNotFoundError:
        pass
    with open(path, encoding="utf-8") as f:
        return parse_mps(f.read(), names)


def import_solution(text: str, model: Model, names: Optional[Dict[str, str]] = None) -> np.ndarray:
    """ Read "<variableName> <value>" lines into a dense assignment. Comment lines start with '#';
    unknown names are skipped with a warning and unlisted variables default to 0. """
    names = names or {}
    x = np.zeros(model.num_variables)
    unknown = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise SolutionFormatError(f"line {line_no}: expected '<name> <value>', got {line!r}")
        name, token = tokens
        try:
            value = float(token)
        except ValueError:
            raise SolutionFormatError(f"line {line_no}: unparsable value {token!r}")
        if not math.isfinite(value):
            raise SolutionFormatError(f"line {line_no}: non-finite value {token!r}")
        vid = model.var_by_name(names.get(name, name))
        if vid is None:
            unknown.append(name)
            continue
        x[vid] = value
    if unknown:
        logger.warning(f"ignored {len(unknown)} unknown variable names in solution, e.g. {unknown[:3]}")
    return x


def read_solution_objective(text: str) -> Optional[float]:
    """ The objective value announced in a solution file comment, if any. """
    for line in text.splitlines():
        if line.strip().startswith("#"):
            match = _OBJECTIVE_RE.search(line)
            if match:
                try:
                    return float(match.group(1))
                except ValueError:
                    raise SolutionFormatError(f"unparsable objective value {match.group(1)!r}")
    return None


def format_solution(model: Model, assignment: Assignment, names: Optional[Dict[str, str]] = None) -> str:
    """ Solution file in the "<name> <value>" layout external solvers write, listing nonzero variables. """
    x = model.dense_assignment(assignment)
    to_mps = {v: k for k, v in (names or {}).items()}
    objective, _ = model.evaluate(x)
    lines = [f"# Solution for model {model.name}", f"# Objective value = {objective!r}"]
    lines.extend(f"{to_mps.get(var.name, var.name)} {float(x[var.id])!r}" for var in model.variables if x[var.id] != 0)
    return "\n".join(lines) + "\n"
