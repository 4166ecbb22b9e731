"""
Round trip through an external MILP solver: export a formulation as MPS, let the solver write a
"<variableName> <value>" solution file, and read that file back into a validated Solution.
"""
import logging
from typing import Dict, Optional

from hlctdp.evaluation.validation import validate
from hlctdp.instances.instance import Instance
from hlctdp.milp.formulations import BuildOptions, DecodeError, Formulation, build, decode_solution
from hlctdp.milp.mps import import_solution, read_solution_objective
from hlctdp.solving.solution import Solution, SolveStatus

logger = logging.getLogger(__name__)

OBJECTIVE_RTOL = 1e-4


def solve_via_export(inst: Instance, which: Formulation, opts: BuildOptions, solution_text: str,
                     names: Optional[Dict[str, str]] = None,
                     status: SolveStatus = SolveStatus.FEASIBLE) -> Solution:
    """ Decode an external solver's solution of the `which` model built with `opts`.
    `names` maps shortened MPS names back to model names (the `.names.json` sidecar of `write_mps`).
    Raises DecodeError when the decoded solution is infeasible, or when its recomputed objective differs from the
    announced one (or, without an announcement, from the model objective of the values) by more than 1e-4 relative. """
    model, index = build(inst, which, opts)
    assignment = import_solution(solution_text, model, names)
    solution = decode_solution(inst, which, index, assignment, status=status)

    report = validate(inst, solution, check_consistency=opts.include_consistency)
    if not report.ok:
        raise DecodeError(f"decoded solution is infeasible: {'; '.join(map(str, report.violations))}")

    announced = read_solution_objective(solution_text)
    if announced is None:
        announced, _ = model.evaluate(assignment)
    if abs(announced - solution.objective) > OBJECTIVE_RTOL * max(1.0, abs(solution.objective)):
        raise DecodeError(f"solution file objective {announced:.9g} does not match the recomputed {solution.objective:.9g}")
    logger.info(f"decoded external {Formulation(which).value} solution: {solution}")
    return solution
