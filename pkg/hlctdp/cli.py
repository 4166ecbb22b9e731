"""
Command-line driver: generate instances, build MPS models, solve, brute-force, validate and report.

Every command writes `<command>.manifest.json` into its output directory, recording the parsed arguments,
their hash, the tool version and the produced files.
"""
import dataclasses
import logging
import os
import sys
import time
from argparse import ArgumentParser, Namespace
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from hlctdp import __version__
from hlctdp.config import field_help, load_dataclass_json
from hlctdp.evaluation.report import (COMPARE_TABLE, RunRecord, find_compare_tables, find_run_records,
                                      load_run_record, save_run_record, write_report)
from hlctdp.evaluation.stats import STATS_COLUMNS, stats
from hlctdp.evaluation.validation import validate
from hlctdp.instances.encode_decode import InstanceFormatError, load_instance, save_instance
from hlctdp.instances.generator import (DEFAULT_ALPHAS, DEFAULT_SIZES, CabFormatError, DeltaTable, GenParams,
                                        load_cab, load_hub_costs, sweep)
from hlctdp.instances.instance import Instance, InvalidInstanceError, require_valid
from hlctdp.milp.formulations import BuildOptions, DecodeError, Formulation, build, model_size
from hlctdp.milp.mps import MpsFormatError, SolutionFormatError, write_mps
from hlctdp.solving.oracle import OracleLimitError, OracleLimits, brute_force
from hlctdp.solving.preprocess import PREPROCESS_COLUMNS, preprocess
from hlctdp.solving.solution import decode_solution_dict, encode_solution_dict
from hlctdp.solving.solver import SolverConfig, solve_exact
from hlctdp.utils import concat_csvs, config_hash, read_json, write_csv, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ORACLE_LIMIT = 3
EXIT_INPUT = 4

INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, InstanceFormatError, CabFormatError, MpsFormatError,
                SolutionFormatError, InvalidInstanceError, DecodeError)

COMPARE_COLUMNS = ["instance", "alpha", "n", "L", "R", "objective", "objectivePlus", "gap", "gapPlus",
                   "time", "timePlus", "nodes", "nodesPlus"]


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_hash: str
    seed: Optional[int]
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    version: str
    wall_time: float
    config: Dict[str, Any]


def _arguments(args: Namespace) -> Dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}


def write_manifest(args: Namespace, inputs: Sequence[str], outputs: Sequence[str], start: float) -> str:
    config = _arguments(args)
    manifest = RunManifest(command=args.command, config_hash=config_hash(config), seed=config.get("seed"),
                           inputs=tuple(inputs), outputs=tuple(outputs), version=__version__,
                           wall_time=time.perf_counter() - start, config=config)
    path = os.path.join(args.out_dir, f"{args.command}.manifest.json")
    write_json(dataclasses.asdict(manifest), path)
    return path


def _overrides(args: Namespace, names: Sequence[str]) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as f:
        return f.read()


def _out(args: Namespace, filename: str) -> str:
    return os.path.join(args.out_dir, filename)


def _load_valid_instance(path: str) -> Instance:
    inst = load_instance(path)
    require_valid(inst)
    logger.info(f"loaded {inst.name or path}: n={inst.n} L={inst.L} R={inst.R} alpha={inst.alpha:g}")
    return inst


def _instance_label(inst: Instance, path: str) -> str:
    return inst.name or os.path.splitext(os.path.basename(path))[0]


def cmd_generate(args: Namespace) -> int:
    start = time.perf_counter()
    raw = load_cab(_read_text(args.cab))
    params = load_dataclass_json(GenParams, args.params) if args.params else GenParams()
    params = dataclasses.replace(params, hub_cost_base=load_hub_costs(_read_text(args.hub_costs)),
                                 **_overrides(args, ["seed"]))
    deltas = load_dataclass_json(DeltaTable, args.deltas) if args.deltas else DeltaTable()
    if args.sweep:
        grid = dict(sizes=DEFAULT_SIZES, alphas=DEFAULT_ALPHAS, level_counts=(1, 2), demand_level_counts=(1, 2, 3))
    else:
        if not args.n:
            raise ValueError("--n is required unless --sweep is given")
        grid = dict(sizes=args.n, alphas=args.alpha, level_counts=args.levels, demand_level_counts=args.demand_levels)
    total = len(grid["sizes"]) * len(grid["alphas"]) * len(grid["level_counts"]) * len(grid["demand_level_counts"])

    os.makedirs(args.out_dir, exist_ok=True)
    outputs = []
    for inst in tqdm(sweep(raw, params, deltas=deltas, **grid), total=total, desc="instances"):
        path = _out(args, f"{inst.name}.json")
        save_instance(inst, path)
        outputs.append(path)
    logger.info(f"wrote {len(outputs)} instances to {args.out_dir}")
    write_manifest(args, [args.cab, args.hub_costs], outputs, start)
    return EXIT_OK


def cmd_build(args: Namespace) -> int:
    start = time.perf_counter()
    inst = _load_valid_instance(args.instance)
    mask = preprocess(inst)[0] if args.preprocess else None
    opts = BuildOptions(include_consistency=not args.no_consistency, include_valid_inequality=args.valid_ineq,
                        fix_mask=mask)
    model, _ = build(inst, args.formulation, opts)

    os.makedirs(args.out_dir, exist_ok=True)
    label = _instance_label(inst, args.instance)
    mps_path = _out(args, f"{label}.{Formulation(args.formulation).value}.mps")
    sidecar = write_mps(model, mps_path)
    expected = model_size(inst, args.formulation, opts.include_consistency, opts.include_valid_inequality)
    size = {"formulation": Formulation(args.formulation).value, "binary": model.num_binary,
            "continuous": model.num_continuous, "constraints": model.num_constraints, "rows": model.num_rows,
            "expected": expected._asdict()}
    size_path = _out(args, f"{label}.{Formulation(args.formulation).value}.size.json")
    write_json(size, size_path)
    logger.info(f"model size: {model.num_binary} binary, {model.num_continuous} continuous, "
                f"{model.num_constraints} constraints ({model.num_rows} rows)")
    write_manifest(args, [args.instance], [mps_path, sidecar, size_path], start)
    return EXIT_OK


def _solver_config(args: Namespace) -> SolverConfig:
    cfg = load_dataclass_json(SolverConfig, args.solver_config) if args.solver_config else SolverConfig()
    return dataclasses.replace(cfg, **_overrides(args, ["time_limit", "gap_tol", "seed", "max_hubs", "workers"]))


def cmd_solve(args: Namespace) -> int:
    start = time.perf_counter()
    cfg = _solver_config(args)
    os.makedirs(args.out_dir, exist_ok=True)
    outputs: List[str] = []
    stats_rows, preprocess_rows, compare_rows = [], [], []
    exit_code = EXIT_OK
    for path in tqdm(args.instances, desc="solve"):
        try:
            inst = _load_valid_instance(path)
        except INPUT_ERRORS as e:
            logger.error(f"{path}: {e}")
            exit_code = max(exit_code, EXIT_INPUT)
            continue
        label = _instance_label(inst, path)
        mask, fix_report = preprocess(inst) if args.preprocess == "on" or args.compare_preprocess else (None, None)
        sol = solve_exact(inst, mask if args.preprocess == "on" else None, cfg)
        report = validate(inst, sol)
        if not report.ok:
            logger.error(f"{label}: solver output fails validation: {report.violations}")
            exit_code = max(exit_code, EXIT_INVALID)
        else:
            stats_rows.append(stats(inst, sol).to_row(inst, sol))
        preprocess_row = None
        if fix_report is not None:
            preprocess_row = fix_report.to_row(inst)
            preprocess_rows.append({"instance": label, **preprocess_row})

        if args.compare_preprocess:
            plain = sol if args.preprocess == "off" else solve_exact(inst, None, cfg)
            reduced = sol if args.preprocess == "on" else solve_exact(inst, mask, cfg)
            compare_rows.append({"instance": label, "alpha": inst.alpha, "n": inst.n, "L": inst.L, "R": inst.R,
                                 "objective": plain.objective, "objectivePlus": reduced.objective,
                                 "gap": plain.gap, "gapPlus": reduced.gap, "time": plain.elapsed,
                                 "timePlus": reduced.elapsed, "nodes": plain.nodes, "nodesPlus": reduced.nodes})

        record = RunRecord(instance=label, instance_path=os.path.relpath(path, args.out_dir), run=args.run_label,
                           solution=sol, preprocess=preprocess_row)
        record_path = _out(args, f"{label}.{args.run_label}.solution.json")
        save_run_record(record, record_path)
        validation_path = _out(args, f"{label}.{args.run_label}.validation.json")
        write_json(report.to_dict(), validation_path)
        log_path = _out(args, f"{label}.{args.run_label}.log.csv")
        write_csv([dataclasses.asdict(row) for row in sol.log], log_path,
                  ["nodes", "incumbent", "bound", "gap", "elapsed"])
        outputs.extend([record_path, validation_path, log_path])

    outputs.append(_out(args, "table5.csv"))
    write_csv(stats_rows, outputs[-1], STATS_COLUMNS)
    if preprocess_rows:
        outputs.append(_out(args, "preprocess.csv"))
        write_csv(preprocess_rows, outputs[-1], PREPROCESS_COLUMNS)
    if compare_rows:
        outputs.append(_out(args, COMPARE_TABLE))
        write_csv(compare_rows, outputs[-1], COMPARE_COLUMNS)
    write_manifest(args, args.instances, outputs, start)
    return exit_code


def cmd_oracle(args: Namespace) -> int:
    start = time.perf_counter()
    inst = _load_valid_instance(args.instance)
    limits = OracleLimits(max_configs=args.max_configs, max_assignments=args.max_assignments)
    try:
        sol = brute_force(inst, limits, enforce_consistency=not args.no_consistency)
    except OracleLimitError as e:
        logger.error(f"oracle refused {args.instance}: {e}")
        return EXIT_ORACLE_LIMIT
    logger.info(f"oracle optimum: {sol}")

    os.makedirs(args.out_dir, exist_ok=True)
    label = _instance_label(inst, args.instance)
    if args.no_consistency:
        # not a valid solution of the problem, so it is kept out of the run records
        path = _out(args, f"{label}.oracle-relaxed.json")
        write_json(encode_solution_dict(sol), path)
    else:
        path = _out(args, f"{label}.oracle.solution.json")
        save_run_record(RunRecord(label, os.path.relpath(args.instance, args.out_dir), "oracle", sol), path)
    write_manifest(args, [args.instance], [path], start)
    return EXIT_OK


def cmd_validate(args: Namespace) -> int:
    start = time.perf_counter()
    inst = load_instance(args.instance)
    data = read_json(args.solution)
    try:
        sol = decode_solution_dict(data["solution"] if "solution" in data else data)
    except (KeyError, ValueError) as e:
        raise SolutionFormatError(f"{args.solution}: {e}")
    report = validate(inst, sol, check_consistency=not args.no_consistency)
    for violation in report.violations:
        logger.warning(str(violation))
    logger.info(f"{args.solution}: {'ok' if report.ok else f'{len(report.violations)} violations'}")

    os.makedirs(args.out_dir, exist_ok=True)
    path = _out(args, os.path.splitext(os.path.basename(args.solution))[0] + ".validation.json")
    write_json(report.to_dict(), path)
    write_manifest(args, [args.instance, args.solution], [path], start)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_report(args: Namespace) -> int:
    start = time.perf_counter()
    record_paths = find_run_records(args.runs)
    if not record_paths:
        logger.error(f"no run records (*.solution.json) found in {args.runs}")
        return EXIT_INPUT
    records = [load_run_record(path) for path in record_paths]
    instances = {}
    for record in tqdm(records, desc="instances"):
        if record.instance not in instances:
            instances[record.instance] = load_instance(record.instance_path)
    paths = write_report(records, instances, args.out_dir)
    outputs = list(paths.values())
    merged = os.path.join(args.out_dir, COMPARE_TABLE)
    compare_paths = [p for p in find_compare_tables(args.runs) if os.path.abspath(p) != os.path.abspath(merged)]
    if compare_paths:
        concat_csvs(compare_paths, merged, COMPARE_COLUMNS)
        outputs.append(merged)
    logger.info(f"report over {len(records)} runs of {len(instances)} instances written to {args.out_dir}")
    write_manifest(args, record_paths + compare_paths, outputs, start)
    return EXIT_OK


def build_parser() -> ArgumentParser:
    ap = ArgumentParser(prog="hlctdp", description="Hub location with capacity, transit-time and demand levels.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    commands = ap.add_subparsers(dest="command", required=True)

    def command(name: str, func, help_text: str) -> ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--out-dir", default=".", help="directory receiving outputs and the run manifest")
        sub.set_defaults(func=func)
        return sub

    gen_help = field_help(GenParams)
    gen = command("generate", cmd_generate, "generate instance files from CAB data")
    gen.add_argument("cab", help="CAB file: distance matrix followed by flow matrix")
    gen.add_argument("hub_costs", help="hub cost base file, one value per CAB city")
    gen.add_argument("--n", type=int, nargs="+", help="number of nodes")
    gen.add_argument("--alpha", type=float, nargs="+", default=[0.2], help="interhub discount factor")
    gen.add_argument("--levels", type=int, nargs="+", default=[1], choices=[1, 2], help="number of service levels")
    gen.add_argument("--demand-levels", type=int, nargs="+", default=[1], choices=[1, 2, 3],
                     help="number of demand levels")
    gen.add_argument("--seed", type=int, default=None, help=gen_help["seed"])
    gen.add_argument("--sweep", action="store_true", help="emit the full alpha x n x L x R grid (54 instances)")
    gen.add_argument("--params", default=None, help="JSON file with generator parameters")
    gen.add_argument("--deltas", default=None, help="JSON file with the level factor table")

    bld = command("build", cmd_build, "export a MILP formulation as MPS")
    bld.add_argument("instance")
    bld.add_argument("--formulation", choices=[f.value for f in Formulation], default="f2")
    bld.add_argument("--no-consistency", action="store_true", help=field_help(BuildOptions)["include_consistency"])
    bld.add_argument("--valid-ineq", action="store_true", help=field_help(BuildOptions)["include_valid_inequality"])
    bld.add_argument("--preprocess", action="store_true", help=field_help(BuildOptions)["fix_mask"])

    solver_help = field_help(SolverConfig)
    slv = command("solve", cmd_solve, "solve instances with the built-in branch-and-bound")
    slv.add_argument("instances", nargs="+")
    slv.add_argument("--time-limit", type=float, default=None, help=solver_help["time_limit"])
    slv.add_argument("--gap", dest="gap_tol", type=float, default=None, help=solver_help["gap_tol"])
    slv.add_argument("--seed", type=int, default=None, help=solver_help["seed"])
    slv.add_argument("--max-hubs", type=int, default=None, help=solver_help["max_hubs"])
    slv.add_argument("--workers", type=int, default=None, help=solver_help["workers"])
    slv.add_argument("--preprocess", choices=["on", "off"], default="on", help="fix variables before solving")
    slv.add_argument("--compare-preprocess", action="store_true",
                     help="solve with and without preprocessing and tabulate both")
    slv.add_argument("--solver-config", default=None, help="JSON file with solver settings")
    slv.add_argument("--run-label", default="solve", help="run name used in output file names and reports")

    orc = command("oracle", cmd_oracle, "brute-force optimum of a tiny instance")
    orc.add_argument("instance")
    orc.add_argument("--no-consistency", action="store_true",
                     help="allow routes that bypass an open origin or destination hub")
    orc.add_argument("--max-configs", type=int, default=OracleLimits.max_configs,
                     help=field_help(OracleLimits)["max_configs"])
    orc.add_argument("--max-assignments", type=int, default=OracleLimits.max_assignments,
                     help=field_help(OracleLimits)["max_assignments"])

    val = command("validate", cmd_validate, "check a solution file against an instance")
    val.add_argument("instance")
    val.add_argument("solution", help="run record or solution JSON")
    val.add_argument("--no-consistency", action="store_true", help="skip the origin/destination consistency rule")

    rep = command("report", cmd_report, "aggregate run records into experiment tables")
    rep.add_argument("runs", nargs="+", help="run record files or directories holding them")
    return ap


def setup_logging(verbose: bool = False):
    logging.basicConfig(
        format="%(asctime)s - %(levelname)s - %(name)s -   %(message)s",
        datefmt="%m/%d/%Y %H:%M:%S",
        level=logging.DEBUG if verbose else logging.INFO,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.func(args)
    except OracleLimitError as e:
        logger.error(str(e))
        return EXIT_ORACLE_LIMIT
    except INPUT_ERRORS + (ValueError,) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
