import json
import os
import sys
from dataclasses import fields
from typing import Any, Dict, Type, TypeVar, Union

_current_module = sys.modules[__name__]
hlctdp_package_root_path = os.path.dirname(os.path.abspath(_current_module.__file__))
resources_path = os.path.join(hlctdp_package_root_path, 'resources')
example1_instance_path = os.path.join(resources_path, 'example1.json')

# Environment variable capping the solver's worker processes
THREADS_ENV_VAR = "HLCTDP_THREADS"

# Absolute tolerance for equality tests in validators
VALIDATION_TOL = 1e-9
# Residual above which a MILP row counts as violated
FEASIBILITY_TOL = 1e-6
# Incumbent ties within this margin are broken lexicographically
TIE_TOL = 1e-9

T = TypeVar("T")


def worker_count(default: int = 1) -> int:
    """ Number of solver workers allowed by the environment (`HLCTDP_THREADS`). """
    raw = os.environ.get(THREADS_ENV_VAR)
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ValueError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    return value


def load_dataclass_json(cls: Type[T], source: Union[str, Dict[str, Any]]) -> T:
    """ Instantiate the config dataclass `cls` from a JSON file path or an already parsed dict.
    Unknown keys are rejected so typos in experiment configs do not pass silently. """
    if isinstance(source, str):
        with open(source, encoding="utf-8") as f:
            source = json.load(f)
    known = {f.name for f in fields(cls)}
    unknown = set(source) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in source:
            continue
        value = source[f.name]
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[f.name] = value
    return cls(**kwargs)


def field_help(cls) -> Dict[str, str]:
    """ Return the `help` metadata of each field of a config dataclass (used for argparse help strings). """
    return {f.name: f.metadata.get("help", "") for f in fields(cls)}
