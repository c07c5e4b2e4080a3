"""
Run configuration: YAML files, environment overrides and CLI overrides.

Precedence, lowest first: built-in defaults < file < SLABVORTEX_* environment
variables < command-line flags. Every value is validated once here, so the
experiment runner only ever sees well-typed settings.
"""
import copy
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import yaml

from slabvortex.constants import CONFIG_HASH_LENGTH, ENV_PREFIX, ENV_SEPARATOR, MAX_LINEAR_K
from slabvortex.domain import InvalidGeometryError, Shape, shape_from_dims
from slabvortex.models import DefectSet, DomainKind, ExperimentKind, SolveOptions
from slabvortex.params import InvalidParameterError, ScalingParams, from_physical, linear_schedule

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for unreadable or invalid configuration, with the YAML position when known."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


# =============================================================================
# Defaults
# =============================================================================

DEFAULTS: dict = {
    "experiment": "minimize",
    "output": "runs/slabvortex",
    "seeds": [0],
    "threads": 1,
    "domain": {"kind": "disk", "radius": 1.0},
    "grid": {"resolution": 64, "n_layers": 4},
    "boundary": {"degree": 1, "rotation": 0.0, "conjugate": False},
    "params": {},
    "solve": SolveOptions().to_dict(),
    "energy": {"c_star": None},
    "vortex": {"core_threshold": 0.5},
    "renormalized": {
        "defects": [],
        "optimize": False,
        "n_defects": None,
        "scan": False,
        "scan_points": 21,
        "sigmas": None,
        "subsamples": 2,
    },
    "core": {
        "k_values": [MAX_LINEAR_K],
        "ladder": [[0.4, 0.1], [0.8, 0.1]],
        "cells_per_eps": 4,
        "n_layers": 8,
    },
    "sweep": {"reference": False},
    "analyze": {"dump": None, "tolerance": 1e-10},
}

_DOMAIN_KEYS = {
    "disk": {"radius"},
    "rectangle": {"width", "height"},
    "annulus": {"r_in", "r_out"},
}
_PARAM_GROUPS = ({"eps", "eta"}, {"h", "lambda"}, {"k", "eps_list"})
_FREE_SECTIONS = {"domain", "params"}


# =============================================================================
# YAML positions and overrides
# =============================================================================


def _node_marks(node, prefix: tuple = (), marks: Optional[dict] = None) -> dict:
    """Map key paths to 1-based (line, column) of the key in the source."""
    marks = {} if marks is None else marks
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = prefix + (str(key_node.value),)
            marks[path] = (key_node.start_mark.line + 1, key_node.start_mark.column + 1)
            _node_marks(value_node, path, marks)
    return marks


def _parse_yaml(text: str, source: str) -> tuple[dict, dict]:
    try:
        data = yaml.safe_load(text)
        marks = _node_marks(yaml.compose(text))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        if mark is not None:
            raise ConfigError(f"{source}: {problem}", mark.line + 1, mark.column + 1) from e
        raise ConfigError(f"{source}: {problem}") from e
    if data is None:
        return {}, marks
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping, got {type(data).__name__}", 1, 1)
    return data, marks


def _scalar(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _set_path(data: dict, path: Sequence[str], value: Any) -> None:
    cursor = data
    for key in path[:-1]:
        if not isinstance(cursor.get(key), dict):
            cursor[key] = {}
        cursor = cursor[key]
    cursor[path[-1]] = value


def environment_overrides(env: Mapping[str, str]) -> list[tuple[tuple[str, ...], Any]]:
    """(key path, value) pairs from SLABVORTEX_SECTION__KEY variables."""
    overrides = []
    for name in sorted(env):
        if not name.startswith(ENV_PREFIX):
            continue
        path = tuple(part.lower() for part in name[len(ENV_PREFIX):].split(ENV_SEPARATOR) if part)
        if path:
            overrides.append((path, _scalar(env[name])))
    return overrides


def parse_assignment(text: str) -> tuple[tuple[str, ...], Any]:
    """Parse a --set argument 'section.key=value'."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    return tuple(part.strip() for part in key.split(".")), _scalar(value)


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in _FREE_SECTIONS:
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


# =============================================================================
# Validation
# =============================================================================


class _Checker:
    """Typed lookups that raise ConfigError pointing at the offending key."""

    def __init__(self, data: dict, marks: dict):
        self.data = data
        self.marks = marks

    def fail(self, path: tuple, message: str) -> None:
        line, column = self.marks.get(tuple(path), (None, None))
        raise ConfigError(f"{'.'.join(path)}: {message}", line, column)

    def get(self, path: tuple) -> Any:
        cursor = self.data
        for key in path:
            cursor = cursor[key]
        return cursor

    def number(self, path: tuple, positive: bool = False, allow_none: bool = False) -> Optional[float]:
        value = self.get(path)
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(path, f"expected a finite number, got {value!r}")
        if positive and value <= 0:
            self.fail(path, f"must be positive, got {value!r}")
        return float(value)

    def integer(self, path: tuple, minimum: Optional[int] = None, allow_none: bool = False) -> Optional[int]:
        value = self.get(path)
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(path, f"must be >= {minimum}, got {value!r}")
        return int(value)

    def flag(self, path: tuple) -> bool:
        value = self.get(path)
        if not isinstance(value, bool):
            self.fail(path, f"expected true or false, got {value!r}")
        return value

    def sequence(self, path: tuple, allow_none: bool = False) -> Optional[list]:
        value = self.get(path)
        if value is None and allow_none:
            return None
        if not isinstance(value, list):
            self.fail(path, f"expected a list, got {value!r}")
        return value


def _check_keys(checker: _Checker, data: dict) -> None:
    for key, value in data.items():
        if key not in DEFAULTS:
            checker.fail((key,), "unknown section")
        if isinstance(DEFAULTS[key], dict) and key not in _FREE_SECTIONS:
            if not isinstance(value, dict):
                checker.fail((key,), f"expected a mapping, got {value!r}")
            for sub in value:
                if sub not in DEFAULTS[key]:
                    checker.fail((key, sub), "unknown key")


def _validate(data: dict, marks: dict) -> None:
    c = _Checker(data, marks)
    _check_keys(c, data)

    try:
        ExperimentKind.from_str(str(data["experiment"]))
    except ValueError:
        c.fail(("experiment",), f"unknown experiment {data['experiment']!r}")
    if not isinstance(data["output"], str) or not data["output"]:
        c.fail(("output",), "expected a directory path")
    seeds = c.sequence(("seeds",))
    if not seeds or any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in seeds):
        c.fail(("seeds",), f"expected a non-empty list of non-negative integers, got {seeds!r}")
    c.integer(("threads",), minimum=1)

    domain = data["domain"]
    if not isinstance(domain, dict):
        c.fail(("domain",), "expected a mapping")
    kind = str(domain.get("kind", ""))
    if kind not in _DOMAIN_KEYS:
        c.fail(("domain", "kind"), f"unknown domain kind {kind!r}")
    extra = set(domain) - {"kind"} - _DOMAIN_KEYS[kind]
    if extra:
        c.fail(("domain", sorted(extra)[0]), f"not a dimension of a {kind}")
    for key in _DOMAIN_KEYS[kind]:
        if key not in domain:
            c.fail(("domain",), f"missing {key} for a {kind}")
        c.number(("domain", key), positive=True)

    resolution = data["grid"]["resolution"]
    if isinstance(resolution, list):
        if len(resolution) != 2 or any(isinstance(r, bool) or not isinstance(r, int) for r in resolution):
            c.fail(("grid", "resolution"), f"expected an integer or [nx, ny], got {resolution!r}")
    else:
        c.integer(("grid", "resolution"), minimum=1)
    c.integer(("grid", "n_layers"), minimum=2)

    c.integer(("boundary", "degree"))
    c.number(("boundary", "rotation"))
    c.flag(("boundary", "conjugate"))

    params = data["params"]
    if not isinstance(params, dict):
        c.fail(("params",), "expected a mapping")
    given = set(params)
    unknown = given - set().union(*_PARAM_GROUPS)
    if unknown:
        c.fail(("params", sorted(unknown)[0]), "unknown key")
    if given and given not in _PARAM_GROUPS:
        c.fail(("params",), "give exactly one of {eps, eta}, {h, lambda} or {k, eps_list}")
    for key in given - {"eps_list"}:
        c.number(("params", key), positive=True)
    if "eps_list" in given:
        eps_list = c.sequence(("params", "eps_list"))
        if not eps_list or any(isinstance(e, bool) or not isinstance(e, (int, float)) or e <= 0 for e in eps_list):
            c.fail(("params", "eps_list"), f"expected positive numbers, got {eps_list!r}")

    try:
        SolveOptions.from_dict(data["solve"])
    except (TypeError, ValueError) as e:
        c.fail(("solve",), str(e))
    c.number(("energy", "c_star"), allow_none=True)
    c_star = data["energy"]["c_star"]
    if c_star is not None and not 0.0 < c_star < 1.0:
        c.fail(("energy", "c_star"), f"must lie in (0, 1), got {c_star!r}")
    c.number(("vortex", "core_threshold"), positive=True)

    section = ("renormalized",)
    for index, entry in enumerate(c.sequence(section + ("defects",))):
        if not isinstance(entry, dict) or set(entry) - {"x", "y", "charge"} or not {"x", "y"} <= set(entry):
            c.fail(section + ("defects",), f"entry {index} must be a mapping with x, y and optional charge")
    c.flag(section + ("optimize",))
    c.integer(section + ("n_defects",), minimum=1, allow_none=True)
    c.flag(section + ("scan",))
    c.integer(section + ("scan_points",), minimum=2)
    sigmas = c.sequence(section + ("sigmas",), allow_none=True)
    if sigmas is not None and (not sigmas or any(not isinstance(s, (int, float)) or s <= 0 for s in sigmas)):
        c.fail(section + ("sigmas",), f"expected positive numbers, got {sigmas!r}")
    c.integer(section + ("subsamples",), minimum=1)

    k_values = c.sequence(("core", "k_values"))
    if not k_values or any(not isinstance(k, (int, float)) or not 0 < k <= MAX_LINEAR_K * (1 + 1e-12) for k in k_values):
        c.fail(("core", "k_values"), f"expected slopes in (0, 1/sqrt(2)], got {k_values!r}")
    ladder = c.sequence(("core", "ladder"))
    if not ladder or any(
        not isinstance(e, list) or len(e) != 2 or any(not isinstance(v, (int, float)) or v <= 0 for v in e)
        for e in ladder
    ):
        c.fail(("core", "ladder"), f"expected a list of [sigma, eps] pairs, got {ladder!r}")
    c.number(("core", "cells_per_eps"), positive=True)
    c.integer(("core", "n_layers"), minimum=2)

    c.flag(("sweep", "reference"))
    dump = data["analyze"]["dump"]
    if dump is not None and not isinstance(dump, str):
        c.fail(("analyze", "dump"), f"expected a path, got {dump!r}")
    c.number(("analyze", "tolerance"), positive=True)

    experiment = ExperimentKind.from_str(str(data["experiment"]))
    if experiment == ExperimentKind.MINIMIZE and given not in ({"eps", "eta"}, {"h", "lambda"}):
        c.fail(("params",), "minimize needs {eps, eta} or {h, lambda}")
    if experiment == ExperimentKind.SWEEP:
        if given != {"k", "eps_list"}:
            c.fail(("params",), "sweep needs {k, eps_list}")
        if len(params["eps_list"]) < 3:
            c.fail(("params", "eps_list"), "a sweep needs at least three eps values")
        if not 0 < params["k"] <= MAX_LINEAR_K * (1 + 1e-12):
            c.fail(("params", "k"), f"must lie in (0, 1/sqrt(2)], got {params['k']!r}")


# =============================================================================
# RunConfig
# =============================================================================


@dataclass(frozen=True, eq=False)
class RunConfig:
    """
    Fully resolved and validated run configuration.

    data is the merged mapping; accessors build the typed objects the
    experiments need. config_hash identifies the run inputs and ignores the
    output directory.
    """
    data: dict
    source: Optional[Path] = None

    def __str__(self) -> str:
        return f"RunConfig({self.experiment.value}, hash={self.config_hash})"

    @property
    def config_hash(self) -> str:
        hashed = {k: v for k, v in self.data.items() if k != "output"}
        canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:CONFIG_HASH_LENGTH]

    # --- Top level ---

    @property
    def experiment(self) -> ExperimentKind:
        return ExperimentKind.from_str(self.data["experiment"])

    @property
    def output(self) -> Path:
        return Path(self.data["output"])

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(self.data["seeds"])

    @property
    def threads(self) -> int:
        return int(self.data["threads"])

    def section(self, name: str) -> dict:
        return copy.deepcopy(self.data[name])

    # --- Geometry ---

    def shape(self) -> Shape:
        dims = dict(self.data["domain"])
        kind = DomainKind.from_str(dims.pop("kind"))
        try:
            return shape_from_dims(kind, **{k: float(v) for k, v in dims.items()})
        except InvalidGeometryError as e:
            raise ConfigError(f"domain: {e}") from e

    @property
    def resolution(self) -> int | tuple[int, int]:
        value = self.data["grid"]["resolution"]
        return tuple(value) if isinstance(value, list) else int(value)

    @property
    def n_layers(self) -> int:
        return int(self.data["grid"]["n_layers"])

    # --- Parameters ---

    def params_list(self) -> list[ScalingParams]:
        """One entry for {eps, eta} or {h, lambda}; the schedule for {k, eps_list}."""
        params = self.data["params"]
        try:
            if "eps" in params:
                result = [ScalingParams(eps=float(params["eps"]), eta=float(params["eta"]))]
            elif "h" in params:
                result = [from_physical(float(params["h"]), float(params["lambda"]))]
            elif "k" in params:
                result = linear_schedule(float(params["k"]), params["eps_list"])
            else:
                raise ConfigError("params: no parameters given")
        except InvalidParameterError as e:
            raise ConfigError(f"params: {e}") from e
        for p in result:
            if not p.bbh_regime:
                logger.warning("Configured parameters %s violate sqrt(2) eta <= eps", p)
        return result

    @property
    def k(self) -> Optional[float]:
        return float(self.data["params"]["k"]) if "k" in self.data["params"] else None

    def solve_options(self, seed: Optional[int] = None) -> SolveOptions:
        options = dict(self.data["solve"])
        if seed is not None:
            options["seed"] = int(seed)
        return SolveOptions.from_dict(options)

    @property
    def c_star(self) -> Optional[float]:
        return self.data["energy"]["c_star"]

    @property
    def core_threshold(self) -> float:
        return float(self.data["vortex"]["core_threshold"])

    def prescribed_defects(self) -> DefectSet:
        entries = self.data["renormalized"]["defects"]
        return DefectSet.prescribed(
            [(float(e["x"]), float(e["y"])) for e in entries],
            [int(e.get("charge", 1)) for e in entries],
        )

    def prepare_output(self) -> Path:
        """Create the output directory; ConfigError if that is impossible."""
        try:
            self.output.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"output: cannot create {self.output}: {e.strerror}") from e
        if not os.access(self.output, os.W_OK):
            raise ConfigError(f"output: {self.output} is not writable")
        return self.output


def load_config(
    path: Optional[Path] = None,
    assignments: Sequence[str] = (),
    env: Optional[Mapping[str, str]] = None,
    output: Optional[str] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    experiment: Optional[str] = None,
) -> RunConfig:
    """
    Load and validate a run configuration.

    Args:
        path: YAML file; None uses the defaults alone
        assignments: Repeated --set overrides, 'section.key=value'
        env: Environment mapping (defaults to os.environ)
        output, seed, threads: Dedicated CLI flags
        experiment: Subcommand name; overrides the file's experiment key

    Raises:
        ConfigError: With line/column for syntax errors and for invalid keys
            present in the file
    """
    data, marks = {}, {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e.strerror}") from e
        data, marks = _parse_yaml(text, str(path))

    merged = _merge(DEFAULTS, data)
    for key_path, value in environment_overrides(os.environ if env is None else env):
        logger.debug("Environment override %s=%r", ".".join(key_path), value)
        _set_path(merged, key_path, value)
    for assignment in assignments:
        key_path, value = parse_assignment(assignment)
        _set_path(merged, key_path, value)
    if output is not None:
        merged["output"] = str(output)
    if seed is not None:
        merged["seeds"] = [int(seed)]
        merged.setdefault("solve", {})["seed"] = int(seed)
    if threads is not None:
        merged["threads"] = int(threads)
    if experiment is not None:
        merged["experiment"] = experiment

    _validate(merged, marks)
    config = RunConfig(data=merged, source=path)
    logger.debug("Loaded %s", config)
    return config
