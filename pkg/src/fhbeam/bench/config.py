"""Experiment configuration files.

The format is TOML with three kinds of tables::

    [system]
    num_cells = 1               # L
    tx_antennas = 2048          # M
    rx_antennas = 8             # N
    streams = 8                 # d
    users_per_cell = 6          # K
    power_budget_dbm = 20       # or power_budget = 0.1 (watts)
    noise_power_dbm = -80       # or noise_power = 1e-11 (watts)
    weights = 1.0               # scalar or a list of L*K values
    bs_spacing = 800.0          # meters
    cell_radius = 400.0         # meters, defaults to bs_spacing / 2
    shadowing_sigma_db = 8.0
    min_distance = 10.0         # meters

    [solver.fh]                 # one table per compared solver
    variant = "finite_horizon"  # exact_wmmse | finite_horizon | constant_gd
    horizon = 5
    max_outer_iters = 200
    rel_tol = 1e-5
    spectral_refresh = "every_outer"

    [experiment]
    scenario = "convergence_iters"
    seeds = [0, 1, 2]
    sweep_values = [256, 512, 1024]   # antenna_sweep only
    time_budget_seconds = 10.0
    inner_trace_outer_iter = 1        # inner_qp_trace only

Only the four size keys are required. Power keys take watts unless they
carry the ``_dbm`` suffix. Without any ``[solver.*]`` table the three
variants are compared with default settings. A solver table named after a
variant may omit ``variant``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli
import tomli_w

from fhbeam.network import SystemConfig, dbm_to_watt
from fhbeam.solvers import VARIANTS, SolverConfig

SCENARIOS = (
    "convergence_iters",
    "convergence_time",
    "inner_qp_trace",
    "antenna_sweep",
    "multicell_convergence_iters",
    "multicell_convergence_time",
)

DEFAULT_POWER_DBM = 20.0
DEFAULT_NOISE_DBM = -80.0

_SIZE_KEYS = ("tx_antennas", "rx_antennas", "streams", "users_per_cell")
_SYSTEM_KEYS = {
    "num_cells", *_SIZE_KEYS, "power_budget", "power_budget_dbm", "noise_power", "noise_power_dbm",
    "weights", "bs_spacing", "cell_radius", "shadowing_sigma_db", "min_distance",
}
_SOLVER_KEYS = {"variant", "horizon", "max_outer_iters", "rel_tol", "spectral_refresh"}
_EXPERIMENT_KEYS = {"scenario", "seeds", "sweep_values", "time_budget_seconds", "inner_trace_outer_iter"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    system: SystemConfig
    solvers: dict[str, SolverConfig]
    scenario: str = "convergence_iters"
    seeds: list[int] = field(default_factory=lambda: [0])
    sweep_values: list[int] | None = None
    time_budget_seconds: float | None = None
    inner_trace_outer_iter: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if (self.scenario == "antenna_sweep") != (self.sweep_values is not None):
            raise ConfigError("sweep_values is required for antenna_sweep and only allowed there")
        if self.sweep_values is not None and (
            not self.sweep_values or any(int(m) != m or m < self.system.rx_antennas for m in self.sweep_values)
        ):
            raise ConfigError("sweep_values must be antenna counts M >= N")
        if self.time_budget_seconds is not None and not self.time_budget_seconds > 0:
            raise ConfigError("time_budget_seconds must be positive")
        if self.inner_trace_outer_iter < 1:
            raise ConfigError("inner_trace_outer_iter must be >= 1")


def _line_of(text: str, section: str | None, key: str | None = None) -> int | None:
    """1-based line of ``key`` inside ``[section]`` (or of the section header)."""
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        head = re.match(r"\s*\[\s*([^\]]+?)\s*\]", line)
        if head:
            current = head.group(1).replace('"', "")
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return no
    return None


def _fail(text: str, message: str, section: str | None = None, key: str | None = None):
    line = _line_of(text, section, key) if text else None
    where = f"line {line}: " if line else ""
    raise ConfigError(f"{where}{message}")


def _check_keys(text: str, table: dict, allowed: set, section: str) -> None:
    for key in table:
        if key not in allowed:
            _fail(text, f"unknown key {key!r} in [{section}]", section, key)


def _power(text: str, table: dict, name: str, default_dbm: float) -> float:
    watts, dbm = table.get(name), table.get(name + "_dbm")
    if watts is not None and dbm is not None:
        _fail(text, f"give either {name} (watts) or {name}_dbm, not both", "system", name)
    if dbm is not None:
        if not isinstance(dbm, (int, float)):
            _fail(text, f"{name}_dbm must be a number", "system", name + "_dbm")
        return dbm_to_watt(float(dbm))
    if watts is not None:
        if not isinstance(watts, (int, float)) or not watts > 0:
            _fail(text, f"{name} must be a positive number of watts", "system", name)
        return float(watts)
    return dbm_to_watt(default_dbm)


def _system(text: str, table: dict) -> SystemConfig:
    _check_keys(text, table, _SYSTEM_KEYS, "system")
    for key in _SIZE_KEYS:
        if key not in table:
            _fail(text, f"missing required key {key!r} in [system]", "system")
    kwargs = {k: v for k, v in table.items() if not k.startswith(("power_budget", "noise_power"))}
    kwargs.setdefault("num_cells", 1)
    if isinstance(kwargs.get("weights"), list):
        kwargs["weights"] = tuple(float(w) for w in kwargs["weights"])
    kwargs["power_budget"] = _power(text, table, "power_budget", DEFAULT_POWER_DBM)
    kwargs["noise_power"] = _power(text, table, "noise_power", DEFAULT_NOISE_DBM)
    try:
        return SystemConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        key = next((k for k in ("streams", "tx_antennas", "weights") if k in str(exc).split()[0]), None)
        _fail(text, f"invalid [system]: {exc}", "system", key)


def _solver(text: str, name: str, table: dict) -> SolverConfig:
    section = f"solver.{name}"
    _check_keys(text, table, _SOLVER_KEYS, section)
    kwargs = dict(table)
    if "variant" not in kwargs:
        if name not in VARIANTS:
            _fail(text, f"[{section}] needs a variant (one of {VARIANTS})", section)
        kwargs["variant"] = name
    try:
        return SolverConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        _fail(text, f"invalid [{section}]: {exc}", section)


def parse_text(text: str) -> ExperimentSpec:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for key in doc:
        if key not in ("system", "solver", "experiment"):
            _fail(text, f"unknown section or key {key!r}", key, None)
    if "system" not in doc:
        raise ConfigError("missing [system] section")
    system = _system(text, doc["system"])
    solver_tables = doc.get("solver", {})
    if not all(isinstance(v, dict) for v in solver_tables.values()):
        _fail(text, "solver settings must live in [solver.<name>] tables", "solver")
    solvers = {name: _solver(text, name, tab) for name, tab in solver_tables.items()}
    if not solvers:
        solvers = {v: SolverConfig(variant=v) for v in VARIANTS}
    exp = doc.get("experiment", {})
    _check_keys(text, exp, _EXPERIMENT_KEYS, "experiment")
    try:
        return ExperimentSpec(
            system=system,
            solvers=solvers,
            scenario=exp.get("scenario", "convergence_iters"),
            seeds=[int(s) for s in exp.get("seeds", [0])],
            sweep_values=[int(m) for m in exp["sweep_values"]] if "sweep_values" in exp else None,
            time_budget_seconds=exp.get("time_budget_seconds"),
            inner_trace_outer_iter=int(exp.get("inner_trace_outer_iter", 1)),
        )
    except ConfigError as exc:
        _fail(text, str(exc), "experiment")
    except (TypeError, ValueError) as exc:
        _fail(text, f"invalid [experiment]: {exc}", "experiment")


def parse_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return parse_text(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def to_dict(spec: ExperimentSpec) -> dict:
    """Plain-data form of ``spec``; powers are written in watts."""
    sysd = {}
    for f in fields(SystemConfig):
        val = getattr(spec.system, f.name)
        if val is None:
            continue
        sysd[f.name] = list(val) if isinstance(val, tuple) else val
    solvers = {}
    for name, cfg in spec.solvers.items():
        solvers[name] = {
            "variant": cfg.variant,
            "horizon": cfg.horizon,
            "max_outer_iters": cfg.max_outer_iters,
            "rel_tol": cfg.rel_tol,
            "spectral_refresh": cfg.spectral_refresh,
        }
    exp = {"scenario": spec.scenario, "seeds": list(spec.seeds),
           "inner_trace_outer_iter": spec.inner_trace_outer_iter}
    if spec.sweep_values is not None:
        exp["sweep_values"] = list(spec.sweep_values)
    if spec.time_budget_seconds is not None:
        exp["time_budget_seconds"] = spec.time_budget_seconds
    return {"system": sysd, "solver": solvers, "experiment": exp}


def serialize(spec: ExperimentSpec) -> str:
    return tomli_w.dumps(to_dict(spec))


def with_overrides(spec: ExperimentSpec, *, seeds: list[int] | None = None,
                   scenario: str | None = None) -> ExperimentSpec:
    changes = {}
    if seeds is not None:
        changes["seeds"] = seeds
    if scenario is not None:
        changes["scenario"] = scenario
    return replace(spec, **changes) if changes else spec
