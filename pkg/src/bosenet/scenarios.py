"""Scenario presets, run outputs, parameter sweeps and drive design reports."""
from __future__ import annotations

import copy
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .dynamics import evolve, fidelity, purity, steady_state
from .engineering import (
    DriveParams,
    effective_couplings,
    engineered_rate,
    selectivity_tuning,
    validate_regime,
)
from .errors import BosenetError, ConfigError, ValidationError
from .liouvillian import (
    ChannelSpec,
    assemble,
    bell_full_generator,
    bell_generator,
    linear_chain_generator,
    network_generator,
    noon_generator,
    w_generator,
)
from .network import NetworkSpec
from .states import fock_state, thermal_state

SCENARIOS = ("bell", "bell_full", "noon", "noon_full", "w", "linear_chain", "custom")

DEFAULT_RATES = {
    "bell": {"gamma0": 50.0},
    "bell_full": {"gamma_plus1": 50.0, "gamma_plus0": 50.0, "gamma_minus": 50.0},
    "noon": {"gamma_plus0": 50.0, "gamma_minus0": 50.0},
    "noon_full": {"gamma_plus0": 50.0, "gamma_minus0": 50.0,
                  "gamma_plus1": 50.0, "gamma_minus1": 50.0},
    "w": {"gamma10": 50.0, "gamma_j": 50.0},
    "linear_chain": {"gamma_select": 50.0, "gamma_cool": 50.0},
    "custom": {},
}


@dataclass
class ScenarioConfig:
    """One simulation run. Rates are in units of the natural loss rate."""

    scenario: str
    N: int | None = None
    branch: int | None = None
    rates: dict = field(default_factory=dict)
    gamma: float = 1.0
    nbar: float = 0.05
    coupling: float = 0.1
    cutoffs: list | None = None
    t_final: float = 50.0
    dt: float | None = None
    output_points: int = 200
    stop_tol: float | None = 1e-8
    with_hamiltonian: bool = False
    network: dict | None = None
    channels: list | None = None
    target: list | None = None
    output: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}",
                              "scenario")
        allowed = set(DEFAULT_RATES[self.scenario])
        unknown = set(self.rates) - allowed
        if unknown and self.scenario != "custom":
            raise ConfigError(f"unknown rate(s) {sorted(unknown)} for {self.scenario}; "
                              f"expected {sorted(allowed)}", "rates")
        self.rates = {**DEFAULT_RATES[self.scenario], **{k: float(v) for k, v in self.rates.items()}}
        for k, v in self.rates.items():
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"rate must be finite and >= 0, got {v}", f"rates.{k}")
        if self.scenario in ("w", "linear_chain"):
            if self.N is None:
                raise ConfigError(f"required for scenario {self.scenario}", "N")
            if self.N < (2 if self.scenario == "w" else 1):
                raise ConfigError(f"too small: {self.N}", "N")
        if self.scenario == "linear_chain":
            if self.branch is None:
                raise ConfigError("required for scenario linear_chain", "branch")
            if not 1 <= self.branch <= self.N:
                raise ConfigError(f"must lie in 1..{self.N}, got {self.branch}", "branch")
        if self.scenario == "custom":
            for name in ("network", "channels", "target"):
                if getattr(self, name) is None:
                    raise ConfigError("required for scenario custom", name)
        for name in ("gamma", "nbar"):
            if getattr(self, name) < 0:
                raise ConfigError("must be >= 0", name)
        if self.t_final <= 0:
            raise ConfigError("must be positive", "t_final")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("must be positive", "dt")
        if self.output_points < 1:
            raise ConfigError("must be >= 1", "output_points")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown field(s) {sorted(unknown)}")
        if "scenario" not in data:
            raise ConfigError("required", "scenario")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def load_config(path) -> ScenarioConfig:
    return ScenarioConfig.from_dict(load_json(path))


def _custom_generator(cfg: ScenarioConfig):
    net = cfg.network
    try:
        omega = net["omega"]
        spec = NetworkSpec(omega, net.get("coupling", np.zeros((len(omega), len(omega)))),
                           net.get("gamma", cfg.gamma), net.get("nbar", cfg.nbar))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed network block: {exc}", "network") from exc
    except ValidationError as exc:
        raise ConfigError(str(exc), "network") from exc
    engineered = []
    for i, ch in enumerate(cfg.channels):
        try:
            engineered.append(ChannelSpec(int(ch["mode"]), ch["kind"], float(ch["rate"]),
                                          ch.get("ell")))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed channel: {exc}", f"channels[{i}]") from exc
        except ValidationError as exc:
            raise ConfigError(str(exc), f"channels[{i}]") from exc
    target = tuple(int(n) for n in cfg.target)
    if len(target) != spec.n_modes:
        raise ConfigError(f"needs {spec.n_modes} occupations", "target")
    cutoffs = cfg.cutoffs or [n + 3 for n in target]
    gen = network_generator(spec, engineered, cutoffs, cfg.with_hamiltonian)
    return gen, target


def build_scenario(cfg: ScenarioConfig):
    """Generator spec and normal-mode target occupations for ``cfg``."""
    r = cfg.rates
    common = dict(gamma=cfg.gamma, nbar=cfg.nbar, coupling=cfg.coupling,
                  with_hamiltonian=cfg.with_hamiltonian)
    if cfg.cutoffs is not None:
        common["cutoffs"] = tuple(cfg.cutoffs)
    try:
        if cfg.scenario == "bell":
            return bell_generator(r["gamma0"], **common), (1, 0)
        if cfg.scenario == "bell_full":
            return bell_full_generator(r["gamma_plus1"], r["gamma_plus0"], r["gamma_minus"],
                                       **common), (1, 0)
        if cfg.scenario in ("noon", "noon_full"):
            gen = noon_generator(r["gamma_plus0"], r["gamma_minus0"], r.get("gamma_plus1", 0.0),
                                 r.get("gamma_minus1", 0.0), **common)
            return gen, (1, 1)
        if cfg.scenario == "w":
            return (w_generator(cfg.N, r["gamma10"], r["gamma_j"], **common),
                    (1,) + (0,) * (cfg.N - 1))
        if cfg.scenario == "linear_chain":
            gen = linear_chain_generator(cfg.N, cfg.branch, r["gamma_select"], r["gamma_cool"],
                                         **common)
            return gen, tuple(int(m == cfg.branch - 1) for m in range(cfg.N))
        return _custom_generator(cfg)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(x) -> str:
    return format(float(x), ".12g")


@dataclass
class RunOutput:
    """Metadata block plus a table of observables against gamma * t."""

    metadata: dict
    columns: list
    rows: np.ndarray

    def column(self, name) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {json.dumps(self.metadata[key], sort_keys=True)}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(x) for x in row) + "\n")
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def read_csv(path):
    """Parse a file written by :meth:`RunOutput.write` back into a RunOutput."""
    metadata, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                metadata[key] = json.loads(value)
            else:
                lines.append(line.strip())
    columns = lines[0].split(",")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln])
    return RunOutput(metadata, columns, rows.reshape(-1, len(columns)))


def run_scenario(cfg: ScenarioConfig) -> RunOutput:
    """Evolve the scenario from the thermal state and tabulate fidelity, purity, occupations."""
    gen, target_occ = build_scenario(cfg)
    L = assemble(gen)
    space = gen.space
    target = fock_state(space, target_occ)
    rho0 = thermal_state(space, cfg.nbar)
    traj = evolve(L, rho0, cfg.t_final, dt=cfg.dt, target=target, n_output=cfg.output_points,
                  stop_tol=cfg.stop_tol, store_states=False)
    ss = steady_state(L)

    n_modes = space.n_modes
    columns = ["t_gamma", "fidelity", "purity"] + [f"n_mode_{m + 1}" for m in range(n_modes)]
    rows = np.column_stack([traj.times] + [traj.observables[c] for c in columns[1:]])
    metadata = {
        "version": __version__,
        "config": cfg.to_dict(),
        "cutoffs": list(space.cutoffs),
        "target_normal_occupations": list(target_occ),
        "channels": [[c.mode, c.kind, c.rate, c.ell] for c in gen.channels],
        "horizon": traj.horizon,
        "stopped_early": traj.stopped_early,
        "dt": traj.dt,
        "trace_drift": traj.trace_drift,
        "min_eigenvalue": traj.min_eigenvalue,
        "final_fidelity": traj.final("fidelity"),
        "final_purity": traj.final("purity"),
        "steady_fidelity": fidelity(ss.rho_ss, target),
        "steady_purity": purity(ss.rho_ss),
        "steady_residual": ss.residual,
        "steady_method": ss.method,
        "steady_unique": ss.unique,
    }
    return RunOutput(metadata, columns, rows)


def _set_path(data: dict, path: str, value):
    keys = path.split(".")
    node = data
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ConfigError("no such parameter", path)
        node = node[key]
    if keys[-1] not in node and not (len(keys) > 1 and keys[0] == "rates"):
        raise ConfigError("no such parameter", path)
    node[keys[-1]] = value


@dataclass
class SweepResult:
    value: object
    output: RunOutput | None = None
    error: str | None = None


def sweep(cfg: ScenarioConfig, param: str, values) -> list:
    """Run ``cfg`` once per value of the dotted parameter ``param``.

    A failing run is recorded with its error and does not stop the others.
    """
    base = cfg.to_dict()
    _set_path(copy.deepcopy(base), param, None)
    results = []
    for value in values:
        data = copy.deepcopy(base)
        _set_path(data, param, value)
        try:
            results.append(SweepResult(value, run_scenario(ScenarioConfig.from_dict(data))))
        except BosenetError as exc:
            results.append(SweepResult(value, error=str(exc)))
    return results


def convergence_study(cfg: ScenarioConfig) -> dict:
    """Steady and final observables at the base settings, cutoffs + 1 and horizon x 2."""
    gen, _ = build_scenario(cfg)
    base_cutoffs = list(gen.space.cutoffs)
    variants = {
        "base": cfg,
        "cutoff_plus_1": replace(cfg, cutoffs=[d + 1 for d in base_cutoffs]),
        "horizon_x2": replace(cfg, t_final=2 * cfg.t_final, stop_tol=None),
    }
    out = {}
    for name, variant in variants.items():
        md = run_scenario(variant).metadata
        out[name] = {k: md[k] for k in ("cutoffs", "horizon", "final_fidelity", "final_purity",
                                        "steady_fidelity", "steady_purity")}
    return out


def _complex(value, name):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    try:
        return complex(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError("expected a number or [re, im] pair", name) from exc


def drive_from_dict(data: dict) -> DriveParams:
    """Build DriveParams from a JSON block; ``{"preset": "microwave"}`` selects the
    microwave operating point, with optional ``Omega0``/``lam`` overrides."""
    if not isinstance(data, dict):
        raise ConfigError("must be a JSON object", "drive")
    data = dict(data)
    preset = data.pop("preset", None)
    try:
        if preset is not None:
            if preset != "microwave":
                raise ConfigError(f"unknown preset {preset!r}", "drive.preset")
            base = DriveParams.microwave_regime(
                Omega0=data.pop("Omega0", 5e5), lam=data.pop("lam", None),
                ell_target=data.pop("ell_target", 0))
            overrides = {k: (_complex(v, f"drive.{k}") if k.startswith("Omega") else v)
                         for k, v in data.items()}
            return replace(base, **overrides)
        for name in ("Omega0", "Omega1", "Omega2"):
            if name in data:
                data[name] = _complex(data[name], f"drive.{name}")
        return DriveParams(**data)
    except TypeError as exc:
        raise ConfigError(str(exc), "drive") from exc
    except ValidationError as exc:
        raise ConfigError(str(exc), "drive") from exc


@dataclass
class DesignReport:
    couplings: dict
    regime: object
    table: list
    gamma: float

    def to_dict(self):
        return {"couplings": self.couplings, "regime": self.regime.to_dict(),
                "rates": self.table, "gamma": self.gamma}

    def to_text(self) -> str:
        lines = ["effective couplings (rad/s):"]
        for k, v in self.couplings.items():
            lines.append(f"  {k:>18} = {_fmt(v)}")
        lines.append("engineered rates:")
        lines.append(f"  {'ell':>3} {'|Omega1| tuned':>15} {'|Omega1| closed':>16} "
                     f"{'|zeta_ell|':>12} {'Gamma (1/s)':>12} {'Gamma/gamma':>12}")
        for row in self.table:
            lines.append(f"  {row['ell']:>3} {row['omega1']:>15.6g} {row['omega1_closed_form']:>16.6g} "
                         f"{row['zeta_ell']:>12.6g} {row['Gamma']:>12.6g} {row['Gamma_over_gamma']:>12.6g}")
        lines.append(f"regime checks (pass at ratio >= {_fmt(self.regime.threshold)}):")
        for c in self.regime.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.kind:<15} {c.name:<32} ratio = {c.ratio:.4g}")
        return "\n".join(lines) + "\n"


def design_report(drive: DriveParams, gamma: float, ell_max: int = 1, n_max: int | None = None,
                  threshold: float = 10.0) -> DesignReport:
    """Effective couplings, per-ell tuning and rates, and regime checks for a drive.

    The regime is evaluated on the drive tuned for ``drive.ell_target``.
    ``Gamma_over_gamma`` divides each engineered rate by the natural loss
    rate ``gamma`` (1/s).
    """
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    c = effective_couplings(drive)
    table = []
    for ell in range(ell_max + 1):
        tuning = selectivity_tuning(drive, ell)
        rate = engineered_rate(drive, ell)
        table.append({
            "ell": ell,
            "omega1": tuning.omega1,
            "omega1_closed_form": tuning.omega1_closed_form,
            "zeta_ell": abs(c.zeta_n(ell)),
            "Gamma": rate,
            "Gamma_over_gamma": rate / gamma,
        })
    tuned = selectivity_tuning(drive, drive.ell_target).params
    couplings = {
        "xi": c.xi,
        "|zeta|": abs(c.zeta),
        "|zeta|/|Omega0|": abs(c.zeta) / abs(drive.Omega0) if drive.Omega0 else 0.0,
        "varpi_g": c.varpi_g,
        "varpi_e": c.varpi_e,
        "delta": c.delta,
        "zeta_tau": abs(c.zeta) * drive.tau,
    }
    return DesignReport(couplings, validate_regime(tuned, n_max, threshold), table, gamma)
