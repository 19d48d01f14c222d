"""
Run configuration, figure presets and the three experiment drivers:
error scans over epsilon or e0r, the tau1 scan of U^I, and post-pulse
orientation traces (single state or thermal).
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, fields
import copy
import io
import json
import math

import numpy as np

from rotorkick import __version__
from rotorkick.basis import RotorBasis
from rotorkick.observables import (ThermalEnsemble, cos1_formula, free_cos_trace,
                                   thermal_average, thermal_firstorder)
from rotorkick.propagators import (ConvergenceError, Kind, PropagatorConfig, choose_basis,
                                   converged_reference, error_delta, pulse_propagator)
from rotorkick.pulse import Sin2SinPulse
from rotorkick.units import (B_CONVENTION, LICL_B_WAVENUMBER, PhysicalParams, beta_rot,
                             to_dimensionless)

COMMANDS = ("scan-error", "scan-tau1", "trace")
SCAN_VARIABLES = {"scan-error": ("epsilon", "e0r"), "scan-tau1": ("tau1",), "trace": ("tau",)}
APPROX_KINDS = (Kind.MAGNUS, Kind.SECULAR, Kind.IMPROVED, Kind.SUDDEN_IMPACT)
COLUMN_NAMES = {Kind.REFERENCE: "reference", Kind.MAGNUS: "magnus", Kind.SECULAR: "secular",
                Kind.IMPROVED: "improved", Kind.SUDDEN_IMPACT: "sudden_impact"}


class ConfigError(ValueError):
    pass


@dataclass
class ScanSpec:
    variable: str
    start: float = 0.0
    stop: float = 1.0
    num: int = 11
    values: list = None

    def grid(self):
        if self.values is not None:
            g = np.asarray(self.values, dtype=float)
        else:
            if self.num < 1:
                raise ConfigError("scan needs at least one point")
            g = np.linspace(self.start, self.stop, self.num)
        if g.size > 1 and not (np.all(np.diff(g) > 0) or np.all(np.diff(g) < 0)):
            raise ConfigError("scan grid must be strictly monotone")
        return g


@dataclass
class RunConfig:
    command: str
    f: float = 2.0
    epsilon: float = None
    e0r: float = None
    physical: dict = None
    T: float = 0.0
    propagators: list = field(default_factory=lambda: ["ref", "M", "S", "I", "SI"])
    tau1: float = 0.0
    tau2: float = 0.0
    tau_h: float = 0.5
    dt: float = 1e-4
    ref_tol: float = 1e-10
    jmax: object = "auto"
    jmax_thermal: object = "auto"
    scan: ScanSpec = None
    jobs: int = 1
    output: str = None

    # -- parsing ---------------------------------------------------------

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        scan = d.pop("scan", None)
        if isinstance(scan, dict):
            try:
                scan = ScanSpec(**scan)
            except TypeError as e:
                raise ConfigError(f"bad scan block: {e}") from None
        try:
            cfg = cls(scan=scan, **d)
        except TypeError as e:
            raise ConfigError(str(e)) from None
        return cfg.validated()

    def to_dict(self):
        return asdict(self)

    def validated(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.scan is None:
            raise ConfigError("config has no scan block")
        if self.scan.variable not in SCAN_VARIABLES[self.command]:
            raise ConfigError(f"{self.command} scans {SCAN_VARIABLES[self.command]}, "
                              f"not {self.scan.variable!r}")
        self.scan.grid()
        phys = self.physical or {}
        bad = set(phys) - {f.name for f in fields(PhysicalParams)}
        if bad:
            raise ConfigError(f"unknown physical parameters {sorted(bad)}")
        if self.epsilon is not None and ({"B_wavenumber", "delta"} & set(phys)):
            raise ConfigError("epsilon given both directly and through physical parameters")
        if self.e0r is not None and ({"E0", "mu0", "delta"} & set(phys)):
            raise ConfigError("e0r given both directly and through physical parameters")
        if "T" in phys and self.T:
            raise ConfigError("temperature given twice")
        try:
            for k in self.propagators:
                Kind(k)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        try:
            self.propagator_config(Kind.IMPROVED)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.f <= 0:
            raise ConfigError("f must be positive")
        if self.jmax != "auto" and (not isinstance(self.jmax, int) or self.jmax < 1):
            raise ConfigError("jmax must be a positive integer or 'auto'")
        return self

    # -- resolved quantities ---------------------------------------------

    def physical_params(self):
        return PhysicalParams(**(self.physical or {}))

    def dimensionless(self, **point):
        """(epsilon, e0r) at a scan point; the scan value wins."""
        phys = self.physical_params() if self.physical else None
        dim = to_dimensionless(phys) if phys else None
        eps = point.get("epsilon", self.epsilon if self.epsilon is not None
                        else (dim.epsilon if dim else None))
        e0r = point.get("e0r", self.e0r if self.e0r is not None
                        else (dim.e0r if dim else None))
        if eps is None or e0r is None:
            raise ConfigError("epsilon and e0r must be set directly or via physical parameters")
        if not eps > 0:
            raise ConfigError("epsilon must be positive")
        if e0r < 0:
            raise ConfigError("e0r must be non-negative")
        return float(eps), float(e0r)

    @property
    def temperature(self):
        return (self.physical or {}).get("T", self.T)

    @property
    def beta_B(self):
        B = (self.physical or {}).get("B_wavenumber", LICL_B_WAVENUMBER)
        return beta_rot(B, self.temperature)

    def propagator_config(self, kind, **over):
        kw = dict(tau1=self.tau1, tau2=self.tau2, tau_h=self.tau_h, dt=self.dt)
        kw.update(over)
        return PropagatorConfig(kind, **kw)

    def kinds(self):
        return [Kind(k) for k in self.propagators]


# -- presets -------------------------------------------------------------

_EPS_GRID = {"variable": "epsilon", "start": 0.1, "stop": 1.0, "num": 19}
_TRACE_WINDOW = {"variable": "tau", "start": 1.0, "stop": 1.0 + 2 * math.pi / 0.5, "num": 2000}

PRESETS = {
    "fig1": {"command": "scan-error", "e0r": 1.0, "f": 0.5, "propagators": ["M", "S", "I", "SI"],
             "scan": _EPS_GRID},
    "fig2": {"command": "scan-error", "e0r": 20.0, "f": 2.0, "propagators": ["M", "S", "I", "SI"],
             "scan": _EPS_GRID},
    "fig3": {"command": "scan-error", "epsilon": 1.0, "f": 2.0, "propagators": ["I"],
             "scan": {"variable": "e0r", "start": 2.0, "stop": 50.0, "num": 25}},
    "fig4": {"command": "scan-tau1", "epsilon": 1.0, "e0r": 10.0, "f": 2.0, "propagators": ["I"],
             "scan": {"variable": "tau1", "start": 0.0, "stop": 1.0, "num": 101}},
    "fig5": {"command": "trace", "epsilon": 0.5, "e0r": 50.0, "f": 2.0, "T": 0.0,
             "propagators": ["ref", "I", "SI"], "dt": 2.5e-5, "ref_tol": 1e-8,
             "scan": _TRACE_WINDOW},
    "fig6": {"command": "trace", "epsilon": 0.5, "e0r": 70.0, "f": 2.0, "T": 5.0,
             "propagators": ["ref", "I", "SI"], "dt": 2.5e-5, "ref_tol": 1e-8,
             "scan": _TRACE_WINDOW},
}

PRESET_COMMANDS = {name: p["command"] for name, p in PRESETS.items()}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = copy.deepcopy(PRESETS[name])
    d.update(overrides)
    return RunConfig.from_dict(d)


# -- result table --------------------------------------------------------

def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class ResultTable:
    columns: list
    rows: list
    metadata: dict

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self, path=None):
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {json.dumps(self.metadata[key], sort_keys=True)}\n")
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(v) for v in r) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text):
        meta, rows, columns = {}, [], None
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                meta[key] = json.loads(val)
            elif columns is None:
                columns = line.split(",")
            elif line:
                rows.append([v if not _is_number(v) else float(v) for v in line.split(",")])
        return cls(columns, rows, meta)

    def config(self):
        return RunConfig.from_dict(self.metadata["config"])


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _metadata(cfg, **extra):
    meta = {"config": cfg.to_dict(), "tool_version": __version__,
            "units": B_CONVENTION}
    meta.update(extra)
    return meta


def _pool_map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


# -- error scans -----------------------------------------------------------

def _basis_for(cfg, pulse, eps, m=0, initial_js=(0,)):
    if cfg.jmax == "auto":
        return choose_basis(pulse, eps, m=m, initial_js=initial_js)
    return RotorBasis(m, int(cfg.jmax))


def _error_point(task):
    cfg, eps, e0r = task
    pulse = Sin2SinPulse(e0r, cfg.f)
    kinds = [k for k in cfg.kinds() if k is not Kind.REFERENCE]
    try:
        b = _basis_for(cfg, pulse, eps)
        psi0 = b.state(0)
        ref, report = converged_reference(b, pulse, eps, psi0, cfg.dt, tol=cfg.ref_tol)
    except ConvergenceError as e:
        return {"status": "ref_not_converged", "detail": str(e), "deltas": {k: math.nan for k in kinds},
                "jmax": -1, "dt": math.nan}
    deltas = {}
    for k in kinds:
        U = pulse_propagator(cfg.propagator_config(k), b, pulse, eps)
        deltas[k] = error_delta(U @ psi0, ref)
    return {"status": "ok", "deltas": deltas, "jmax": b.jmax, "dt": report["dt"],
            "dt_change": report["dt_change"]}


def _log10(x):
    if math.isnan(x):
        return math.nan
    return math.log10(x) if x > 0 else -math.inf


def run_error_scan(cfg: RunConfig) -> ResultTable:
    """Delta at tau_f from |0,0> for every requested propagator over an epsilon or e0r grid."""
    if cfg.command != "scan-error":
        raise ConfigError("run_error_scan needs a scan-error config")
    var = cfg.scan.variable
    grid = cfg.scan.grid()
    tasks = []
    for v in grid:
        eps, e0r = cfg.dimensionless(**{var: float(v)})
        tasks.append((cfg, eps, e0r))
    results = _pool_map(_error_point, tasks, cfg.jobs)
    kinds = [k for k in cfg.kinds() if k is not Kind.REFERENCE]
    columns = [var]
    for k in kinds:
        columns += [f"delta_{COLUMN_NAMES[k]}", f"log10_delta_{COLUMN_NAMES[k]}"]
    columns += ["jmax", "ref_dt", "status"]
    rows = []
    for v, res in zip(grid, results):
        row = [float(v)]
        for k in kinds:
            row += [res["deltas"][k], _log10(res["deltas"][k])]
        row += [res["jmax"], res["dt"], res["status"]]
        rows.append(row)
    return ResultTable(columns, rows, _metadata(cfg))


def run_tau1_scan(cfg: RunConfig) -> ResultTable:
    """Delta(U^I) at tau_f as a function of tau1."""
    if cfg.command != "scan-tau1":
        raise ConfigError("run_tau1_scan needs a scan-tau1 config")
    eps, e0r = cfg.dimensionless()
    pulse = Sin2SinPulse(e0r, cfg.f)
    b = _basis_for(cfg, pulse, eps)
    psi0 = b.state(0)
    ref, report = converged_reference(b, pulse, eps, psi0, cfg.dt, tol=cfg.ref_tol)
    rows = []
    for t1 in cfg.scan.grid():
        U = pulse_propagator(cfg.propagator_config(Kind.IMPROVED, tau1=float(t1)), b, pulse, eps)
        d = error_delta(U @ psi0, ref)
        rows.append([float(t1), d, _log10(d)])
    return ResultTable(["tau1", "delta_improved", "log10_delta_improved"], rows,
                       _metadata(cfg, jmax=b.jmax, ref_dt=report["dt"],
                                 ref_dt_change=report["dt_change"]))


# -- orientation traces --------------------------------------------------

def _block_traces(task):
    """Post-pulse <cos> traces for every initial |j, m> of one m-block."""
    cfg, eps, e0r, m, js, taus = task
    pulse = Sin2SinPulse(e0r, cfg.f)
    b = _basis_for(cfg, pulse, eps, m=m, initial_js=js)
    psi0 = np.stack([b.state(j) for j in js], axis=1)
    out = {}
    report = None
    for k in cfg.kinds():
        if k is Kind.REFERENCE:
            psi_f, report = converged_reference(b, pulse, eps, psi0, cfg.dt, tol=cfg.ref_tol)
        else:
            psi_f = pulse_propagator(cfg.propagator_config(k), b, pulse, eps) @ psi0
        out[k] = free_cos_trace(b, psi_f, eps, taus, pulse.tau_f)
    return {"m": m, "js": list(js), "traces": out, "jmax": b.jmax, "report": report}


def orientation_traces(cfg: RunConfig):
    """Columns of the orientation table as {name: array} plus run metadata."""
    eps, e0r = cfg.dimensionless()
    pulse = Sin2SinPulse(e0r, cfg.f)
    taus = cfg.scan.grid()
    if taus.min() < pulse.tau_f:
        raise ConfigError("trace window must start at or after the end of the pulse (tau >= 1)")
    T = cfg.temperature
    if T > 0:
        if cfg.jmax_thermal == "auto":
            ens = ThermalEnsemble.auto(cfg.beta_B)
        else:
            ens = ThermalEnsemble(cfg.beta_B, int(cfg.jmax_thermal))
    else:
        ens = None
    J = ens.jmax_thermal if ens else 0
    tasks = [(cfg, eps, e0r, m, tuple(range(m, J + 1)), taus) for m in range(0, J + 1)]
    blocks = _pool_map(_block_traces, tasks, cfg.jobs)

    cols = {}
    for k in cfg.kinds():
        if ens is None:
            cols[COLUMN_NAMES[k]] = blocks[0]["traces"][k][:, 0]
            continue
        per_state = {}
        for blk in blocks:
            for col, j in enumerate(blk["js"]):
                tr = blk["traces"][k][:, col]
                per_state[(j, blk["m"])] = tr
                per_state[(j, -blk["m"])] = tr  # <cos> is even in m
        cols[COLUMN_NAMES[k]] = thermal_average(per_state, ens)
    if ens is None:
        cols["first_order"] = cos1_formula(taus, pulse, eps)
    else:
        cols["first_order"] = thermal_firstorder(taus, pulse, eps, ens, "derived")
        cols["first_order_literal"] = thermal_firstorder(taus, pulse, eps, ens, "literal")
    meta = {"jmax_per_m": {str(b["m"]): b["jmax"] for b in blocks},
            "epsilon": eps, "e0r": e0r}
    if ens is not None:
        meta.update(beta_B=ens.beta_B, jmax_thermal=ens.jmax_thermal, Q=ens.Q)
    reps = [b["report"] for b in blocks if b["report"]]
    if reps:
        meta["ref_dt"] = max(r["dt"] for r in reps)
        meta["ref_dt_change"] = max(r["dt_change"] for r in reps)
    return taus, cols, meta


def run_orientation_trace(cfg: RunConfig) -> ResultTable:
    """Post-pulse orientation traces; thermally averaged when T > 0."""
    if cfg.command != "trace":
        raise ConfigError("run_orientation_trace needs a trace config")
    taus, cols, meta = orientation_traces(cfg)
    names = list(cols)
    rows = [[float(t)] + [float(cols[n][i]) for n in names] for i, t in enumerate(taus)]
    return ResultTable(["tau"] + names, rows, _metadata(cfg, **meta))


RUNNERS = {"scan-error": run_error_scan, "scan-tau1": run_tau1_scan, "trace": run_orientation_trace}


def run(cfg: RunConfig) -> ResultTable:
    return RUNNERS[cfg.command](cfg)
