"""Run configuration, paired full/limit runs, kappa sweeps and persistence.

A run evolves the scaled system and its limit on the same grid and step,
recording an EnergyLedger row every ``snapshot_stride`` steps.  A sweep
repeats that over a decreasing kappa list and fits the log-log rate of
sup_t sqrt(Gamma) against kappa.

Outputs per run (written atomically):
  <tag>.csv            ledger rows, fixed header, 17-significant-digit floats
  <tag>.json           record without timings (byte-reproducible)
  <tag>_snapshots.npz  stored states for the energy-identity audit
  <tag>.time.txt       wall-clock timing (kept out of the reproducible files)
Sweep summary: sweep_summary.json with
  {kappa, sup_error, slope, intercept, r2, config_hash}.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
import os
import time as _time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diagnostics import (
    LEDGER_COLUMNS,
    EnergyLedger,
    bound_monitor,
    make_energy_ledger,
)
from .errors import BlowUpError, ConfigError, VacuumError
from .initdata import WellPreparedSpec, hypothesis_certificate, make_limit_data, make_well_prepared
from .integrator import StepControl, build_stiff_operator, step_full, step_limit, _n_fixed_steps
from .model import FullState, LimitState, Params, PressureLaw
from .spectral import Grid, ScalarField, VectorField, grid_integral

__all__ = [
    "RunConfig",
    "InitialSpec",
    "RunRecord",
    "parse_config",
    "parse_config_text",
    "default_config_text",
    "run_single",
    "run_sweep",
    "SweepResult",
    "fit_rate",
    "RateFit",
    "summarize_sweep",
    "write_record",
    "load_snapshots",
    "SLOPE_RANGE",
    "R2_MIN",
    "REFORM_TOL",
]

SLOPE_RANGE = (0.8, 1.3)
R2_MIN = 0.98
REFORM_TOL = 1e-9


@dataclass(frozen=True)
class InitialSpec:
    seed: int = 7
    base_amplitude: float = 0.1
    velocity_amplitude: float | None = None
    c0: float = 1.0
    max_wavenumber: float = 4.0
    well_prepared: bool = True


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    params: Params
    step: StepControl
    initial: InitialSpec
    kappa_list: tuple[float, ...]
    l: float = 4.0
    out_dir: str = "out"
    snapshot_stride: int = 25
    config_text: str = ""

    def __post_init__(self):
        ks = self.kappa_list
        if any(k2 >= k1 for k1, k2 in zip(ks, ks[1:])):
            raise ConfigError("kappa_list must be strictly decreasing")
        if any(not (0.0 < k <= 1.0) for k in ks):
            raise ConfigError("kappa values must lie in (0, 1]")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.config_text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# config file format: flat INI sections mirroring the dataclasses;
# unknown sections or keys are errors.

_SCHEMA = {
    "grid": {"dims_active": int, "points_per_dim": int, "period": float},
    "params": {
        "kappa": float, "epsilon": float, "mu": float, "lambda": float,
        "tau": float, "eta": float, "kappa_ei": float, "k_rate": float,
        "pressure_amplitude": float, "pressure_gamma": float,
    },
    "step": {"dt": float, "t_end": float, "cfl": float, "mode": str},
    "initial": {
        "seed": int, "base_amplitude": float, "velocity_amplitude": float,
        "c0": float, "max_wavenumber": float, "well_prepared": bool,
    },
    "sweep": {"kappa_list": str},
    "diagnostics": {"l": float, "snapshot_stride": int},
    "output": {"directory": str},
}


def default_config_text() -> str:
    return """\
[grid]
dims_active = 1
points_per_dim = 64
period = 6.283185307179586

[params]
kappa = 0.1
epsilon = 0.1
mu = 0.1
lambda = 0.0
tau = 1.0
eta = 1.0
kappa_ei = 1.0
k_rate = 1.0
pressure_amplitude = 1.0
pressure_gamma = 1.6666666666666667

[step]
dt = 2e-4
t_end = 0.1
cfl = 0.5
mode = fixed_dt

[initial]
seed = 7
base_amplitude = 0.1
c0 = 1.0
max_wavenumber = 4
well_prepared = true

[sweep]
kappa_list = 0.4, 0.2, 0.1, 0.05

[diagnostics]
l = 4
snapshot_stride = 25

[output]
directory = out
"""


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def parse_config_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc

    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            typ = _SCHEMA[section][key]
            try:
                if typ is bool:
                    values[section][key] = _parse_bool(raw)
                else:
                    values[section][key] = typ(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc

    def get(section, key, default):
        return values.get(section, {}).get(key, default)

    try:
        grid = Grid(
            dims_active=get("grid", "dims_active", 1),
            points_per_dim=get("grid", "points_per_dim", 64),
            period=get("grid", "period", 2.0 * math.pi),
        )
        params = Params(
            kappa=get("params", "kappa", 0.1),
            epsilon=get("params", "epsilon", 0.1),
            mu=get("params", "mu", 0.1),
            lam=get("params", "lambda", 0.0),
            tau=get("params", "tau", 1.0),
            eta=get("params", "eta", 1.0),
            kappa_ei=get("params", "kappa_ei", 1.0),
            k_rate=get("params", "k_rate", 1.0),
            pressure=PressureLaw(
                amplitude=get("params", "pressure_amplitude", 1.0),
                gamma=get("params", "pressure_gamma", 5.0 / 3.0),
            ),
        )
        step = StepControl(
            dt=get("step", "dt", 2e-4),
            t_end=get("step", "t_end", 0.1),
            cfl=get("step", "cfl", 0.5),
            mode=get("step", "mode", "fixed_dt"),
        )
        initial = InitialSpec(
            seed=get("initial", "seed", 7),
            base_amplitude=get("initial", "base_amplitude", 0.1),
            velocity_amplitude=get("initial", "velocity_amplitude", None),
            c0=get("initial", "c0", 1.0),
            max_wavenumber=get("initial", "max_wavenumber", 4.0),
            well_prepared=get("initial", "well_prepared", True),
        )
        raw_list = get("sweep", "kappa_list", "0.4, 0.2, 0.1, 0.05")
        kappa_list = tuple(float(tok) for tok in raw_list.replace(",", " ").split())
        return RunConfig(
            grid=grid,
            params=params,
            step=step,
            initial=initial,
            kappa_list=kappa_list,
            l=get("diagnostics", "l", 4.0),
            out_dir=get("output", "directory", "out"),
            snapshot_stride=get("diagnostics", "snapshot_stride", 25),
            config_text=text,
        )
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


# ---------------------------------------------------------------------------
# run records


@dataclass
class RunRecord:
    kappa: float
    status: str
    message: str
    n_steps: int
    dt: float
    t_end: float
    l: float
    rows: list
    certificates: dict
    config_text: str
    wall_seconds: float
    snapshots: list  # [(t, FullState, LimitState)]
    tag: str

    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.rows])

    def gammas(self) -> np.ndarray:
        return np.array([r.gamma for r in self.rows])

    def sup_gamma(self) -> float:
        return float(self.gammas().max())

    def sup_sqrt_gamma(self) -> float:
        return math.sqrt(self.sup_gamma())

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.config_text.encode()).hexdigest()


def run_single(
    cfg: RunConfig,
    kappa: float | None = None,
    tag: str | None = None,
    keep_snapshots: bool = True,
) -> RunRecord:
    """Evolve the paired full/limit systems for one kappa, collecting
    ledger rows and snapshots at the configured stride."""
    if cfg.step.mode != "fixed_dt":
        raise ConfigError("paired runs use fixed_dt stepping; adaptive mode is for exploratory evolve() calls")
    kap = cfg.params.kappa if kappa is None else kappa
    p = replace(cfg.params, kappa=kap)
    grid = cfg.grid
    ini = cfg.initial
    if tag is None:
        tag = f"run_kappa{kap:g}"

    limit = make_limit_data(
        grid, seed=ini.seed, amplitude=ini.base_amplitude,
        velocity_amplitude=ini.velocity_amplitude,
        max_wavenumber=ini.max_wavenumber,
    )
    spec = WellPreparedSpec.from_seed(
        limit, seed=ini.seed, c0=ini.c0, kappa=kap, l=cfg.l,
        max_wavenumber=ini.max_wavenumber, well_prepared=ini.well_prepared,
    )
    full = make_well_prepared(spec)
    certificates = hypothesis_certificate(full, limit, kap, ini.c0, cfg.l)
    mass0 = grid_integral(grid, full.n.values)

    rows: list[EnergyLedger] = []
    snapshots: list = []

    def record(t, f, lm):
        rows.append(make_energy_ledger(t, f, lm, p, cfg.l, mass0))
        if keep_snapshots:
            snapshots.append((t, f, lm))

    start = _time.perf_counter()
    record(0.0, full, limit)
    status, message, steps_done = "completed", "", 0
    try:
        n_steps = _n_fixed_steps(cfg.step)
        if n_steps:
            op_full = build_stiff_operator(grid, p, full.n.mean, cfg.step.dt)
            op_limit = build_stiff_operator(grid, p, limit.n.mean, cfg.step.dt)
            for i in range(n_steps):
                t = i * cfg.step.dt
                full = step_full(full, p, cfg.step, op=op_full, t=t)
                limit = step_limit(limit, p, cfg.step, op=op_limit, t=t)
                steps_done = i + 1
                if steps_done % cfg.snapshot_stride == 0:
                    record(steps_done * cfg.step.dt, full, limit)
    except (BlowUpError, VacuumError) as exc:
        status = "blowup" if isinstance(exc, BlowUpError) else "vacuum"
        message = str(exc)
    wall = _time.perf_counter() - start

    return RunRecord(
        kappa=kap,
        status=status,
        message=message,
        n_steps=steps_done,
        dt=cfg.step.dt,
        t_end=cfg.step.t_end,
        l=cfg.l,
        rows=rows,
        certificates=certificates,
        config_text=cfg.config_text,
        wall_seconds=wall,
        snapshots=snapshots,
        tag=tag,
    )


# ---------------------------------------------------------------------------
# persistence


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _csv_text(rows) -> str:
    lines = [",".join(LEDGER_COLUMNS)]
    for r in rows:
        lines.append(",".join(f"{x:.17g}" for x in r.as_tuple()))
    return "\n".join(lines) + "\n"


def record_json_dict(rec: RunRecord) -> dict:
    """JSON payload; timings deliberately excluded so reruns are byte-identical."""
    times = rec.times()
    gams = rec.gammas()
    bound = bound_monitor(times, gams, rec.certificates.get("budget", 1.0), rec.kappa)
    return {
        "kappa": rec.kappa,
        "status": rec.status,
        "message": rec.message,
        "n_steps": rec.n_steps,
        "dt": rec.dt,
        "t_end": rec.t_end,
        "l": rec.l,
        "certificates": rec.certificates,
        "sup_gamma": rec.sup_gamma(),
        "sup_sqrt_gamma": rec.sup_sqrt_gamma(),
        "sup_gamma_over_kappa2": bound.sup_ratio,
        "bound_envelope": bound.c_envelope,
        "bound_growth_rate": bound.growth_rate,
        "config_hash": rec.config_hash,
        "config": rec.config_text,
    }


def write_record(rec: RunRecord, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / f"{rec.tag}.csv",
        "json": out / f"{rec.tag}.json",
        "npz": out / f"{rec.tag}_snapshots.npz",
        "time": out / f"{rec.tag}.time.txt",
    }
    _atomic_write_text(paths["csv"], _csv_text(rec.rows))
    _atomic_write_text(
        paths["json"], json.dumps(record_json_dict(rec), indent=2) + "\n"
    )
    if rec.snapshots:
        grid = rec.snapshots[0][1].grid
        arrays = {
            "t": np.array([t for t, _, _ in rec.snapshots]),
            "full_n": np.stack([f.n.values for _, f, _ in rec.snapshots]),
            "full_u": np.stack([f.u.values for _, f, _ in rec.snapshots]),
            "full_jt": np.stack([f.jt.values for _, f, _ in rec.snapshots]),
            "full_E": np.stack([f.E.values for _, f, _ in rec.snapshots]),
            "full_B": np.stack([f.B.values for _, f, _ in rec.snapshots]),
            "limit_n": np.stack([lm.n.values for _, _, lm in rec.snapshots]),
            "limit_u": np.stack([lm.u.values for _, _, lm in rec.snapshots]),
            "grid_meta": np.array(
                [grid.dims_active, grid.points_per_dim, grid.period]
            ),
            "kappa": np.array([rec.kappa]),
        }
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        _atomic_write_bytes(paths["npz"], buf.getvalue())
    _atomic_write_text(paths["time"], f"wall_seconds = {rec.wall_seconds:.6f}\n")
    return paths


def load_snapshots(path: str | Path):
    """Rebuild (kappa, [(t, FullState, LimitState), ...]) from a snapshots file."""
    with np.load(path) as data:
        dims, pts, period = data["grid_meta"]
        grid = Grid(int(dims), int(pts), float(period))
        kappa = float(data["kappa"][0])
        snaps = []
        for i, t in enumerate(data["t"]):
            full = FullState(
                ScalarField(grid, data["full_n"][i]),
                VectorField(grid, data["full_u"][i]),
                VectorField(grid, data["full_jt"][i]),
                VectorField(grid, data["full_E"][i]),
                VectorField(grid, data["full_B"][i]),
            )
            limit = LimitState(
                ScalarField(grid, data["limit_n"][i]),
                VectorField(grid, data["limit_u"][i]),
            )
            snaps.append((float(t), full, limit))
    return kappa, snaps


# ---------------------------------------------------------------------------
# rate fitting and sweeps


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    n_used: int
    excluded: tuple = ()


def fit_rate(pairs) -> RateFit:
    """Ordinary least squares of log(error) against log(kappa)."""
    kept = []
    excluded = []
    for kap, err in pairs:
        if err > 0.0 and np.isfinite(err):
            kept.append((kap, err))
        else:
            excluded.append((kap, err))
            warnings.warn(f"fit_rate: excluding nonpositive error at kappa={kap}")
    if len(kept) < 2:
        raise ValueError("need at least 2 positive (kappa, error) pairs")
    x = np.log([k for k, _ in kept])
    y = np.log([e for _, e in kept])
    A = np.stack([np.ones_like(x), x], axis=1)
    coeff, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(res[0]) if len(res) else float(((A @ coeff - y) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(
        slope=float(coeff[1]),
        intercept=float(coeff[0]),
        r2=float(r2),
        n_used=len(kept),
        excluded=tuple(excluded),
    )


def summarize_sweep(kappas, sup_errors, config_hash: str) -> dict:
    """Assemble the sweep summary (also used with injected synthetic errors)."""
    fit = fit_rate(zip(kappas, sup_errors))
    return {
        "kappa": list(kappas),
        "sup_error": list(sup_errors),
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r2": fit.r2,
        "config_hash": config_hash,
    }


@dataclass
class SweepResult:
    summary: dict
    records: list  # RunRecords in kappa_list order (jobs == 1 only)
    failed: list
    paths: dict


def _sweep_worker(args):
    cfg, kap, out_dir = args
    rec = run_single(cfg, kappa=kap)
    write_record(rec, out_dir)
    return kap, rec.sup_sqrt_gamma(), rec.sup_gamma() / kap**2, rec.status


def run_sweep(cfg: RunConfig, jobs: int = 1, out_dir: str | Path | None = None) -> SweepResult:
    """run_single per kappa (optionally in parallel), then fit the rate."""
    if len(cfg.kappa_list) < 3:
        raise ConfigError("sweep needs at least 3 kappa values")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records: list[RunRecord] = []
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(_sweep_worker, [(cfg, k, str(out)) for k in cfg.kappa_list])
            )
    else:
        for kap in cfg.kappa_list:
            rec = run_single(cfg, kappa=kap)
            write_record(rec, out)
            records.append(rec)
            results.append((kap, rec.sup_sqrt_gamma(), rec.sup_gamma() / kap**2, rec.status))

    survivors = [(k, e) for k, e, _, status in results if status == "completed"]
    failed = [(k, status) for k, _, _, status in results if status != "completed"]
    if failed:
        warnings.warn(f"sweep members failed: {failed}")
    if len(survivors) < 3:
        raise ConfigError("fewer than 3 sweep members completed; no rate fit")

    sup_errors = [e for _, e in survivors]
    if any(b > a * (1.0 + 1e-12) for a, b in zip(sup_errors, sup_errors[1:])):
        warnings.warn(
            "sup_t sqrt(Gamma) is not monotone nonincreasing along the kappa sweep"
        )
    summary = summarize_sweep([k for k, _ in survivors], sup_errors, cfg.config_hash)
    summary_path = out / "sweep_summary.json"
    _atomic_write_text(summary_path, json.dumps(summary, indent=2) + "\n")
    return SweepResult(
        summary=summary, records=records, failed=failed,
        paths={"summary": summary_path, "out_dir": out},
    )
