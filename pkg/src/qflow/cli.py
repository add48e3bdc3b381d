"""Command-line interface: simulate | flows | gp | sweep | critical.

Output is CSV (default) or JSON with a ``# key=value`` metadata preamble
echoing the effective configuration.  Numbers are written with 17
significant digits so reading a file back reproduces the doubles exactly.
Exit codes: 0 ok, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__
from .analysis import PRESET_NAMES, SweepSpec, critical_point, figure_preset, run_sweep
from .channels import (
    MemoryKernelModel,
    MemoryKernelParams,
    TimeLocalModel,
    TimeLocalParams,
    amplitude_c,
    xi,
)
from .errors import ConfigError, NumericalError
from .geomphase import figure_value, gp_mixed_auto
from .infoflow import flows
from .qstate import InitialStateSpec, initial_state


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration of one CLI invocation.

    Every field has a default; a config file may override defaults and
    explicit flags override the file.  Unknown keys in a config file are
    rejected.
    """

    command: str = ""
    model: str = "time-local"
    W: float = 0.1
    lam: float = 1.0
    omega0: float = 1.0
    gamma0: float = 0.1
    gamma: float = 1.0
    z: float = 1.0
    vartheta0: float = math.pi / 4.0
    varphi0: float = math.pi / 3.0
    n: int = 1
    R_min: float = 0.05
    R_max: float = 5.0
    R_steps: int = 40
    C_min: float = 0.01
    C_max: float = 0.24
    C_steps: int = 24
    figure: str = ""
    mode: str = "literal"
    out: str = "-"
    format: str = "csv"
    tol: float = 1e-6
    degrees: bool = False
    t_end: float = 0.0      # 0 means n quasi-periods
    samples: int = 2001


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _emit(cfg: RunConfig, meta: dict, columns: list[str], rows: list[list]) -> None:
    lines: list[str] = []
    if cfg.format == "csv":
        for k, v in meta.items():
            lines.append(f"# {k}={v}")
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(
            {"meta": meta, "columns": columns, "rows": rows}, indent=1, sort_keys=False
        ) + "\n"
    if cfg.out in ("-", ""):
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _base_meta(cfg: RunConfig) -> dict:
    meta = {"artifact_version": __version__, "command": cfg.command}
    for f in fields(RunConfig):
        if f.name in ("command", "out"):  # destination path is not a setting
            continue
        meta[f.name] = _fmt(getattr(cfg, f.name))
    return meta


def _build_model(cfg: RunConfig):
    if cfg.model == "time-local":
        return TimeLocalModel(TimeLocalParams(cfg.W, cfg.lam, cfg.omega0))
    if cfg.model == "memory-kernel":
        return MemoryKernelModel(MemoryKernelParams(cfg.gamma0, cfg.gamma, cfg.omega0))
    raise ConfigError(f"unknown model {cfg.model!r}")


def _state_spec(cfg: RunConfig) -> InitialStateSpec:
    return InitialStateSpec(cfg.z, cfg.vartheta0, cfg.varphi0)


def _horizon(cfg: RunConfig) -> float:
    if cfg.t_end > 0.0:
        return cfg.t_end
    return 2.0 * math.pi * cfg.n / cfg.omega0


def cmd_simulate(cfg: RunConfig) -> None:
    model = _build_model(cfg)
    rho0 = initial_state(_state_spec(cfg))
    times = np.linspace(0.0, _horizon(cfg), max(cfg.samples, 2))
    traj = model.trajectory(rho0, times)
    columns = [
        "t",
        "rho00_re", "rho00_im", "rho01_re", "rho01_im",
        "rho10_re", "rho10_im", "rho11_re", "rho11_im",
        "r_x", "r_y", "r_z", "amp", "gamma", "delta", "min_eig", "pos_ok",
    ]
    bloch = traj.bloch()
    eigs = traj.min_eigenvalues()
    rows = []
    for k, t in enumerate(times):
        s = traj.states[k]
        if cfg.model == "time-local":
            try:
                amp_state = amplitude_c(float(t), model.params)
            except NumericalError as exc:
                raise NumericalError(f"simulate: {exc}") from exc
            amp, gam, delta = abs(amp_state.c), amp_state.gamma_t, amp_state.delta_t
        else:
            amp = float(xi(model.params.C, model.params.tau(float(t))))
            gam = delta = math.nan
        rows.append([
            float(t),
            s[0, 0].real, s[0, 0].imag, s[0, 1].real, s[0, 1].imag,
            s[1, 0].real, s[1, 0].imag, s[1, 1].real, s[1, 1].imag,
            bloch[k, 0], bloch[k, 1], bloch[k, 2],
            amp, gam, delta, float(eigs[k]), int(eigs[k] >= -1e-9),
        ])
    _emit(cfg, _base_meta(cfg), columns, rows)


def cmd_flows(cfg: RunConfig) -> None:
    model = _build_model(cfg)
    rho0 = initial_state(_state_spec(cfg))
    ledger = flows(rho0, model, _horizon(cfg))
    meta = _base_meta(cfg)
    meta["N_total"] = _fmt(ledger.N_total)
    meta["M_total"] = _fmt(ledger.M_total)
    meta["segments"] = str(len(ledger.segments))
    meta["positivity_ok"] = str(ledger.positivity.ok)
    if ledger.positivity.first_violation_time is not None:
        meta["first_violation_time"] = _fmt(ledger.positivity.first_violation_time)
    columns = ["t", "D", "sigma", "N", "M"]
    rows = [
        [float(t), float(d), float(s), float(n_), float(m_)]
        for t, d, s, n_, m_ in zip(ledger.times, ledger.D, ledger.sigma, ledger.N, ledger.M)
    ]
    _emit(cfg, meta, columns, rows)


def cmd_gp(cfg: RunConfig) -> None:
    model = _build_model(cfg)
    rho0 = initial_state(_state_spec(cfg))
    result = gp_mixed_auto(model, rho0, _horizon(cfg), mode=cfg.mode, tol=cfg.tol)
    columns = [
        "phase_raw", "phase_mod", "phase_pi",
        "conn_plus", "conn_minus", "weight_plus", "weight_minus",
        "overlap_plus_re", "overlap_plus_im", "overlap_minus_re", "overlap_minus_im",
        "n_samples", "step_change", "converged",
    ]
    ovp = result.overlaps["plus"]
    ovm = result.overlaps["minus"]
    rows = [[
        result.phase_raw, result.phase, figure_value(result.phase) / math.pi,
        result.connection["plus"], result.connection["minus"],
        result.weights["plus"], result.weights["minus"],
        ovp.real, ovp.imag, ovm.real, ovm.imag,
        result.n_samples, result.step_change, int(result.converged),
    ]]
    _emit(cfg, _base_meta(cfg), columns, rows)


def _sweep_spec(cfg: RunConfig, explicit: frozenset = frozenset()) -> SweepSpec:
    if cfg.figure:
        spec = figure_preset(cfg.figure)
        overrides = {"mode": cfg.mode, "tol": cfg.tol}
        prefix = "R" if spec.param == "R" else "C"
        if f"{prefix}_min" in explicit:
            overrides["start"] = getattr(cfg, f"{prefix}_min")
        if f"{prefix}_max" in explicit:
            overrides["stop"] = getattr(cfg, f"{prefix}_max")
        if f"{prefix}_steps" in explicit:
            overrides["steps"] = getattr(cfg, f"{prefix}_steps")
        if "n" in explicit:
            overrides["n"] = cfg.n
        return replace(spec, **overrides)
    if cfg.model == "time-local":
        return SweepSpec(
            model="time-local", param="R",
            start=cfg.R_min, stop=cfg.R_max, steps=cfg.R_steps,
            W=cfg.W, omega0=cfg.omega0, n=cfg.n,
            z_list=(cfg.z,), vartheta0_list=(cfg.vartheta0,), varphi0=cfg.varphi0,
            outputs=("phase", "N", "M"), mode=cfg.mode, tol=cfg.tol,
        )
    return SweepSpec(
        model="memory-kernel", param="C",
        start=cfg.C_min, stop=cfg.C_max, steps=cfg.C_steps,
        gamma0=cfg.gamma0, omega0=cfg.omega0, n=cfg.n,
        z_list=(cfg.z,), vartheta0_list=(cfg.vartheta0,), varphi0=cfg.varphi0,
        outputs=("phase", "N", "M"), mode=cfg.mode, tol=cfg.tol,
    )


def cmd_sweep(cfg: RunConfig, explicit: frozenset = frozenset()) -> None:
    result = run_sweep(_sweep_spec(cfg, explicit))
    meta = _base_meta(cfg)
    for k, v in result.meta.items():
        meta[f"sweep_{k}"] = str(v)
    for i, (row, col, msg) in enumerate(result.errors):
        meta[f"error_{i}"] = f"row={row} column={col}: {msg}"
    rows = [list(r) for r in result.rows]
    _emit(cfg, meta, list(result.columns), rows)


def cmd_critical(cfg: RunConfig) -> None:
    p = TimeLocalParams(cfg.W, cfg.lam, cfg.omega0)
    report = critical_point(
        _horizon(cfg), _state_spec(cfg), p, cfg.R_min, cfg.R_max, cfg.R_steps
    )
    columns = [
        "R_star", "df_residual", "dD_residual", "dA_residual", "dD_raw", "dA_raw",
        "onset_R", "m_flat_R", "dM_at_onset", "onset_matches_m_flat",
        "grid_min", "grid_max", "grid_steps", "fd_step",
    ]
    rows = [[
        report.r_star, report.df_residual, report.dd_residual, report.da_residual,
        report.dd_raw, report.da_raw, report.onset_R, report.m_flat_R,
        report.dm_at_onset, int(report.onset_matches_m_flat),
        report.grid[0], report.grid[1], report.grid[2], report.fd_step,
    ]]
    _emit(cfg, _base_meta(cfg), columns, rows)


_COMMANDS = {
    "simulate": cmd_simulate,
    "flows": cmd_flows,
    "gp": cmd_gp,
    "sweep": cmd_sweep,
    "critical": cmd_critical,
}


def _add_common_flags(sp: argparse.ArgumentParser) -> None:
    d = RunConfig()
    sp.add_argument("--config", default=None, metavar="PATH",
                    help="JSON file with RunConfig keys (flags win on conflict)")
    sp.add_argument("--model", choices=["time-local", "memory-kernel"], default=None,
                    help=f"dynamical model (default {d.model})")
    sp.add_argument("--W", type=float, default=None,
                    help=f"coupling strength, units of omega0 (default {d.W})")
    sp.add_argument("--lambda", dest="lam", type=float, default=None,
                    help=f"spectral width (default {d.lam})")
    sp.add_argument("--omega0", type=float, default=None,
                    help=f"transition frequency (default {d.omega0})")
    sp.add_argument("--gamma0", type=float, default=None,
                    help=f"memory-kernel dissipation rate (default {d.gamma0})")
    sp.add_argument("--gamma", type=float, default=None,
                    help=f"inverse memory time (default {d.gamma})")
    sp.add_argument("--z", type=float, default=None,
                    help=f"initial mixing weight in [0,1] (default {d.z})")
    sp.add_argument("--vartheta0", type=float, default=None,
                    help=f"initial half-polar angle (default {d.vartheta0:.6g} rad)")
    sp.add_argument("--varphi0", type=float, default=None,
                    help=f"initial azimuth (default {d.varphi0:.6g} rad)")
    sp.add_argument("--n", type=int, default=None,
                    help=f"number of quasi-periods in the horizon (default {d.n})")
    sp.add_argument("--R-min", dest="R_min", type=float, default=None,
                    help=f"sweep lower R (default {d.R_min})")
    sp.add_argument("--R-max", dest="R_max", type=float, default=None,
                    help=f"sweep upper R (default {d.R_max})")
    sp.add_argument("--R-steps", dest="R_steps", type=int, default=None,
                    help=f"sweep resolution in R (default {d.R_steps})")
    sp.add_argument("--C-min", dest="C_min", type=float, default=None,
                    help=f"sweep lower C (default {d.C_min})")
    sp.add_argument("--C-max", dest="C_max", type=float, default=None,
                    help=f"sweep upper C (default {d.C_max})")
    sp.add_argument("--C-steps", dest="C_steps", type=int, default=None,
                    help=f"sweep resolution in C (default {d.C_steps})")
    sp.add_argument("--figure", default=None, metavar="PRESET",
                    help=f"named sweep preset, one of {', '.join(PRESET_NAMES)}")
    sp.add_argument("--mode", choices=["literal", "spectral"], default=None,
                    help=f"eigenbasis convention for phases (default {d.mode})")
    sp.add_argument("--out", default=None, metavar="PATH",
                    help="output path, '-' for stdout (default '-')")
    sp.add_argument("--format", choices=["csv", "json"], default=None,
                    help=f"output format (default {d.format})")
    sp.add_argument("--tol", type=float, default=None,
                    help=f"phase convergence tolerance (default {d.tol})")
    sp.add_argument("--degrees", action="store_true", default=None,
                    help="interpret vartheta0/varphi0 as degrees")
    sp.add_argument("--t-end", dest="t_end", type=float, default=None,
                    help="explicit horizon; 0 means n quasi-periods (default 0)")
    sp.add_argument("--samples", type=int, default=None,
                    help=f"simulate sample count (default {d.samples})")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qflow",
        description="Open-qubit trajectories, information flows and geometric phases "
                    "for the time-local and exponential-memory models.",
    )
    parser.add_argument("--version", action="version", version=f"qflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "write a sampled trajectory (states, Bloch vector, rates, positivity)",
        "flows": "write D(t), sigma(t) and the flow cumulants N(t), M(t)",
        "gp": "write the geometric phase and its per-branch diagnostics",
        "sweep": "write a parameter sweep (use --figure for named presets)",
        "critical": "locate the critical point R* and its coincidence checks",
    }
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=helps[name])
        _add_common_flags(sp)
    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _merge_config(args: argparse.Namespace) -> tuple[RunConfig, frozenset]:
    base = {"command": args.command}
    if args.config:
        base.update(_load_config_file(args.config))
    explicit = set()
    for name in _FIELD_NAMES - {"command"}:
        flag = getattr(args, name, None)
        if flag is not None:
            base[name] = flag
            explicit.add(name)
    cfg = RunConfig(**{k: v for k, v in base.items() if k in _FIELD_NAMES})
    if cfg.degrees:
        cfg = replace(
            cfg,
            vartheta0=math.radians(cfg.vartheta0),
            varphi0=math.radians(cfg.varphi0),
            degrees=False,
        )
    if not 0.0 <= cfg.z <= 1.0:
        raise ConfigError(f"z={cfg.z} outside [0, 1]")
    if cfg.tol <= 0.0:
        raise ConfigError("tol must be > 0")
    if cfg.samples < 2:
        raise ConfigError("samples must be >= 2")
    return cfg, frozenset(explicit)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, explicit = _merge_config(args)
        if cfg.command == "sweep":
            cmd_sweep(cfg, explicit)
        else:
            _COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"qflow: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"qflow: numerical failure in {args.command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
