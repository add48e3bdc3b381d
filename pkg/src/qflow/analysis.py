"""Parameter sweeps and the critical-point machinery.

A sweep varies R = W / lambda (time-local) or C = gamma0 / gamma
(memory kernel) while keeping the coupling-side constant fixed, and
evaluates phases, flows, distances and the phase integrand for a set of
initial states.  Sweeps are deterministic: identical specs produce
bit-identical datasets, and per-point failures are recorded per row while
the sweep continues.

The critical point R* is the root of d|c(T, R)|^2/dR.  At R* the trace
distance D(T, R) and the phase integrand A(T, R) are simultaneously
extremal (their R-derivatives share the sign of d|c|^2/dR with positive
prefactors), and the onset of backflow N(T) coincides with the flattening
of M(T).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channels
from .channels import (
    MemoryKernelModel,
    MemoryKernelParams,
    TimeLocalModel,
    TimeLocalParams,
)
from .errors import BracketError, ConfigError, NumericalError
from .geomphase import figure_value, gp_mixed_auto
from .infoflow import flows
from .qstate import InitialStateSpec, initial_state

FD_STEP = 5e-5
ONSET_TOL = 1e-10


def thread_count() -> int:
    """Sweep parallelism cap from QFLOW_THREADS (default 1: sequential)."""
    raw = os.environ.get("QFLOW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SweepSpec:
    """Axes and outputs of one parameter sweep."""

    model: str = "time-local"            # "time-local" | "memory-kernel"
    param: str = "R"                      # swept parameter name
    start: float = 0.05
    stop: float = 5.0
    steps: int = 40
    W: float = 0.1                        # fixed coupling (time-local)
    gamma0: float = 0.1                   # fixed dissipation rate (memory kernel)
    omega0: float = 1.0
    n: int = 1                            # horizon T = 2 n pi / omega0
    z_list: tuple[float, ...] = (1.0,)
    vartheta0_list: tuple[float, ...] = (math.pi / 4.0,)
    varphi0: float = math.pi / 3.0
    outputs: tuple[str, ...] = ("phase", "N", "M")
    mode: str = "literal"
    vary: str = "lambda"                  # which constant absorbs the swept ratio
    tol: float = 1e-6
    label: str = ""

    def __post_init__(self) -> None:
        if self.steps < 2:
            raise ConfigError("sweep resolution must be >= 2")
        if self.model not in ("time-local", "memory-kernel"):
            raise ConfigError(f"unknown model {self.model!r}")
        expected = "R" if self.model == "time-local" else "C"
        if self.param != expected:
            raise ConfigError(f"model {self.model!r} sweeps {expected}, not {self.param!r}")
        if self.start <= 0.0 or self.stop <= self.start:
            raise ConfigError("sweep range must satisfy 0 < start < stop")
        bad = set(self.outputs) - {"phase", "N", "M", "D", "A"}
        if bad:
            raise ConfigError(f"unknown sweep outputs: {sorted(bad)}")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def horizon(self) -> float:
        return 2.0 * math.pi * self.n / self.omega0

    def crosses_quarter(self) -> bool:
        return self.param == "C" and self.start < 0.25 < self.stop

    def states(self) -> list[tuple[str, InitialStateSpec]]:
        out = []
        for z in self.z_list:
            for vt in self.vartheta0_list:
                out.append((f"z={z:g};vt={vt:g}", InitialStateSpec(z, vt, self.varphi0)))
        return out

    def params_at(self, value: float):
        if self.model == "time-local":
            if self.vary == "lambda":
                return TimeLocalParams(self.W, self.W / value, self.omega0)
            if self.vary == "W":
                return TimeLocalParams(value * self.W, self.W, self.omega0)
            raise ConfigError(f"unknown vary policy {self.vary!r} for R sweeps")
        if self.vary in ("lambda", "gamma"):
            return MemoryKernelParams(self.gamma0, self.gamma0 / value, self.omega0)
        if self.vary == "gamma0":
            return MemoryKernelParams(value * self.gamma0, self.gamma0, self.omega0)
        raise ConfigError(f"unknown vary policy {self.vary!r} for C sweeps")

    def model_at(self, value: float):
        p = self.params_at(value)
        return TimeLocalModel(p) if self.model == "time-local" else MemoryKernelModel(p)


@dataclass(frozen=True)
class SweepResult:
    """Deterministic tabular result of a sweep."""

    spec: SweepSpec
    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]
    errors: tuple[tuple[int, str, str], ...]  # (row index, column label, message)
    meta: dict = field(default_factory=dict)


def _phase_columns(label: str) -> list[str]:
    return [f"phase_raw[{label}]", f"phase_mod[{label}]", f"phase_pi[{label}]"]


def _sweep_columns(spec: SweepSpec) -> list[str]:
    cols = [spec.param]
    for label, _ in spec.states():
        for out in spec.outputs:
            if out == "phase":
                cols.extend(_phase_columns(label))
            else:
                cols.append(f"{out}[{label}]")
    return cols


def _row_at(spec: SweepSpec, value: float):
    """All outputs at one swept value; per-state failures become NaN + note."""
    model = spec.model_at(value)
    T = spec.horizon()
    row: list[float] = [float(value)]
    notes: list[tuple[str, str]] = []
    for label, state in spec.states():
        rho0 = initial_state(state)
        cells: list[float] = []
        try:
            ledger = None
            if {"N", "M", "D"} & set(spec.outputs):
                ledger = flows(rho0, model, T)
            for out in spec.outputs:
                if out == "phase":
                    r = gp_mixed_auto(model, rho0, T, mode=spec.mode, tol=spec.tol)
                    cells.extend([r.phase_raw, r.phase, figure_value(r.phase) / math.pi])
                elif out == "N":
                    cells.append(ledger.N_total)
                elif out == "M":
                    cells.append(ledger.M_total)
                elif out == "D":
                    cells.append(float(ledger.D[-1]))
                elif out == "A":
                    cells.append(integrand_A_from_model(T, model, rho0))
        except NumericalError as exc:
            width = sum(3 if o == "phase" else 1 for o in spec.outputs)
            cells = [math.nan] * width
            notes.append((label, str(exc)))
        row.extend(cells)
    return row, notes


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate the sweep row by row (rows may run on a thread pool)."""
    values = spec.values()
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda v: _row_at(spec, v), values))
    else:
        results = [_row_at(spec, v) for v in values]

    rows = tuple(tuple(r) for r, _ in results)
    errors = tuple(
        (i, label, msg) for i, (_, notes) in enumerate(results) for label, msg in notes
    )
    meta = {
        "model": spec.model,
        "param": spec.param,
        "vary": spec.vary,
        "n": spec.n,
        "mode": spec.mode,
        "label": spec.label,
    }
    if spec.crosses_quarter():
        meta["crosses_validity_boundary"] = "C range crosses 1/4"
    return SweepResult(spec, tuple(_sweep_columns(spec)), rows, errors, meta)


# ---------------------------------------------------------------------------
# Phase integrand and critical point
# ---------------------------------------------------------------------------

def integrand_A_from_model(t: float, model, rho0) -> float:
    """A(t) = omega0 [1/2 + r_z / (2 sqrt(4 D^2 - 2 r_z - 1))] for one state."""
    b = model.bloch_series(rho0, float(t))
    r_z = float(b[2])
    d = 0.5 * math.sqrt(b[0] ** 2 + b[1] ** 2 + (r_z + 1.0) ** 2)
    radicand = 4.0 * d * d - 2.0 * r_z - 1.0
    if radicand < -1e-10:
        raise NumericalError(f"negative phase-integrand radicand {radicand:.3e}")
    radicand = max(radicand, 1e-300)
    return model.omega0 * (0.5 + r_z / (2.0 * math.sqrt(radicand)))


def integrand_A(t: float, R: float, spec: InitialStateSpec, p: TimeLocalParams,
                vary: str = "lambda") -> float:
    """Phase integrand of the time-local model at ratio R.

    ``vary="lambda"`` holds W = p.W fixed and sets lambda = W / R (the
    default reading of an R sweep); ``vary="W"`` holds lambda fixed.
    """
    if vary == "lambda":
        eff = TimeLocalParams(p.W, p.W / R, p.omega0)
    elif vary == "W":
        eff = TimeLocalParams(R * p.lam, p.lam, p.omega0)
    else:
        raise ConfigError(f"unknown vary policy {vary!r}")
    return integrand_A_from_model(t, TimeLocalModel(eff), initial_state(spec))


@dataclass(frozen=True)
class CriticalPointReport:
    """Root of d|c(T, R)|^2/dR and the coincidence checks at it."""

    r_star: float
    df_residual: float          # |d|c|^2/dR| at R*
    dd_residual: float          # |dD/dR| at R*, normalised by the sweep maximum
    da_residual: float          # |dA/dR| at R*, normalised by the sweep maximum
    dd_raw: float
    da_raw: float
    onset_R: float              # first grid point with N(T) > 1e-10
    m_flat_R: float             # first grid point where dM/dR has collapsed
    dm_at_onset: float          # forward difference of M just above R*
    onset_matches_m_flat: bool  # within one grid step
    grid: tuple[float, float, int]
    fd_step: float


def _abs_c_sq_at(T: float, R: float, spec_state: InitialStateSpec, p: TimeLocalParams,
                 vary: str) -> float:
    if vary == "lambda":
        eff = TimeLocalParams(p.W, p.W / R, p.omega0)
    else:
        eff = TimeLocalParams(R * p.lam, p.lam, p.omega0)
    return float(channels.abs_c_squared(T, eff))


def critical_point(T: float, spec: InitialStateSpec, p: TimeLocalParams,
                   r_min: float, r_max: float, steps: int = 81,
                   vary: str = "lambda") -> CriticalPointReport:
    """Locate R* and verify the simultaneous-extremum / onset claims.

    The R range must bracket a sign change of the centered difference of
    |c(T, R)|^2; the first sign change (the first minimum) is refined by
    bisection.  D(T, R) and A(T, R) are then differenced at R*, and the
    backflow onset is compared against the collapse of dM/dR on the grid.
    """
    if r_min <= 0.0 or r_max <= r_min:
        raise ConfigError("critical_point requires 0 < r_min < r_max")
    h = FD_STEP
    grid = np.linspace(r_min, r_max, steps)

    def f_of(R: float) -> float:
        return _abs_c_sq_at(T, R, spec, p, vary)

    def df_of(R: float) -> float:
        return (f_of(R + h) - f_of(R - h)) / (2.0 * h)

    df_grid = np.array([df_of(R) for R in grid])
    sign = np.sign(df_grid)
    flips = np.flatnonzero((sign[:-1] < 0) & (sign[1:] > 0))
    if flips.size == 0:
        raise BracketError(
            f"no sign change of d|c(T,R)|^2/dR in [{r_min}, {r_max}]"
        )
    lo, hi = float(grid[flips[0]]), float(grid[flips[0] + 1])
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if df_of(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    r_star = 0.5 * (lo + hi)
    df_res = abs(df_of(r_star))

    model_of = lambda R: TimeLocalModel(
        TimeLocalParams(p.W, p.W / R, p.omega0) if vary == "lambda"
        else TimeLocalParams(R * p.lam, p.lam, p.omega0)
    )
    rho0 = initial_state(spec)

    def d_of(R: float) -> float:
        b = model_of(R).bloch_series(rho0, T)
        return 0.5 * math.sqrt(b[0] ** 2 + b[1] ** 2 + (b[2] + 1.0) ** 2)

    def a_of(R: float) -> float:
        return integrand_A_from_model(T, model_of(R), rho0)

    def cdiff(fn, R: float) -> float:
        return (fn(R + h) - fn(R - h)) / (2.0 * h)

    dd_raw = cdiff(d_of, r_star)
    da_raw = cdiff(a_of, r_star)
    dd_scale = max(abs(cdiff(d_of, R)) for R in grid[1:-1])
    da_scale = max(abs(cdiff(a_of, R)) for R in grid[1:-1])

    n_grid = np.empty(steps)
    m_grid = np.empty(steps)
    for j, R in enumerate(grid):
        ledger = flows(rho0, model_of(R), T)
        n_grid[j] = ledger.N_total
        m_grid[j] = ledger.M_total

    onset_idx = int(np.argmax(n_grid > ONSET_TOL)) if np.any(n_grid > ONSET_TOL) else steps - 1
    dm_grid = (m_grid[2:] - m_grid[:-2]) / (grid[2:] - grid[:-2])  # centered, interior
    peak = int(np.argmax(dm_grid))
    below = np.flatnonzero(dm_grid[peak:] < 0.5 * dm_grid[peak])
    m_flat_idx = (peak + int(below[0]) + 1) if below.size else steps - 1

    step_R = float(grid[1] - grid[0])
    dm_onset = (m_grid[min(onset_idx + 2, steps - 1)] - m_grid[min(onset_idx + 1, steps - 1)]) / step_R

    return CriticalPointReport(
        r_star=float(r_star),
        df_residual=float(df_res),
        dd_residual=float(abs(dd_raw) / dd_scale),
        da_residual=float(abs(da_raw) / da_scale),
        dd_raw=float(dd_raw),
        da_raw=float(da_raw),
        onset_R=float(grid[onset_idx]),
        m_flat_R=float(grid[m_flat_idx]),
        dm_at_onset=float(dm_onset),
        onset_matches_m_flat=abs(m_flat_idx - onset_idx) <= 1,
        grid=(float(r_min), float(r_max), int(steps)),
        fd_step=h,
    )


# ---------------------------------------------------------------------------
# Named sweep presets
# ---------------------------------------------------------------------------

_Z_FAMILY = (0.25, 0.5, 0.75, 1.0)


def _tl_preset(label, W, outputs, z_list=_Z_FAMILY, vartheta0=(math.pi / 4,),
               varphi0=math.pi / 3, start=0.05, stop=5.0, steps=40):
    return SweepSpec(
        model="time-local", param="R", start=start, stop=stop, steps=steps,
        W=W, z_list=z_list, vartheta0_list=vartheta0, varphi0=varphi0,
        outputs=outputs, label=label,
    )


def _mk_preset(label, outputs):
    return SweepSpec(
        model="memory-kernel", param="C", start=0.01, stop=0.24, steps=24,
        gamma0=0.1, z_list=_Z_FAMILY, vartheta0_list=(math.pi / 4,),
        varphi0=math.pi / 3, outputs=outputs, label=label,
    )


def figure_preset(name: str) -> SweepSpec:
    """Built-in sweep presets fig1 ... fig9, appendix-nm, appendix-ady."""
    presets = {
        "fig1": lambda: _tl_preset("fig1", 0.1, ("phase",)),
        "fig2": lambda: _tl_preset("fig2", 0.1, ("M",)),
        "fig3": lambda: _tl_preset("fig3", 1.0, ("N",)),
        "fig4": lambda: _tl_preset("fig4", 1.0, ("phase", "N")),
        "fig5": lambda: _tl_preset("fig5", 10.0, ("phase", "N")),
        "fig6": lambda: _tl_preset("fig6", 10.0, ("N",)),
        "fig7": lambda: _tl_preset(
            "fig7", 10.0, ("phase", "N"), z_list=(0.5,),
            vartheta0=tuple(k * math.pi / 12.0 for k in range(13)),
            varphi0=math.pi / 6,
        ),
        "fig8": lambda: _mk_preset("fig8", ("phase",)),
        "fig9": lambda: _mk_preset("fig9", ("M",)),
        "appendix-nm": lambda: _tl_preset(
            "appendix-nm", 0.6, ("N", "M"), z_list=(1.0,),
            vartheta0=(math.pi / 3,), varphi0=0.0,
            start=0.3, stop=1.2, steps=46,
        ),
        "appendix-ady": lambda: _tl_preset(
            "appendix-ady", 0.6, ("A", "D", "N"), z_list=(1.0,),
            vartheta0=(math.pi / 3,), varphi0=0.0,
            start=0.3, stop=1.2, steps=46,
        ),
    }
    try:
        return presets[name]()
    except KeyError:
        raise ConfigError(
            f"unknown figure preset {name!r}; choose from {sorted(presets)}"
        ) from None


PRESET_NAMES = (
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9",
    "appendix-nm", "appendix-ady",
)
