"""The two exactly solvable dissipative models and their independent oracles.

Time-local model (Lorentzian bath, zero temperature):

    J(w)   = W^2 lambda / pi / ((w0 - w)^2 + lambda^2)
    c(t)   = exp(-(lambda + i w0) t / 2) (cosh(Om t/2) + (lambda/Om) sinh(Om t/2))
    Om     = sqrt(lambda^2 - 4 W^2)            (complex arithmetic, no branch split)
    rho(t) : populations scale with |c|^2, coherences with c(t)

Memory-kernel model (exponential kernel, dissipation rate gamma0, inverse
memory time gamma, C = gamma0/gamma, tau = gamma t):

    xi(C, tau) = exp(-tau/2) (cosh(Om tau/2) + (1/Om) sinh(Om tau/2)),  Om = sqrt(1 - 4C)
    rho(t)     : populations scale with xi(C, tau), coherences with
                 exp(-i w0 t) xi(C/2, tau)

Both closed forms are cross-checked against hand-rolled fixed-step RK4
integrations of the respective master equations; the integrators share no
code path with the analytic propagators.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PoleError, StepSizeError
from .qstate import DensityMatrix

POLE_TOL = 1e-12
ORACLE_CONVERGENCE_TOL = 1e-8
_SINHC_SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class TimeLocalParams:
    """Constants of the time-local model: coupling W, spectral width, frequency."""

    W: float
    lam: float
    omega0: float = 1.0

    def __post_init__(self) -> None:
        if self.W < 0.0:
            raise ConfigError(f"coupling W={self.W} must be >= 0")
        if self.lam <= 0.0:
            raise ConfigError(f"spectral width lambda={self.lam} must be > 0")
        if self.omega0 <= 0.0:
            raise ConfigError(f"transition frequency omega0={self.omega0} must be > 0")

    @property
    def R(self) -> float:
        return self.W / self.lam

    @property
    def Omega(self) -> complex:
        return cmath.sqrt(complex(self.lam * self.lam - 4.0 * self.W * self.W))

    def quasi_period(self) -> float:
        return 2.0 * math.pi / self.omega0

    def timescale(self) -> float:
        return min(self.quasi_period(), 1.0 / self.lam)

    def feature_scale(self) -> float:
        """Shortest scale on which the dynamics has structure (sampling aid)."""
        scale = self.timescale()
        om = self.Omega
        if abs(om.imag) > 0.0:
            scale = min(scale, math.pi / abs(om.imag))
        return scale


@dataclass(frozen=True)
class AmplitudeState:
    """Amplitude c(t) together with the instantaneous rates it generates."""

    c: complex
    gamma_t: float
    delta_t: float

    def __post_init__(self) -> None:
        if abs(self.c) > 1.0 + 1e-9:
            raise ConfigError(f"|c| = {abs(self.c)} exceeds 1")


@dataclass(frozen=True)
class MemoryKernelParams:
    """Constants of the exponential-memory model."""

    gamma0: float
    gamma: float
    omega0: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma0 < 0.0:
            raise ConfigError(f"dissipation rate gamma0={self.gamma0} must be >= 0")
        if self.gamma <= 0.0:
            raise ConfigError(f"inverse memory time gamma={self.gamma} must be > 0")
        if self.omega0 <= 0.0:
            raise ConfigError(f"transition frequency omega0={self.omega0} must be > 0")

    @property
    def C(self) -> float:
        return self.gamma0 / self.gamma

    @property
    def tau_R(self) -> float:
        return 1.0 / self.gamma

    @property
    def Omega(self) -> complex:
        return cmath.sqrt(complex(1.0 - 4.0 * self.C))

    def tau(self, t):
        return self.gamma * np.asarray(t, dtype=float)

    def quasi_period(self) -> float:
        return 2.0 * math.pi / self.omega0

    def timescale(self) -> float:
        return min(self.quasi_period(), self.tau_R)

    def feature_scale(self) -> float:
        scale = self.timescale()
        om = self.Omega
        if abs(om.imag) > 0.0:
            # oscillation period of xi in t units
            scale = min(scale, math.pi / (self.gamma * abs(om.imag)))
        return scale


@dataclass(frozen=True)
class Trajectory:
    """Ordered (t, state) samples of one dynamical run."""

    times: np.ndarray
    states: np.ndarray
    model: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=complex)
        if t.ndim != 1 or s.shape != (t.size, 2, 2):
            raise ConfigError("trajectory arrays must be (n,) times and (n, 2, 2) states")
        if t.size == 0 or t[0] != 0.0:
            raise ConfigError("trajectory must start at t = 0")
        if np.any(np.diff(t) <= 0.0):
            raise ConfigError("trajectory times must be strictly increasing")
        t.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return int(self.times.size)

    def density(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.states[i])

    def initial(self) -> DensityMatrix:
        return self.density(0)

    def final(self) -> DensityMatrix:
        return self.density(len(self) - 1)

    def bloch(self) -> np.ndarray:
        """Bloch vectors of all samples, shape (n, 3)."""
        return _bloch_of_states(self.states)

    def min_eigenvalues(self) -> np.ndarray:
        r = np.linalg.norm(self.bloch(), axis=-1)
        return 0.5 * (1.0 - r)


def _bloch_of_states(states: np.ndarray) -> np.ndarray:
    out = np.empty(states.shape[:-2] + (3,), dtype=float)
    out[..., 0] = 2.0 * states[..., 0, 1].real
    out[..., 1] = -2.0 * states[..., 0, 1].imag
    out[..., 2] = (states[..., 0, 0] - states[..., 1, 1]).real
    return out


def _sinhc(x):
    """sinh(x)/x, elementwise, with a series limit near x = 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < _SINHC_SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    out = np.sinh(safe) / safe
    x2 = x * x
    series = 1.0 + x2 / 6.0 + x2 * x2 / 120.0
    return np.where(small, series, out)


def _g_and_gdot(t, p: TimeLocalParams):
    """Return (g, gdot) with c = exp(-(lam + i w0) t / 2) g; both are real."""
    t = np.asarray(t, dtype=float)
    omega_sq = p.lam * p.lam - 4.0 * p.W * p.W
    u = 0.5 * np.sqrt(complex(omega_sq)) * t
    ch = np.cosh(u)
    sc = _sinhc(u)
    g = ch + 0.5 * p.lam * t * sc
    gdot = 0.5 * p.lam * ch + 0.25 * omega_sq * t * sc
    return g.real, gdot.real


def lorentzian_density(omega, p: TimeLocalParams):
    """Bath spectral density J(w) = W^2 lambda / pi / ((w0 - w)^2 + lambda^2)."""
    omega = np.asarray(omega, dtype=float)
    det = p.omega0 - omega
    return (p.W * p.W * p.lam / math.pi) / (det * det + p.lam * p.lam)


def amplitude(t, p: TimeLocalParams):
    """Complex excited-state amplitude c(t); accepts scalars or arrays."""
    t = np.asarray(t, dtype=float)
    g, _ = _g_and_gdot(t, p)
    return np.exp(-0.5 * (p.lam + 1j * p.omega0) * t) * g


def amplitude_derivative(t, p: TimeLocalParams):
    """Analytic dc/dt, formulated without dividing by g (no pole hazard)."""
    t = np.asarray(t, dtype=float)
    g, gdot = _g_and_gdot(t, p)
    half = 0.5 * (p.lam + 1j * p.omega0)
    return np.exp(-half * t) * (gdot - half * g)


def abs_c_squared(t, p: TimeLocalParams):
    """|c(t)|^2 = exp(-lambda t) g(t)^2."""
    t = np.asarray(t, dtype=float)
    g, _ = _g_and_gdot(t, p)
    return np.exp(-p.lam * t) * g * g


def d_abs_c_squared_dt(t, p: TimeLocalParams):
    """Closed form d|c|^2/dt = -2 W^2 t exp(-lambda t) g(t) sinhc(Om t / 2)."""
    t = np.asarray(t, dtype=float)
    g, _ = _g_and_gdot(t, p)
    u = 0.5 * np.sqrt(complex(p.lam * p.lam - 4.0 * p.W * p.W)) * t
    sc = _sinhc(u).real
    return -2.0 * p.W * p.W * t * np.exp(-p.lam * t) * g * sc


def amplitude_c(t: float, p: TimeLocalParams) -> AmplitudeState:
    """Amplitude and rates at one instant.

    The decay rate Gamma = -Re(cdot/c) and shift Delta = -Im(cdot/c) diverge
    at zeros of c (possible only for R > 1/2); a :class:`PoleError` is
    raised there instead of returning infinities.
    """
    if t < 0.0:
        raise ConfigError("amplitude_c requires t >= 0")
    g, gdot = _g_and_gdot(float(t), p)
    if abs(g) < POLE_TOL:
        raise PoleError(f"decay rate pole: c(t) = 0 at t = {t!r}")
    c = cmath.exp(-0.5 * (p.lam + 1j * p.omega0) * t) * g
    ratio = -0.5 * (p.lam + 1j * p.omega0) + gdot / g
    return AmplitudeState(c=c, gamma_t=-ratio.real, delta_t=-ratio.imag)


def first_amplitude_zero(p: TimeLocalParams) -> float | None:
    """Time of the first zero of c(t), or None when R <= 1/2 (no zeros)."""
    om = p.Omega
    if abs(om.imag) == 0.0:
        return None
    w = abs(om.imag)
    return 2.0 * (math.pi - math.atan2(w, p.lam)) / w


def xi(C: float, tau):
    """Population relaxation factor of the exponential-memory model."""
    if C < 0.0:
        raise ConfigError(f"C={C} must be >= 0")
    tau = np.asarray(tau, dtype=float)
    v = 0.5 * np.sqrt(complex(1.0 - 4.0 * C)) * tau
    out = np.exp(-0.5 * tau) * (np.cosh(v) + 0.5 * tau * _sinhc(v)).real
    return out if out.ndim else float(out)


def d_xi_dtau(C: float, tau):
    """Closed form d xi / d tau = -C tau exp(-tau/2) sinhc(Om tau / 2)."""
    tau = np.asarray(tau, dtype=float)
    v = 0.5 * np.sqrt(complex(1.0 - 4.0 * C)) * tau
    out = -C * tau * np.exp(-0.5 * tau) * _sinhc(v).real
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Analytic propagation
# ---------------------------------------------------------------------------

def _time_local_states(rho0: DensityMatrix, times, p: TimeLocalParams) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    x = abs_c_squared(t, p)
    c = amplitude(t, p)
    p00 = rho0.matrix[0, 0].real
    coh = rho0.matrix[0, 1]
    out = np.empty(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = p00 * x
    out[..., 1, 1] = 1.0 - p00 * x
    out[..., 0, 1] = coh * c
    out[..., 1, 0] = np.conj(coh * c)
    return out


def _time_local_state_dot(rho0: DensityMatrix, times, p: TimeLocalParams) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    dx = d_abs_c_squared_dt(t, p)
    dc = amplitude_derivative(t, p)
    p00 = rho0.matrix[0, 0].real
    coh = rho0.matrix[0, 1]
    out = np.empty(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = p00 * dx
    out[..., 1, 1] = -p00 * dx
    out[..., 0, 1] = coh * dc
    out[..., 1, 0] = np.conj(coh * dc)
    return out


def evolve_time_local(rho0: DensityMatrix, t: float, p: TimeLocalParams) -> DensityMatrix:
    """Analytic solution: populations scale by |c|^2, coherences by c(t)."""
    if t < 0.0:
        raise ConfigError("evolve_time_local requires t >= 0")
    return DensityMatrix(_time_local_states(rho0, float(t), p))


def _memory_kernel_states(rho0: DensityMatrix, times, p: MemoryKernelParams) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    tau = p.tau(t)
    xi1 = np.asarray(xi(p.C, tau))
    xi2 = np.asarray(xi(0.5 * p.C, tau))
    rot = np.exp(-1j * p.omega0 * t)
    p00 = rho0.matrix[0, 0].real
    coh = rho0.matrix[0, 1]
    out = np.empty(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = p00 * xi1
    out[..., 1, 1] = 1.0 - p00 * xi1
    out[..., 0, 1] = coh * rot * xi2
    out[..., 1, 0] = np.conj(coh * rot * xi2)
    return out


def _memory_kernel_state_dot(rho0: DensityMatrix, times, p: MemoryKernelParams) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    tau = p.tau(t)
    xi2 = np.asarray(xi(0.5 * p.C, tau))
    dxi1 = p.gamma * np.asarray(d_xi_dtau(p.C, tau))
    dxi2 = p.gamma * np.asarray(d_xi_dtau(0.5 * p.C, tau))
    rot = np.exp(-1j * p.omega0 * t)
    p00 = rho0.matrix[0, 0].real
    coh = rho0.matrix[0, 1]
    dcoh = coh * rot * (dxi2 - 1j * p.omega0 * xi2)
    out = np.empty(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = p00 * dxi1
    out[..., 1, 1] = -p00 * dxi1
    out[..., 0, 1] = dcoh
    out[..., 1, 0] = np.conj(dcoh)
    return out


def evolve_memory_kernel(rho0: DensityMatrix, t: float, p: MemoryKernelParams) -> DensityMatrix:
    """Analytic solution of the exponential-memory model (Schroedinger picture).

    Positivity is not guaranteed for C > 1/4; the state is returned as-is
    and violations are surfaced by :func:`positivity_check`, never clamped.
    """
    if t < 0.0:
        raise ConfigError("evolve_memory_kernel requires t >= 0")
    return DensityMatrix(_memory_kernel_states(rho0, float(t), p))


# ---------------------------------------------------------------------------
# Model wrappers used by the flow / phase / sweep pipelines
# ---------------------------------------------------------------------------

class TimeLocalModel:
    """Time-local model bound to one parameter set."""

    tag = "time-local"

    def __init__(self, params: TimeLocalParams):
        self.params = params

    @property
    def omega0(self) -> float:
        return self.params.omega0

    def steady_state(self) -> DensityMatrix:
        return DensityMatrix.ground()

    def timescale(self) -> float:
        return self.params.timescale()

    def feature_scale(self) -> float:
        return self.params.feature_scale()

    def states(self, rho0: DensityMatrix, times) -> np.ndarray:
        return _time_local_states(rho0, times, self.params)

    def state_dot(self, rho0: DensityMatrix, times) -> np.ndarray:
        return _time_local_state_dot(rho0, times, self.params)

    def evolve(self, rho0: DensityMatrix, t: float) -> DensityMatrix:
        return evolve_time_local(rho0, t, self.params)

    def bloch_series(self, rho0: DensityMatrix, times) -> np.ndarray:
        return _bloch_of_states(self.states(rho0, times))

    def bloch_dot_series(self, rho0: DensityMatrix, times) -> np.ndarray:
        return _bloch_of_states(self.state_dot(rho0, times))

    def trajectory(self, rho0: DensityMatrix, times) -> Trajectory:
        meta = {
            "omega0": self.params.omega0,
            "phi0": float(np.angle(rho0.matrix[1, 0])),
            "W": self.params.W,
            "lambda": self.params.lam,
        }
        return Trajectory(np.asarray(times, float), self.states(rho0, times), self.tag, meta)


class MemoryKernelModel:
    """Exponential-memory model bound to one parameter set."""

    tag = "memory-kernel"

    def __init__(self, params: MemoryKernelParams):
        self.params = params

    @property
    def omega0(self) -> float:
        return self.params.omega0

    def steady_state(self) -> DensityMatrix:
        return DensityMatrix.ground()

    def timescale(self) -> float:
        return self.params.timescale()

    def feature_scale(self) -> float:
        return self.params.feature_scale()

    def states(self, rho0: DensityMatrix, times) -> np.ndarray:
        return _memory_kernel_states(rho0, times, self.params)

    def state_dot(self, rho0: DensityMatrix, times) -> np.ndarray:
        return _memory_kernel_state_dot(rho0, times, self.params)

    def evolve(self, rho0: DensityMatrix, t: float) -> DensityMatrix:
        return evolve_memory_kernel(rho0, t, self.params)

    def bloch_series(self, rho0: DensityMatrix, times) -> np.ndarray:
        return _bloch_of_states(self.states(rho0, times))

    def bloch_dot_series(self, rho0: DensityMatrix, times) -> np.ndarray:
        return _bloch_of_states(self.state_dot(rho0, times))

    def trajectory(self, rho0: DensityMatrix, times) -> Trajectory:
        meta = {
            "omega0": self.params.omega0,
            "phi0": float(np.angle(rho0.matrix[1, 0])),
            "gamma0": self.params.gamma0,
            "gamma": self.params.gamma,
        }
        return Trajectory(np.asarray(times, float), self.states(rho0, times), self.tag, meta)


def sample_times(model, t_end: float, min_samples: int = 801, per_feature: int = 40) -> np.ndarray:
    """Uniform grid on [0, t_end] dense enough to resolve the model's features.

    Returns an odd number of points (even interval count) so composite
    Simpson integration applies directly.
    """
    if t_end <= 0.0:
        raise ConfigError("t_end must be > 0")
    n = max(min_samples, int(math.ceil(per_feature * t_end / model.feature_scale())) + 1)
    n = min(n, 200001)
    if n % 2 == 0:
        n += 1
    return np.linspace(0.0, t_end, n)


# ---------------------------------------------------------------------------
# Independent ODE oracles (fixed-step RK4, no shared code with the above)
# ---------------------------------------------------------------------------

_NUMBER_OP = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
_SM = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
_SP = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def master_equation_rhs(rho: np.ndarray, gamma_t: float, delta_t: float) -> np.ndarray:
    """Right-hand side of the time-local master equation (matrix form)."""
    comm = _NUMBER_OP @ rho - rho @ _NUMBER_OP
    sandwich = _SM @ rho @ _SP
    anti = _NUMBER_OP @ rho + rho @ _NUMBER_OP
    return -1j * delta_t * comm + gamma_t * (2.0 * sandwich - anti)


def _dissipator(rho: np.ndarray, gamma0: float) -> np.ndarray:
    """Liouvillian of the memory-kernel model (interaction picture)."""
    sandwich = _SM @ rho @ _SP
    anti = _NUMBER_OP @ rho + rho @ _NUMBER_OP
    return 0.5 * gamma0 * (2.0 * sandwich - anti)


def _rk4_path(make_rhs, y0: np.ndarray, t_end: float, n_steps: int) -> np.ndarray:
    """Classic RK4 with n_steps fixed steps; returns y at every step (n+1, ...).

    ``make_rhs(stage_times)`` must return a callable ``rhs(j, y)`` giving the
    derivative at ``stage_times[j]``; all RK4 stage times lie on the
    half-step grid, which lets model-specific coefficients be precomputed.
    """
    h = t_end / n_steps
    rhs = make_rhs(np.linspace(0.0, t_end, 2 * n_steps + 1))
    out = np.empty((n_steps + 1,) + y0.shape, dtype=complex)
    out[0] = y0
    y = y0
    for k in range(n_steps):
        j = 2 * k
        k1 = rhs(j, y)
        k2 = rhs(j + 1, y + 0.5 * h * k1)
        k3 = rhs(j + 1, y + 0.5 * h * k2)
        k4 = rhs(j + 2, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return out


def _converged_rk4(make_rhs, y0: np.ndarray, t_end: float, dt: float | None,
                   scale_dt: float, explicit_dt: bool, max_halvings: int = 10):
    """Run RK4 with step doubling until two successive refinements agree.

    Returns (path, times) at the final resolution.  With an explicit dt only
    one halving is attempted and failure raises StepSizeError (coarse step
    rejected); otherwise halving continues until convergence.
    """
    if dt is None:
        dt = scale_dt
    if dt <= 0.0:
        raise ConfigError("integration step dt must be > 0")
    n = max(2, int(math.ceil(t_end / dt)))
    prev = _rk4_path(make_rhs, y0, t_end, n)
    for _ in range(max_halvings):
        n *= 2
        cur = _rk4_path(make_rhs, y0, t_end, n)
        err = float(np.max(np.abs(cur[::2] - prev)))
        if err < ORACLE_CONVERGENCE_TOL:
            return cur, np.linspace(0.0, t_end, n + 1)
        if explicit_dt:
            raise StepSizeError(
                f"dt={dt} too coarse: refinement changed the result by {err:.3e}"
            )
        prev = cur
    raise StepSizeError(f"RK4 failed to converge to {ORACLE_CONVERGENCE_TOL} after halvings")


def _default_oracle_dt(timescale: float) -> float:
    return timescale / 200.0


def ode_oracle_time_local(
    rho0: DensityMatrix, t: float, p: TimeLocalParams, dt: float | None = None
) -> DensityMatrix:
    """4th-order fixed-step integration of the time-local master equation.

    Certified only on intervals free of zeros of c(t), where the rates are
    finite; a zero inside [0, t] raises :class:`PoleError` up front.
    """
    traj = ode_oracle_time_local_path(rho0, t, p, dt)
    return traj.final()


def ode_oracle_time_local_path(
    rho0: DensityMatrix, t_end: float, p: TimeLocalParams, dt: float | None = None
) -> Trajectory:
    """Same integration, returning the whole path for sup-norm comparisons."""
    if t_end <= 0.0:
        raise ConfigError("oracle horizon must be > 0")
    t_zero = first_amplitude_zero(p)
    if t_zero is not None and t_zero <= t_end:
        raise PoleError(
            f"rates diverge: c(t) vanishes at t = {t_zero:.6g} inside [0, {t_end:.6g}]"
        )

    def make_rhs(stage_times: np.ndarray):
        g, gdot = _g_and_gdot(stage_times, p)
        if float(np.min(np.abs(g))) < POLE_TOL:
            raise PoleError("decay rate pole on the integration grid")
        gamma_t = 0.5 * p.lam - gdot / g
        delta_t = 0.5 * p.omega0  # Im(gdot/g) = 0: g is real for real Omega^2

        def rhs(j: int, rho: np.ndarray) -> np.ndarray:
            return master_equation_rhs(rho, gamma_t[j], delta_t)

        return rhs

    path, times = _converged_rk4(
        make_rhs, np.asarray(rho0.matrix, dtype=complex), t_end,
        dt, _default_oracle_dt(p.timescale()), explicit_dt=dt is not None,
    )
    return Trajectory(times, path, "time-local-oracle", {"omega0": p.omega0})


def ode_oracle_memory_kernel(
    rho0: DensityMatrix, t: float, p: MemoryKernelParams, dt: float | None = None
) -> DensityMatrix:
    """Auxiliary-variable integration of the memory-kernel master equation."""
    traj = ode_oracle_memory_kernel_path(rho0, t, p, dt)
    return traj.final()


def ode_oracle_memory_kernel_path(
    rho0: DensityMatrix, t_end: float, p: MemoryKernelParams, dt: float | None = None
) -> Trajectory:
    """Integrate the memory-kernel equation by exact localisation.

    The convolution with the exponential kernel is converted exactly into a
    local system via u(t) = int_0^t gamma exp(-gamma (t - s)) L rho(s) ds,
    which obeys du/dt = gamma (L rho - u) with u(0) = 0.  (rho, u) are
    integrated jointly in the interaction picture; the free rotation
    exp(-i w0 t n) is applied afterwards.
    """
    if t_end <= 0.0:
        raise ConfigError("oracle horizon must be > 0")

    def make_rhs(_stage_times: np.ndarray):
        def rhs(_j: int, y: np.ndarray) -> np.ndarray:
            rho_i, u = y[0], y[1]
            du = p.gamma * (_dissipator(rho_i, p.gamma0) - u)
            return np.stack([u, du])

        return rhs

    y0 = np.stack([np.asarray(rho0.matrix, dtype=complex), np.zeros((2, 2), complex)])
    path, times = _converged_rk4(
        make_rhs, y0, t_end, dt, _default_oracle_dt(p.timescale()), explicit_dt=dt is not None
    )
    rot = np.exp(-1j * p.omega0 * times)
    states = path[:, 0, :, :].copy()
    states[:, 0, 1] *= rot
    states[:, 1, 0] *= np.conj(rot)
    return Trajectory(times, states, "memory-kernel-oracle", {"omega0": p.omega0})


# ---------------------------------------------------------------------------
# Positivity reporting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PositivityReport:
    """Per-trajectory minimum-eigenvalue audit."""

    ok: bool
    min_eigenvalue: float
    argmin_time: float
    first_violation_time: float | None
    threshold: float


def positivity_check(traj: Trajectory, threshold: float = 1e-9) -> PositivityReport:
    """Scan a trajectory for eigenvalues below -threshold."""
    if len(traj) == 0:
        raise ConfigError("positivity_check requires a non-empty trajectory")
    eigs = traj.min_eigenvalues()
    i_min = int(np.argmin(eigs))
    bad = np.flatnonzero(eigs < -threshold)
    first = float(traj.times[bad[0]]) if bad.size else None
    return PositivityReport(
        ok=bad.size == 0,
        min_eigenvalue=float(eigs[i_min]),
        argmin_time=float(traj.times[i_min]),
        first_violation_time=first,
        threshold=threshold,
    )
