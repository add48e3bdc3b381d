import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from qflow import channels
from qflow.channels import (
    MemoryKernelModel,
    MemoryKernelParams,
    TimeLocalModel,
    TimeLocalParams,
    Trajectory,
    abs_c_squared,
    amplitude,
    amplitude_c,
    amplitude_derivative,
    d_abs_c_squared_dt,
    evolve_memory_kernel,
    evolve_time_local,
    first_amplitude_zero,
    lorentzian_density,
    master_equation_rhs,
    ode_oracle_memory_kernel_path,
    ode_oracle_time_local_path,
    positivity_check,
    sample_times,
    xi,
)
from qflow.errors import ConfigError, PoleError, StepSizeError
from qflow.qstate import DensityMatrix, InitialStateSpec, initial_state

T_PERIOD = 2.0 * math.pi
EQUATOR = InitialStateSpec(1.0, math.pi / 4, math.pi / 3)  # theta0 = pi/2


def reference_c_squared(t: float, W: float, lam: float) -> float:
    """Direct trig/hyperbolic evaluation, independent of the library helpers."""
    om_sq = lam * lam - 4.0 * W * W
    if om_sq >= 0.0:
        om = math.sqrt(om_sq)
        g = math.cosh(0.5 * om * t) + (
            0.5 * lam * t if om == 0.0 else lam / om * math.sinh(0.5 * om * t)
        )
    else:
        om = math.sqrt(-om_sq)
        g = math.cos(0.5 * om * t) + lam / om * math.sin(0.5 * om * t)
    return math.exp(-lam * t) * g * g


class TestLorentzian:
    def test_peak(self):
        p = TimeLocalParams(0.7, 1.3, 1.0)
        assert lorentzian_density(1.0, p) == pytest.approx(0.49 / (math.pi * 1.3), rel=1e-14)

    def test_tails_vanish(self):
        p = TimeLocalParams(0.7, 1.3, 1.0)
        assert lorentzian_density(1e8, p) < 1e-15
        assert lorentzian_density(-1e8, p) < 1e-15

    def test_total_weight_is_w_squared(self):
        # adaptive quadrature vs the residue identity int J = W^2
        p = TimeLocalParams(0.8, 2.0, 1.0)
        val, err = quad(lambda w: lorentzian_density(w, p), -np.inf, np.inf)
        assert val == pytest.approx(p.W**2, abs=1e-9)


class TestAmplitude:
    def test_initial_conditions(self):
        p = TimeLocalParams(0.6, 1.0, 1.0)
        a = amplitude_c(0.0, p)
        assert a.c == pytest.approx(1.0 + 0.0j, abs=1e-15)
        assert a.gamma_t == pytest.approx(0.0, abs=1e-14)
        assert a.delta_t == pytest.approx(0.5 * p.omega0, abs=1e-14)
        # cdot(0) = -i omega0 / 2
        assert complex(amplitude_derivative(0.0, p)) == pytest.approx(-0.5j, abs=1e-14)

    def test_zero_coupling_keeps_unit_modulus(self):
        p = TimeLocalParams(0.0, 1.7, 1.0)
        t = np.linspace(0.0, 40.0, 500)
        assert np.max(np.abs(np.abs(amplitude(t, p)) - 1.0)) < 1e-12

    def test_r_equals_one_sample_value(self):
        # |c(1)|^2 at W = lambda = omega0 = 1 against a from-scratch evaluation
        p = TimeLocalParams(1.0, 1.0, 1.0)
        expected = math.exp(-1.0) * (math.cos(math.sqrt(3) / 2)
                                     + math.sin(math.sqrt(3) / 2) / math.sqrt(3)) ** 2
        assert expected == pytest.approx(0.435, abs=5e-4)  # headline value
        assert float(abs_c_squared(1.0, p)) == pytest.approx(expected, abs=1e-13)

    def test_matches_reference_across_regimes(self):
        for W, lam in ((0.3, 2.0), (0.5, 1.0), (1.0, 1.0), (2.0, 0.5)):
            p = TimeLocalParams(W, lam, 1.0)
            for t in (0.1, 0.7, 1.9, 4.2):
                assert float(abs_c_squared(t, p)) == pytest.approx(
                    reference_c_squared(t, W, lam), abs=1e-12
                )

    def test_branch_point_continuity(self):
        # R = 1/2 +- 1e-8 and R = 1/2 exactly agree to 1e-6 over a period
        lam = 1.0
        t = np.linspace(0.0, T_PERIOD, 257)
        below = amplitude(t, TimeLocalParams(lam * (0.5 - 1e-8), lam, 1.0))
        above = amplitude(t, TimeLocalParams(lam * (0.5 + 1e-8), lam, 1.0))
        at = amplitude(t, TimeLocalParams(0.5 * lam, lam, 1.0))
        assert np.max(np.abs(below - above)) < 1e-6
        assert np.max(np.abs(at - below)) < 1e-6

    def test_pole_raises(self):
        p = TimeLocalParams(2.0, 1.0, 1.0)
        t0 = first_amplitude_zero(p)
        with pytest.raises(PoleError):
            amplitude_c(t0, p)

    def test_first_zero_only_above_half(self):
        assert first_amplitude_zero(TimeLocalParams(0.3, 1.0, 1.0)) is None
        t0 = first_amplitude_zero(TimeLocalParams(2.0, 1.0, 1.0))
        assert abs(complex(amplitude(t0, TimeLocalParams(2.0, 1.0, 1.0)))) < 1e-12

    def test_modulus_monotone_iff_markovian(self):
        t = np.linspace(0.0, 3.0 * T_PERIOD, 4001)
        for R in (0.1, 0.3, 0.5):
            p = TimeLocalParams(R, 1.0, 1.0)
            assert np.all(np.asarray(d_abs_c_squared_dt(t, p)) <= 1e-15)
        p = TimeLocalParams(2.0, 1.0, 1.0)
        dx = np.asarray(d_abs_c_squared_dt(t, p))
        assert np.any(dx > 1e-6) and np.any(dx < -1e-6)

    def test_derivative_matches_finite_difference(self):
        p = TimeLocalParams(0.8, 1.1, 1.0)
        h = 1e-6
        for t in (0.3, 1.2, 2.9):
            fd = (float(abs_c_squared(t + h, p)) - float(abs_c_squared(t - h, p))) / (2 * h)
            assert float(d_abs_c_squared_dt(t, p)) == pytest.approx(fd, abs=1e-8)


class TestXi:
    def test_at_zero_time(self):
        for C in (0.0, 0.1, 0.25, 1.0):
            assert float(xi(C, 0.0)) == pytest.approx(1.0, abs=1e-15)

    def test_zero_dissipation(self):
        tau = np.linspace(0.0, 30.0, 200)
        assert np.max(np.abs(np.asarray(xi(0.0, tau)) - 1.0)) < 1e-12

    def test_critical_quarter_series(self):
        # Omega -> 0 limit: xi = exp(-tau/2) (1 + tau/2); cross-check at Omega = 1e-6
        tau = np.linspace(0.0, 10.0, 101)
        closed = np.exp(-0.5 * tau) * (1.0 + 0.5 * tau)
        assert np.max(np.abs(np.asarray(xi(0.25, tau)) - closed)) < 1e-12
        c_near = (1.0 - 1e-12) / 4.0  # Omega = 1e-6
        assert np.max(np.abs(np.asarray(xi(c_near, tau)) - closed)) < 1e-9

    def test_rejects_negative_c(self):
        with pytest.raises(ConfigError):
            xi(-0.1, 1.0)


class TestTimeLocalPropagation:
    def test_identity_at_zero(self):
        rho0 = initial_state(EQUATOR)
        p = TimeLocalParams(0.7, 1.0, 1.0)
        assert evolve_time_local(rho0, 0.0, p).isclose(rho0, 1e-15)

    def test_relaxes_to_ground(self):
        p = TimeLocalParams(0.3, 1.0, 1.0)  # R < 1/2
        rho = evolve_time_local(initial_state(EQUATOR), 300.0, p)
        assert rho.isclose(DensityMatrix.ground(), 1e-10)
        b = rho.bloch()
        assert (b.x, b.y, b.z) == pytest.approx((0.0, 0.0, -1.0), abs=1e-10)

    def test_trace_and_hermiticity_preserved(self):
        p = TimeLocalParams(1.0, 0.25, 1.0)  # R = 4
        model = TimeLocalModel(p)
        states = model.states(initial_state(EQUATOR), np.linspace(0.0, T_PERIOD, 500))
        assert np.max(np.abs(states[:, 0, 0] + states[:, 1, 1] - 1.0)) < 1e-12
        assert np.max(np.abs(states - states.conj().transpose(0, 2, 1))) < 1e-12

    def test_positivity_preserved(self):
        p = TimeLocalParams(2.0, 1.0, 1.0)
        model = TimeLocalModel(p)
        traj = model.trajectory(initial_state(EQUATOR), np.linspace(0.0, 2 * T_PERIOD, 2001))
        assert positivity_check(traj).ok

    def test_against_ode_oracle_r1(self):
        p = TimeLocalParams(0.3, 0.3, 1.0)  # R = 1, first c-zero beyond one period
        rho0 = initial_state(EQUATOR)
        oracle = ode_oracle_time_local_path(rho0, T_PERIOD, p)
        ana = TimeLocalModel(p).states(rho0, oracle.times)
        assert np.max(np.abs(oracle.states - ana)) < 1e-6

    def test_arbitrary_initial_state_accepted(self, rng):
        # the closed form is re-derived from the matrix, not restricted to the family
        from .conftest import density_of, random_bloch_array

        p = TimeLocalParams(0.4, 1.0, 1.0)
        rho0 = density_of(random_bloch_array(rng, 1)[0])
        out = evolve_time_local(rho0, 1.3, p)
        x = float(abs_c_squared(1.3, p))
        assert out.matrix[0, 0].real == pytest.approx(rho0.matrix[0, 0].real * x, abs=1e-14)


class TestTimeLocalOracle:
    def test_zero_coupling_keeps_populations(self):
        p = TimeLocalParams(0.0, 1.0, 1.0)
        rho0 = initial_state(InitialStateSpec(0.8, 0.6, 0.2))
        traj = ode_oracle_time_local_path(rho0, T_PERIOD, p)
        pops = traj.states[:, 0, 0].real
        assert np.max(np.abs(pops - pops[0])) < 1e-10
        # coherence modulus also constant, phase advances
        coh = traj.states[:, 0, 1]
        assert np.max(np.abs(np.abs(coh) - np.abs(coh[0]))) < 1e-10

    def test_weak_coupling_matches_closed_form(self):
        p = TimeLocalParams(0.1, 1.0, 1.0)  # R = 0.1
        rho0 = initial_state(EQUATOR)
        traj = ode_oracle_time_local_path(rho0, T_PERIOD, p)
        ana = TimeLocalModel(p).states(rho0, traj.times)
        assert np.max(np.abs(traj.states - ana)) < 1e-6

    def test_closed_form_satisfies_master_equation(self):
        # symbolic-numeric residual: substitute the closed form into the RHS
        p = TimeLocalParams(0.45, 1.0, 1.0)
        rho0 = initial_state(InitialStateSpec(0.9, 0.5, 1.1))
        model = TimeLocalModel(p)
        for t in (0.2, 1.0, 2.5, 5.0):
            state = model.states(rho0, t)
            lhs = model.state_dot(rho0, t)
            a = amplitude_c(t, p)
            rhs = master_equation_rhs(state, a.gamma_t, a.delta_t)
            assert np.max(np.abs(lhs - rhs)) < 1e-8

    def test_pole_inside_horizon_rejected(self):
        p = TimeLocalParams(2.0, 1.0, 1.0)
        with pytest.raises(PoleError):
            ode_oracle_time_local_path(initial_state(EQUATOR), T_PERIOD, p)

    def test_coarse_step_rejected(self):
        p = TimeLocalParams(0.4, 1.0, 1.0)
        with pytest.raises(StepSizeError):
            ode_oracle_time_local_path(initial_state(EQUATOR), T_PERIOD, p, dt=2.0)


class TestMemoryKernelPropagation:
    def test_identity_at_zero(self):
        rho0 = initial_state(EQUATOR)
        p = MemoryKernelParams(0.1, 1.0, 1.0)
        assert evolve_memory_kernel(rho0, 0.0, p).isclose(rho0, 1e-15)

    def test_against_oracle_smooth_regime(self):
        p = MemoryKernelParams(0.1, 1.0, 1.0)  # C = 0.1
        rho0 = initial_state(EQUATOR)
        oracle = ode_oracle_memory_kernel_path(rho0, 3.0, p)
        ana = MemoryKernelModel(p).states(rho0, oracle.times)
        assert np.max(np.abs(oracle.states - ana)) < 1e-6

    def test_against_oracle_oscillatory_regime(self):
        p = MemoryKernelParams(1.0, 1.0, 1.0)  # C = 1
        rho0 = initial_state(EQUATOR)
        oracle = ode_oracle_memory_kernel_path(rho0, T_PERIOD, p)
        ana = MemoryKernelModel(p).states(rho0, oracle.times)
        assert np.max(np.abs(oracle.states - ana)) < 1e-5

    def test_zero_dissipation_is_free_rotation(self):
        p = MemoryKernelParams(0.0, 1.0, 1.0)
        rho0 = initial_state(EQUATOR)
        traj = ode_oracle_memory_kernel_path(rho0, 2.0, p)
        pops = traj.states[:, 0, 0].real
        assert np.max(np.abs(pops - pops[0])) < 1e-12
        expected = rho0.matrix[0, 1] * np.exp(-1j * traj.times)
        assert np.max(np.abs(traj.states[:, 0, 1] - expected)) < 1e-10

    def test_trace_preserved(self):
        p = MemoryKernelParams(1.0, 1.0, 1.0)
        states = MemoryKernelModel(p).states(
            initial_state(EQUATOR), np.linspace(0.0, 20.0, 800)
        )
        assert np.max(np.abs(states[:, 0, 0] + states[:, 1, 1] - 1.0)) < 1e-12

    def test_c_one_goes_negative(self):
        # populations cross zero where xi(1, tau) does: tau = 4 pi / (3 sqrt(3))
        p = MemoryKernelParams(1.0, 1.0, 1.0)
        model = MemoryKernelModel(p)
        traj = model.trajectory(DensityMatrix.excited(), np.linspace(0.0, 20.0, 4001))
        report = positivity_check(traj)
        assert not report.ok
        assert report.first_violation_time == pytest.approx(
            4.0 * math.pi / (3.0 * math.sqrt(3.0)), abs=0.02
        )
        assert report.min_eigenvalue < -1e-3

    def test_small_c_population_probes_stay_positive(self):
        for C in (0.05, 0.1, 0.2):
            p = MemoryKernelParams(C, 1.0, 1.0)
            model = MemoryKernelModel(p)
            for rho0 in (DensityMatrix.excited(), DensityMatrix.ground()):
                traj = model.trajectory(rho0, np.linspace(0.0, 20.0, 4001))
                assert positivity_check(traj).ok

    def test_c_02_coherent_probe_violation_is_real(self):
        # Coherences relax with xi(C/2, tau) and outlive the populations, so a
        # maximally coherent state leaves the Bloch ball at late times even for
        # C < 1/4.  The independent integrator reproduces the same violation,
        # so this is a property of the equation, not of the closed form.
        p = MemoryKernelParams(0.2, 1.0, 1.0)
        rho0 = initial_state(EQUATOR)
        traj = MemoryKernelModel(p).trajectory(rho0, np.linspace(0.0, 20.0, 4001))
        report = positivity_check(traj)
        assert not report.ok
        assert report.first_violation_time == pytest.approx(17.58, abs=0.1)
        oracle = ode_oracle_memory_kernel_path(rho0, 20.0, p)
        assert not positivity_check(oracle).ok


class TestTrajectoryType:
    def test_requires_zero_start(self):
        states = np.broadcast_to(np.eye(2, dtype=complex) * 0.5, (3, 2, 2))
        with pytest.raises(ConfigError):
            Trajectory(np.array([0.1, 0.2, 0.3]), states, "x")

    def test_requires_increasing_times(self):
        states = np.broadcast_to(np.eye(2, dtype=complex) * 0.5, (3, 2, 2))
        with pytest.raises(ConfigError):
            Trajectory(np.array([0.0, 0.2, 0.2]), states, "x")

    def test_sample_grid_is_odd(self):
        model = TimeLocalModel(TimeLocalParams(0.5, 1.0, 1.0))
        assert sample_times(model, T_PERIOD).size % 2 == 1

    def test_accessors(self):
        model = TimeLocalModel(TimeLocalParams(0.5, 1.0, 1.0))
        rho0 = initial_state(EQUATOR)
        traj = model.trajectory(rho0, np.linspace(0.0, 1.0, 11))
        assert len(traj) == 11
        assert traj.initial().isclose(rho0, 1e-14)
        assert traj.final().isclose(evolve_time_local(rho0, 1.0, model.params), 1e-14)


class TestParamValidation:
    def test_time_local(self):
        with pytest.raises(ConfigError):
            TimeLocalParams(-0.1, 1.0)
        with pytest.raises(ConfigError):
            TimeLocalParams(0.1, 0.0)
        assert TimeLocalParams(1.0, 2.0).R == 0.5
        assert TimeLocalParams(1.0, 1.0).Omega == pytest.approx(cmath.sqrt(-3))

    def test_memory_kernel(self):
        with pytest.raises(ConfigError):
            MemoryKernelParams(-1.0, 1.0)
        with pytest.raises(ConfigError):
            MemoryKernelParams(0.1, 0.0)
        p = MemoryKernelParams(0.5, 2.0)
        assert p.C == 0.25
        assert p.tau_R == 0.5
        assert float(p.tau(3.0)) == 6.0
