import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import simpson

from qflow.analysis import (
    PRESET_NAMES,
    SweepSpec,
    critical_point,
    figure_preset,
    integrand_A,
    run_sweep,
)
from qflow.channels import TimeLocalParams, abs_c_squared
from qflow.errors import BracketError, ConfigError
from qflow.geomphase import gp_pure
from qflow.qstate import InitialStateSpec

T = 2.0 * math.pi


class TestIntegrandA:
    def test_closed_system_is_constant(self):
        spec = InitialStateSpec(1.0, math.pi / 6, 0.0)  # theta0 = pi/3
        p = TimeLocalParams(1e-14, 1.0, 1.0)
        expected = math.cos(math.pi / 6) ** 2  # cos^2(theta0 / 2)
        for t in (0.1, 1.0, 4.0):
            assert integrand_A(t, 1.0, spec, p) == pytest.approx(expected, abs=1e-9)

    def test_integral_gives_minus_phase(self):
        # quadrature cross-check: int_0^T A dt = -Phi
        spec = InitialStateSpec(1.0, math.pi / 3, 0.0)
        W, R = 0.3, 0.45
        p = TimeLocalParams(W, W / R, 1.0)
        times = np.linspace(0.0, T, 2001)
        a_vals = np.array([integrand_A(t, R, spec, TimeLocalParams(W, 1.0, 1.0)) for t in times])
        assert simpson(a_vals, x=times) == pytest.approx(-gp_pure(spec, p), abs=1e-6)

    def test_r_derivative_sign_matches_decay_derivative(self):
        # the prefactor relating dA/dR to d|c|^2/dR is positive
        spec = InitialStateSpec(1.0, math.pi / 3, 0.0)
        base = TimeLocalParams(0.6, 1.0, 1.0)
        h = 1e-6
        for R in (0.45, 0.58, 0.75, 0.9):
            for t in (0.7 * T, T):
                da = integrand_A(t, R + h, spec, base) - integrand_A(t, R - h, spec, base)
                dx = float(abs_c_squared(t, TimeLocalParams(0.6, 0.6 / (R + h), 1.0))) - float(
                    abs_c_squared(t, TimeLocalParams(0.6, 0.6 / (R - h), 1.0))
                )
                if abs(dx) > 1e-12 and abs(da) > 1e-12:
                    assert math.copysign(1.0, da) == math.copysign(1.0, dx)

    def test_vary_w_policy(self):
        spec = InitialStateSpec(1.0, math.pi / 3, 0.0)
        p = TimeLocalParams(0.2, 1.5, 1.0)
        a = integrand_A(1.0, 0.3, spec, p, vary="W")  # W = 0.45, lam = 1.5
        b = integrand_A(1.0, 0.3, spec, TimeLocalParams(0.45, 1.5, 1.0), vary="lambda")
        # same effective parameters reached through either policy
        assert a == pytest.approx(
            integrand_A(1.0, 0.45 / 1.5, spec, TimeLocalParams(0.45, 99.0, 1.0)), abs=1e-12
        )
        with pytest.raises(ConfigError):
            integrand_A(1.0, 0.3, spec, p, vary="nope")


class TestCriticalPoint:
    def test_acceptance_configuration(self):
        spec = InitialStateSpec(1.0, math.pi / 3, 0.0)
        p = TimeLocalParams(0.6, 1.0, 1.0)
        rep = critical_point(T, spec, p, 0.4, 1.0, steps=61)
        assert 0.64 < rep.r_star < 0.67
        assert rep.df_residual < 1e-8
        assert rep.dd_residual < 1e-6
        assert rep.da_residual < 1e-6
        assert rep.onset_matches_m_flat

    def test_grid_refinement_stability(self):
        spec = InitialStateSpec(1.0, math.pi / 3, 0.0)
        p = TimeLocalParams(0.6, 1.0, 1.0)
        a = critical_point(T, spec, p, 0.4, 1.0, steps=31)
        b = critical_point(T, spec, p, 0.4, 1.0, steps=61)
        assert abs(a.r_star - b.r_star) < 1e-4

    def test_no_bracket_raises(self):
        spec = InitialStateSpec(1.0, math.pi / 3, 0.0)
        p = TimeLocalParams(0.1, 1.0, 1.0)
        with pytest.raises(BracketError):
            critical_point(T, spec, p, 0.05, 0.2, steps=16)

    def test_bad_range_rejected(self):
        spec = InitialStateSpec(1.0, math.pi / 3, 0.0)
        p = TimeLocalParams(0.6, 1.0, 1.0)
        with pytest.raises(ConfigError):
            critical_point(T, spec, p, 0.5, 0.1)


class TestSweeps:
    def test_determinism(self):
        spec = SweepSpec(start=0.2, stop=1.0, steps=4, W=0.5,
                         z_list=(1.0,), outputs=("N", "M", "D"))
        a = run_sweep(spec)
        b = run_sweep(spec)
        assert a.rows == b.rows
        assert a.columns == b.columns

    def test_thread_pool_matches_sequential(self, monkeypatch):
        spec = SweepSpec(start=0.2, stop=1.0, steps=4, W=0.5,
                         z_list=(1.0,), outputs=("N", "M"))
        seq = run_sweep(spec)
        monkeypatch.setenv("QFLOW_THREADS", "3")
        par = run_sweep(spec)
        assert seq.rows == par.rows

    def test_phase_output_has_three_columns(self):
        spec = SweepSpec(start=0.2, stop=0.4, steps=2, W=0.1,
                         z_list=(1.0,), outputs=("phase",))
        res = run_sweep(spec)
        assert res.columns == ("R", "phase_raw[z=1;vt=0.785398]",
                               "phase_mod[z=1;vt=0.785398]", "phase_pi[z=1;vt=0.785398]")
        assert len(res.rows) == 2 and len(res.rows[0]) == 4

    def test_point_failures_are_recorded_and_sweep_continues(self):
        # z = 0.5 population state crosses the ball center under strong decay:
        # the phase column fails per-row while the run completes
        spec = SweepSpec(start=0.3, stop=0.5, steps=2, W=10.0,
                         z_list=(0.5,), vartheta0_list=(0.0,), outputs=("phase", "N"))
        res = run_sweep(spec)
        assert len(res.errors) == 2
        assert all(math.isnan(row[1]) for row in res.rows)

    def test_memory_kernel_sweep_and_quarter_stamp(self):
        spec = SweepSpec(model="memory-kernel", param="C", start=0.05, stop=0.5,
                         steps=3, gamma0=0.1, z_list=(1.0,), outputs=("M",))
        res = run_sweep(spec)
        assert "crosses_validity_boundary" in res.meta
        assert len(res.rows) == 3

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            SweepSpec(steps=1)
        with pytest.raises(ConfigError):
            SweepSpec(model="memory-kernel", param="R")
        with pytest.raises(ConfigError):
            SweepSpec(start=0.5, stop=0.2)
        with pytest.raises(ConfigError):
            SweepSpec(outputs=("phase", "bogus"))

    def test_mirror_symmetry_is_exact(self):
        # vartheta0 <-> pi - vartheta0 maps a state to the same polar angle at a
        # shifted azimuth: identical phases and identical flows
        spec = SweepSpec(start=0.8, stop=1.6, steps=2, W=1.0, z_list=(0.7,),
                         vartheta0_list=(math.pi / 5, 4 * math.pi / 5),
                         outputs=("phase", "N"))
        res = run_sweep(spec)
        for row in res.rows:
            assert abs(math.remainder(row[2] - row[6], 2.0 * math.pi)) < 1e-9
            assert row[4] == pytest.approx(row[8], abs=1e-10)

    def test_diagonal_family_phases_and_flows(self):
        # vartheta0 = pi/2 and pi share the spectrum, so where both phases are
        # defined they are equal (0 mod 2 pi); their flows differ because the
        # distances to the standard state differ.  In the backflow regime the
        # vartheta0 = pi trajectory crosses the ball center and its phase is
        # undefined (covered by test_point_failures...), but N still differs.
        weak = SweepSpec(start=0.4, stop=0.45, steps=2, W=0.1, z_list=(0.9,),
                         vartheta0_list=(math.pi / 2, math.pi), outputs=("phase", "M"))
        res = run_sweep(weak)
        assert not res.errors
        for row in res.rows:
            assert abs(math.remainder(row[2] - row[6], 2.0 * math.pi)) < 1e-9
            assert abs(math.remainder(row[2], 2.0 * math.pi)) < 1e-9  # the 0 (= 2 pi) value
            assert abs(row[4] - row[8]) > 1e-3  # forward flows differ

        strong = SweepSpec(start=2.0, stop=2.5, steps=2, W=1.0, z_list=(0.5,),
                           vartheta0_list=(math.pi / 2, math.pi), outputs=("N",))
        res2 = run_sweep(strong)
        assert not res2.errors  # flows are defined even where the phase is not
        for row in res2.rows:
            assert abs(row[1] - row[2]) > 1e-3  # backflows differ


class TestPresets:
    def test_all_presets_constructible(self):
        for name in PRESET_NAMES:
            spec = figure_preset(name)
            assert spec.label == name

    def test_caption_parameters(self):
        assert figure_preset("fig1").W == 0.1
        assert figure_preset("fig1").outputs == ("phase",)
        assert figure_preset("fig1").z_list == (0.25, 0.5, 0.75, 1.0)
        assert figure_preset("fig1").varphi0 == pytest.approx(math.pi / 3)
        assert figure_preset("fig4").W == 1.0
        assert figure_preset("fig5").W == 10.0
        assert figure_preset("fig7").varphi0 == pytest.approx(math.pi / 6)
        assert figure_preset("fig7").z_list == (0.5,)
        assert figure_preset("fig8").model == "memory-kernel"
        assert figure_preset("fig8").gamma0 == 0.1
        assert figure_preset("fig8").stop <= 0.25  # validity region only
        assert figure_preset("appendix-nm").W == 0.6
        assert figure_preset("appendix-nm").vartheta0_list == (math.pi / 3,)
        assert figure_preset("appendix-ady").outputs == ("A", "D", "N")

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            figure_preset("fig99")

    def test_fig1_runs_reduced(self):
        spec = replace(figure_preset("fig1"), steps=3, z_list=(1.0,))
        res = run_sweep(spec)
        assert len(res.rows) == 3
        assert not res.errors
