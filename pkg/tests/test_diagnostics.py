"""Weighted norms, bootstrap monitors, decay fits, and density bounds."""

import numpy as np
import pytest
from scipy.integrate import dblquad

from qmix.diagnostics import (
    DensityHistory,
    MonitorSeries,
    NormParams,
    NormSet,
    bootstrap_monitors,
    decay_fit,
    default_norm_set,
    physical_lp_density,
    sup_decay_exponent,
    weighted_norm,
)
from qmix.errors import ConfigError, DomainError, InsufficientDataError
from qmix.linear import DensityTrace, GaussianWigner, free_trace
from qmix.nonlinear import WignerField


def gaussian_field(rate=0.5, box=8.0, h=0.125, hbar=0.5, amp=1.0):
    return WignerField.from_profile(
        1, box, h, box, h,
        lambda k, e: amp * np.exp(-rate * (k * k + e * e)), hbar,
    )


def square_weight(expr):
    # squared-norm oracle by adaptive quadrature, independent of the grid sum
    return dblquad(expr, -10, 10, -10, 10, epsabs=1e-13, epsrel=1e-12)[0]


def synthetic_trace(k, times, values):
    return DensityTrace(k=np.atleast_1d(float(k)), times=times, values=values,
                        hbar=0.5, provenance="synthetic")


class TestNormParams:
    def test_validation(self):
        with pytest.raises(ConfigError):
            NormParams(-1.0)
        with pytest.raises(ConfigError):
            NormParams(2.0, M=5)
        with pytest.raises(ConfigError):
            NormParams(2.0, weight_mode="bogus")
        with pytest.raises(ConfigError):
            NormParams(2.0, weight_mode="k_power", delta=0.0)

    def test_default_ladders_have_no_gap_violations(self):
        for d in (1, 2, 3):
            ns = default_norm_set(d)
            assert ns.gap_violations(d) == []
            assert ns.sigma0 == 2.0
            assert ns.sigma1 == d + 8

    def test_norm_set_validation(self):
        with pytest.raises(ConfigError):
            NormSet(2.0, 2.0, 3.0, 4.0, 5.0, 10.0, 0.25, 1)
        with pytest.raises(ConfigError):
            NormSet(2.0, 9.0, 11.0, 11.75, 13.25, 16.0, 0.6, 1)
        with pytest.raises(ConfigError):
            NormSet(2.0, 9.0, 11.0, 11.75, 13.25, 16.0, 0.25, 9)

    def test_gap_violations_reported(self):
        ns = NormSet(2.0, 4.0, 5.0, 6.0, 7.0, 8.0, 0.25, 1)
        msgs = ns.gap_violations(1)
        assert any("below d+8" in m for m in msgs)
        assert any("N0" in m for m in msgs)


class TestWeightedNorm:
    def test_zero_field(self):
        fld = gaussian_field(amp=0.0)
        assert weighted_norm(fld, NormParams(3.0, 1, "plain")) == 0.0

    def test_sigma0_m0_is_grid_l2(self):
        fld = gaussian_field()
        got = weighted_norm(fld, NormParams(0.0, 0, "plain"))
        ref = np.sqrt(np.sum(np.abs(fld.values) ** 2) * fld.dk * fld.deta)
        assert got == pytest.approx(ref, rel=1e-14)

    def test_gaussian_sigma2_m1_matches_integral(self):
        fld = gaussian_field()
        got = weighted_norm(fld, NormParams(2.0, 1, "plain"))
        ref = square_weight(
            lambda e, k: (1 + k * k + e * e) ** 2 * (1 + e * e)
            * np.exp(-(k * k + e * e))
        )
        # residual error is the 4th-order eta-difference stencil
        assert got == pytest.approx(np.sqrt(ref), rel=1e-4)

    def test_time_bracket_weight_matches_integral(self):
        fld = gaussian_field()
        got = weighted_norm(fld, NormParams(3.0, 0, "time_bracket"), t=2.0)
        ref = square_weight(
            lambda e, k: (1 + k * k + e * e) ** 3 * (1 + 4 * k * k + e * e)
            * np.exp(-(k * k + e * e))
        )
        assert got == pytest.approx(np.sqrt(ref), rel=1e-12)

    def test_k_power_weight_matches_integral(self):
        fld = gaussian_field()
        got = weighted_norm(fld, NormParams(3.0, 0, "k_power", 0.25))
        ref = square_weight(
            lambda e, k: (1 + k * k + e * e) ** 3 * np.abs(k) ** 0.5
            * np.exp(-(k * k + e * e))
        )
        # |k|^(1/2) kink limits the midpoint sum near k=0
        assert got == pytest.approx(np.sqrt(ref), rel=1e-2)

    def test_absolutely_homogeneous(self):
        a = gaussian_field(amp=1.0)
        b = gaussian_field(amp=-3.0)
        params = NormParams(4.0, 1, "plain")
        assert weighted_norm(b, params) == pytest.approx(
            3.0 * weighted_norm(a, params), rel=1e-14
        )

    def test_monotone_in_sigma_and_m(self):
        fld = gaussian_field()
        lo = weighted_norm(fld, NormParams(2.0, 0, "plain"))
        hi_sigma = weighted_norm(fld, NormParams(3.0, 0, "plain"))
        hi_m = weighted_norm(fld, NormParams(2.0, 1, "plain"))
        assert hi_sigma > lo
        assert hi_m > lo

    def test_grid_too_small_for_stencil(self):
        fld = WignerField.from_profile(
            1, 2.0, 1.0, 2.0, 1.0, lambda k, e: np.exp(-k * k - e * e), 0.5
        )
        with pytest.raises(ConfigError):
            weighted_norm(fld, NormParams(2.0, 2, "plain"))


class TestBootstrapMonitors:
    def zero_history(self, fld, times):
        hist = DensityHistory(k_vectors=fld.k_axis.reshape(-1, 1), dk=fld.dk)
        for s in times:
            hist.append(s, np.zeros(fld.k_axis.size, dtype=complex))
        return hist

    def test_zero_field_all_zero(self):
        fld = gaussian_field(amp=0.0, box=4.0, h=0.25)
        norms = default_norm_set(1)
        row = bootstrap_monitors(fld, self.zero_history(fld, [0.0]), norms, t=0.0)
        assert all(row[name] == 0.0 for name in ("b1", "b2", "b3", "b4", "b5"))

    def test_frozen_field_b1_is_quadratic_in_t(self):
        # with the interaction off the field is static, so B1(t) must equal
        # A + B t^2 exactly: the time weight is the only t dependence
        fld = gaussian_field(rate=1.0, box=6.0, h=0.125, hbar=0.3, amp=1e-3)
        norms = default_norm_set(1)
        vals = {}
        for t in (0.0, 1.0, 5.0, 20.0):
            hist = self.zero_history(fld, np.linspace(0.0, t, 3) if t else [0.0])
            vals[t] = bootstrap_monitors(fld, hist, norms, t=t)["b1"]
        a = vals[0.0]
        b = vals[1.0] - a
        assert b > 0
        for t in (5.0, 20.0):
            assert vals[t] == pytest.approx(a + b * t * t, rel=1e-12)
        ref_b = 1e-6 * square_weight(
            lambda e, k: (1 + k * k + e * e) ** norms.sigma4 * k * k
            * np.exp(-2 * (k * k + e * e)) * (1 + 4 * e * e)
        )
        assert b == pytest.approx(ref_b, rel=2e-2)

    def test_b5_matches_brute_force(self):
        rng = np.random.default_rng(7)
        ax = np.linspace(-2.0, 2.0, 9)
        vals = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
        vals = 0.5 * (vals + np.conj(vals[::-1, ::-1]))
        fld = WignerField(1, ax, ax, vals, 0.7, validate=False)
        norms = default_norm_set(1)
        row = bootstrap_monitors(fld, self.zero_history(fld, [0.0]), norms, t=0.0)
        brute = max(
            (1 + k * k + e * e) ** norms.sigma1 * abs(vals[i, j]) ** 2
            for i, k in enumerate(ax)
            for j, e in enumerate(ax)
        )
        assert row["b5"] == pytest.approx(brute, rel=1e-14)

    def test_b2_b4_match_hand_loop(self):
        fld = gaussian_field(box=2.0, h=0.5, hbar=0.7)
        norms = default_norm_set(1)
        times = np.linspace(0.0, 4.0, 9)
        kv = np.array([[0.5], [1.0], [-0.5], [-1.0], [0.0]])
        hist = DensityHistory(k_vectors=kv, dk=0.5)
        rows = []
        for t in times:
            r = np.exp(-0.3 * np.linalg.norm(kv, axis=1) ** 2 * (1 + t)) * (1 + 0.2j)
            hist.append(t, r)
            rows.append(r)
        row = bootstrap_monitors(fld, hist, norms, t=4.0)
        f2, f4 = [], []
        for t, r in zip(times, rows):
            tot, top = 0.0, 0.0
            for i in range(kv.shape[0]):
                kn = abs(kv[i, 0])
                br = 1 + kn * kn * (1 + t * t)
                tot += (1 + (0.7 * kn) ** 2) * kn * br ** norms.sigma4 \
                    * abs(r[i]) ** 2 * hist.dk
                top = max(top, np.sqrt(kn) * br ** (norms.sigma2 / 2) * abs(r[i]))
            f2.append(tot)
            f4.append(top * top)

        def trap(f):
            f = np.asarray(f)
            return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(times)))

        assert row["b2"] == pytest.approx(trap(f2), rel=1e-13)
        assert row["b4"] == pytest.approx(trap(f4), rel=1e-13)

    def test_history_must_reach_time(self):
        fld = gaussian_field(box=4.0, h=0.25)
        norms = default_norm_set(1)
        with pytest.raises(InsufficientDataError):
            bootstrap_monitors(fld, self.zero_history(fld, [0.0]), norms, t=3.0)

    def test_series_rejects_bad_rows(self):
        series = MonitorSeries()
        good = {"t": 0.0, "b1": 1.0, "b2": 0.0, "b3": 1.0, "b4": 0.0, "b5": 1.0}
        series.append(good)
        with pytest.raises(DomainError):
            series.append({**good, "t": 1.0, "b2": np.nan})
        with pytest.raises(DomainError):
            series.append({**good, "t": 1.0, "b4": -1e-3})
        arrays = series.as_arrays()
        assert arrays["times"].shape == (1,)
        assert arrays["b1"][0] == 1.0

    def test_history_validation(self):
        hist = DensityHistory(k_vectors=np.zeros((3, 1)), dk=0.5)
        hist.append(0.0, np.zeros(3))
        with pytest.raises(DomainError):
            hist.append(1.0, np.zeros(4))
        with pytest.raises(DomainError):
            hist.append(0.0, np.zeros(3))


class TestDecayFit:
    def test_recovers_synthetic_exponents(self):
        times = np.linspace(0.0, 10.0, 201)
        br = np.sqrt(1 + 0.64 + (0.8 * times) ** 2)
        for p in (1.0, 2.0, 4.0, 8.0):
            trace = synthetic_trace(0.8, times, br ** (-p) * np.exp(0.3j * times))
            fit = decay_fit(trace)
            assert fit.exponent == pytest.approx(p, abs=0.01)

    def test_constant_trace_gives_zero(self):
        trace = synthetic_trace(0.8, np.linspace(0.0, 10.0, 101),
                                np.full(101, 0.7 + 0.1j))
        assert decay_fit(trace).exponent == pytest.approx(0.0, abs=0.01)

    def test_free_gaussian_trace_beats_fixed_target(self):
        W0 = GaussianWigner(d=1, amplitude=1.0, k_rate=1.0, eta_rate=1.0)
        fit = decay_fit(free_trace(W0, 1.0, 0.05, 8.0, 0.5))
        # super-polynomial data: the fitted power grows with the window
        assert fit.exponent > 8.0

    def test_t_power_weight(self):
        times = np.linspace(0.0, 10.0, 101)
        trace = synthetic_trace(0.0, times, (1 + times ** 2) ** (-1.5))
        fit = decay_fit(trace, weight="t_power")
        assert fit.exponent == pytest.approx(3.0, abs=0.01)

    def test_floor_discards_and_starves(self):
        times = np.linspace(0.0, 10.0, 101)
        vals = np.full(101, 1e-15)
        vals[:5] = 1.0
        with pytest.raises(InsufficientDataError):
            decay_fit(synthetic_trace(0.5, times, vals))

    def test_unknown_weight(self):
        trace = synthetic_trace(0.5, np.linspace(0.0, 1.0, 20), np.ones(20))
        with pytest.raises(DomainError):
            decay_fit(trace, weight="bogus")


class TestSupDecayExponent:
    def test_exact_power_law(self):
        br = np.linspace(1.0, 40.0, 200)
        vals = 2.7 * br ** (-3.25)
        assert sup_decay_exponent(vals, br) == pytest.approx(3.25, rel=1e-12)

    def test_binding_sample_is_equality(self):
        br = np.array([1.0, 2.0, 4.0, 8.0])
        vals = np.array([1.0, 0.5, 0.2, 0.004])
        s = sup_decay_exponent(vals, br)
        assert s == pytest.approx(1.0, rel=1e-12)
        assert np.all(vals <= 1.0 * br ** (-s) + 1e-15)

    def test_filters_and_errors(self):
        br = np.array([1.0, 1.01, 1.04])
        vals = np.array([1.0, 1.0, 1e-14])
        with pytest.raises(InsufficientDataError):
            sup_decay_exponent(vals, br, threshold=1.05)
        with pytest.raises(DomainError):
            sup_decay_exponent(np.ones(3), np.ones(4))


class TestPhysicalLpDensity:
    def grid(self):
        ax = np.linspace(-6.0, 6.0, 241)
        return ax, ax.reshape(-1, 1), float(ax[1] - ax[0])

    def test_zero_density(self):
        ax, kv, dk = self.grid()
        assert physical_lp_density(np.zeros(ax.size), kv, dk, 2, 0.0, 1.0) == 0.0

    def test_p2_n0_is_plancherel(self):
        ax, kv, dk = self.grid()
        vals = np.exp(-(ax ** 2)) * (0.3 + 0.1j)
        ref = np.sqrt(np.sum(np.abs(vals) ** 2) * dk)
        got = physical_lp_density(vals, kv, dk, 2, 0.0, 3.0)
        assert got == pytest.approx(ref, rel=1e-12)

    def test_p_inf_matches_weighted_l1(self):
        ax, kv, dk = self.grid()
        vals = np.exp(-(ax ** 2)) * (0.3 + 0.1j)
        got = physical_lp_density(vals, kv, dk, np.inf, 1.0, 2.0)
        ref = np.sum(np.sqrt(1 + ax ** 2 * 5.0) * np.abs(vals)) * dk
        assert got == pytest.approx(ref, rel=1e-14)

    def test_free_gaussian_rate_is_half_d(self):
        ax, kv, dk = self.grid()
        times = np.linspace(0.5, 20.0, 79)
        lp = [physical_lp_density(np.exp(-(ax ** 2) * t * t / 2.0), kv, dk, 2, 0.0, t)
              for t in times]
        trace = synthetic_trace(0.0, times, np.asarray(lp))
        fit = decay_fit(trace, weight="t_power", floor=1e-30)
        assert fit.exponent == pytest.approx(0.5, abs=0.05)

    def test_budget_warning(self):
        ax, kv, dk = self.grid()
        vals = np.exp(-(ax ** 2))
        with pytest.warns(UserWarning):
            physical_lp_density(vals, kv, dk, 2, 3.0, 1.0, sigma_fit=3.2)

    def test_validation(self):
        ax, kv, dk = self.grid()
        vals = np.exp(-(ax ** 2))
        with pytest.raises(DomainError):
            physical_lp_density(vals, kv, dk, 1.5, 0.0, 1.0)
        with pytest.raises(DomainError):
            physical_lp_density(vals, kv, dk, 2, -1.0, 1.0)
        with pytest.raises(DomainError):
            physical_lp_density(vals, kv[:-1], dk, 2, 0.0, 1.0)
