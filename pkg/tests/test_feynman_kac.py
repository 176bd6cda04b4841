"""Stochastic representation of the invader field along Brownian paths.

The full estimator closes a fixed-point loop: it feeds the solver's own
w back into the exponential weight, so agreement with the solver is a
genuine consistency check, not a tautology.  Seeds are frozen; tolerances
are three standard errors plus the stated systematic allowance.
"""
import dataclasses
import math

import numpy as np
import pytest
from scipy.special import ndtr

from fkpplab import feynman_kac as fk
from fkpplab.errors import DomainError, RescalingError
from fkpplab.feynman_kac import (
    WLookup,
    crude_bounds,
    crude_tail_bounds,
    fk_estimate,
    fk_lower_estimate,
    fk_upper_estimate,
)
from fkpplab.model import ScaledParams
from fkpplab.pde_solver import FieldHistory
from fkpplab.speed_theory import predict

PANEL_OFFSETS = np.linspace(-3.0, 3.0, 10)


class TestWLookup:
    def test_reproduces_stored_snapshots(self, fk_env):
        hist = fk_env["run"].history
        wlook = fk_env["wlook"]
        j = int(np.argmin(np.abs(hist.times - 5.0)))
        xs = hist.x_window + hist.offsets[j]
        got = wlook.at(float(hist.times[j]), xs)
        assert np.allclose(got, hist.w[j], atol=1e-12)

    def test_interpolates_between_snapshots(self, fk_env):
        hist = fk_env["run"].history
        wlook = fk_env["wlook"]
        tau = 0.5 * (hist.times[3] + hist.times[4])
        xs = np.linspace(-5.0, 5.0, 11)
        got = wlook.at(float(tau), xs)
        lo = np.minimum(wlook.at(float(hist.times[3]), xs),
                        wlook.at(float(hist.times[4]), xs))
        hi = np.maximum(wlook.at(float(hist.times[3]), xs),
                        wlook.at(float(hist.times[4]), xs))
        assert np.all(got >= lo - 1e-12)
        assert np.all(got <= hi + 1e-12)

    def test_extends_with_boundary_values(self, fk_env):
        hist = fk_env["run"].history
        wlook = fk_env["wlook"]
        t5 = float(hist.times[np.argmin(np.abs(hist.times - 5.0))])
        j = int(np.argmin(np.abs(hist.times - t5)))
        assert wlook.at(t5, -1e4) == pytest.approx(hist.w[j][0], abs=1e-12)
        assert wlook.at(t5, 1e4) == pytest.approx(hist.w[j][-1], abs=1e-12)

    def test_values_stay_in_the_physical_band(self, fk_env):
        wlook = fk_env["wlook"]
        cap = fk_env["s"].w_ceiling
        xs = np.linspace(-40.0, 40.0, 801)
        for tau in (0.0, 3.3, 7.77, 10.0):
            vals = wlook.at(tau, xs)
            assert np.all(vals >= 0.0)
            assert np.all(vals <= cap + 1e-15)

    def test_rejects_times_outside_the_stored_range(self, fk_env):
        with pytest.raises(DomainError, match="outside stored range"):
            fk_env["wlook"].at(-1.0, 0.0)
        with pytest.raises(DomainError, match="outside stored range"):
            fk_env["wlook"].at(11.0, 0.0)

    def test_needs_two_snapshots(self, fk_env):
        hist = fk_env["run"].history
        single = FieldHistory(times=hist.times[:1], offsets=hist.offsets[:1],
                              x_window=hist.x_window, v=hist.v[:1],
                              w=hist.w[:1])
        with pytest.raises(DomainError, match="two snapshots"):
            WLookup(single, w_cap=fk_env["s"].w_ceiling)


class TestFixedPointPanel:
    @pytest.mark.parametrize("i", range(10))
    def test_matches_the_solver_across_the_front(self, fk_env, i):
        # 10 points spanning [front-3, front+3] at t = 10; tolerance is
        # 3 se plus 5% for the time-step and interpolation bias
        x = fk_env["xw10"] + PANEL_OFFSETS[i]
        est = fk_estimate(10.0, float(x), fk_env["s"], fk_env["wave"],
                          fk_env["wlook"], n_paths=100_000, n_steps=2000,
                          seed=70 + i)
        ref = fk_env["pde_w"](10.0, float(x))
        tol = 3.0 * est.std_error + 0.05 * max(ref, est.mean)
        assert abs(est.mean - ref) <= tol

    def test_recovers_the_plateau_far_behind_the_front(self, fk_env):
        # x = -20 at t = 10: the field sits at the coexistence ceiling
        cap = fk_env["s"].w_ceiling
        est = fk_estimate(10.0, -20.0, fk_env["s"], fk_env["wave"],
                          fk_env["wlook"], n_paths=100_000, n_steps=2000,
                          seed=80)
        assert abs(est.mean - cap) <= 3.0 * est.std_error + 0.02 * cap


class TestBracketingEstimators:
    def test_upper_estimator_decays_beyond_the_spreading_cone(self, fk_env):
        # 20% outside the predicted front position at t = 30 the upper
        # representation is already far below any order-one field value
        s = fk_env["s"]
        x = 1.2 * predict(s).u_c_regime * 30.0
        est = fk_upper_estimate(30.0, x, s, fk_env["wave"],
                                n_paths=100_000, n_steps=2000, seed=81)
        assert est.mean < 0.1

    def test_lower_estimator_keeps_a_plateau_for_weak_coupling(self, fk_env):
        # dropping the self-interaction still leaves at least half the
        # ceiling deep behind the front when beta_t is small
        s2 = ScaledParams(gamma_t=0.75, beta_t=0.05)
        est = fk_lower_estimate(10.0, -20.0, s2, fk_env["wave"],
                                n_paths=100_000, n_steps=2000, seed=82)
        assert est.mean >= 0.5 * s2.w_ceiling

    @pytest.mark.parametrize("i, seed", [(0, 90), (4, 91), (9, 92)])
    def test_sandwich_and_crude_ordering(self, fk_env, i, seed):
        # same seed = same paths, so lower <= full <= upper holds up to
        # the w-feedback term; the crude bounds hold pathwise (upper) and
        # empirically with a wide margin (lower)
        s = fk_env["s"]
        x = float(fk_env["xw10"] + PANEL_OFFSETS[i])
        e_lo = fk_lower_estimate(10.0, x, s, fk_env["wave"],
                                 n_paths=100_000, n_steps=2000, seed=seed)
        e_mid = fk_estimate(10.0, x, s, fk_env["wave"], fk_env["wlook"],
                            n_paths=100_000, n_steps=2000, seed=seed)
        e_up = fk_upper_estimate(10.0, x, s, fk_env["wave"],
                                 n_paths=100_000, n_steps=2000, seed=seed)
        c_lo, c_up = crude_bounds(10.0, x, s)
        assert e_lo.mean <= e_mid.mean <= e_up.mean
        assert e_up.mean <= c_up
        assert e_lo.mean >= c_lo

    def test_variance_scales_inversely_with_paths(self, fk_env):
        # seed 95: se ratio 1.93 for a 4x path increase
        s = fk_env["s"]
        x = float(fk_env["xw10"] + PANEL_OFFSETS[4])
        e_a = fk_estimate(10.0, x, s, fk_env["wave"], fk_env["wlook"],
                          n_paths=10_000, n_steps=1000, seed=95)
        e_b = fk_estimate(10.0, x, s, fk_env["wave"], fk_env["wlook"],
                          n_paths=40_000, n_steps=1000, seed=95)
        assert 1.6 <= e_a.std_error / e_b.std_error <= 2.4


class TestEstimatorInvariances:
    def test_time_reversal_of_the_bridge(self, fk_env, monkeypatch):
        # the pinned-path construction is reversible in law; seeds 96/97
        # land at z = -0.14
        s = fk_env["s"]
        x = float(fk_env["xw10"] + PANEL_OFFSETS[4])
        e_fwd = fk_estimate(10.0, x, s, fk_env["wave"], fk_env["wlook"],
                            n_paths=50_000, n_steps=1000, seed=96)
        orig = fk._bridge_block

        def reversed_block(t, n, rng, size):
            return orig(t, n, rng, size)[:, ::-1]

        monkeypatch.setattr(fk, "_bridge_block", reversed_block)
        e_rev = fk_estimate(10.0, x, s, fk_env["wave"], fk_env["wlook"],
                            n_paths=50_000, n_steps=1000, seed=97)
        comb = math.hypot(e_fwd.std_error, e_rev.std_error)
        assert abs(e_fwd.mean - e_rev.mean) <= 3.0 * comb

    def test_step_refinement_is_stable(self, fk_env):
        # quadrupling the step count moves the estimate by less than
        # 3 combined se (seed 98: z = +0.99)
        s = fk_env["s"]
        x = float(fk_env["xw10"] + PANEL_OFFSETS[4])
        e_c = fk_estimate(10.0, x, s, fk_env["wave"], fk_env["wlook"],
                          n_paths=100_000, n_steps=1000, seed=98)
        e_d = fk_estimate(10.0, x, s, fk_env["wave"], fk_env["wlook"],
                          n_paths=100_000, n_steps=4000, seed=98)
        comb = math.hypot(e_c.std_error, e_d.std_error)
        assert abs(e_c.mean - e_d.mean) <= 3.0 * comb

    def test_is_deterministic_in_the_seed(self, fk_env):
        s = fk_env["s"]
        args = (5.0, 2.0, s, fk_env["wave"], fk_env["wlook"])
        a = fk_estimate(*args, n_paths=2000, n_steps=200, seed=4)
        b = fk_estimate(*args, n_paths=2000, n_steps=200, seed=4)
        c = fk_estimate(*args, n_paths=2000, n_steps=200, seed=5)
        assert a.mean == b.mean
        assert a.mean != c.mean


class TestGuards:
    def test_unreachable_tail_returns_zero(self, fk_env):
        est = fk_upper_estimate(1.0, 400.0, fk_env["s"], fk_env["wave"],
                                n_paths=100, n_steps=10, seed=0)
        assert est.mean == 0.0
        assert est.std_error == 0.0

    def test_horizon_overflow_guard(self, fk_env):
        with pytest.raises(RescalingError, match="log domain"):
            fk_upper_estimate(1000.0, 0.0, fk_env["s"], fk_env["wave"],
                              n_paths=100, n_steps=10, seed=0)

    def test_full_estimator_needs_a_trajectory(self, fk_env):
        with pytest.raises(DomainError, match="stored w trajectory"):
            fk_estimate(10.0, 0.0, fk_env["s"], fk_env["wave"], None,
                        n_paths=100, n_steps=10, seed=0)
        with pytest.raises(DomainError, match="stored trajectory covers"):
            fk_estimate(12.0, 0.0, fk_env["s"], fk_env["wave"],
                        fk_env["wlook"], n_paths=100, n_steps=10, seed=0)

    def test_negative_horizon(self, fk_env):
        with pytest.raises(DomainError, match="positive"):
            fk_upper_estimate(-1.0, 0.0, fk_env["s"], fk_env["wave"],
                              n_paths=100, n_steps=10, seed=0)


class TestCrudeBounds:
    def test_reference_point(self):
        # at x = 0 the Gaussian mass is exactly 1/2
        s = ScaledParams(gamma_t=0.75, beta_t=0.1)
        lower, upper = crude_bounds(1.0, 0.0, s)
        assert lower == pytest.approx(s.w_ceiling / 2.0, rel=1e-12)
        assert upper == pytest.approx(s.w_ceiling / 2.0 * math.exp(0.9),
                                      rel=1e-12)

    def test_vectorises_over_positions(self):
        s = ScaledParams(gamma_t=0.75, beta_t=0.1)
        xs = np.array([-5.0, 0.0, 5.0])
        lower, upper = crude_bounds(4.0, xs, s)
        assert lower.shape == (3,)
        assert np.all(np.diff(lower) < 0.0)
        assert np.allclose(upper, lower * math.exp(0.9 * 4.0), rtol=1e-12)
        scalar_lower, _ = crude_bounds(4.0, 0.0, s)
        assert isinstance(scalar_lower, float)

    def test_domain(self):
        s = ScaledParams(gamma_t=0.75, beta_t=0.1)
        with pytest.raises(DomainError, match="positive"):
            crude_bounds(0.0, 1.0, s)
        with pytest.raises(DomainError, match="t > 0 and x > 0"):
            crude_tail_bounds(1.0, -1.0, s)

    def test_tail_form_is_the_leading_order_of_the_gaussian(self):
        # sqrt(t/2pi) e^{-x^2/2t}/x is the Mills leading order: it sits
        # above cap * ndtr(-x/sqrt(t)) and the ratio falls to 1
        s = ScaledParams(gamma_t=0.75, beta_t=0.1)
        t = 1.0
        ratios = []
        for x in (4.0, 6.0, 10.0):
            tail_lo, tail_up = crude_tail_bounds(t, x, s)
            exact_lo = s.w_ceiling * float(ndtr(-x / math.sqrt(t)))
            assert tail_lo > exact_lo
            assert tail_up == pytest.approx(tail_lo * math.exp(0.9), rel=1e-12)
            ratios.append(tail_lo / exact_lo)
        assert ratios[0] > ratios[1] > ratios[2] > 1.0
        assert ratios[2] < 1.02
