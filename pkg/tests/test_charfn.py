"""
Test suite for the joint characteristic function and exercise probabilities
"""

import cmath
import math
import unittest
from unittest.mock import patch

import numpy as np
import pytest

from hestonam.core.charfn import (
    CfArgs,
    cf_f2,
    f1_from_f2,
    integrated_variance,
    joint_cf_f2,
    lognormal_probability,
    probability_pj,
    short_horizon_probability,
)
from hestonam.core.diagnostics import Diagnostics
from hestonam.core.simulate import simulate_paths
from hestonam.data.models import MarketParams, ModelParams, QuadratureSpec, SimGrid
from hestonam.exceptions import CharacteristicFunctionError, QuadratureError

MODEL = ModelParams(kappa=2.0, theta=0.04, xi=0.3, rho=-0.5, v0=0.04)
MARKET = MarketParams(r=0.05, q=0.02)
FLAT = ModelParams(kappa=2.0, theta=0.04, xi=0.0, rho=0.0, v0=0.04)
QUAD = QuadratureSpec()


def lognormal_cf(phi, x, v, tau, m, mkt):
    w = integrated_variance(v, tau, m)
    return cmath.exp(1j * phi * (x + (mkt.r - mkt.q) * tau - w / 2) - phi**2 * w / 2)


class TestJointTransform(unittest.TestCase):
    """Test cases for f2 and f1"""

    def test_origin(self):
        """f2(0, 0) = 1"""
        value = joint_cf_f2(CfArgs(x=math.log(100.0), v=0.04, tau=0.7, phi=0.0), MODEL, MARKET)
        self.assertAlmostEqual(abs(value - 1.0), 0.0, places=13)

    def test_terminal_condition(self):
        """At tau = 0 the transform is exp(i phi x + i psi v)"""
        args = CfArgs(x=4.6, v=0.05, tau=0.0, phi=2.5, psi=-3.0)
        expected = cmath.exp(1j * 2.5 * 4.6 + 1j * -3.0 * 0.05)
        self.assertAlmostEqual(abs(joint_cf_f2(args, MODEL, MARKET) - expected), 0.0, places=12)

    def test_deterministic_variance(self):
        """xi = 0 reduces to the lognormal transform with integrated variance"""
        for phi in (0.5, 1.3, 5.0, 12.0):
            for v in (0.01, 0.04, 0.09):
                with self.subTest(phi=phi, v=v):
                    args = CfArgs(x=math.log(95.0), v=v, tau=0.8, phi=phi)
                    expected = lognormal_cf(phi, args.x, v, 0.8, FLAT, MARKET)
                    self.assertLess(abs(joint_cf_f2(args, FLAT, MARKET) - expected), 1e-12)

    def test_small_vol_of_vol_is_continuous(self):
        """Tiny xi approaches the deterministic-variance limit"""
        tiny = FLAT.model_copy(update={"xi": 1e-7})
        args = CfArgs(x=math.log(100.0), v=0.04, tau=1.0, phi=7.0, psi=2.0)
        self.assertLess(abs(joint_cf_f2(args, tiny, MARKET) - joint_cf_f2(args, FLAT, MARKET)), 1e-5)

    def test_martingale_f1(self):
        """f1(0, 0) = 1 because the discounted spot is a martingale"""
        for tau in (0.1, 1.0, 3.0):
            args = CfArgs(x=math.log(120.0), v=0.06, tau=tau, phi=0.0)
            self.assertAlmostEqual(abs(f1_from_f2(args, MODEL, MARKET) - 1.0), 0.0, places=10)

    def test_f1_deterministic_variance(self):
        """f1 equals the shifted lognormal transform when xi = 0"""
        x, v, tau, phi = math.log(100.0), 0.04, 0.5, 3.0
        shifted = lognormal_cf(phi - 1j, x, v, tau, FLAT, MARKET)
        expected = math.exp(-x - (MARKET.r - MARKET.q) * tau) * shifted
        value = f1_from_f2(CfArgs(x=x, v=v, tau=tau, phi=phi), FLAT, MARKET)
        self.assertLess(abs(value - expected), 1e-12)

    def test_hermitian_symmetry(self):
        """f2(-phi) is the conjugate of f2(phi) for real phi"""
        rng = np.random.default_rng(1)
        for _ in range(50):
            x = math.log(rng.uniform(50, 150))
            v = rng.uniform(0.0, 0.2)
            tau = rng.uniform(0.01, 5.0)
            phi = rng.uniform(0.0, 50.0)
            plus = joint_cf_f2(CfArgs(x=x, v=v, tau=tau, phi=phi), MODEL, MARKET)
            minus = joint_cf_f2(CfArgs(x=x, v=v, tau=tau, phi=-phi), MODEL, MARKET)
            self.assertLessEqual(abs(minus - plus.conjugate()), 1e-12 * max(abs(plus), 1e-300))

    def test_bounded_by_one(self):
        """|f2| <= 1 for real phi and psi = 0"""
        phi = np.linspace(-60.0, 60.0, 241)
        for tau in (0.01, 0.5, 2.0, 5.0):
            values = cf_f2(phi, np.zeros_like(phi), math.log(100.0), 0.04, tau, MODEL, MARKET)
            self.assertTrue(np.all(np.abs(values) <= 1.0 + 1e-12))

    def test_continuity_in_tau(self):
        """No branch jumps along long maturities"""
        steep = ModelParams(kappa=1.0, theta=0.09, xi=1.0, rho=-0.9, v0=0.09)
        taus = np.linspace(0.005, 5.0, 1000)
        for m in (MODEL, steep):
            values = np.array([
                joint_cf_f2(CfArgs(x=math.log(100.0), v=m.v0, tau=float(t), phi=10.0), m, MARKET) for t in taus
            ])
            jumps = np.abs(np.diff(values))
            for i in range(1, len(jumps) - 1):
                self.assertLessEqual(jumps[i], 4.0 * max(jumps[i - 1], jumps[i + 1]) + 1e-12)

    def test_invalid_args(self):
        """Negative tau or variance is rejected"""
        with self.assertRaises(ValueError):
            CfArgs(x=0.0, v=0.04, tau=-1.0, phi=1.0)
        with self.assertRaises(ValueError):
            CfArgs(x=0.0, v=-0.04, tau=1.0, phi=1.0)

    def test_overflow_is_reported(self):
        """Non-finite values raise with their arguments"""
        with self.assertRaises(CharacteristicFunctionError) as ctx:
            cf_f2(np.array([-10j]), np.array([0.0]), 1e308, 0.04, 5.0, MODEL, MARKET)
        self.assertEqual(ctx.exception.tau, 5.0)
        self.assertTrue(ctx.exception.recoverable)


class TestProbabilities(unittest.TestCase):
    """Test cases for Fourier-inverted exercise probabilities"""

    def test_vanishing_threshold(self):
        """P_2 -> 1 as the threshold goes to zero"""
        p2 = probability_pj(2, 100.0, 0.04, 0.5, 100.0 * 1e-8, 0.0, MODEL, MARKET, QUAD)
        self.assertAlmostEqual(p2, 1.0, delta=1e-4)

    def test_black_scholes_probabilities(self):
        """xi = 0 gives N(d2) and N(d1) with integrated variance"""
        tau, v = 0.75, 0.05
        w = integrated_variance(v, tau, FLAT)
        for k in (80.0, 100.0, 125.0):
            with self.subTest(k=k):
                p2 = probability_pj(2, 100.0, v, tau, k, 0.0, FLAT, MARKET, QUAD)
                p1 = probability_pj(1, 100.0, v, tau, k, 0.0, FLAT, MARKET, QUAD)
                self.assertAlmostEqual(p2, lognormal_probability(2, 100.0, k, tau, w, MARKET), delta=1e-6)
                self.assertAlmostEqual(p1, lognormal_probability(1, 100.0, k, tau, w, MARKET), delta=1e-6)

    def test_at_the_money_forward(self):
        """At the forward P_2 = N(-sqrt(w)/2)"""
        tau = 1.0
        w = integrated_variance(0.04, tau, FLAT)
        forward = 100.0 * math.exp((MARKET.r - MARKET.q) * tau)
        p2 = probability_pj(2, 100.0, 0.04, tau, forward, 0.0, FLAT, MARKET, QUAD)
        expected = 0.5 * math.erfc(math.sqrt(w) / 2 / math.sqrt(2))
        self.assertAlmostEqual(p2, expected, delta=1e-6)

    def test_monotone_in_threshold(self):
        """P_2 is non-increasing in the threshold and stays in [0, 1]"""
        strikes = np.linspace(60.0, 160.0, 26)
        for slope in (0.0, -2.0, 3.0):
            values = [probability_pj(2, 100.0, 0.04, 0.5, k, slope, MODEL, MARKET, QUAD) for k in strikes]
            self.assertTrue(all(0.0 <= p <= 1.0 for p in values))
            self.assertTrue(all(b <= a + 1e-7 for a, b in zip(values, values[1:])))

    def test_invalid_inputs(self):
        """Only j in {1, 2} and positive inputs are accepted"""
        with self.assertRaises(ValueError):
            probability_pj(3, 100.0, 0.04, 0.5, 100.0, 0.0, MODEL, MARKET, QUAD)
        with self.assertRaises(ValueError):
            probability_pj(2, 100.0, 0.04, 0.0, 100.0, 0.0, MODEL, MARKET, QUAD)

    def test_clamped_with_warning(self):
        """Excess outside [0, 1] is clamped and reported"""
        diagnostics = Diagnostics()
        with patch("hestonam.core.charfn._inversion_integral", return_value=math.pi):
            p = probability_pj(2, 100.0, 0.04, 0.5, 100.0, 0.0, MODEL, MARKET, QUAD, diagnostics)
        self.assertEqual(p, 1.0)
        self.assertEqual(len(diagnostics.messages), 1)

    def test_overflow_halves_phi_max(self):
        """An overflow retries on a shorter grid"""
        error = CharacteristicFunctionError(100.0, 0.0, 0.5)
        with patch("hestonam.core.charfn._inversion_integral", side_effect=[error, 0.0]) as integral:
            p = probability_pj(2, 100.0, 0.04, 0.5, 100.0, 0.0, MODEL, MARKET, QUAD)
        self.assertEqual(p, 0.5)
        self.assertEqual(integral.call_args_list[1].args[9], 50.0)

    def test_persistent_overflow(self):
        """Four halvings without success raise a quadrature error"""
        error = CharacteristicFunctionError(100.0, 0.0, 0.5)
        with patch("hestonam.core.charfn._inversion_integral", side_effect=error) as integral:
            with self.assertRaises(QuadratureError):
                probability_pj(2, 100.0, 0.04, 0.5, 100.0, 0.0, MODEL, MARKET, QUAD)
        self.assertEqual(integral.call_count, 5)

    def test_unrecoverable_overflow_is_not_retried(self):
        error = CharacteristicFunctionError(100.0, 0.0, 0.5)
        error.recoverable = False
        with patch("hestonam.core.charfn._inversion_integral", side_effect=error) as integral:
            with self.assertRaises(QuadratureError):
                probability_pj(2, 100.0, 0.04, 0.5, 100.0, 0.0, MODEL, MARKET, QUAD)
        self.assertEqual(integral.call_count, 1)


class TestShortHorizon(unittest.TestCase):
    """Test cases for the small-tau Gaussian limit"""

    def test_indicator_limit(self):
        """Zero variance gives the indicator, 1/2 on the boundary"""
        self.assertEqual(short_horizon_probability(2, 110.0, 0.0, 1e-6, 100.0, 0.0, FLAT, MARKET), 1.0)
        self.assertEqual(short_horizon_probability(2, 90.0, 0.0, 1e-6, 100.0, 0.0, FLAT, MARKET), 0.0)
        at_money = short_horizon_probability(2, 100.0, 0.0, 0.0, 100.0, 0.0, FLAT, MARKET)
        self.assertEqual(at_money, 0.5)

    def test_far_from_threshold(self):
        """Far from the threshold the limit is 0 or 1"""
        self.assertAlmostEqual(short_horizon_probability(1, 130.0, 0.04, 1e-4, 100.0, 1.0, MODEL, MARKET), 1.0)
        self.assertAlmostEqual(short_horizon_probability(2, 70.0, 0.04, 1e-4, 100.0, 1.0, MODEL, MARKET), 0.0)

    def test_integrated_variance(self):
        """Stationary start keeps the variance constant"""
        self.assertAlmostEqual(integrated_variance(0.04, 2.0, FLAT), 0.08)
        self.assertGreater(integrated_variance(0.09, 1.0, FLAT), 0.04)


@pytest.mark.slow
@pytest.mark.timeout(300)
class TestMonteCarloAgreement(unittest.TestCase):
    """Characteristic function against simulated (X_T, V_T)"""

    def test_agreement(self):
        tau = 0.5
        market = MarketParams(r=0.05, q=0.02)
        grid = SimGrid(n_paths=200_000, n_steps=100, maturity=tau, seed=2024)
        paths = simulate_paths(MODEL, market, 100.0, grid)
        x_t = np.log(paths.prices[:, -1])
        v_t = paths.variances[:, -1]
        x0 = math.log(100.0)

        rng = np.random.default_rng(17)
        for _ in range(10):
            phi = rng.uniform(-20.0, 20.0)
            psi = rng.uniform(-5.0, 5.0)
            samples = np.exp(1j * (phi * x_t + psi * v_t))
            mean = samples.mean()
            se_re = samples.real.std(ddof=1) / math.sqrt(grid.n_paths)
            se_im = samples.imag.std(ddof=1) / math.sqrt(grid.n_paths)
            exact = joint_cf_f2(CfArgs(x=x0, v=MODEL.v0, tau=tau, phi=phi, psi=psi), MODEL, market)
            with self.subTest(phi=phi, psi=psi):
                self.assertLess(abs(mean.real - exact.real), 3 * se_re)
                self.assertLess(abs(mean.imag - exact.imag), 3 * se_im)


if __name__ == '__main__':
    unittest.main()
