import numpy as np
import pytest

from stopsum.dists import CountingDist, ParametricDist
from stopsum.lattice import LatticeDist, discretize
from stopsum.tilt import (
    compound_poisson_limit_constant,
    stopped_tail_limit_constant,
    tilt,
    tilt_identity_check,
)


@pytest.fixture(scope="module")
def exp_lattice():
    return discretize(ParametricDist.exponential(1.0), 0.02, 50.0, "up")


class TestTilt:
    def test_zero_gamma_is_identity(self, exp_lattice):
        tau = CountingDist.geometric(0.4)
        pair = tilt(exp_lattice, tau, 0.0)
        np.testing.assert_allclose(pair.dist.masses, exp_lattice.masses, rtol=1e-13)
        assert pair.counting == tau
        assert pair.phi == pytest.approx(1.0, abs=1e-14)
        assert pair.phi_tau_mean == pytest.approx(1.0, abs=1e-14)

    def test_point_mass_example(self):
        pm = LatticeDist.point_mass(1.0, 0.5)
        pair = tilt(pm, CountingDist.deterministic(2), np.log(2.0))
        assert pair.phi == pytest.approx(2.0, rel=1e-14)
        assert pair.dist.masses.tolist() == [1.0] and pair.dist.offset == 1.0
        assert pair.counting == CountingDist.deterministic(2)
        assert pair.phi_tau_mean == pytest.approx(4.0, rel=1e-14)

    def test_geometric_reweighting(self, exp_lattice):
        # phi = 2 at gamma = 0.5 for Exp(1); nu becomes geometric(2p)
        pair = tilt(exp_lattice, CountingDist.geometric(1.0 / 3.0), 0.5)
        assert pair.phi == pytest.approx(2.0, rel=2e-2)
        assert pair.counting.kind == "geometric"
        assert pair.counting.param == pytest.approx(2.0 / 3.0, rel=2e-2)
        assert pair.phi_tau_mean == pytest.approx(2.0, rel=5e-2)

    def test_mass_normalized(self, exp_lattice):
        pair = tilt(exp_lattice, CountingDist.deterministic(2), 0.7)
        assert pair.dist.masses.sum() + pair.dist.remainder == pytest.approx(1.0, abs=1e-10)

    def test_divergent_counting_rejected(self, exp_lattice):
        with pytest.raises(ValueError, match="p\\*phi < 1"):
            tilt(exp_lattice, CountingDist.geometric(0.6), 0.5)  # p phi = 1.2

    def test_remainder_amplification_rejected(self):
        coarse = discretize(ParametricDist.exponential(1.0), 0.05, 12.0, "up")
        with pytest.raises(ValueError, match="amplification"):
            tilt(coarse, CountingDist.deterministic(2), 0.9)

    def test_counting_mean_identity(self, exp_lattice):
        # E nu = E tau phi^tau / E phi^tau
        tau = CountingDist.geometric(0.3)
        pair = tilt(exp_lattice, tau, 0.5)
        phi = pair.phi
        ks = np.arange(0, 400)
        q = 0.7 * 0.3**ks
        expected = np.sum(ks * q * phi**ks) / np.sum(q * phi**ks)
        assert pair.counting.mean() == pytest.approx(expected, rel=1e-10)

    def test_double_tilt_recovers(self, exp_lattice):
        tau = CountingDist.geometric(0.4)
        pair = tilt(exp_lattice, tau, 0.5)
        back = tilt(pair.dist, pair.counting, -0.5)
        np.testing.assert_allclose(back.dist.masses, exp_lattice.masses, rtol=1e-10)
        assert back.counting.param == pytest.approx(0.4, rel=1e-10)


class TestTiltIdentity:
    def test_reduces_to_plain_tail_at_zero(self, exp_lattice):
        tau = CountingDist.geometric(0.4)
        xs = np.array([2.0, 10.0])
        lhs, rhs = tilt_identity_check(exp_lattice, tau, 0.0, xs)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)

    def test_single_summand_is_tilt_definition(self, exp_lattice):
        # tau = 1: identity reduces to tail_G(x) phi = sum of exp(gamma y) masses above x
        gamma = 0.5
        xs = np.array([3.0, 8.0])
        lhs, rhs = tilt_identity_check(exp_lattice, CountingDist.deterministic(1), gamma, xs)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)
        pair = tilt(exp_lattice, CountingDist.deterministic(1), gamma)
        direct = pair.dist.tail(xs[0]) * pair.phi
        sel = exp_lattice.grid > xs[0]
        oracle = np.sum(np.exp(gamma * exp_lattice.grid[sel]) * exp_lattice.masses[sel])
        assert direct == pytest.approx(oracle, rel=1e-12)
        assert lhs[0] == pytest.approx(oracle, rel=1e-8)

    def test_randomized_configurations(self):
        rng = np.random.default_rng(42)
        e1 = ParametricDist.exponential(1.0)
        f = discretize(e1, 0.05, 80.0, "up")
        for _ in range(5):
            kind = rng.choice(["det", "geom", "poisson"])
            if kind == "det":
                tau = CountingDist.deterministic(int(rng.integers(1, 5)))
            elif kind == "geom":
                tau = CountingDist.geometric(float(rng.uniform(0.2, 0.45)))
            else:
                tau = CountingDist.poisson(float(rng.uniform(0.5, 2.0)))
            gamma = float(rng.uniform(0.0, 0.5))
            xs = np.array([2.0, 5.0, 12.0, 25.0])
            lhs, rhs = tilt_identity_check(f, tau, gamma, xs)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-6)


class TestLimitConstants:
    def test_reduces_to_mean_at_one(self):
        tau = CountingDist.geometric(1.0 / 3.0)
        assert stopped_tail_limit_constant(tau, 1.0) == pytest.approx(tau.mean(), rel=1e-14)

    def test_deterministic_closed_form(self):
        assert stopped_tail_limit_constant(CountingDist.deterministic(3), 2.0) == 12.0

    def test_geometric_closed_form(self):
        p, phi = 0.3, 2.0
        val = stopped_tail_limit_constant(CountingDist.geometric(p), phi)
        assert val == pytest.approx(p * (1 - p) / (1 - p * phi) ** 2, rel=1e-14)
        with pytest.raises(ValueError, match="diverges"):
            stopped_tail_limit_constant(CountingDist.geometric(0.6), 2.0)

    def test_poisson_matches_compound_constant(self):
        for t in (0.5, 1.5):
            for phi in (1.0, 1.2, 2.0):
                a = stopped_tail_limit_constant(CountingDist.poisson(t), phi)
                b = compound_poisson_limit_constant(t, phi)
                assert abs(a - b) <= 1e-12 * max(1.0, b)

    def test_compound_constant_properties(self):
        assert compound_poisson_limit_constant(1.7, 1.0) == pytest.approx(1.7)
        assert compound_poisson_limit_constant(1.0, 2.0) == pytest.approx(np.e, rel=1e-14)
        assert compound_poisson_limit_constant(1e-9, 1.5) < 1e-8  # c -> 0 with t
