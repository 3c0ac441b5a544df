"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Exact identities are checked at machine-ish tolerances; plateau criteria use
distributions with regularly varying tails where desk-scale convergence is
adequate, with certified brackets carried throughout.
"""

import time

import numpy as np
import pytest

from conftest import record_criterion
from stopsum.applications import (
    GeometricCompoundSpec,
    LevySpec,
    branching_mean,
    compound_poisson,
    infdiv_compose,
    supremum_from_ladder,
    tail_ratio_curve,
)
from stopsum.concave import block_residuals, build_concave_weight, divergence_witness
from stopsum.convolve import conv, conv_tail_lower_bound, liminf_estimate, stopped_sum
from stopsum.dists import CountingDist, ParametricDist
from stopsum.lattice import LatticeDist, discretize
from stopsum.simulate import sample_stopped_sum, simulate_supremum, tilted_tail_estimate
from stopsum.tilt import (
    compound_poisson_limit_constant,
    stopped_tail_limit_constant,
    tilt_identity_check,
)


def random_lattice(rng, n_lo=30, n_hi=80, step=0.25, remainder_max=0.0):
    n = int(rng.integers(n_lo, n_hi))
    w = rng.random(n)
    rem = float(rng.random() * remainder_max * w.sum())
    return LatticeDist.from_weights(step, 0.0, w, rem)


def random_counting(rng):
    kind = rng.choice(["det", "geom", "poisson"])
    if kind == "det":
        return CountingDist.deterministic(int(rng.integers(1, 5)))
    if kind == "geom":
        return CountingDist.geometric(float(rng.uniform(0.2, 0.45)))
    return CountingDist.poisson(float(rng.uniform(0.5, 2.0)))


def test_criterion_1_exact_identity_suite():
    """Tilt identity at every grid point, pairwise lower bound, semigroup."""
    t0 = time.time()
    rng = np.random.default_rng(20240801)
    # (a) tilted-tail identity, 20 randomized configurations, relative 1e-6
    worst_rel = 0.0
    for _ in range(20):
        f = random_lattice(rng)
        tau = random_counting(rng)
        gamma = float(rng.uniform(0.0, 0.3))
        while tau.kind == "geometric":
            phi = f.mgf_bracket(gamma).value
            if tau.param * phi < 0.95:
                break
            gamma *= 0.5
        lhs, rhs = tilt_identity_check(f, tau, gamma, f.grid)
        keep = (lhs > 1e-12) & (rhs > 1e-12)
        rel = np.abs(lhs[keep] / rhs[keep] - 1.0)
        worst_rel = max(worst_rel, float(rel.max()))
    assert worst_rel < 1e-6

    # (b) pairwise convolution lower bound, 20 random lattice pairs, pointwise
    for _ in range(20):
        a = random_lattice(rng, remainder_max=0.1)
        b = random_lattice(rng, remainder_max=0.1)
        for x in np.linspace(0.0, a.x_max + b.x_max, 50):
            lhs, rhs = conv_tail_lower_bound(a, b, x)
            assert lhs >= rhs - 1e-12

    # (c) compound Poisson semigroup to 1e-9 per tail point
    f = discretize(ParametricDist.pareto(2.0), 0.25, 512.0, "up")
    a = compound_poisson(f, 0.7, x_max=512.0)
    b = compound_poisson(f, 0.8, x_max=512.0)
    direct = compound_poisson(f, 1.5, x_max=512.0)
    combined = conv(a, b, x_max=512.0)
    xs = np.linspace(0.0, 500.0, 200)
    semigroup_dev = float(np.abs(direct.tail(xs) - combined.tail(xs)).max())
    assert semigroup_dev < 1e-9

    record_criterion(
        "criterion 1: exactness suite",
        True,
        f"tilt identity worst rel {worst_rel:.1e}; semigroup dev {semigroup_dev:.1e}; "
        f"{time.time() - t0:.0f}s",
    )


def test_criterion_2_concave_weight_construction():
    """Ten blocks per family and delta: residuals, knot growth, divergence."""
    t0 = time.time()
    families = [
        ("pareto(2)", ParametricDist.pareto(2.0)),
        ("weibull(0.5)", ParametricDist.weibull(0.5)),
        ("lognormal(0,1)", ParametricDist.lognormal(0.0, 1.0)),
    ]
    worst_res = 0.0
    worst_wit_margin = np.inf
    for _, dist in families:
        for delta in (0.25, 1.0):
            h = build_concave_weight(dist, delta, 10)
            res = np.abs(block_residuals(h, dist)).max()
            worst_res = max(worst_res, float(res))
            assert res < 1e-9
            assert np.all(h.knots[1:] >= 2.0 ** np.arange(1, 11))
            assert np.all(np.diff(h.slopes) < 0)
            for n in range(8):
                wit = divergence_witness(h, dist, n)
                worst_wit_margin = min(worst_wit_margin, wit / delta)
                assert wit >= delta * (1.0 - 1e-6)
    record_criterion(
        "criterion 2: concave weight construction",
        True,
        f"max residual {worst_res:.1e}; min witness/delta {worst_wit_margin:.2f}; "
        f"{time.time() - t0:.0f}s",
    )


def test_criterion_3_heavy_plateau_matches_mean():
    """Pareto(2) stopped-sum ratio plateaus at E tau for four counting laws."""
    t0 = time.time()
    par = ParametricDist.pareto(2.0)
    cases = [
        CountingDist.deterministic(2),
        CountingDist.deterministic(5),
        CountingDist.geometric(0.5),  # E tau = 1
        CountingDist.poisson(2.0),
    ]
    details = []
    for tau in cases:
        curve = tail_ratio_curve(
            par, tau, step=0.5, x_max=4096.0, x_grid=np.geomspace(2.0, 1100.0, 48)
        )
        est = liminf_estimate(curve)  # window: last decade
        etau = tau.mean()
        assert abs(est.value - etau) <= 0.05 * etau, (tau.label, est)
        assert est.lo <= etau <= est.hi, (tau.label, est)
        details.append(f"{tau.label}:{est.value:.3f}")
    record_criterion(
        "criterion 3: heavy-tail plateau = E tau (5%)",
        True,
        "; ".join(details) + f"; {time.time() - t0:.0f}s",
    )


def test_criterion_4_light_tail_limit_constant():
    """Tilted-route constant for the finite-phi light-tailed family."""
    t0 = time.time()
    pe = ParametricDist.polyexp(3, 1.0, 1.0)
    prof = pe.mgf_profile()
    # gamma_hat = 1 with finite phi(gamma_hat), verified against quadrature
    from scipy import integrate

    oracle, _ = integrate.quad(lambda x: np.exp(x) * pe.pdf(x), 1.0, np.inf, limit=400)
    assert prof.gamma_hat == 1.0
    assert abs(prof.phi_at_hat - oracle) <= 1e-8 * oracle
    p = 0.15
    tau = CountingDist.geometric(p)
    assert p * prof.phi_at_hat < 1.0
    G = pe.tilted(prof.gamma_hat)  # exact change of measure: a Pareto law
    nu = tau.tilted(prof.phi_at_hat)
    curve = tail_ratio_curve(
        G, nu, step=0.5, x_max=4096.0, x_grid=np.geomspace(2.0, 1100.0, 48)
    )
    est = liminf_estimate(curve)
    measured = est.value * tau.phi_power_mean(prof.phi_at_hat) / prof.phi_at_hat
    target = stopped_tail_limit_constant(tau, prof.phi_at_hat)
    rel = abs(measured - target) / target
    assert rel <= 0.10, (measured, target)
    record_criterion(
        "criterion 4: light-tail constant via tilted route (10%)",
        True,
        f"measured {measured:.4f} vs {target:.4f} (rel {rel:.2%}); {time.time() - t0:.0f}s",
    )


def test_criterion_5_compound_poisson_plateau_and_constants():
    """Compound Poisson over Pareto plateaus at t; constant consistency 1e-12."""
    t0 = time.time()
    par = ParametricDist.pareto(2.0)
    details = []
    for t in (0.5, 1.5):
        curve = tail_ratio_curve(
            par, CountingDist.poisson(t), step=0.5, x_max=4096.0,
            x_grid=np.geomspace(2.0, 1100.0, 48),
        )
        est = liminf_estimate(curve)
        assert abs(est.value - t) <= 0.05 * t, (t, est)
        details.append(f"t={t}:{est.value:.3f}")
    for t in (0.5, 1.5):
        for phi in (1.0, 1.2, 2.0):
            a = stopped_tail_limit_constant(CountingDist.poisson(t), phi)
            b = compound_poisson_limit_constant(t, phi)
            assert abs(a - b) <= 1e-12 * max(1.0, abs(b))
    record_criterion(
        "criterion 5: compound Poisson plateau = t (5%), constants to 1e-12",
        True,
        "; ".join(details) + f"; {time.time() - t0:.0f}s",
    )


def test_criterion_6_random_walk_supremum():
    """Simulated supremum vs integrated tail and vs the ladder compound."""
    t0 = time.time()
    inc = ParametricDist.pareto(2.0).shifted(-3.0)  # mean -1
    it = inc.integrated_tail()
    sim_direct = simulate_supremum(inc, 100_000, 2024)
    sim_ladder = simulate_supremum(inc, 100_000, 1234)
    window = np.geomspace(50.0, 200.0, 9)  # mid-tail window
    worst_rel = 0.0
    for x in window:
        rel = abs(sim_direct.tail(x) - it.tail(x)) / it.tail(x)  # 1/m = 1
        worst_rel = max(worst_rel, float(rel))
    assert worst_rel <= 0.15

    spec = GeometricCompoundSpec.from_simulation(sim_ladder, 0.25, 4096.0)
    M = supremum_from_ladder(spec, x_max=4096.0)
    worst_z = 0.0
    for x in window:
        direct, se_a = sim_direct.tail(x), sim_direct.stderr(x)
        pk = M.tail(x) + 0.5 * M.remainder
        se_b = np.sqrt(max(pk * (1.0 - pk), 1e-12) / sim_ladder.n_paths)
        z = abs(direct - pk) / np.hypot(se_a, se_b)
        worst_z = max(worst_z, float(z))
    assert worst_z <= 3.0
    record_criterion(
        "criterion 6: supremum vs integrated tail (15%) and ladder compound (3 se)",
        True,
        f"worst rel {worst_rel:.2%}; worst z {worst_z:.2f}; p_hat {sim_direct.p_hat:.4f}; "
        f"{time.time() - t0:.0f}s",
    )


def test_criterion_7_infinitely_divisible_tail_equivalence():
    """Jump-measure tail over the composed law plateaus at 1."""
    t0 = time.time()
    spec = LevySpec(
        drift=0.2,
        big_jump_dist=ParametricDist.pareto(2.0),
        big_jump_rate=2.0,
        small_jump_points=np.array([0.1, 0.3, 0.5, 0.9]),
        small_jump_intensities=np.array([0.5, 0.4, 0.3, 0.3]),
    )
    res = infdiv_compose(spec, 0.5, 8192.0, x_grid=np.geomspace(2.0, 1500.0, 48))
    est = liminf_estimate(res.curve)
    rel = abs(est.value - 1.0)
    assert rel <= 0.10, est
    record_criterion(
        "criterion 7: infinitely divisible tail ratio = 1 (10%)",
        True,
        f"plateau {est.value:.4f}; {time.time() - t0:.0f}s",
    )


def test_criterion_8_branching_mean_plateau():
    """Subcritical branching mean over the lifetime tail: 1/(1-A)."""
    t0 = time.time()
    par = ParametricDist.pareto(2.0)
    details = []
    for A in (0.3, 0.5):
        curve = branching_mean(
            par, A, np.geomspace(2.0, 1100.0, 48), 0.5, 4096.0, n_max=60
        )
        sel = curve.t >= curve.t[-1] / 10.0
        plateau = float(curve.ratio[sel].min())
        target = 1.0 / (1.0 - A)
        assert abs(plateau - target) <= 0.10 * target, (A, plateau)
        details.append(f"A={A}:{plateau:.3f}")
        # remainder bound verified against a 3x longer series
        t_small = np.geomspace(2.0, 120.0, 12)
        short = branching_mean(par, A, t_small, 0.5, 512.0, n_max=60)
        longer = branching_mean(par, A, t_small, 0.5, 512.0, n_max=180)
        assert np.all(np.abs(short.mean_z - longer.mean_z) <= short.remainder_bound + 1e-12)
    record_criterion(
        "criterion 8: branching plateau = 1/(1-A) (10%), remainder certified",
        True,
        "; ".join(details) + f"; {time.time() - t0:.0f}s",
    )


def test_criterion_9_light_tail_negative_control():
    """Exponential summands: the ratio must blow past 10, no plateau at E tau."""
    t0 = time.time()
    curve = tail_ratio_curve(
        ParametricDist.exponential(1.0), CountingDist.deterministic(2),
        step=0.02, x_max=60.0, x_grid=np.geomspace(0.5, 14.0, 24),
    )
    peak = float(curve.ratio.max())
    assert peak >= 10.0
    record_criterion(
        "criterion 9: light-tail negative control (ratio exceeds 10)",
        True,
        f"peak ratio {peak:.1f}; {time.time() - t0:.0f}s",
    )


def test_criterion_10_monte_carlo_cross_validation():
    """Plain and tilted estimators vs the convolution engine; reproducibility."""
    t0 = time.time()
    e1 = ParametricDist.exponential(1.0)
    tau = CountingDist.geometric(0.4)
    up = stopped_sum(discretize(e1, 0.01, 120.0, "up"), tau, x_max=120.0)
    dn = stopped_sum(discretize(e1, 0.01, 120.0, "down"), tau, x_max=120.0)
    rng_points = np.random.default_rng(77)
    xs = np.sort(rng_points.uniform(2.0, 12.0, 10))
    n_plain = 200_000
    plain = sample_stopped_sum(e1, tau, np.random.default_rng(101), n_plain)
    worst_z = 0.0
    for i, x in enumerate(xs):
        # the engine's certified answer is a bracket; measure the excursion
        # beyond it in standard errors (binomial se under the reference value)
        lo, hi = dn.tail(x), up.tail(x) + up.remainder
        mid, halfwidth = 0.5 * (lo + hi), 0.5 * (hi - lo)
        se_null = np.sqrt(mid * (1.0 - mid) / n_plain)
        z_plain = max(0.0, abs(plain.tail(x) - mid) - halfwidth) / se_null
        tl = tilted_tail_estimate(e1, tau, 0.5, x, 100_000, np.random.default_rng(500 + i))
        z_tilt = max(0.0, abs(tl.value - mid) - halfwidth) / max(tl.stderr, 1e-12)
        worst_z = max(worst_z, float(z_plain), float(z_tilt))
    assert worst_z <= 3.0

    # identical seeds reproduce byte-identical output
    import io

    a = sample_stopped_sum(e1, tau, np.random.default_rng(7), 5000)
    b = sample_stopped_sum(e1, tau, np.random.default_rng(7), 5000)
    buf_a, buf_b = io.StringIO(), io.StringIO()
    a.to_csv(buf_a, xs)
    b.to_csv(buf_b, xs)
    assert buf_a.getvalue() == buf_b.getvalue()
    t1 = tilted_tail_estimate(e1, tau, 0.5, 10.0, 20_000, np.random.default_rng(9))
    t2 = tilted_tail_estimate(e1, tau, 0.5, 10.0, 20_000, np.random.default_rng(9))
    assert t1 == t2
    record_criterion(
        "criterion 10: Monte Carlo cross-validation (3 se) and reproducibility",
        True,
        f"worst z {worst_z:.2f}; {time.time() - t0:.0f}s",
    )
