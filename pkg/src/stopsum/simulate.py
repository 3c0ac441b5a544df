"""Monte Carlo engine: plain and tilted tail estimators, random-walk supremum.

These estimators are the independent oracles for the convolution engine.
RNG discipline: every public entry point takes an explicit seed or
``numpy.random.Generator``; identical seeds reproduce results bit-for-bit for
a fixed sampling algorithm version.  The supremum walker's draw order depends
on the backend (per-path under numba, per-step vectorized under numpy), so
its reproducibility is per backend.
"""

import io
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import optimize

from ._kernels import WALK_EXPONENTIAL, WALK_PARETO, WALK_POINT, walker
from .dists import CountingDist, ParametricDist
from .lattice import LatticeDist
from .tilt import tilt


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_samples: int
    estimator: str


@dataclass(frozen=True)
class EmpiricalTail:
    """Empirical survival function with binomial standard errors."""

    samples: np.ndarray  # sorted ascending
    label: str = "plain"

    def __post_init__(self):
        s = np.sort(np.ascontiguousarray(self.samples, dtype=np.float64))
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return len(self.samples)

    def tail(self, x):
        pos = np.searchsorted(self.samples, x, side="right")
        out = (self.n - pos) / self.n
        return out if np.ndim(x) else float(out)

    def stderr(self, x):
        p = self.tail(x)
        out = np.sqrt(np.asarray(p) * (1.0 - np.asarray(p)) / self.n)
        return out if np.ndim(x) else float(out)

    def estimate(self, x) -> McEstimate:
        return McEstimate(self.tail(x), self.stderr(x), self.n, self.label)

    def to_csv(self, path_or_file, xs) -> None:
        close = False
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "w")
            close = True
        else:
            fh = path_or_file
        try:
            fh.write("x,estimate,stderr,n,estimator\n")
            for x in np.asarray(xs, dtype=np.float64):
                fh.write(
                    f"{float(x)!r},{self.tail(x)!r},{self.stderr(x)!r},{self.n},{self.label}\n"
                )
        finally:
            if close:
                fh.close()


def sample_stopped_sum(
    dist: ParametricDist,
    tau: CountingDist,
    rng: np.random.Generator,
    n_samples: int,
) -> EmpiricalTail:
    """Empirical law of xi_1 + ... + xi_tau from n_samples independent draws."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    counts = tau.sample(rng, n_samples)
    total = int(counts.sum())
    sums = np.zeros(n_samples)
    if total > 0:
        draws = dist.sample(rng, total)
        owner = np.repeat(np.arange(n_samples), counts)
        sums = np.bincount(owner, weights=draws, minlength=n_samples)
    return EmpiricalTail(sums, "plain")


def tilted_tail_estimate(
    dist: ParametricDist,
    tau: CountingDist,
    gamma: float,
    x: float,
    n_samples: int,
    rng: np.random.Generator,
) -> McEstimate:
    """Importance-sampling estimate of P{S_tau > x} via the exponential tilt.

    Paths are drawn from the tilted pair (G, nu) and reweighted by
    E phi^tau * exp(-gamma S), which is unbiased for the plain tail.  With
    gamma = 0 this reduces to the plain estimator exactly.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    phi = dist.mgf(gamma)
    if not np.isfinite(phi):
        raise ValueError(f"mgf diverges at gamma={gamma}")
    tilted_dist = dist.tilted(gamma)
    nu = tau.tilted(phi)
    norm = tau.phi_power_mean(phi)
    counts = nu.sample(rng, n_samples)
    total = int(counts.sum())
    sums = np.zeros(n_samples)
    if total > 0:
        draws = tilted_dist.sample(rng, total)
        owner = np.repeat(np.arange(n_samples), counts)
        sums = np.bincount(owner, weights=draws, minlength=n_samples)
    weights = norm * np.exp(-gamma * sums) * (sums > x)
    value = float(weights.mean())
    stderr = float(weights.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    tag = "plain" if gamma == 0.0 else f"tilted({gamma:g})"
    return McEstimate(value, stderr, n_samples, tag)


_WALK_FAMILIES = {"pareto": WALK_PARETO, "exponential": WALK_EXPONENTIAL, "point": WALK_POINT}


@dataclass(frozen=True)
class SupremumSimulation:
    """Path maxima of a negative-drift random walk plus ladder-height data."""

    maxima: np.ndarray
    ladder_values: np.ndarray  # first strict ascents S_eta > 0 (one per ascending path)
    stop_gap: float
    bias_bound: float
    seed: int
    steps: int

    @cached_property
    def _tail(self) -> EmpiricalTail:
        return EmpiricalTail(self.maxima, "supremum")

    @property
    def n_paths(self) -> int:
        return len(self.maxima)

    def tail(self, x):
        return self._tail.tail(x)

    def stderr(self, x):
        return self._tail.stderr(x)

    @property
    def p_hat(self) -> float:
        """Estimate of the defect p = P{M > 0}."""
        return len(self.ladder_values) / self.n_paths

    @property
    def p_stderr(self) -> float:
        p = self.p_hat
        return float(np.sqrt(p * (1.0 - p) / self.n_paths))

    def ladder_lattice(self, step: float, x_max: float) -> LatticeDist:
        """Empirical ladder-height law on the grid, rounded up (dominating)."""
        if len(self.ladder_values) == 0:
            raise ValueError("no ascents recorded; cannot estimate the ladder law")
        idx = np.ceil(self.ladder_values / step - 1e-9).astype(np.int64)
        n_grid = int(np.floor(x_max / step + 1e-9)) + 1
        inside = idx < n_grid
        counts = np.bincount(idx[inside], minlength=n_grid).astype(np.float64)
        rem = float(np.count_nonzero(~inside))
        return LatticeDist.from_weights(step, 0.0, counts, rem)

    def to_csv(self, path_or_file, xs) -> None:
        self._tail.to_csv(path_or_file, xs)


def _default_stop_gap(dist: ParametricDist, overshoot_tol: float) -> float:
    """Gap B with (1/m) * integrated_tail(B) <= overshoot_tol.

    A path that has fallen B below its running maximum recovers with
    probability ~ P{M > B}, estimated through the integrated-tail asymptotic;
    that recovery probability is the reported bias bound.
    """
    m = -dist.mean()
    it = dist.integrated_tail()

    def objective(log_b):
        return it.log_tail(np.exp(log_b)) - np.log(m * overshoot_tol)

    lo, hi = 0.0, 5.0
    while objective(hi) > 0:
        hi += 5.0
        if hi > 700:
            raise ValueError("failed to size the stopping gap")
    return float(np.exp(optimize.brentq(objective, lo, hi, xtol=1e-10)))


def simulate_supremum(
    dist: ParametricDist,
    n_paths: int,
    seed: int,
    overshoot_tol: float = 1e-4,
    stop_gap: Optional[float] = None,
    max_steps_per_path: int = 50_000_000,
) -> SupremumSimulation:
    """Simulate M = sup of the random walk with increment law ``dist``.

    Requires a negative mean.  Each path runs until it falls ``stop_gap``
    below its running maximum; the probability that a stopped path would have
    recovered is bounded by ``overshoot_tol`` and reported as ``bias_bound``.
    Records the first strict ascent of each path, which estimates the defect
    p = P{M > 0} and the ladder-height law.
    """
    mean = dist.mean()
    if not mean < 0:
        raise ValueError(f"supremum simulation requires a negative mean, got {mean}")
    if dist.family not in _WALK_FAMILIES:
        raise ValueError(f"walker does not support family {dist.family!r}")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if stop_gap is None:
        stop_gap = _default_stop_gap(dist, overshoot_tol)
        bias = overshoot_tol
    else:
        m = -mean
        bias = min(1.0, dist.integrated_tail().tail(stop_gap) / m)
    fam = _WALK_FAMILIES[dist.family]
    if dist.family == "pareto":
        p1, p2 = dist.params
    elif dist.family == "exponential":
        p1, p2 = dist.params[0], 0.0
    else:
        p1, p2 = dist.params[0], 0.0
    maxima, ascents, steps = walker(
        fam, p1, p2, dist.shift, float(stop_gap), int(n_paths), int(seed), int(max_steps_per_path)
    )
    return SupremumSimulation(
        maxima=maxima,
        ladder_values=ascents[~np.isnan(ascents)],
        stop_gap=float(stop_gap),
        bias_bound=float(bias),
        seed=int(seed),
        steps=int(steps),
    )
