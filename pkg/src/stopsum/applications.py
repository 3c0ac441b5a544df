"""Application pipelines built on the convolution engine.

* random-walk supremum as a geometric compound of ladder heights,
* compound Poisson tails,
* infinitely divisible laws split into a light part and big-jump compound,
* subcritical branching mean population size,

plus the subexponentiality and long-tail diagnostics they rely on.  Each
pipeline produces a tail-ratio curve whose plateau is compared against its
theoretical limit constant by the CLI and the acceptance suite.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .convolve import TailRatioCurve, conv, default_x_grid, stopped_sum, tail_ratio_curve
from .dists import CountingDist, IntegratedTailDist, ParametricDist
from .lattice import LatticeDist, discretize
from .simulate import SupremumSimulation


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubexpDiagnostic:
    """Two-fold convolution ratio (plateau 2 iff subexponential) and the
    long-tail ratio tail(x+1)/tail(x) (limit 1 iff long-tailed)."""

    conv_ratio: TailRatioCurve
    longtail_x: np.ndarray
    longtail_ratio: np.ndarray


def long_tail_curve(log_tail_fn, x_grid) -> np.ndarray:
    """tail(x+1)/tail(x) evaluated through a log-tail callable."""
    x_grid = np.asarray(x_grid, dtype=np.float64)
    return np.exp(log_tail_fn(x_grid + 1.0) - log_tail_fn(x_grid))


def subexp_diagnostic(
    dist: ParametricDist,
    step: float,
    x_max: float,
    x_grid: Optional[np.ndarray] = None,
) -> SubexpDiagnostic:
    if dist.support_low < 0:
        raise ValueError("diagnostic requires support in [0, inf)")
    curve = tail_ratio_curve(
        dist, CountingDist.deterministic(2), step=step, x_max=x_max, x_grid=x_grid,
        theoretical=2.0,
    )
    return SubexpDiagnostic(
        conv_ratio=curve,
        longtail_x=curve.x,
        longtail_ratio=long_tail_curve(dist.log_tail, curve.x),
    )


# ---------------------------------------------------------------------------
# random-walk supremum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometricCompoundSpec:
    """Ladder-height law on (0, inf) plus the defect p = P{M > 0}."""

    ladder: LatticeDist
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if self.ladder.offset < 0:
            raise ValueError("ladder heights must be positive")

    @classmethod
    def from_parametric(cls, ladder: ParametricDist, p: float, step: float, x_max: float,
                        rounding: str = "up") -> "GeometricCompoundSpec":
        return cls(discretize(ladder, step, x_max, rounding), p)

    @classmethod
    def from_simulation(cls, sim: SupremumSimulation, step: float, x_max: float) -> "GeometricCompoundSpec":
        return cls(sim.ladder_lattice(step, x_max), sim.p_hat)


def supremum_from_ladder(
    spec: GeometricCompoundSpec,
    x_max: Optional[float] = None,
    tol: float = 1e-12,
) -> LatticeDist:
    """Distribution of M = sup S_n as the geometric compound of ladder heights."""
    return stopped_sum(spec.ladder, CountingDist.geometric(spec.p), x_max=x_max, tol=tol)


@dataclass(frozen=True)
class SupremumRatioCurve:
    """P{M > x} over the integrated tail, with the 1/m limit constant."""

    x: np.ndarray
    ratio: np.ndarray
    err_lo: np.ndarray
    err_hi: np.ndarray
    theoretical: float
    source: str  # 'ladder' (certified lattice) or 'simulation' (MC standard errors)


def supremum_ratio_curve(
    increment: ParametricDist,
    source: Union[GeometricCompoundSpec, SupremumSimulation],
    x_grid: np.ndarray,
    x_max: Optional[float] = None,
) -> SupremumRatioCurve:
    """Ratio of P{M > x} to the integrated tail of the increment law.

    The increment law must have a negative mean; its integrated tail is the
    exact denominator.  The numerator comes either from a ladder spec routed
    through the geometric compound, or directly from simulated path maxima
    (in which case the error bands are +-1 standard error).
    """
    mean = increment.mean()
    if not mean < 0:
        raise ValueError(f"increment mean must be negative, got {mean}")
    m = -mean
    it = increment.integrated_tail()
    x_grid = np.asarray(x_grid, dtype=np.float64)
    den = it.tail(x_grid)
    if isinstance(source, SupremumSimulation):
        num = np.array([source.tail(x) for x in x_grid])
        se = np.array([source.stderr(x) for x in x_grid])
        ratio = num / den
        err = se / den
        return SupremumRatioCurve(x_grid, ratio, err, err, 1.0 / m, "simulation")
    M = supremum_from_ladder(source, x_max=x_max)
    lo = np.exp(M.log_tail(x_grid)) / den
    hi = lo + M.remainder / den
    ratio = 0.5 * (lo + hi)
    return SupremumRatioCurve(
        x_grid, ratio, ratio - lo, hi - ratio, 1.0 / m, "ladder"
    )


def ladder_from_integrated_tail(
    increment: ParametricDist, p: float, step: float, x_max: float
) -> GeometricCompoundSpec:
    """Ladder law synthesized from the integrated-tail asymptotic.

    Uses tail_G(x) = min(1, (1-p)/(p m) * integrated_tail(x)); this matches
    the ladder law only asymptotically, so specs built this way are labeled
    asymptotic-consistent rather than exact.
    """
    mean = increment.mean()
    if not mean < 0:
        raise ValueError("increment mean must be negative")
    m = -mean
    c = (1.0 - p) / (p * m)
    it = increment.integrated_tail()
    k = np.arange(0, int(np.floor(x_max / step)) + 1)
    tails = np.minimum(1.0, c * it.tail(k * step))
    # ladder heights are strictly positive, so the tail is anchored at 1 and
    # whatever the asymptotic shape leaves over sits in the first cell
    tails[0] = 1.0
    masses = np.concatenate(([0.0], tails[:-1] - tails[1:]))
    rem = tails[-1]
    return GeometricCompoundSpec(LatticeDist(step, 0.0, masses, rem), p)


# ---------------------------------------------------------------------------
# compound Poisson
# ---------------------------------------------------------------------------

def compound_poisson(
    f: LatticeDist,
    t: float,
    x_max: Optional[float] = None,
    tol: float = 1e-12,
) -> LatticeDist:
    """Poisson(t)-stopped sum of f."""
    if t <= 0:
        raise ValueError("t must be positive")
    return stopped_sum(f, CountingDist.poisson(t), x_max=x_max, tol=tol)


def compound_poisson_curve(
    dist: ParametricDist,
    t: float,
    step: float,
    x_max: float,
    x_grid: Optional[np.ndarray] = None,
    theoretical: Optional[float] = None,
) -> TailRatioCurve:
    """Ratio of the compound Poisson tail to the jump tail.

    For heavy-tailed jumps the plateau is t; in general the limit constant is
    t exp(t (phi(gamma_hat) - 1)).
    """
    if theoretical is None:
        prof = dist.mgf_profile()
        theoretical = t * float(np.exp(t * (prof.phi_at_hat - 1.0))) if np.isfinite(prof.phi_at_hat) else None
    return tail_ratio_curve(
        dist, CountingDist.poisson(t), step=step, x_max=x_max, x_grid=x_grid,
        theoretical=theoretical,
    )


# ---------------------------------------------------------------------------
# infinitely divisible laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevySpec:
    """Nonnegative infinitely divisible law: drift, big-jump part, small jumps.

    The jump measure above 1 is ``big_jump_rate`` times the normalized law
    ``big_jump_dist``; jumps in (0, 1] arrive as a finite lattice of
    intensities with a finite first moment.
    """

    drift: float
    big_jump_dist: ParametricDist
    big_jump_rate: float
    small_jump_points: np.ndarray
    small_jump_intensities: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.small_jump_points, dtype=np.float64)
        wts = np.ascontiguousarray(self.small_jump_intensities, dtype=np.float64)
        if self.drift < 0:
            raise ValueError("drift must be nonnegative")
        if self.big_jump_rate < 0 or not np.isfinite(self.big_jump_rate):
            raise ValueError("big-jump intensity must be finite and nonnegative")
        if pts.shape != wts.shape or pts.ndim != 1:
            raise ValueError("small-jump points/intensities must be matching 1-D arrays")
        if len(pts) and (np.any(pts <= 0) or np.any(pts > 1.0)):
            raise ValueError("small jumps must lie in (0, 1]")
        if np.any(wts < 0) or not np.isfinite(wts @ pts if len(pts) else 0.0):
            raise ValueError("small-jump first moment must be finite and nonnegative")
        if self.big_jump_dist.support_low < 1.0 - 1e-12:
            raise ValueError("big-jump law must live on (1, inf)")
        object.__setattr__(self, "small_jump_points", pts)
        object.__setattr__(self, "small_jump_intensities", wts)


@dataclass(frozen=True)
class InfdivResult:
    dist: LatticeDist                 # H
    light_part: LatticeDist           # G (drift + small-jump compound)
    curve: Optional[TailRatioCurve]   # jump-measure tail over H tail; None if degenerate
    degenerate: bool


def infdiv_compose(
    spec: LevySpec,
    step: float,
    x_max: float,
    x_grid: Optional[np.ndarray] = None,
    tol: float = 1e-12,
) -> InfdivResult:
    """Compose H = (light part) * (Poisson(mu) compound of big jumps).

    The small-jump part becomes a finite-intensity compound Poisson after
    cutting jumps below one grid cell; the cut mass's first moment joins the
    drift, and the drift itself is snapped down to the grid (both effects
    only shift H left by less than a cell, keeping tails dominated).  The
    ratio curve compares the jump-measure tail mu*tail_F(x) to tail_H(x) for
    x > 1; its plateau is 1 exactly when the big jumps are subexponential.
    """
    keep = spec.small_jump_points >= step
    cut_moment = float(spec.small_jump_intensities[~keep] @ spec.small_jump_points[~keep])
    drift_eff = spec.drift + cut_moment
    drift_cells = int(np.floor(drift_eff / step + 1e-9))
    pts, wts = spec.small_jump_points[keep], spec.small_jump_intensities[keep]
    rate_small = float(wts.sum())
    if rate_small > 0.0:
        idx = np.ceil(pts / step - 1e-9).astype(np.int64)
        n_grid = int(np.ceil(1.0 / step)) + 1
        weights = np.bincount(idx, weights=wts, minlength=n_grid)
        jump_small = LatticeDist.from_weights(step, 0.0, weights / rate_small)
        light = compound_poisson(jump_small, rate_small, x_max=x_max, tol=tol)
    else:
        light = LatticeDist.point_mass(0.0, step)
    if drift_cells > 0:
        light = LatticeDist(step, light.offset + drift_cells * step, light.masses,
                            light.remainder, log_masses=light.log_masses)
    if spec.big_jump_rate == 0.0:
        return InfdivResult(light, light, None, True)
    f_big = discretize(spec.big_jump_dist, step, x_max, "up")
    heavy = compound_poisson(f_big, spec.big_jump_rate, x_max=x_max, tol=tol)
    H = conv(light, heavy, x_max=x_max)
    if x_grid is None:
        x_grid = default_x_grid(max(2.0, 8 * step), 0.25 * x_max)
    x_grid = np.asarray(x_grid, dtype=np.float64)
    x_grid = x_grid[x_grid > 1.0]
    num = spec.big_jump_rate * np.asarray(spec.big_jump_dist.tail(x_grid))
    den_lo = np.exp(H.log_tail(x_grid))
    den_hi = den_lo + H.remainder
    lo = num / den_hi
    hi = num / den_lo
    ratio = 0.5 * (lo + hi)
    curve = TailRatioCurve(
        x=x_grid, ratio=ratio, err_lo=ratio - lo, err_hi=hi - ratio,
        tau_mean=spec.big_jump_rate, tau_label=f"poisson({spec.big_jump_rate:g})",
        theoretical=1.0,
    )
    return InfdivResult(H, light, curve, False)


# ---------------------------------------------------------------------------
# branching processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchingMeanCurve:
    """Mean population size EZ(t) of a subcritical age-dependent process."""

    t: np.ndarray
    mean_z: np.ndarray
    ratio: np.ndarray          # EZ(t) / tail of the lifetime law
    err_lo: np.ndarray
    err_hi: np.ndarray
    remainder_bound: float     # series truncation: A^n_max bounds the dropped tail sum
    theoretical: float         # 1 / (1 - A)

    def to_csv(self, path_or_file) -> None:
        close = False
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "w")
            close = True
        else:
            fh = path_or_file
        try:
            fh.write(f"# theoretical_c={float(self.theoretical)!r}\n")
            fh.write(f"# remainder_bound={float(self.remainder_bound)!r}\n")
            fh.write("t,mean_z,ratio,err_lo,err_hi\n")
            for row in zip(self.t, self.mean_z, self.ratio, self.err_lo, self.err_hi):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        finally:
            if close:
                fh.close()


def branching_mean(
    lifetime: ParametricDist,
    offspring_mean: float,
    t_grid: np.ndarray,
    step: float,
    x_max: float,
    n_max: Optional[int] = None,
) -> BranchingMeanCurve:
    """EZ(t) = (1 - A) sum_{n>=1} A^(n-1) tail_{F^(*n)}(t) for subcritical A < 1.

    The series stops at ``n_max`` (default: A^n below 1e-15) and the dropped
    tail is bounded by A^n_max since every convolution tail is at most 1.
    """
    A = float(offspring_mean)
    if not 0.0 < A < 1.0:
        raise ValueError("offspring mean A must lie in (0, 1): subcritical only")
    if n_max is None:
        n_max = max(4, int(np.ceil(-15.0 * np.log(10.0) / np.log(A))))
    t_grid = np.asarray(t_grid, dtype=np.float64)
    f_up = discretize(lifetime, step, x_max, "up")
    f_dn = discretize(lifetime, step, x_max, "down")
    rem_bound = A**n_max
    acc = {}
    for tag, f in (("up", f_up), ("down", f_dn)):
        total = np.zeros_like(t_grid)
        rem_mass = 0.0
        power = f
        for n in range(1, n_max + 1):
            w = (1.0 - A) * A ** (n - 1)
            total += w * np.exp(power.log_tail(t_grid))
            rem_mass += w * power.remainder
            if n < n_max:
                power = conv(power, f, x_max=x_max)
        acc[tag] = (total, rem_mass)
    lo = acc["down"][0]
    hi = acc["up"][0] + acc["up"][1] + rem_bound
    mean_z = 0.5 * (lo + hi)
    den = np.asarray(lifetime.tail(t_grid))
    ratio = mean_z / den
    return BranchingMeanCurve(
        t=t_grid,
        mean_z=mean_z,
        ratio=ratio,
        err_lo=(mean_z - lo) / den,
        err_hi=(hi - mean_z) / den,
        remainder_bound=rem_bound,
        theoretical=1.0 / (1.0 - A),
    )
