"""Lattice convolution engine: n-fold powers, randomly stopped sums,
tail-ratio curves, and the pairwise convolution tail lower bound.

Convolution is a direct O(N^2) kernel (see :mod:`stopsum._kernels`) with
log-domain repair of underflowed far-tail bins.  Remainder buckets combine as
``rho = rho_a + rho_b - rho_a rho_b`` plus any mass convolved past the output
grid, so every result stays certified: mass never disappears, it moves into
the remainder and from there into reported error bounds.
"""

import io
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ._kernels import conv_masses
from ._logdomain import NumericError
from .dists import CountingDist, ParametricDist
from .lattice import LatticeDist, discretize

_STEP_TOL = 1e-12


def conv(a: LatticeDist, b: LatticeDist, x_max: Optional[float] = None) -> LatticeDist:
    """Convolution of two lattices with equal step.

    The output grid starts at ``a.offset + b.offset``; mass landing beyond
    ``x_max`` (default: the full support, no truncation) is moved into the
    remainder bucket.
    """
    if abs(a.step - b.step) > _STEP_TOL * max(a.step, b.step):
        raise ValueError(f"mismatched grid steps {a.step} and {b.step}")
    step = a.step
    offset = a.offset + b.offset
    full = len(a) + len(b) - 1
    if x_max is None:
        n_out = full
    else:
        n_out = int(np.floor((x_max - offset) / step + 1e-9)) + 1
        n_out = min(max(n_out, 1), full)
    out, log_out, spill = conv_masses(a.masses, a.log_masses, b.masses, b.log_masses, n_out)
    rem = a.remainder + b.remainder - a.remainder * b.remainder + spill
    return LatticeDist(step, offset, out, rem, log_masses=log_out)


def conv_power(f: LatticeDist, n: int, x_max: Optional[float] = None) -> LatticeDist:
    """n-fold convolution power by binary exponentiation; n = 0 is the unit mass at 0."""
    if n < 0 or n != int(n):
        raise ValueError("n must be an integer >= 0")
    n = int(n)
    if n == 0:
        return LatticeDist.point_mass(0.0, f.step)
    acc = None
    base = f
    while n > 0:
        if n & 1:
            acc = base if acc is None else conv(acc, base, x_max=x_max)
        n >>= 1
        if n > 0:
            base = conv(base, base, x_max=x_max)
    return acc


def _base_index(f: LatticeDist) -> int:
    idx = f.offset / f.step
    if abs(idx - round(idx)) > 1e-6:
        raise ValueError("lattice offset must be an integer multiple of the step")
    return int(round(idx))


def stopped_sum(
    f: LatticeDist,
    tau: CountingDist,
    x_max: Optional[float] = None,
    tol: float = 1e-12,
    n_max: Optional[int] = None,
) -> LatticeDist:
    """Distribution of xi_1 + ... + xi_tau on the grid [0, x_max].

    The series sum_n P{tau = n} F^(*n) is truncated once P{tau > n} <= tol
    (or at ``n_max``); the neglected probability is added to the remainder, so
    the result is certified rather than silently truncated.
    """
    if f.offset < -1e-12 * f.step:
        raise ValueError("stopped sums require nonnegative summands")
    base = _base_index(f)
    step = f.step
    if x_max is None:
        x_max = f.x_max
    n_stop = tau.truncation_index(tol)
    if n_max is not None:
        if tau.sf(n_max) > tol:
            raise NumericError(
                f"counting tail above tolerance at n_max={n_max}: "
                f"achieved bound {tau.sf(n_max):.3e} > {tol:.3e}"
            )
        n_stop = min(n_stop, n_max)
    n_out = int(np.floor(x_max / step + 1e-9)) + 1
    acc = np.zeros(n_out)
    acc_log = np.full(n_out, -np.inf)
    acc_rem = 0.0
    log_q = tau.log_pmf_upto(n_stop)
    # power ladder: F^(*n) from F^(*(n-1)), all capped at the output grid
    pow_dist = LatticeDist.point_mass(0.0, step)
    for n in range(n_stop + 1):
        lq = log_q[n]
        if lq > -np.inf:
            q = np.exp(lq)
            pbase = _base_index(pow_dist)
            m = min(len(pow_dist), n_out - pbase)
            if m > 0:
                acc[pbase : pbase + m] += q * pow_dist.masses[:m]
                acc_log[pbase : pbase + m] = np.logaddexp(
                    acc_log[pbase : pbase + m], lq + pow_dist.log_masses[:m]
                )
            spilled = q * (1.0 - pow_dist.masses[:m].sum() - pow_dist.remainder)
            acc_rem += q * pow_dist.remainder + max(spilled, 0.0)
        if n < n_stop:
            pow_dist = conv(pow_dist, f, x_max=x_max)
    acc_rem += tau.sf(n_stop)
    return LatticeDist(step, 0.0, acc, acc_rem, log_masses=acc_log)


def conv_tail_lower_bound(a: LatticeDist, b: LatticeDist, x: float):
    """Exact convolution tail versus the two-strip lower bound at x.

    Returns (lhs, rhs) with lhs = P{A + B > x} (grid part) and
    rhs = P{A > x} P{B <= x} + P{B > x} P{A <= x}; lhs >= rhs up to fp noise.
    """
    if a.offset < -1e-12 * a.step or b.offset < -1e-12 * b.step:
        raise ValueError("the lower bound requires nonnegative support")
    lhs = conv(a, b).tail(x)
    rhs = a.tail(x) * b.cdf_mass(x) + b.tail(x) * a.cdf_mass(x)
    return lhs, rhs


@dataclass(frozen=True)
class TailRatioCurve:
    """Sampled ratio r(x) = tail of the stopped sum over tail of one summand."""

    x: np.ndarray
    ratio: np.ndarray
    err_lo: np.ndarray
    err_hi: np.ndarray
    tau_mean: float
    tau_label: str
    theoretical: Optional[float] = None
    dropped: int = 0

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        if np.any(np.diff(x) <= 0):
            raise ValueError("x grid must be strictly increasing")
        object.__setattr__(self, "x", x)
        for name in ("ratio", "err_lo", "err_hi"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != x.shape:
                raise ValueError(f"{name} must match the x grid")
            object.__setattr__(self, name, arr)
        if np.any(self.ratio < 0) or np.any(self.err_lo < 0) or np.any(self.err_hi < 0):
            raise ValueError("ratios and error bounds must be nonnegative")

    def bracket(self):
        return self.ratio - self.err_lo, self.ratio + self.err_hi

    def to_csv(self, path_or_file) -> None:
        close = False
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "w")
            close = True
        else:
            fh = path_or_file
        try:
            fh.write(f"# Etau={float(self.tau_mean)!r}\n")
            if self.theoretical is not None:
                fh.write(f"# theoretical_c={float(self.theoretical)!r}\n")
            fh.write("x,ratio,err_lo,err_hi\n")
            for xi, r, lo, hi in zip(self.x, self.ratio, self.err_lo, self.err_hi):
                fh.write(f"{float(xi)!r},{float(r)!r},{float(lo)!r},{float(hi)!r}\n")
        finally:
            if close:
                fh.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def default_x_grid(lo: float, hi: float, n: int = 48) -> np.ndarray:
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi for the log-spaced grid")
    return np.geomspace(lo, hi, n)


def tail_ratio_curve(
    f: Union[ParametricDist, LatticeDist],
    tau: CountingDist,
    step: Optional[float] = None,
    x_max: Optional[float] = None,
    x_grid: Optional[np.ndarray] = None,
    rounding: str = "both",
    tol: float = 1e-12,
    theoretical: Optional[float] = None,
) -> TailRatioCurve:
    """Ratio curve tail(S_tau > x) / tail(xi > x) with certified error bounds.

    For a parametric ``f`` the summand is discretized both up and down (unless
    ``rounding`` picks one side) and the denominator is the exact parametric
    tail, which avoids 0/0 beyond the grid.  For a lattice ``f`` the
    denominator is the lattice tail bracket; points whose denominator falls
    below 1e-300 are dropped and counted in ``dropped``.

    Each ratio is the midpoint of its certified bracket, with one-sided error
    bounds; the default grid stops at x_max/4 because brackets widen toward
    the lattice edge where the numerator's remainder dominates.
    """
    if isinstance(f, ParametricDist):
        if step is None or x_max is None:
            raise ValueError("parametric input needs step and x_max")
        if rounding == "both":
            f_lo = discretize(f, step, x_max, "down")
            f_hi = discretize(f, step, x_max, "up")
        elif rounding in ("up", "down"):
            f_lo = f_hi = discretize(f, step, x_max, rounding)
        else:
            raise ValueError("rounding must be 'both', 'up' or 'down'")
        s_lo = stopped_sum(f_lo, tau, x_max=x_max, tol=tol)
        s_hi = stopped_sum(f_hi, tau, x_max=x_max, tol=tol)
        if x_grid is None:
            grid_lo = max(f.support_low + 2 * step, 8 * step)
            x_grid = default_x_grid(grid_lo, 0.25 * s_hi.x_max)
        x_grid = np.asarray(x_grid, dtype=np.float64)
        log_den = np.asarray(f.log_tail(x_grid), dtype=np.float64)
        keep = log_den > np.log(1e-300)
        dropped = int(np.count_nonzero(~keep))
        xs = x_grid[keep]
        log_den = log_den[keep]
        num_lo = np.exp(s_lo.log_tail(xs) - log_den)
        num_hi = np.exp(s_hi.log_tail(xs) - log_den) + s_hi.remainder / np.exp(log_den)
    else:
        if step is not None:
            raise ValueError("step only applies to parametric input")
        s = stopped_sum(f, tau, x_max=x_max, tol=tol)
        if x_grid is None:
            x_grid = default_x_grid(max(f.offset + 2 * f.step, 8 * f.step), 0.25 * s.x_max)
        x_grid = np.asarray(x_grid, dtype=np.float64)
        den_lo = np.asarray(f.log_tail(x_grid), dtype=np.float64)
        keep = den_lo > np.log(1e-300)
        dropped = int(np.count_nonzero(~keep))
        xs = x_grid[keep]
        den_lo_lin = np.exp(den_lo[keep])
        den_hi_lin = den_lo_lin + f.remainder
        s_tail = np.exp(s.log_tail(xs))
        num_lo = s_tail / den_hi_lin
        num_hi = (s_tail + s.remainder) / den_lo_lin
    ratio = 0.5 * (num_lo + num_hi)
    return TailRatioCurve(
        x=xs,
        ratio=ratio,
        err_lo=np.maximum(ratio - num_lo, 0.0),
        err_hi=np.maximum(num_hi - ratio, 0.0),
        tau_mean=tau.mean(),
        tau_label=tau.label,
        theoretical=theoretical,
        dropped=dropped,
    )


@dataclass(frozen=True)
class LiminfEstimate:
    value: float
    lo: float
    hi: float
    n_window: int


def liminf_estimate(curve: TailRatioCurve, window_fraction: Optional[float] = None) -> LiminfEstimate:
    """Windowed minimum of the ratio curve as a finite-x liminf proxy.

    ``window_fraction=None`` keeps the last decade of the grid (x >= x_max/10);
    otherwise the top fraction of grid points is used.  The bracket combines
    the per-point error bounds: min(r - err_lo) <= liminf proxy <= min(r + err_hi).
    """
    if len(curve.x) == 0:
        raise ValueError("empty curve")
    if window_fraction is None:
        sel = curve.x >= curve.x[-1] / 10.0
    else:
        if not 0.0 < window_fraction <= 1.0:
            raise ValueError("window_fraction must lie in (0, 1]")
        k = max(1, int(np.ceil(window_fraction * len(curve.x))))
        sel = np.zeros(len(curve.x), dtype=bool)
        sel[-k:] = True
    r = curve.ratio[sel]
    lo = (curve.ratio - curve.err_lo)[sel]
    hi = (curve.ratio + curve.err_hi)[sel]
    return LiminfEstimate(float(r.min()), float(lo.min()), float(hi.min()), int(sel.sum()))
