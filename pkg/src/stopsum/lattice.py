"""Lattice (uniform-grid) distributions: the numeric carrier for convolutions.

A :class:`LatticeDist` keeps probability masses on ``offset + i * step`` plus
an explicit remainder bucket ``remainder`` for mass beyond the last grid
point.  The remainder is first-class data: every tail query returns a
bracket ``[suffix_sum, suffix_sum + remainder]`` and downstream results carry
the induced error bounds instead of silently dropping truncated mass.

Tails are evaluated from log-domain suffix sums, so values far below 1e-300
remain usable in ratio curves.
"""

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np

from ._logdomain import suffix_logsumexp
from .dists import ParametricDist

_MASS_TOL = 1e-12


class TailBracket(NamedTuple):
    lo: float  # suffix sum of grid masses above x
    hi: float  # suffix sum plus remainder


class MgfBracket(NamedTuple):
    value: float  # grid sum plus remainder weighted at the last grid point
    remainder_bound: float  # exp(gamma * x_max) * remainder


@dataclass(frozen=True)
class LatticeDist:
    step: float
    offset: float
    masses: np.ndarray
    remainder: float = 0.0
    log_masses: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        if masses.ndim != 1 or len(masses) == 0:
            raise ValueError("masses must be a nonempty 1-D array")
        if np.any(masses < 0.0):
            raise ValueError("masses must be nonnegative")
        if self.remainder < 0.0:
            raise ValueError("remainder must be nonnegative")
        total = masses.sum() + self.remainder
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"total mass {total!r} differs from 1 by more than {_MASS_TOL}")
        object.__setattr__(self, "masses", masses)
        if self.log_masses is None:
            with np.errstate(divide="ignore"):
                lm = np.where(masses > 0.0, np.log(np.maximum(masses, 5e-324)), -np.inf)
            object.__setattr__(self, "log_masses", lm)
        else:
            lm = np.ascontiguousarray(self.log_masses, dtype=np.float64)
            if lm.shape != masses.shape:
                raise ValueError("log_masses shape mismatch")
            object.__setattr__(self, "log_masses", lm)

    # -- construction helpers --------------------------------------------------

    @classmethod
    def point_mass(cls, x: float, step: float) -> "LatticeDist":
        return cls(step, float(x), np.array([1.0]))

    @classmethod
    def from_weights(cls, step, offset, weights, remainder=0.0) -> "LatticeDist":
        """Normalize nonnegative weights into a lattice distribution."""
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        total = weights.sum() + remainder
        return cls(step, offset, weights / total, remainder / total)

    # -- basic geometry ----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.masses)

    @property
    def grid(self) -> np.ndarray:
        return self.offset + self.step * np.arange(len(self.masses))

    @property
    def x_max(self) -> float:
        return self.offset + self.step * (len(self.masses) - 1)

    @cached_property
    def log_suffix(self) -> np.ndarray:
        """log_suffix[i] = log(sum_{j >= i} masses[j]), length n+1 with -inf sentinel."""
        out = np.empty(len(self.masses) + 1)
        out[-1] = -np.inf
        out[:-1] = suffix_logsumexp(self.log_masses)
        return out

    # -- tails ---------------------------------------------------------------------

    def _suffix_index(self, x) -> np.ndarray:
        """First grid index strictly above x."""
        # grid points sit at offset + i*step; guard fp jitter half a step wide
        i = np.floor((np.asarray(x, dtype=np.float64) - self.offset) / self.step + 0.5).astype(np.int64)
        on_grid = np.abs(self.offset + i * self.step - x) <= 1e-9 * self.step
        i = np.where(on_grid, i + 1, np.ceil((x - self.offset) / self.step).astype(np.int64))
        return np.clip(i, 0, len(self.masses))

    def log_tail(self, x):
        """log of the suffix mass strictly above x (remainder excluded)."""
        out = self.log_suffix[self._suffix_index(x)]
        return out if np.ndim(x) else float(out)

    def tail(self, x):
        """Suffix mass strictly above x; the certified value is the bracket."""
        out = np.exp(self.log_tail(x))
        return out if np.ndim(x) else float(out)

    def tail_bracket(self, x) -> TailBracket:
        lo = self.tail(x)
        return TailBracket(lo, lo + self.remainder)

    def cdf_mass(self, x):
        """Grid mass at or below x (remainder excluded)."""
        return 1.0 - self.remainder - self.tail(x)

    # -- moments -------------------------------------------------------------------

    def mean_grid(self) -> float:
        """Mean over the grid part; the remainder contributes >= remainder * x_max."""
        return float(self.masses @ self.grid)

    def log_mgf(self, gamma: float) -> float:
        """log of sum_i exp(gamma x_i) p_i plus the remainder weighted at x_max."""
        terms = self.log_masses + gamma * self.grid
        if self.remainder > 0.0:
            terms = np.append(terms, np.log(self.remainder) + gamma * self.x_max)
        m = np.max(terms)
        if not np.isfinite(m):
            return -np.inf
        return float(m + np.log(np.sum(np.exp(terms - m))))

    def mgf_bracket(self, gamma: float) -> MgfBracket:
        value = float(np.exp(self.log_mgf(gamma)))
        bound = float(np.exp(gamma * self.x_max) * self.remainder)
        return MgfBracket(value, bound)

    # -- serialization ----------------------------------------------------------------

    def to_csv(self, path_or_file) -> None:
        """Schema: header line `step,offset,remainder` with values, then `index,mass` rows."""
        close = False
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "w")
            close = True
        else:
            fh = path_or_file
        try:
            fh.write("step,offset,remainder\n")
            fh.write(f"{float(self.step)!r},{float(self.offset)!r},{float(self.remainder)!r}\n")
            fh.write("index,mass\n")
            for i, m in enumerate(self.masses):
                fh.write(f"{i},{float(m)!r}\n")
        finally:
            if close:
                fh.close()

    @classmethod
    def from_csv(cls, path_or_file) -> "LatticeDist":
        close = False
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "r")
            close = True
        else:
            fh = path_or_file
        try:
            header = fh.readline().strip()
            if header != "step,offset,remainder":
                raise ValueError(f"bad lattice CSV header: {header!r}")
            step, offset, remainder = (float(v) for v in fh.readline().strip().split(","))
            row_header = fh.readline().strip()
            if row_header != "index,mass":
                raise ValueError(f"bad lattice CSV row header: {row_header!r}")
            idx = []
            mass = []
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                i_s, m_s = line.split(",")
                idx.append(int(i_s))
                mass.append(float(m_s))
        finally:
            if close:
                fh.close()
        if idx != list(range(len(idx))):
            raise ValueError("lattice CSV indices must be 0..n-1 in order")
        return cls(step, offset, np.array(mass), remainder)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def discretize(
    dist: ParametricDist,
    step: float,
    x_max: float,
    rounding: str = "up",
) -> LatticeDist:
    """Project a parametric distribution onto the lattice {k * step}.

    The mass of each cell is assigned to its upper grid point (``rounding='up'``,
    stochastically dominating) or lower grid point (``'down'``, dominated); the
    two results bracket every downstream tail.  Mass beyond the last grid point
    ``floor(x_max/step)*step`` becomes the remainder.
    """
    if rounding not in ("up", "down"):
        raise ValueError("rounding must be 'up' or 'down'")
    if step <= 0.0:
        raise ValueError("step must be positive")
    lo = dist.support_low
    k_last = int(np.floor(x_max / step + 1e-9))
    if k_last * step <= lo:
        raise ValueError(f"x_max={x_max} leaves no grid above the support lower bound {lo}")
    if rounding == "up":
        # cell ((k-1)s, ks] -> mass tail((k-1)s) - tail(ks), placed at ks
        k0 = int(np.ceil(lo / step - 1e-9))
        bounds = np.arange(k0 - 1, k_last + 1) * step
        lt = np.asarray(dist.log_tail(bounds), dtype=np.float64)
        locs = np.arange(k0, k_last + 1)
    else:
        # cell [ks, (k+1)s) -> mass P{X >= ks} - P{X >= (k+1)s}, placed at ks;
        # left-closed so atoms sitting on the grid stay in place
        k0 = int(np.floor(lo / step + 1e-9))
        bounds = np.arange(k0, k_last + 1) * step
        if dist.family == "point":
            surv = dist.tail_left(bounds)
            with np.errstate(divide="ignore"):
                lt = np.where(surv > 0.0, np.log(np.maximum(surv, 5e-324)), -np.inf)
        else:
            lt = np.asarray(dist.log_tail(bounds), dtype=np.float64)
        locs = np.arange(k0, k_last)
    with np.errstate(divide="ignore", invalid="ignore"):
        masses = np.exp(lt[:-1]) * (-np.expm1(np.minimum(lt[1:] - lt[:-1], 0.0)))
    masses = np.nan_to_num(np.maximum(masses, 0.0), nan=0.0)
    remainder = float(np.exp(lt[-1]))
    nz = np.nonzero(masses)[0]
    if len(nz) == 0:
        raise ValueError("discretization produced no mass on the grid")
    masses = masses[nz[0] :]
    locs = locs[nz[0] :]
    return LatticeDist(step, float(locs[0] * step), masses, remainder)
