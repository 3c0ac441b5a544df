"""Parametric distributions, counting laws, and moment-generating profiles.

The parametric families cover the three exponential-moment regimes needed by
the tail-ratio checks:

* ``pareto``, ``weibull`` (shape < 1), ``lognormal``: heavy (gamma_hat = 0);
* ``exponential``: gamma_hat > 0 with phi(gamma_hat) = inf;
* ``polyexp`` (density ~ x^-power * exp(-rate x) on [lower, inf)):
  gamma_hat = rate with phi(gamma_hat) finite.

All tails are exposed in the log domain as well, since downstream ratio
curves divide values far below 1e-300.
"""

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special, stats

from ._logdomain import NumericError, log1mexp

_FAMILIES = ("pareto", "weibull", "lognormal", "exponential", "polyexp", "point")


def _log_expn(n, z):
    """log(E_n(z)) for integer n >= 1, scalar or array z > 0.

    scipy's expn underflows past z ~ 700; the asymptotic series
    E_n(z) = e^-z / z * (1 - n/z + n(n+1)/z^2 - ...) takes over at z > 600.
    """
    z = np.asarray(z, dtype=np.float64)
    small = z <= 600.0
    with np.errstate(divide="ignore"):
        direct = np.where(small, np.log(special.expn(n, np.where(small, z, 1.0))), 0.0)
    zl = np.where(small, np.inf, z)
    corr = -n / zl + n * (n + 1) / zl**2 - n * (n + 1) * (n + 2) / zl**3 \
        + n * (n + 1) * (n + 2) * (n + 3) / zl**4
    asym = -z - np.log(z) + np.log1p(corr)
    out = np.where(small, direct, asym)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MgfProfile:
    """Moment generating function phi, its abscissa gamma_hat, phi(gamma_hat)."""

    gamma_hat: float
    phi_at_hat: float
    phi: Callable[[float], float]

    @property
    def heavy(self) -> bool:
        return self.gamma_hat == 0.0


@dataclass(frozen=True)
class ParametricDist:
    """A closed-form distribution family, optionally shifted by a constant."""

    family: str
    params: tuple
    shift: float = 0.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def pareto(cls, alpha: float, scale: float = 1.0) -> "ParametricDist":
        if alpha <= 0 or scale <= 0:
            raise ValueError("pareto needs alpha > 0 and scale > 0")
        return cls("pareto", (float(alpha), float(scale)))

    @classmethod
    def weibull(cls, shape: float, scale: float = 1.0) -> "ParametricDist":
        if shape <= 0 or scale <= 0:
            raise ValueError("weibull needs shape > 0 and scale > 0")
        return cls("weibull", (float(shape), float(scale)))

    @classmethod
    def lognormal(cls, mu: float = 0.0, sigma: float = 1.0) -> "ParametricDist":
        if sigma <= 0:
            raise ValueError("lognormal needs sigma > 0")
        return cls("lognormal", (float(mu), float(sigma)))

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "ParametricDist":
        if rate <= 0:
            raise ValueError("exponential needs rate > 0")
        return cls("exponential", (float(rate),))

    @classmethod
    def polyexp(cls, power: int = 3, rate: float = 1.0, lower: float = 1.0) -> "ParametricDist":
        if power != int(power) or power < 2:
            raise ValueError("polyexp needs an integer power >= 2")
        if rate <= 0 or lower <= 0:
            raise ValueError("polyexp needs rate > 0 and lower > 0")
        return cls("polyexp", (int(power), float(rate), float(lower)))

    @classmethod
    def point(cls, value: float) -> "ParametricDist":
        return cls("point", (float(value),))

    def shifted(self, c: float) -> "ParametricDist":
        """Distribution of xi + c."""
        return replace(self, shift=self.shift + c)

    # -- support ------------------------------------------------------------

    @property
    def support_low(self) -> float:
        if self.family == "pareto":
            return self.params[1] + self.shift
        if self.family == "polyexp":
            return self.params[2] + self.shift
        if self.family == "point":
            return self.params[0] + self.shift
        return self.shift

    @cached_property
    def _polyexp_log_norm(self) -> float:
        power, rate, lower = self.params
        return (1.0 - power) * np.log(lower) + _log_expn(power, rate * lower)

    # -- tails and densities --------------------------------------------------

    def log_tail(self, x):
        """log P{xi > x}, elementwise."""
        x = np.asarray(x, dtype=np.float64)
        y = x - self.shift
        fam = self.family
        if fam == "pareto":
            alpha, scale = self.params
            yy = np.maximum(y, scale)
            out = alpha * (np.log(scale) - np.log(yy))
        elif fam == "weibull":
            shape, scale = self.params
            out = -np.power(np.maximum(y, 0.0) / scale, shape)
        elif fam == "lognormal":
            mu, sigma = self.params
            yy = np.maximum(y, 1e-300)
            out = stats.norm.logsf((np.log(yy) - mu) / sigma)
            out = np.where(y <= 0.0, 0.0, out)
        elif fam == "exponential":
            (rate,) = self.params
            out = -rate * np.maximum(y, 0.0)
        elif fam == "polyexp":
            power, rate, lower = self.params
            yy = np.maximum(y, lower)
            out = (1.0 - power) * np.log(yy) + _log_expn(power, rate * yy) - self._polyexp_log_norm
        elif fam == "point":
            (a,) = self.params
            out = np.where(y < a, 0.0, -np.inf)
        out = np.where(y <= self.support_low - self.shift, 0.0, out) if fam != "point" else out
        return out if out.ndim else float(out)

    def tail(self, x):
        """P{xi > x}."""
        out = np.exp(self.log_tail(x))
        return out if np.ndim(out) else float(out)

    def tail_left(self, x):
        """P{xi >= x}; differs from tail only for the point family."""
        if self.family == "point":
            a = self.params[0] + self.shift
            x = np.asarray(x, dtype=np.float64)
            out = np.where(x <= a, 1.0, 0.0)
            return out if out.ndim else float(out)
        return self.tail(x)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def log_pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        y = x - self.shift
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam == "pareto":
                alpha, scale = self.params
                out = np.log(alpha) + alpha * np.log(scale) - (alpha + 1.0) * np.log(y)
                out = np.where(y < scale, -np.inf, out)
            elif fam == "weibull":
                shape, scale = self.params
                t = y / scale
                out = np.log(shape / scale) + (shape - 1.0) * np.log(t) - np.power(t, shape)
                out = np.where(y <= 0.0, -np.inf, out)
            elif fam == "lognormal":
                mu, sigma = self.params
                ly = np.log(np.maximum(y, 1e-300))
                out = -ly - np.log(sigma) - 0.5 * np.log(2.0 * np.pi) - 0.5 * ((ly - mu) / sigma) ** 2
                out = np.where(y <= 0.0, -np.inf, out)
            elif fam == "exponential":
                (rate,) = self.params
                out = np.log(rate) - rate * y
                out = np.where(y < 0.0, -np.inf, out)
            elif fam == "polyexp":
                power, rate, lower = self.params
                out = -power * np.log(y) - rate * y - self._polyexp_log_norm
                out = np.where(y < lower, -np.inf, out)
            else:
                raise ValueError("point mass has no density")
        return out if out.ndim else float(out)

    def pdf(self, x):
        out = np.exp(self.log_pdf(x))
        return out if np.ndim(out) else float(out)

    # -- moments --------------------------------------------------------------

    def mean(self) -> float:
        fam = self.family
        if fam == "pareto":
            alpha, scale = self.params
            if alpha <= 1.0:
                return np.inf
            base = scale * alpha / (alpha - 1.0)
        elif fam == "weibull":
            shape, scale = self.params
            base = scale * special.gamma(1.0 + 1.0 / shape)
        elif fam == "lognormal":
            mu, sigma = self.params
            base = np.exp(mu + 0.5 * sigma * sigma)
        elif fam == "exponential":
            base = 1.0 / self.params[0]
        elif fam == "polyexp":
            power, rate, lower = self.params
            log_num = (2.0 - power) * np.log(lower) + _log_expn(power - 1, rate * lower)
            base = np.exp(log_num - self._polyexp_log_norm)
        else:
            base = self.params[0]
        return base + self.shift

    def mgf(self, gamma: float) -> float:
        """phi(gamma) = E exp(gamma xi); +inf when the integral diverges."""
        fam = self.family
        g = float(gamma)
        if g == 0.0:
            return 1.0
        tilt_shift = np.exp(g * self.shift)
        if fam == "point":
            return float(np.exp(g * (self.params[0] + self.shift)))
        if fam == "exponential":
            (rate,) = self.params
            if g >= rate:
                return np.inf
            return tilt_shift * rate / (rate - g)
        if fam == "polyexp":
            power, rate, lower = self.params
            if g > rate:
                return np.inf
            if g == rate:
                log_val = (1.0 - power) * np.log(lower) - np.log(power - 1.0)
            else:
                log_val = (1.0 - power) * np.log(lower) + _log_expn(power, (rate - g) * lower)
            return tilt_shift * np.exp(log_val - self._polyexp_log_norm)
        if fam == "weibull" and self.params[0] > 1.0:
            return self._mgf_quad(g)
        if fam == "weibull" and self.params[0] == 1.0:
            rate = 1.0 / self.params[1]
            if g >= rate:
                return np.inf
            return tilt_shift * rate / (rate - g)
        # heavy families: every positive exponential moment diverges
        if g > 0.0:
            return np.inf
        return self._mgf_quad(g)

    def _mgf_quad(self, g: float) -> float:
        lo = self.support_low
        val, _ = integrate.quad(
            lambda u: np.exp(g * u + self.log_pdf(u)), lo, np.inf, limit=200
        )
        return float(val)

    def mgf_profile(self) -> MgfProfile:
        """gamma_hat = sup{gamma: phi(gamma) < inf} with phi(gamma_hat)."""
        fam = self.family
        if fam in ("pareto", "lognormal"):
            return MgfProfile(0.0, 1.0, self.mgf)
        if fam == "weibull":
            shape, scale = self.params
            if shape < 1.0:
                return MgfProfile(0.0, 1.0, self.mgf)
            if shape == 1.0:
                return MgfProfile(1.0 / scale, np.inf, self.mgf)
            return MgfProfile(np.inf, np.inf, self.mgf)
        if fam == "exponential":
            return MgfProfile(self.params[0], np.inf, self.mgf)
        if fam == "polyexp":
            rate = self.params[1]
            return MgfProfile(rate, self.mgf(rate), self.mgf)
        return MgfProfile(np.inf, np.inf, self.mgf)  # point

    # -- sampling ---------------------------------------------------------------

    def quantile(self, u):
        """Inverse cdf: smallest x with F(x) >= u."""
        u = np.asarray(u, dtype=np.float64)
        fam = self.family
        if fam == "pareto":
            alpha, scale = self.params
            out = scale * np.power(1.0 - u, -1.0 / alpha)
        elif fam == "weibull":
            shape, scale = self.params
            out = scale * np.power(-np.log1p(-u), 1.0 / shape)
        elif fam == "lognormal":
            mu, sigma = self.params
            out = np.exp(mu + sigma * special.ndtri(u))
        elif fam == "exponential":
            out = -np.log1p(-u) / self.params[0]
        elif fam == "point":
            out = np.full_like(u, self.params[0])
        else:  # polyexp: invert the closed-form log tail numerically
            scalar = u.ndim == 0
            uu = np.atleast_1d(u)
            out = np.array([self._polyexp_quantile(float(v)) for v in uu])
            if scalar:
                out = out[0]
        out = out + self.shift
        return out if np.ndim(out) else float(out)

    def _polyexp_quantile(self, u: float) -> float:
        target = np.log1p(-u)  # log tail value sought
        lower = self.params[2]
        lo, hi = lower, lower * 2.0
        while self.log_tail(hi) > target:
            hi *= 2.0
            if hi > 1e300:
                raise NumericError("polyexp quantile bracket failed")
        return float(optimize.brentq(lambda x: self.log_tail(x) - target, lo, hi, xtol=1e-12, rtol=1e-14))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.quantile(rng.random(n))

    def tilted(self, gamma: float) -> "ParametricDist":
        """Exponential change of measure, for families where it stays closed form."""
        if gamma == 0.0:
            return self
        if self.shift != 0.0:
            raise ValueError("tilted sampling is only supported for unshifted families")
        fam = self.family
        if fam == "exponential":
            rate = self.params[0]
            if gamma >= rate:
                raise ValueError("tilt parameter must satisfy gamma < rate")
            return ParametricDist.exponential(rate - gamma)
        if fam == "polyexp":
            power, rate, lower = self.params
            if gamma > rate:
                raise ValueError("tilt parameter must satisfy gamma <= rate")
            if gamma == rate:
                # density ~ x^-power on [lower, inf): a Pareto with alpha = power-1
                return ParametricDist.pareto(power - 1.0, lower)
            return ParametricDist.polyexp(power, rate - gamma, lower)
        if fam == "point":
            return self
        raise ValueError(f"no closed-form tilt for family {fam!r}")

    def integrated_tail(self) -> "IntegratedTailDist":
        return IntegratedTailDist(self)


def classify_tail(dist) -> str:
    """'heavy' iff gamma_hat = 0, else 'light'.  Parametric input only."""
    if not isinstance(dist, ParametricDist):
        raise TypeError(
            "truncated numeric distributions are always light-tailed; "
            "classification requires a parametric tail"
        )
    return "heavy" if dist.mgf_profile().gamma_hat == 0.0 else "light"


def fractional_exp_moment_diverges(dist: ParametricDist, alpha: float) -> bool:
    """Whether E exp(c xi^alpha) = inf for every c > 0, for alpha in (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    fam = dist.family
    if fam in ("pareto", "lognormal"):
        return True
    if fam == "weibull":
        return alpha > dist.params[0]
    return False  # exponential, polyexp, point


@dataclass(frozen=True)
class IntegratedTailDist:
    """Integrated-tail distribution: tail(x) = min(1, integral_x^inf tail_F(y) dy)."""

    base: ParametricDist

    def __post_init__(self):
        if not np.isfinite(self.base.mean()):
            raise ValueError("integrated tail requires a finite mean")

    def _partial_mean(self, x):
        """integral_x^inf tail_F(y) dy = E (xi - x)^+, elementwise."""
        base = self.base
        x = np.asarray(x, dtype=np.float64)
        y = x - base.shift
        fam = base.family
        lo = base.support_low - base.shift
        if fam == "pareto":
            alpha, scale = base.params
            yy = np.maximum(y, scale)
            above = scale**alpha * yy ** (1.0 - alpha) / (alpha - 1.0)
        elif fam == "weibull":
            shape, scale = base.params
            yy = np.maximum(y, 0.0)
            t = np.power(yy / scale, shape)
            above = (scale / shape) * special.gamma(1.0 / shape) * special.gammaincc(1.0 / shape, t)
        elif fam == "lognormal":
            mu, sigma = base.params
            yy = np.maximum(y, 1e-300)
            d = (np.log(yy) - mu) / sigma
            above = np.exp(mu + 0.5 * sigma**2) * stats.norm.sf(d - sigma) - yy * stats.norm.sf(d)
        elif fam == "exponential":
            (rate,) = base.params
            yy = np.maximum(y, 0.0)
            above = np.exp(-rate * yy) / rate
        elif fam == "polyexp":
            power, rate, lower = base.params
            yy = np.maximum(y, lower)
            z = rate * yy
            la = _log_expn(power - 1, z)
            lb = _log_expn(power, z)
            with np.errstate(invalid="ignore"):
                small = z <= 600.0
                diff_small = special.expn(power - 1, np.where(small, z, 1.0)) - special.expn(
                    power, np.where(small, z, 1.0)
                )
                log_diff = np.where(
                    small,
                    np.log(np.maximum(diff_small, 5e-324)),
                    la + log1mexp(np.maximum(la - lb, 1e-300)),
                )
            above = np.exp((2.0 - power) * np.log(yy) + log_diff - base._polyexp_log_norm)
        elif fam == "point":
            above = np.maximum(base.params[0] - np.maximum(y, base.params[0]), 0.0)
        mean_above_lo = base.mean() - base.shift - lo
        out = np.where(y <= lo, mean_above_lo + (lo - y), above)
        return out if out.ndim else float(out)

    def tail(self, x):
        out = np.minimum(1.0, self._partial_mean(x))
        return out if np.ndim(out) else float(out)

    def log_tail(self, x):
        with np.errstate(divide="ignore"):
            out = np.minimum(0.0, np.log(self._partial_mean(x)))
        return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# counting distributions
# ---------------------------------------------------------------------------

_HARD_TRUNCATION_CAP = 1_000_000


@dataclass(frozen=True)
class CountingDist:
    """Law of the stopping count tau on {0, 1, 2, ...} with finite mean."""

    kind: str
    param: float = 0.0
    probs: Optional[np.ndarray] = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def geometric(cls, p: float) -> "CountingDist":
        """q_k = (1-p) p^k on {0, 1, ...}; mean p/(1-p)."""
        if not 0.0 < p < 1.0:
            raise ValueError("geometric needs 0 < p < 1")
        return cls("geometric", float(p))

    @classmethod
    def poisson(cls, t: float) -> "CountingDist":
        if t <= 0:
            raise ValueError("poisson needs t > 0")
        return cls("poisson", float(t))

    @classmethod
    def deterministic(cls, n: int) -> "CountingDist":
        if n < 0 or n != int(n):
            raise ValueError("deterministic needs an integer n >= 0")
        return cls("deterministic", float(int(n)))

    @classmethod
    def from_pmf(cls, probs, tol: float = 1e-12) -> "CountingDist":
        probs = np.ascontiguousarray(probs, dtype=np.float64)
        if probs.ndim != 1 or len(probs) == 0 or np.any(probs < 0):
            raise ValueError("pmf must be a nonnegative 1-D array")
        if abs(probs.sum() - 1.0) > tol:
            raise ValueError(f"pmf sums to {probs.sum()!r}, not 1 within {tol}")
        return cls("pmf", 0.0, probs)

    @property
    def label(self) -> str:
        if self.kind == "geometric":
            return f"geometric({self.param:g})"
        if self.kind == "poisson":
            return f"poisson({self.param:g})"
        if self.kind == "deterministic":
            return f"deterministic({int(self.param)})"
        return f"pmf(len={len(self.probs)})"

    # -- pmf / moments -------------------------------------------------------

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        if self.kind == "geometric":
            p = self.param
            return (1.0 - p) * p**k
        if self.kind == "poisson":
            return float(stats.poisson.pmf(k, self.param))
        if self.kind == "deterministic":
            return 1.0 if k == int(self.param) else 0.0
        return float(self.probs[k]) if k < len(self.probs) else 0.0

    def log_pmf_upto(self, n: int) -> np.ndarray:
        k = np.arange(n + 1)
        with np.errstate(divide="ignore"):
            if self.kind == "geometric":
                p = self.param
                return np.log1p(-p) + k * np.log(p)
            if self.kind == "poisson":
                return stats.poisson.logpmf(k, self.param)
            if self.kind == "deterministic":
                out = np.full(n + 1, -np.inf)
                idx = int(self.param)
                if idx <= n:
                    out[idx] = 0.0
                return out
            out = np.full(n + 1, -np.inf)
            m = min(n + 1, len(self.probs))
            out[:m] = np.log(np.maximum(self.probs[:m], 5e-324))
            out[:m][self.probs[:m] == 0.0] = -np.inf
            return out

    def sf(self, n: int) -> float:
        """P{tau > n}."""
        if n < 0:
            return 1.0
        if self.kind == "geometric":
            return self.param ** (n + 1)
        if self.kind == "poisson":
            return float(stats.poisson.sf(n, self.param))
        if self.kind == "deterministic":
            return 0.0 if n >= int(self.param) else 1.0
        return float(max(0.0, 1.0 - self.probs[: n + 1].sum()))

    def mean(self) -> float:
        if self.kind == "geometric":
            return self.param / (1.0 - self.param)
        if self.kind == "poisson":
            return self.param
        if self.kind == "deterministic":
            return self.param
        return float(np.arange(len(self.probs)) @ self.probs)

    def truncation_index(self, tol: float = 1e-12) -> int:
        """Smallest n with P{tau > n} <= tol."""
        if self.kind == "geometric":
            n = int(np.ceil(np.log(tol) / np.log(self.param))) - 1
            n = max(n, 0)
            while self.sf(n) > tol:
                n += 1
            if n > _HARD_TRUNCATION_CAP:
                raise NumericError(
                    f"counting tail not summable by n={_HARD_TRUNCATION_CAP}: "
                    f"achieved bound {self.sf(_HARD_TRUNCATION_CAP):.3e} > {tol:.3e}"
                )
            return n
        if self.kind == "poisson":
            # scipy's isf saturates around 1e-16; walk the tail for tighter tol
            n = int(stats.poisson.isf(max(tol, 1e-12), self.param)) + 1
            while self.sf(n) > tol:
                n += 1
                if n > _HARD_TRUNCATION_CAP:
                    raise NumericError(
                        f"counting tail not summable by n={_HARD_TRUNCATION_CAP}: "
                        f"achieved bound {self.sf(n):.3e} > {tol:.3e}"
                    )
            while n > 0 and self.sf(n - 1) <= tol:
                n -= 1
            return n
        if self.kind == "deterministic":
            return int(self.param)
        return len(self.probs) - 1

    # -- phi-weighted moments (phi = a scalar mgf value) ----------------------

    def phi_power_mean(self, phi: float) -> float:
        """E phi^tau; raises when the series diverges."""
        if phi < 0:
            raise ValueError("phi must be nonnegative")
        if self.kind == "geometric":
            p = self.param
            if p * phi >= 1.0:
                raise ValueError(
                    f"E phi^tau diverges: geometric requires p*phi < 1, got {p * phi:.6g}"
                )
            return (1.0 - p) / (1.0 - p * phi)
        if self.kind == "poisson":
            return float(np.exp(self.param * (phi - 1.0)))
        if self.kind == "deterministic":
            return phi ** int(self.param)
        k = np.arange(len(self.probs))
        return float(np.sum(self.probs * phi**k))

    def tau_phi_power_mean(self, phi: float) -> float:
        """E tau phi^(tau-1); raises when the series diverges."""
        if self.kind == "geometric":
            p = self.param
            if p * phi >= 1.0:
                raise ValueError(
                    f"E tau phi^(tau-1) diverges: geometric requires p*phi < 1, got {p * phi:.6g}"
                )
            return p * (1.0 - p) / (1.0 - p * phi) ** 2
        if self.kind == "poisson":
            return self.param * float(np.exp(self.param * (phi - 1.0)))
        if self.kind == "deterministic":
            n = int(self.param)
            if n == 0:
                return 0.0
            return n * phi ** (n - 1)
        k = np.arange(len(self.probs))
        with np.errstate(divide="ignore"):
            return float(np.sum(k[1:] * self.probs[1:] * phi ** (k[1:] - 1.0)))

    def tilted(self, phi: float) -> "CountingDist":
        """Law of nu with P{nu = k} = phi^k P{tau = k} / E phi^tau."""
        norm = self.phi_power_mean(phi)  # validates convergence
        if self.kind == "geometric":
            return CountingDist.geometric(self.param * phi)
        if self.kind == "poisson":
            return CountingDist.poisson(self.param * phi)
        if self.kind == "deterministic":
            return self
        k = np.arange(len(self.probs))
        return CountingDist.from_pmf(self.probs * phi**k / norm, tol=1e-9)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "geometric":
            return rng.geometric(1.0 - self.param, size=n) - 1
        if self.kind == "poisson":
            return rng.poisson(self.param, size=n)
        if self.kind == "deterministic":
            return np.full(n, int(self.param), dtype=np.int64)
        return rng.choice(len(self.probs), size=n, p=self.probs)
