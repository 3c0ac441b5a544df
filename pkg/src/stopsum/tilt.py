"""Exponential change of measure on lattices and the tail-limit constants.

Tilting a lattice is exact: g_i = exp(gamma x_i) f_i / phi(gamma), and the
companion counting law nu reweights tau by phi^k.  The remainder bucket
cannot be tilted faithfully, so its amplification exp(gamma x_max) rho is
carried as an error bound and tilts are rejected once it exceeds 1e-6 of the
mass; silent tail amplification is the classic tilting bug.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from ._logdomain import log1mexp
from .convolve import stopped_sum
from .dists import CountingDist
from .lattice import LatticeDist

_MAX_REMAINDER_AMPLIFICATION = 1e-6


@dataclass(frozen=True)
class TiltedPair:
    """Tilted summand distribution G and reweighted counting law nu."""

    gamma: float
    phi: float                      # lattice mgf at gamma (remainder weighted at x_max)
    dist: LatticeDist               # G
    counting: CountingDist          # nu
    phi_tau_mean: float             # E phi^tau
    remainder_amplification: float  # exp(gamma x_max) rho / phi, kept in G's remainder


def tilt(f: LatticeDist, tau: CountingDist, gamma: float) -> TiltedPair:
    """Exponential change of measure with parameter gamma.

    gamma = 0 is the identity.  Raises when E phi^tau diverges (for geometric
    tau this is p * phi >= 1) or when the remainder amplification makes the
    tilt uncertifiable.
    """
    log_phi = f.log_mgf(gamma)
    phi = float(np.exp(log_phi))
    if not np.isfinite(phi) or phi <= 0.0:
        raise ValueError(f"lattice mgf at gamma={gamma} is not finite and positive")
    log_g = f.log_masses + gamma * f.grid - log_phi
    g = np.exp(log_g)
    if f.remainder > 0.0:
        rem_g = float(np.exp(np.log(f.remainder) + gamma * f.x_max - log_phi))
    else:
        rem_g = 0.0
    if rem_g > _MAX_REMAINDER_AMPLIFICATION:
        raise ValueError(
            f"remainder amplification e^(gamma x_max) rho / phi = {rem_g:.3e} exceeds "
            f"{_MAX_REMAINDER_AMPLIFICATION:.0e}; enlarge x_max or reduce gamma"
        )
    # close the fp gap so grid + remainder is exactly a probability
    scale = g.sum() + rem_g
    g = g / scale
    log_g = log_g - np.log(scale)
    rem_g = rem_g / scale
    dist = LatticeDist(f.step, f.offset, g, rem_g, log_masses=log_g)
    nu = tau.tilted(phi)  # validates E phi^tau < inf
    return TiltedPair(
        gamma=float(gamma),
        phi=phi,
        dist=dist,
        counting=nu,
        phi_tau_mean=tau.phi_power_mean(phi),
        remainder_amplification=rem_g,
    )


def tilt_identity_check(
    f: LatticeDist,
    tau: CountingDist,
    gamma: float,
    xs,
    tol: float = 1e-18,
):
    """Both sides of the exact tilted-tail identity at each x in xs.

    lhs = tail of the nu-stopped sum of G at x, times E phi^tau;
    rhs = exp(gamma x) tail_{S_tau}(x) + sum over grid points above x of the
    stopped-sum masses weighted by (exp(gamma x_i) - exp(gamma x)).

    The identity is exact (not asymptotic): both sides equal
    sum_{x_i > x} exp(gamma x_i) s_i, but they are computed through two
    independent convolution runs (tilted versus plain).
    """
    pair = tilt(f, tau, gamma)
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    x_cap = f.x_max
    s_plain = stopped_sum(f, tau, x_max=x_cap, tol=tol)
    s_tilted = stopped_sum(pair.dist, pair.counting, x_max=x_cap, tol=tol)
    lhs = np.exp(s_tilted.log_tail(xs) + np.log(pair.phi_tau_mean))
    grid = s_plain.grid
    rhs = np.empty_like(xs)
    for j, x in enumerate(xs):
        above = grid > x + 1e-9 * s_plain.step
        direct = gamma * x + s_plain.log_tail(x)
        lm = s_plain.log_masses[above]
        if gamma > 0.0 and np.any(np.isfinite(lm)):
            integral_terms = lm + gamma * grid[above] + log1mexp(gamma * (grid[above] - x))
            m = np.max(integral_terms)
            integral = m + np.log(np.sum(np.exp(integral_terms - m))) if np.isfinite(m) else -np.inf
        else:
            integral = -np.inf
        rhs[j] = np.exp(np.logaddexp(direct, integral))
    return lhs, rhs


def stopped_tail_limit_constant(tau: CountingDist, phi_hat: float) -> float:
    """Limit constant E tau phi_hat^(tau-1) for the stopped-sum tail ratio.

    phi_hat = 1 reduces to E tau (the heavy-tailed case).  Raises when the
    series diverges, mirroring the moment hypothesis E (phi_hat + eps)^tau < inf.
    """
    if phi_hat < 1.0:
        raise ValueError("phi_hat must be >= 1")
    return tau.tau_phi_power_mean(phi_hat)


def compound_poisson_limit_constant(t: float, phi_hat: float) -> float:
    """Limit constant t exp(t (phi_hat - 1)) for compound Poisson tails."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    if phi_hat < 1.0:
        raise ValueError("phi_hat must be >= 1")
    return t * float(np.exp(t * (phi_hat - 1.0)))
