"""Hot numeric kernels: lattice convolution and the random-walk walker.

Each kernel has a numba-compiled variant and a numpy/Python fallback; the
active one is chosen at import time by :mod:`stopsum._backend`.  The
convolution accumulates in the linear domain with Kahan compensation (mass
conservation to ~1e-15) and patches underflowed far-tail bins with a
log-sum-exp pass so tail values below ~1e-280 stay meaningful.
"""

import numpy as np

from ._backend import NUMBA_ENABLED, jit_kernel
from ._logdomain import LINEAR_FLOOR


# ---------------------------------------------------------------------------
# linear convolution
# ---------------------------------------------------------------------------

def _conv_linear_py(pa, pb, n_out):
    """out[k] = sum_{i+j=k, k < n_out} pa[i] pb[j]; spill = mass with k >= n_out."""
    full = np.convolve(pa, pb)
    out = full[:n_out].copy()
    spill = float(full[n_out:].sum())
    return out, spill


def _conv_linear_kernel(pa, pb, n_out):
    out = np.zeros(n_out, dtype=np.float64)
    comp = np.zeros(n_out, dtype=np.float64)
    spill = 0.0
    spill_c = 0.0
    na = pa.shape[0]
    nb = pb.shape[0]
    for i in range(na):
        ai = pa[i]
        if ai == 0.0:
            continue
        jmax = nb if i + nb <= n_out else max(0, n_out - i)
        for j in range(jmax):
            k = i + j
            y = ai * pb[j] - comp[k]
            t = out[k] + y
            comp[k] = (t - out[k]) - y
            out[k] = t
        for j in range(jmax, nb):
            y = ai * pb[j] - spill_c
            t = spill + y
            spill_c = (t - spill) - y
            spill = t
    return out, spill


if NUMBA_ENABLED:
    _conv_linear_nb = jit_kernel(_conv_linear_kernel)

    def conv_linear(pa, pb, n_out):
        return _conv_linear_nb(pa, pb, n_out)
else:
    conv_linear = _conv_linear_py


# ---------------------------------------------------------------------------
# log-domain repair of underflowed bins
# ---------------------------------------------------------------------------

def _conv_log_bins_py(la, lb, bins):
    na = la.shape[0]
    nb = lb.shape[0]
    out = np.empty(len(bins), dtype=np.float64)
    for pos, k in enumerate(bins):
        i_lo = max(0, k - nb + 1)
        i_hi = min(na - 1, k)
        if i_lo > i_hi:
            out[pos] = -np.inf
            continue
        terms = la[i_lo : i_hi + 1] + lb[k - np.arange(i_lo, i_hi + 1)]
        m = np.max(terms)
        out[pos] = -np.inf if m == -np.inf else m + np.log(np.sum(np.exp(terms - m)))
    return out


def _conv_log_bins_kernel(la, lb, bins):
    na = la.shape[0]
    nb = lb.shape[0]
    out = np.empty(bins.shape[0], dtype=np.float64)
    for pos in range(bins.shape[0]):
        k = bins[pos]
        i_lo = max(0, k - nb + 1)
        i_hi = min(na - 1, k)
        acc = -np.inf
        for i in range(i_lo, i_hi + 1):
            v = la[i] + lb[k - i]
            if v == -np.inf:
                continue
            if acc == -np.inf:
                acc = v
            elif v > acc:
                acc = v + np.log1p(np.exp(acc - v))
            else:
                acc = acc + np.log1p(np.exp(v - acc))
        out[pos] = acc
    return out


if NUMBA_ENABLED:
    _conv_log_bins_nb = jit_kernel(_conv_log_bins_kernel)

    def conv_log_bins(la, lb, bins):
        return _conv_log_bins_nb(la, lb, np.asarray(bins, dtype=np.int64))
else:
    def conv_log_bins(la, lb, bins):
        return _conv_log_bins_py(la, lb, np.asarray(bins, dtype=np.int64))


def conv_masses(pa, la, pb, lb, n_out):
    """Convolve mass vectors; returns (masses, log_masses, spill).

    Linear Kahan pass for everything, then bins whose linear value fell below
    ``LINEAR_FLOOR`` are recomputed with log-sum-exp so they keep full relative
    precision (or stay -inf when genuinely unreachable).
    """
    out, spill = conv_linear(pa, pb, n_out)
    with np.errstate(divide="ignore"):
        log_out = np.where(out > 0.0, np.log(np.maximum(out, 5e-324)), -np.inf)
    tiny = np.nonzero(out < LINEAR_FLOOR)[0]
    if len(tiny):
        log_out[tiny] = conv_log_bins(la, lb, tiny)
    return out, log_out, float(spill)


# ---------------------------------------------------------------------------
# random-walk supremum walker
# ---------------------------------------------------------------------------

# family ids understood by the walker
WALK_PARETO = 0
WALK_EXPONENTIAL = 1
WALK_POINT = 2


def _walker_impl(fam, par1, par2, shift, stop_gap, n_paths, seed, max_steps):
    """Simulate sup of the random walk, one path at a time (numba variant).

    A path stops once its position drops ``stop_gap`` below the running
    maximum.  Returns (maxima, first strict ascent value or nan, total steps).
    Deterministic per seed via the seeded MT19937 stream.
    """
    np.random.seed(seed)
    maxima = np.zeros(n_paths, dtype=np.float64)
    ascents = np.full(n_paths, np.nan, dtype=np.float64)
    steps = 0
    for p in range(n_paths):
        s = 0.0
        m = 0.0
        got_ascent = False
        n = 0
        while s > m - stop_gap and n < max_steps:
            u = np.random.random()
            if fam == 0:
                x = par2 * u ** (-1.0 / par1) + shift
            elif fam == 1:
                x = -np.log(u) / par1 + shift
            else:
                x = par1 + shift
            s += x
            if s > m:
                m = s
            if (not got_ascent) and s > 0.0:
                ascents[p] = s
                got_ascent = True
            n += 1
        maxima[p] = m
        steps += n
    return maxima, ascents, steps


def _walker_numpy(fam, par1, par2, shift, stop_gap, n_paths, seed, max_steps):
    """Vectorized walker: advances all live paths one step per iteration.

    Deterministic per seed, but the draw order differs from the numba variant,
    so results are reproducible per backend rather than across backends.
    """
    rng = np.random.default_rng(seed)
    s = np.zeros(n_paths)
    m = np.zeros(n_paths)
    ascents = np.full(n_paths, np.nan)
    active = np.arange(n_paths)
    steps = 0
    iters = 0
    while len(active) and iters < max_steps:
        u = rng.random(len(active))
        if fam == 0:
            x = par2 * u ** (-1.0 / par1) + shift
        elif fam == 1:
            x = -np.log(u) / par1 + shift
        else:
            x = np.full(len(active), par1 + shift)
        s_a = s[active] + x
        steps += len(active)
        fresh = np.isnan(ascents[active]) & (s_a > 0.0)
        ascents[active[fresh]] = s_a[fresh]
        m_a = np.maximum(m[active], s_a)
        s[active] = s_a
        m[active] = m_a
        active = active[s_a > m_a - stop_gap]
        iters += 1
    return m, ascents, steps


if NUMBA_ENABLED:
    walker = jit_kernel(_walker_impl)
else:
    walker = _walker_numpy
