"""Command-line front end.

Each subcommand runs one pipeline, writes its CSV artifacts, and appends a
``summary.txt`` of ``key=value`` lines carrying the measured plateau, the
theoretical constant, the certified bracket, and a pass/fail verdict at the
configured tolerance.  Identical flags (and seed) produce byte-identical
output files.

Exit codes: 0 success, 2 precondition/usage violation, 1 internal numeric
failure.
"""

import argparse
import os
import sys

import numpy as np

from ._logdomain import NumericError
from .applications import (
    GeometricCompoundSpec,
    LevySpec,
    branching_mean,
    compound_poisson_curve,
    infdiv_compose,
    subexp_diagnostic,
    supremum_from_ladder,
    supremum_ratio_curve,
)
from .concave import block_residuals, build_concave_weight, divergence_witness
from .convolve import liminf_estimate, tail_ratio_curve
from .dists import CountingDist, ParametricDist, classify_tail
from .lattice import discretize
from .simulate import sample_stopped_sum, simulate_supremum
from .tilt import compound_poisson_limit_constant, stopped_tail_limit_constant, tilt_identity_check


def parse_dist(text: str) -> ParametricDist:
    """family:params with an optional :shift tail, e.g. pareto:2,1:-3."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad distribution spec {text!r}; expected family:p1[,p2[,p3]][:shift]")
    family = parts[0].strip().lower()
    params = [float(v) for v in parts[1].split(",")]
    makers = {
        "pareto": ParametricDist.pareto,
        "weibull": ParametricDist.weibull,
        "lognormal": ParametricDist.lognormal,
        "exponential": ParametricDist.exponential,
        "polyexp": ParametricDist.polyexp,
        "point": ParametricDist.point,
    }
    if family not in makers:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(makers)}")
    dist = makers[family](*params)
    if len(parts) == 3:
        dist = dist.shifted(float(parts[2]))
    return dist


def parse_tau(text: str) -> CountingDist:
    """det:n | geom:p | poisson:t."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind in ("det", "deterministic"):
        return CountingDist.deterministic(int(arg))
    if kind in ("geom", "geometric"):
        return CountingDist.geometric(float(arg))
    if kind == "poisson":
        return CountingDist.poisson(float(arg))
    raise ValueError(f"unknown counting law {text!r}; expected det:n, geom:p or poisson:t")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_summary(out_dir: str, entries: dict) -> str:
    path = os.path.join(out_dir, "summary.txt")
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={_fmt(value)}\n")
    return path


def _summary_with_verdict(args, measured, theoretical, lo, hi, extra=None) -> dict:
    entries = {"subcommand": args.cmd}
    entries.update(extra or {})
    entries.update(
        measured=float(measured),
        theoretical=float(theoretical),
        bracket_lo=float(lo),
        bracket_hi=float(hi),
        tolerance=float(args.tol),
    )
    entries["pass"] = bool(
        abs(measured - theoretical) <= args.tol * abs(theoretical)
        and lo <= theoretical <= hi
    )
    return entries


def _grid(args, lo_default: float) -> np.ndarray:
    hi = args.xgrid_max if args.xgrid_max is not None else args.xmax / 4.0
    return np.geomspace(lo_default, hi, args.points)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _run_ratio(args) -> dict:
    dist = parse_dist(args.dist)
    tau = parse_tau(args.tau)
    theoretical = tau.mean()
    curve = tail_ratio_curve(
        dist, tau, step=args.step, x_max=args.xmax,
        x_grid=_grid(args, max(dist.support_low + 2 * args.step, 8 * args.step)),
        theoretical=theoretical,
    )
    curve.to_csv(os.path.join(args.out, "ratio.csv"))
    est = liminf_estimate(curve)
    return _summary_with_verdict(
        args, est.value, theoretical, est.lo, est.hi,
        {"dist": args.dist, "tau": args.tau},
    )


def _run_diagnose(args) -> dict:
    dist = parse_dist(args.dist)
    diag = subexp_diagnostic(
        dist, args.step, args.xmax,
        x_grid=_grid(args, max(dist.support_low + 2 * args.step, 8 * args.step)),
    )
    diag.conv_ratio.to_csv(os.path.join(args.out, "diagnose.csv"))
    with open(os.path.join(args.out, "longtail.csv"), "w") as fh:
        fh.write("x,ratio\n")
        for x, r in zip(diag.longtail_x, diag.longtail_ratio):
            fh.write(f"{float(x)!r},{float(r)!r}\n")
    est = liminf_estimate(diag.conv_ratio)
    entries = _summary_with_verdict(args, est.value, 2.0, est.lo, est.hi, {"dist": args.dist})
    entries["tail_class"] = classify_tail(dist)
    entries["longtail_last"] = float(diag.longtail_ratio[-1])
    return entries


def _run_build_h(args) -> dict:
    dist = parse_dist(args.dist)
    h = build_concave_weight(dist, args.delta, args.blocks)
    h.to_csv(os.path.join(args.out, "h.csv"))
    res = block_residuals(h, dist)
    witness_floor = min(
        divergence_witness(h, dist, n) for n in range(max(1, h.n_blocks - 2))
    )
    entries = {
        "subcommand": args.cmd,
        "dist": args.dist,
        "delta": float(args.delta),
        "blocks": int(args.blocks),
        "max_block_residual": float(np.abs(res).max()),
        "knots_geometric": bool(np.all(h.knots[1:] >= 2.0 ** np.arange(1, h.n_blocks + 1))),
        "slopes_decreasing": bool(np.all(np.diff(h.slopes) < 0)),
        "witness_floor": float(witness_floor),
        "measured": float(np.abs(res).max()),
        "theoretical": 0.0,
        "tolerance": float(args.tol),
    }
    entries["pass"] = bool(
        np.abs(res).max() < args.tol
        and entries["knots_geometric"]
        and entries["slopes_decreasing"]
        and witness_floor >= args.delta * (1 - 1e-6)
    )
    return entries


def _run_tilt_check(args) -> dict:
    dist = parse_dist(args.dist)
    tau = parse_tau(args.tau)
    f = discretize(dist, args.step, args.xmax, "up")
    xs = _grid(args, max(dist.support_low + 2 * args.step, 8 * args.step))
    lhs, rhs = tilt_identity_check(f, tau, args.gamma, xs)
    with open(os.path.join(args.out, "tiltcheck.csv"), "w") as fh:
        fh.write("x,lhs,rhs,rel_err\n")
        for x, a, b in zip(xs, lhs, rhs):
            rel = abs(a - b) / b if b > 0 else np.inf
            fh.write(f"{float(x)!r},{float(a)!r},{float(b)!r},{float(rel)!r}\n")
    rel = np.abs(lhs / rhs - 1.0)
    entries = {
        "subcommand": args.cmd,
        "dist": args.dist,
        "tau": args.tau,
        "gamma": float(args.gamma),
        "measured": float(rel.max()),
        "theoretical": 0.0,
        "tolerance": float(args.tol),
        "pass": bool(rel.max() <= args.tol),
    }
    return entries


def _run_pk(args) -> dict:
    ladder = parse_dist(args.dist)
    spec = GeometricCompoundSpec.from_parametric(ladder, args.p, args.step, args.xmax)
    M = supremum_from_ladder(spec, x_max=args.xmax)
    M.to_csv(os.path.join(args.out, "pk.csv"))
    measured = M.tail(0.0)
    return _summary_with_verdict(
        args, measured, args.p, measured, measured + M.remainder,
        {"dist": args.dist, "p": float(args.p)},
    )


def _run_cpoisson(args) -> dict:
    dist = parse_dist(args.dist)
    curve = compound_poisson_curve(
        dist, args.t, args.step, args.xmax,
        x_grid=_grid(args, max(dist.support_low + 2 * args.step, 8 * args.step)),
    )
    curve.to_csv(os.path.join(args.out, "cpoisson.csv"))
    est = liminf_estimate(curve)
    theoretical = curve.theoretical
    if theoretical is None:
        prof = dist.mgf_profile()
        theoretical = compound_poisson_limit_constant(args.t, prof.phi_at_hat)
    return _summary_with_verdict(
        args, est.value, theoretical, est.lo, est.hi,
        {"dist": args.dist, "t": float(args.t)},
    )


def _run_infdiv(args) -> dict:
    dist = parse_dist(args.dist)
    if args.small:
        pairs = [tuple(float(v) for v in chunk.split(":")) for chunk in args.small.split(",")]
        pts = np.array([p[0] for p in pairs])
        wts = np.array([p[1] for p in pairs])
    else:
        pts = np.empty(0)
        wts = np.empty(0)
    spec = LevySpec(args.drift, dist, args.mu, pts, wts)
    res = infdiv_compose(
        spec, args.step, args.xmax, x_grid=_grid(args, 2.0),
    )
    if res.degenerate:
        raise ValueError("big-jump intensity is zero: the tail ratio is undefined")
    res.curve.to_csv(os.path.join(args.out, "infdiv.csv"))
    est = liminf_estimate(res.curve)
    return _summary_with_verdict(
        args, est.value, 1.0, est.lo, est.hi,
        {"dist": args.dist, "mu": float(args.mu), "drift": float(args.drift)},
    )


def _run_branching(args) -> dict:
    dist = parse_dist(args.dist)
    curve = branching_mean(
        dist, args.A,
        _grid(args, max(dist.support_low + 2 * args.step, 8 * args.step)),
        args.step, args.xmax, n_max=args.nmax,
    )
    curve.to_csv(os.path.join(args.out, "branching.csv"))
    sel = curve.t >= curve.t[-1] / 10.0
    measured = float(curve.ratio[sel].min())
    lo = float((curve.ratio - curve.err_lo)[sel].min())
    hi = float((curve.ratio + curve.err_hi)[sel].min())
    return _summary_with_verdict(
        args, measured, curve.theoretical, lo, hi,
        {"dist": args.dist, "A": float(args.A), "remainder_bound": curve.remainder_bound},
    )


def _run_simulate(args) -> dict:
    dist = parse_dist(args.dist)
    entries = {"subcommand": args.cmd, "dist": args.dist, "seed": int(args.seed)}
    if args.mode == "supremum":
        sim = simulate_supremum(dist, args.paths, args.seed)
        x_lo = max(0.5, 2 * abs(dist.mean()))
        x_hi = max(float(np.quantile(sim.maxima, 0.999)) + 1.0, 4.0 * x_lo)
        xs = np.geomspace(x_lo, x_hi, args.points)
        sim.to_csv(os.path.join(args.out, "simulate.csv"), xs)
        curve = supremum_ratio_curve(dist, sim, xs)
        sel = curve.x >= curve.x[-1] / 10.0
        measured = float(curve.ratio[sel].min())
        lo = float((curve.ratio - 3 * curve.err_lo)[sel].min())
        hi = float((curve.ratio + 3 * curve.err_hi)[sel].min())
        entries.update(
            p_hat=float(sim.p_hat), p_stderr=float(sim.p_stderr),
            bias_bound=float(sim.bias_bound), paths=int(args.paths),
        )
        entries.update(
            measured=measured, theoretical=float(curve.theoretical),
            bracket_lo=lo, bracket_hi=hi, tolerance=float(args.tol),
        )
        entries["pass"] = bool(abs(measured - curve.theoretical) <= args.tol * curve.theoretical)
        return entries
    tau = parse_tau(args.tau)
    rng = np.random.default_rng(args.seed)
    emp = sample_stopped_sum(dist, tau, rng, args.paths)
    f = discretize(dist, args.step, args.xmax, "up")
    from .convolve import stopped_sum

    ss = stopped_sum(f, tau, x_max=args.xmax)
    xs = _grid(args, max(dist.support_low + 2 * args.step, 8 * args.step))
    emp.to_csv(os.path.join(args.out, "simulate.csv"), xs)
    z = []
    for x in xs:
        se = emp.stderr(x)
        if se > 0:
            z.append(abs(emp.tail(x) - ss.tail(x)) / se)
    measured = float(max(z)) if z else 0.0
    entries.update(tau=args.tau, paths=int(args.paths))
    entries.update(
        measured=measured, theoretical=0.0,
        bracket_lo=0.0, bracket_hi=measured, tolerance=float(args.tol),
    )
    entries["pass"] = bool(measured <= args.tol)
    return entries


_HANDLERS = {
    "ratio": _run_ratio,
    "diagnose": _run_diagnose,
    "build-h": _run_build_h,
    "tilt-check": _run_tilt_check,
    "pk": _run_pk,
    "cpoisson": _run_cpoisson,
    "infdiv": _run_infdiv,
    "branching": _run_branching,
    "simulate": _run_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stopsum",
        description="Tail asymptotics of randomly stopped sums: convolution "
        "pipelines, tilt identities, and Monte Carlo cross-checks.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, dist=True, grid=True):
        if dist:
            p.add_argument("--dist", required=True, help="family:params[:shift], e.g. pareto:2,1")
        if grid:
            p.add_argument("--step", type=float, default=0.25, help="lattice step")
            p.add_argument("--xmax", type=float, default=1024.0, help="lattice upper edge")
            p.add_argument("--xgrid-max", type=float, default=None, dest="xgrid_max",
                           help="top of the evaluation grid (default xmax/4)")
            p.add_argument("--points", type=int, default=48, help="evaluation grid size")
        p.add_argument("--tol", type=float, default=0.05, help="pass/fail tolerance")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--config", default=None, help="key=value defaults file (flags override)")

    p = sub.add_parser("ratio", help="stopped-sum tail ratio plateau vs E tau")
    p.add_argument("--tau", required=True, help="det:n | geom:p | poisson:t")
    common(p)

    p = sub.add_parser("diagnose", help="subexponentiality and long-tail diagnostics")
    common(p)

    p = sub.add_parser("build-h", help="construct the concave weight function")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--blocks", type=int, default=10)
    common(p, grid=False)
    p.set_defaults(tol=1e-9)

    p = sub.add_parser("tilt-check", help="exact tilted-tail identity check")
    p.add_argument("--tau", required=True)
    p.add_argument("--gamma", type=float, required=True)
    common(p)
    p.set_defaults(tol=1e-6)

    p = sub.add_parser("pk", help="supremum law from a ladder-height spec")
    p.add_argument("--p", type=float, required=True, help="defect P{M > 0}")
    common(p)

    p = sub.add_parser("cpoisson", help="compound Poisson tail ratio vs t e^{t(phi-1)}")
    p.add_argument("--t", type=float, required=True)
    common(p)

    p = sub.add_parser("infdiv", help="infinitely divisible tail vs jump measure")
    p.add_argument("--mu", type=float, required=True, help="big-jump intensity")
    p.add_argument("--drift", type=float, default=0.0)
    p.add_argument("--small", default="", help="small jumps as point:weight,point:weight,...")
    common(p)
    p.set_defaults(tol=0.10)

    p = sub.add_parser("branching", help="subcritical branching mean vs 1/(1-A)")
    p.add_argument("--A", type=float, required=True, help="mean offspring count, in (0,1)")
    p.add_argument("--nmax", type=int, default=None, help="series truncation")
    common(p)
    p.set_defaults(tol=0.10)

    p = sub.add_parser("simulate", help="Monte Carlo estimators")
    p.add_argument("--mode", choices=("supremum", "stopped"), default="supremum")
    p.add_argument("--tau", default="det:2", help="counting law for --mode stopped")
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(tol=0.15)

    return parser


def _apply_config(argv):
    """Expand `--config FILE` into `--key value` pairs placed before the flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValueError("--config needs a file path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2 :]
    injected = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            injected.extend([f"--{key.strip()}", value.strip()])
    # subcommand stays first; config flags precede explicit ones so flags win
    return rest[:1] + injected + rest[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(argv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        entries = _HANDLERS[args.cmd](args)
        path = write_summary(args.out, entries)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    for key, value in entries.items():
        print(f"{key}={_fmt(value)}")
    print(f"summary written to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
