"""Command-line interface: ``hierlat <subcommand> ...``.

Exit status is 0 on success or pass, 1 when a checked property or rate
verdict fails (or a run aborts), and 2 for usage or configuration errors.
Floats are printed with 17 significant digits.
"""
from __future__ import annotations

import argparse
import re
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .averaging import check_averaging
from .config import ExperimentConfig, load_config, parse_list, parse_number
from .dist import DiscreteDist
from .engine import fit_rate, iterate_pools, level_stats
from .errors import FitError, HierlatError
from .rates import (
    diamond_rates,
    estimate_limit_mean,
    rate_report,
    side_weighted_family,
    t_family,
)
from .zerobias import check_normal_bound, couple_comonotone, y_star_coupling, zero_bias_exact

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SIM_COLUMNS = "n,c_n,sigma_n,d_n,z_var_ratio,phi_n"
SWEEP_COLUMNS = "param,w1,w2,w3,w4,lambda,phi"


class UsageError(Exception):
    pass


class _setup:
    """Turn package errors raised while reading inputs into usage errors."""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, HierlatError) and isinstance(exc, ValueError):
            raise UsageError(str(exc)) from exc
        return False


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _kv(out, key: str, value) -> None:
    if isinstance(value, float):
        value = _fmt(value)
    out.write(f"{key} = {value}\n")


# ----------------------------------------------------------------------
# Config resolution


def _combiner_overrides(args) -> Optional[dict]:
    kind = getattr(args, "combiner", None)
    if kind is None:
        if getattr(args, "diamond", False):
            kind = "diamond"
        elif getattr(args, "weights", None) is not None:
            kind = "diamond"
        else:
            return None
    tree = {"combiner": kind}
    if getattr(args, "weights", None) is not None:
        tree["weights"] = args.weights
    if getattr(args, "p", None) is not None:
        tree["p"] = args.p
    if getattr(args, "k", None) is not None:
        tree["k"] = str(args.k)
    return tree


def resolve_config(args, subcommand: str) -> ExperimentConfig:
    """Defaults, then ``--config``, then explicit flags."""
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    cfg.subcommand = subcommand
    tree = _combiner_overrides(args)
    if tree is not None:
        base = cfg.combiner if cfg.combiner.get("combiner") == tree["combiner"] else {}
        merged = dict(tree)
        for key in ("weights", "p", "k"):
            if key in base and key not in merged:
                merged[key] = base[key]
        cfg.combiner = merged
    for name in (
        "x0_atoms", "x0_probs", "x0_uniform", "levels", "pool_size", "mode", "seed",
        "workers", "output", "family", "grid", "box", "n_samples", "window", "slack",
    ):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "x0_atoms", None) is not None and getattr(args, "x0_uniform", None) is None:
        cfg.x0_uniform = ""
        if getattr(args, "x0_probs", None) is None:
            cfg.x0_probs = ""
    return cfg


# ----------------------------------------------------------------------
# Subcommands


def cmd_rates(args, out) -> int:
    with _setup():
        rep = _rates_report(args)
    if args.csv:
        if rep.weights is None:
            raise UsageError("--csv needs diamond weights")
        out.write("w1,w2,w3,w4,lambda,phi\n")
        out.write(",".join(_fmt(v) for v in (*rep.weights, rep.lam, rep.phi)) + "\n")
    else:
        for k, v in rep.as_dict().items():
            _kv(out, k, v)
        if rep.is_basis_multiple:
            _kv(out, "warning", "alpha is a multiple of a basis vector; phi = 1 means no contraction")
    return EXIT_OK if rep.bounds_ok else EXIT_FAIL


def _rates_report(args):
    cfg = resolve_config(args, "rates") if args.estimate_mean else None
    if args.alpha is not None:
        rep = rate_report(parse_list(args.alpha))
    elif args.t is not None:
        rep = diamond_rates(t_family(parse_number(args.t)))
    elif args.side is not None:
        rep = diamond_rates(side_weighted_family(parse_number(args.side)))
    elif args.estimate_mean:
        c = cfg.build_combiner()
        # the simulation default of 8 levels is too few for the mean to settle
        extra = {} if args.levels is None else {"max_levels": args.levels}
        cbar, _ = estimate_limit_mean(
            c, cfg.build_x0(), pool_size=cfg.pool_size, seed=cfg.seed, **extra
        )
        rep = rate_report(c.gradient(np.full(c.arity, cbar)), c=cbar)
    elif args.diamond or args.weights is not None:
        rep = diamond_rates(parse_list(args.weights or "1,1,1,1"))
    else:
        raise UsageError("rates needs one of --diamond/-w, --alpha, --t, --side, --estimate-mean")
    return rep


def _grid(args) -> list:
    if args.grid is not None:
        return [t for t in (s.strip() for s in args.grid.split(",")) if t]
    if args.start is None and args.stop is None:
        return []
    if args.start is None or args.stop is None:
        raise UsageError("--start and --stop go together")
    return [_fmt(v) for v in np.linspace(float(args.start), float(args.stop), args.num)]


def cmd_sweep_diamond(args, out) -> int:
    family = {"side": side_weighted_family, "t": t_family}[args.family]
    out.write(f"# family = {args.family}\n")
    out.write(SWEEP_COLUMNS + "\n")
    for token in _grid(args):
        try:
            value = parse_number(token)
            rep = diamond_rates(family(value))
        except HierlatError as exc:
            out.write(f"# skipped {token}: {exc}\n")
            continue
        out.write(",".join([_fmt(value)] + [_fmt(v) for v in (*rep.weights, rep.lam, rep.phi)]) + "\n")
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    with _setup():
        cfg = resolve_config(args, "simulate")
        sim = cfg.sim_config()
        window = cfg.window_tuple()
        slack = parse_number(cfg.slack)
    dump_level = None
    if args.dump_pool is not None:
        dump_level = int(args.dump_pool[0])
        if not 0 <= dump_level <= sim.levels:
            raise UsageError(f"--dump-pool level must lie in [0, {sim.levels}]")

    sink = open(cfg.output, "w", encoding="utf-8") if cfg.output else out
    try:
        sink.write(cfg.header())
        sink.write(SIM_COLUMNS + "\n")
        stats = []
        for n, pool in enumerate(iterate_pools(sim)):
            st = level_stats(sim, pool, n)
            stats.append(st)
            sink.write(st.csv_row() + "\n")
            if n == dump_level:
                with open(args.dump_pool[1], "w", encoding="utf-8") as fh:
                    fh.write(st.w_samples.to_text())
        phi = stats[-1].phi_n
        try:
            fit = fit_rate(stats, window)
        except FitError as exc:
            sink.write(f"# fit = unavailable ({exc})\n# verdict = FAIL\n")
            return EXIT_FAIL
        ok = fit.gamma_hat <= phi + slack
        sink.write(f"# gamma_hat = {_fmt(fit.gamma_hat)}\n")
        sink.write(f"# fit_window = {fit.window[0]},{fit.window[1]}\n")
        sink.write(f"# noise_floor = {_fmt(fit.noise_floor)}\n")
        sink.write(f"# phi = {_fmt(phi)}\n")
        sink.write(f"# slack = {_fmt(slack)}\n")
        sink.write(f"# verdict = {'pass' if ok else 'FAIL'} (gamma_hat <= phi + slack)\n")
        return EXIT_OK if ok else EXIT_FAIL
    finally:
        if sink is not out:
            sink.close()


def cmd_check(args, out) -> int:
    with _setup():
        cfg = resolve_config(args, "check")
        c = cfg.build_combiner()
        box = parse_list(cfg.box)
        if box.size != 2:
            raise UsageError("--box needs 'a,b'")
        rep = check_averaging(c, tuple(box), cfg.n_samples, cfg.seed)
    out.write(rep.to_text())
    return EXIT_OK if rep.all_passed else EXIT_FAIL


def cmd_zerobias(args, out) -> int:
    with _setup():
        atoms = [parse_number(t) for t in args.atoms.split(",") if t.strip()]
        if args.probs:
            probs = [parse_number(t) for t in args.probs.split(",") if t.strip()]
        else:
            probs = [1.0 / len(atoms)] * len(atoms)
        w = DiscreteDist(atoms, probs)
        was_standard = abs(w.mean) <= 1e-12 and abs(w.var - 1.0) <= 1e-12
        ws = w if was_standard else w.standardized()
        pair = zero_bias_exact(ws)
        lem = check_normal_bound(ws)
        alpha = parse_list(args.alpha) if args.alpha is not None else None
    _kv(out, "atoms", ",".join(_fmt(a) for a in ws.atoms))
    _kv(out, "probs", ",".join(_fmt(p) for p in ws.probs))
    _kv(out, "standardized", "false" if was_standard else "true")
    _kv(out, "star_knots", ",".join(_fmt(t) for t in pair.star.knots))
    _kv(out, "star_densities", ",".join(_fmt(d) for d in pair.star.densities))
    _kv(out, "d_w_wstar", lem.d_to_star)
    _kv(out, "d_w_normal", lem.d_to_normal)
    _kv(out, "ratio", lem.ratio)
    _kv(out, "normal_bound", "pass" if lem.holds else "FAIL")
    cp = couple_comonotone(pair, args.n, args.seed)
    _kv(out, "coupling_n", str(cp.n))
    _kv(out, "coupling_mean_abs_diff", cp.mean_abs_diff)
    _kv(out, "coupling_stderr", cp.stderr)
    if alpha is not None:
        ys = y_star_coupling(alpha, pair, args.n, args.seed)
        _kv(out, "y_gap_mean", ys.mean_abs_diff)
        _kv(out, "y_gap_stderr", ys.stderr)
        _kv(out, "y_gap_expected", rate_report(alpha).phi * lem.d_to_star)
    return EXIT_OK if lem.holds else EXIT_FAIL


# ----------------------------------------------------------------------
# Parser


def _add_combiner_flags(p):
    p.add_argument("--combiner", choices=["diamond", "lp", "mean", "min", "projection", "identity"])
    p.add_argument("-w", "--weights", help="comma-separated weights; fractions such as 2/3 allowed")
    p.add_argument("--p", help="exponent of the L^p combiner")
    p.add_argument("--k", type=int, help="arity of mean/min")
    p.add_argument("--config", help="config file or output of a previous run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hierlat", description="Hierarchical sequence toolkit.")
    parser.add_argument("--version", action="version", version=f"hierlat {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("rates", help="rate constants lambda and phi")
    _add_combiner_flags(p)
    p.add_argument("--diamond", action="store_true", help="diamond conductance with -w weights")
    p.add_argument("--alpha", help="gradient vector")
    p.add_argument("--t", help="t-parameterized diamond family")
    p.add_argument("--side", help="side-weighted diamond family parameter")
    p.add_argument("--estimate-mean", action="store_true",
                   help="estimate the limit mean by simulation and use the gradient there")
    p.add_argument("--x0-atoms", dest="x0_atoms")
    p.add_argument("--x0-probs", dest="x0_probs")
    p.add_argument("--x0-uniform", dest="x0_uniform")
    p.add_argument("--levels", type=int)
    p.add_argument("--pool-size", dest="pool_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", action="store_true", help="print w1,w2,w3,w4,lambda,phi")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("sweep-diamond", help="phi along a one-parameter diamond family")
    p.add_argument("--family", choices=["side", "t"], required=True)
    p.add_argument("--grid", help="comma-separated parameter values")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--num", type=int, default=11)
    p.set_defaults(func=cmd_sweep_diamond)

    p = sub.add_parser("simulate", help="run the recursion and fit the decay rate")
    _add_combiner_flags(p)
    p.add_argument("--x0-atoms", dest="x0_atoms")
    p.add_argument("--x0-probs", dest="x0_probs")
    p.add_argument("--x0-uniform", dest="x0_uniform", help="'a,b' for X_0 uniform on [a, b]")
    p.add_argument("--levels", type=int)
    p.add_argument("--pool-size", dest="pool_size", type=int)
    p.add_argument("--mode", choices=["pooled", "exact_tree"])
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--window", help="fit window 'lo,hi'")
    p.add_argument("--slack", help="allowed excess of gamma_hat over phi")
    p.add_argument("-o", "--output")
    p.add_argument("--dump-pool", nargs=2, metavar=("N", "FILE"),
                   help="write the standardized level-N pool, one value per line")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="randomized averaging-axiom checker")
    _add_combiner_flags(p)
    p.add_argument("--box", help="sampling box 'a,b'")
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_check)

    for name in ("zerobias", "zerobias-demo"):
        p = sub.add_parser(name, help="zero-bias transform of a discrete law")
        p.add_argument("--atoms", required=True)
        p.add_argument("--probs")
        p.add_argument("--alpha", help="also sample the (Y, Y*) coupling for this gradient")
        p.add_argument("--n", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=cmd_zerobias)
    return parser


_NEGATIVE = re.compile(r"^-\.?\d")


def _attach_negative_values(argv: Sequence[str]) -> list:
    """Rewrite ``--atoms -1,1`` as ``--atoms=-1,1``.

    argparse only accepts a leading minus in a value when the whole token is
    a single number, which rules out lists such as ``-1,1``.
    """
    out: list = []
    for tok in argv:
        prev = out[-1] if out else ""
        if (
            _NEGATIVE.match(tok)
            and prev.startswith("-")
            and not _NEGATIVE.match(prev)
            and "=" not in prev
            and prev not in _FLAG_ONLY
        ):
            out[-1] = f"{prev}={tok}"
        else:
            out.append(tok)
    return out


_FLAG_ONLY = {"--diamond", "--csv", "--estimate-mean", "-h", "--help", "--version"}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    argv = _attach_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"hierlat: usage error: {exc}\n")
        return EXIT_USAGE
    except HierlatError as exc:
        sys.stderr.write(f"hierlat: error: {exc}\n")
        return EXIT_FAIL
    except OSError as exc:
        sys.stderr.write(f"hierlat: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
