"""Command-line front end: kernel/psi/price evaluation, FD solves, MC runs,
and validation suites, with CSV/JSON artifacts.

Config precedence is CLI flag > config file > default; a config key that
conflicts with an explicit flag is reported to stderr, never silently
resolved.  Re-running with the same config and seed reproduces CSV bodies
byte for byte (the timestamp lives in a leading comment line).
"""
from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from typing import Sequence

import numpy as np

from .control import ControlEndpoints, psi, psi_bruteforce, psi_direct
from .fd import (CoefficientField, GridSpec, approximate_fundamental_solution,
                 save_grid)
from .geometry import EventPoint, GeometryKind
from .kernels import (KernelParams, gamma_k, gamma_k_array, gamma_k_mass,
                      gamma_l1, gamma_l1_mass, gamma_l_lambda)
from .mc import Averaging, McConfig, ModelSpec, mc_price, simulate_terminal
from .pricing import (GammaKEvaluator, GammaLEvaluator, GrowthBound,
                      PricingSpec, arithmetic_call_payoff,
                      geometric_call_payoff, make_arithmetic_problem, price,
                      transform_geometric)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2


def _parse_point(text: str, key: str) -> EventPoint:
    try:
        x, y, t = (float(v) for v in text.split(","))
    except ValueError:
        raise SystemExit(_usage_error(f"{key} must be 'x,y,t', got {text!r}"))
    return EventPoint(x, y, t)


def _usage_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _load_config(path: str) -> dict[str, str]:
    cfg = {}
    try:
        with open(path) as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise SystemExit(_usage_error(
                        f"{path}:{line_no}: expected key=value, got {line!r}"
                    ))
                k, v = line.split("=", 1)
                cfg[k.strip()] = v.strip()
    except FileNotFoundError:
        raise SystemExit(_usage_error(f"config file not found: {path}"))
    return cfg


def _merge_config(args: argparse.Namespace, parser_defaults: dict) -> None:
    """Apply config-file values for keys the CLI left at their defaults."""
    if not getattr(args, "config", None):
        return
    cfg = _load_config(args.config)
    for key, raw in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise SystemExit(_usage_error(
                f"unknown config key {key!r} in {args.config}"
            ))
        default = parser_defaults.get(attr)
        current = getattr(args, attr)
        if current != default:
            if str(current) != raw:
                print(f"config conflict: --{key} given as {current!r} on the "
                      f"command line, {raw!r} in {args.config}; "
                      "using the command line", file=sys.stderr)
            continue
        typ = type(default) if default is not None else str
        setattr(args, attr, typ(raw) if typ is not bool
                else raw.lower() in ("1", "true", "yes"))


def _write_csv(path: str | None, header: Sequence[str],
               rows: Sequence[Sequence]) -> None:
    lines = ["# created " + datetime.datetime.now().isoformat()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float)
                              else str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_kernel(args) -> int:
    z = _parse_point(args.point, "--point")
    pole = _parse_point(args.pole, "--pole")
    if args.kind == "k":
        val = gamma_k(KernelParams(args.lam), z, pole)
        err = 0.0
    else:
        res = gamma_l_lambda(KernelParams(args.lam), z, pole, args.tol)
        val, err = res.value, res.abs_error_estimate
    print(f"{float(val)!r}")
    if args.output:
        _write_csv(args.output,
                   ["kind", "lambda", "point", "pole", "value", "abs_error"],
                   [[args.kind, args.lam, args.point, args.pole, val, err]])
    return EXIT_OK


def _cmd_psi(args) -> int:
    start = _parse_point(args.start, "--start")
    end = _parse_point(args.end, "--end")
    ep = ControlEndpoints(start=start, end=end)
    value = psi(ep)
    print(f"{float(value.cost)!r} branch={value.branch.value} E={float(value.E)!r}")
    if args.output:
        _write_csv(args.output, ["start", "end", "cost", "branch", "E"],
                   [[args.start, args.end, value.cost, value.branch.value,
                     value.E]])
    return EXIT_OK


def _cmd_price(args) -> int:
    sigma, rate, strike, T = args.sigma, args.rate, args.strike, args.maturity
    lam = 0.5 * sigma * sigma
    if args.kind == "geometric":
        spec = PricingSpec(payoff=geometric_call_payoff(strike, T),
                           kind=Averaging.GEOMETRIC, strike=strike,
                           maturity=T, sigma=sigma, rate=rate,
                           growth=GrowthBound(M=1.0, C=1.5 / T, alpha=1.0),
                           kink_lines=(T * math.log(strike),))
        problem = transform_geometric(spec, sigma, rate)
        point = EventPoint(math.log(args.spot), 0.0, T)
        evaluator = GammaKEvaluator(lam)
        model = ModelSpec(mu=rate - lam, sigma=sigma, r=rate,
                          averaging=Averaging.GEOMETRIC)
    else:
        spec = PricingSpec(payoff=arithmetic_call_payoff(strike, T),
                           kind=Averaging.ARITHMETIC, strike=strike,
                           maturity=T, sigma=sigma, rate=rate,
                           growth=GrowthBound(M=2.0 + 2.0 / T,
                                              C=1.0 / T, alpha=1.0),
                           kink_lines=(T * strike,))
        problem = make_arithmetic_problem(spec)
        point = EventPoint(args.spot, 0.0, T)
        evaluator = GammaLEvaluator(lam)
        model = ModelSpec(mu=0.0, sigma=sigma, r=0.0,
                          averaging=Averaging.ARITHMETIC)
    if args.method == "kernel":
        res = price(evaluator, problem, point, tol=args.tol)
        est, err = res.value, res.abs_error_estimate
    else:
        cfg = McConfig(n_paths=args.paths, n_steps=args.steps, seed=args.seed)
        est, err = mc_price(model, spec.payoff, (args.spot, 0.0, 0.0), T, cfg)
    spec_hash = f"{args.kind}:{sigma}:{rate}:{strike}:{T}:{args.spot}"
    print(f"{float(est)!r}")
    _write_csv(args.output,
               ["spec", "price", "error", "method"],
               [[spec_hash, est, err, args.method]])
    return EXIT_OK


def _cmd_fd_solve(args) -> int:
    kind = GeometryKind.K if args.kind == "k" else GeometryKind.L
    xr = tuple(float(v) for v in args.xrange.split(","))
    yr = tuple(float(v) for v in args.yrange.split(","))
    tr = tuple(float(v) for v in args.trange.split(","))
    field = CoefficientField.constant(args.lam, kind=kind)
    grid = GridSpec(x_range=xr, y_range=yr, t_range=tr, nx=args.nx,
                    ny=args.ny, nt=args.nt, kind=kind)
    pole = _parse_point(args.pole, "--pole")
    sol = approximate_fundamental_solution(field, pole, grid,
                                           delta_width=args.delta_width,
                                           store="final")
    save_grid(sol, args.out)
    print(f"wrote {args.out} (final mass {float(sol.mass_history[-1])!r})")
    return EXIT_OK


def _cmd_mc(args) -> int:
    model = ModelSpec(mu=args.mu, sigma=args.sigma, r=args.rate,
                      averaging=Averaging.GEOMETRIC
                      if args.kind == "geometric" else Averaging.ARITHMETIC)
    cfg = McConfig(n_paths=args.paths, n_steps=args.steps, seed=args.seed,
                   antithetic=args.antithetic)
    samples = simulate_terminal(model, (args.spot, 0.0), args.horizon, cfg)
    rows = [["mean_S", float(np.mean(samples.s))],
            ["se_S", float(np.std(samples.s) / math.sqrt(args.paths))],
            ["mean_A", float(np.mean(samples.a))],
            ["se_A", float(np.std(samples.a) / math.sqrt(args.paths))]]
    _write_csv(args.output, ["quantity", "value"], rows)
    return EXIT_OK


# -- validation suites -------------------------------------------------------

def _suite_normalization(tol: float):
    rows = []
    for lam in (0.5, 1.0, 2.0):
        for dt in (0.1, 1.0):
            mass = gamma_k_mass(KernelParams(lam),
                                EventPoint(0.2, -0.1, dt), 0.0)
            rows.append([f"k_mass_lam{lam}_dt{dt}", mass, 1.0,
                         abs(mass - 1.0), abs(mass - 1.0) <= tol])
    mass_l = gamma_l1_mass(EventPoint(1.0, 0.0, 1.0), 0.0).value
    rows.append(["l1_mass_(1,0,1)", mass_l, 1.0, abs(mass_l - 1.0),
                 abs(mass_l - 1.0) <= max(tol, 1e-3)])
    return rows


def _suite_reproduction(tol: float):
    lam = 1.0
    t0, tau, t = 0.0, 0.5, 1.0
    xe = np.linspace(-6.0, 6.0, 121)
    ye = np.linspace(-4.0, 4.0, 121)
    from ._quadrature import panel_nodes, uniform_edges
    xn, xw = panel_nodes(uniform_edges(-7.0, 7.0, 0.5), 12)
    yn, yw = panel_nodes(uniform_edges(-5.0, 5.0, 0.25), 12)
    XX = np.repeat(xn, yn.size)
    YY = np.tile(yn, xn.size)
    WW = np.repeat(xw, yn.size) * np.tile(yw, xn.size)
    inner = gamma_k_array(lam, XX, YY, tau, 0.0, 0.0, t0)
    rows = []
    worst = 0.0
    for x in np.linspace(-2.0, 2.0, 9):
        for y in np.linspace(-1.5, 1.5, 9):
            direct = float(gamma_k_array(lam, x, y, t, 0.0, 0.0, t0))
            outer = gamma_k_array(lam, x, y, t, XX, YY, tau)
            composed = float(np.dot(WW, outer * inner))
            worst = max(worst, abs(composed - direct))
    rows.append(["k_reproduction_max_abs", worst, 0.0, worst, worst <= tol])
    return rows


def _suite_psi(tol: float):
    rows = []
    for (x, y, t) in [(1.0, -2.0, 2.0), (1.0, -1.0, 2.0), (4.0, -2.0, 1.0)]:
        closed = psi(ControlEndpoints(start=EventPoint(x, y, t),
                                      end=EventPoint(1.0, 0.0, 0.0))).cost
        brute = psi_bruteforce(
            ControlEndpoints(start=EventPoint(x, y, t),
                             end=EventPoint(1.0, 0.0, 0.0)),
            n_steps=32, iterations=200)
        gap = brute - closed
        ok = -1e-9 <= gap <= max(0.02 * closed, 1e-6)
        rows.append([f"psi_({x},{y},{t})", closed, brute, gap, ok])
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        x0, x1 = rng.uniform(0.5, 2.0, 2)
        t0 = rng.uniform(0.0, 1.0)
        t1 = t0 + rng.uniform(0.2, 2.0)
        y0 = rng.uniform(-1.0, 1.0)
        y1 = y0 - rng.uniform(0.1, 2.0)
        ep = ControlEndpoints(start=EventPoint(x1, y1, t1),
                              end=EventPoint(x0, y0, t0))
        a, b = psi(ep).cost, psi_direct(ep).cost
        if max(a, b) > 0:
            worst = max(worst, abs(a - b) / max(a, b))
    rows.append(["psi_invariance_rel", worst, 0.0, worst, worst <= 1e-10])
    return rows


def _suite_mass_band(tol: float):
    lam, Lam = 0.5, 1.5

    def a_fn(x, y, t):
        return lam + (Lam - lam) / (1.0 + x**2 + y**2)

    def b_fn(x, y, t):
        return 0.1 * np.sin(x)

    field = CoefficientField(a=a_fn, b=b_fn, r=0.0, lam=lam, Lam=Lam)
    grid = GridSpec(x_range=(-5.0, 7.0), y_range=(-1.5, 2.5),
                    t_range=(0.0, 0.75), nx=129, ny=129, nt=192)
    sol = approximate_fundamental_solution(field, EventPoint(2.0, 0.8, 0.0),
                                           grid, delta_width=2.5)
    dt = 0.75
    mass = float(sol.mass_history[-1])
    lo, hi = math.exp(-Lam * dt) * (1 - 0.02), math.exp(Lam * dt) * (1 + 0.02)
    return [["fd_mass_band", mass, 1.0, abs(mass - 1.0),
             lo <= mass <= hi]]


_SUITES = {
    "normalization": _suite_normalization,
    "reproduction": _suite_reproduction,
    "psi": _suite_psi,
    "mass-band": _suite_mass_band,
}


def _cmd_validate(args) -> int:
    if args.suite not in _SUITES:
        return _usage_error(
            f"--suite must be one of {sorted(_SUITES)}, got {args.suite!r}"
        )
    rows = _SUITES[args.suite](args.tol)
    _write_csv(args.output, ["case", "value", "target", "discrepancy", "pass"],
               rows)
    failures = [r[0] for r in rows if not r[-1]]
    if failures:
        report = {"suite": args.suite, "tol": args.tol, "failed": failures,
                  "n_cases": len(rows)}
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


# ---------------------------------------------------------------------------

_CSV_HELP = {
    "kernel": "columns: kind, lambda, point, pole, value, abs_error",
    "psi": "columns: start, end, cost, branch, E",
    "price": "columns: spec (kind:sigma:rate:strike:T:spot), price, error, "
             "method",
    "mc": "columns: quantity (mean_S|se_S|mean_A|se_A), value",
    "validate": "columns: case, value, target, discrepancy, pass",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="asianpde",
        description="Kernels, control values, FD solves, MC runs and "
                    "validation suites for averaged-payoff option models.",
        epilog="CSV artifacts start with one '# created <timestamp>' comment "
               "line; bodies are byte-identical across reruns with the same "
               "config and seed. " + "; ".join(
                   f"{k}: {v}" for k, v in sorted(_CSV_HELP.items())),
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="key=value config file; CLI flags "
                                         "take precedence, conflicts are "
                                         "reported")
        sp.add_argument("--output", default=None,
                        help="CSV artifact path (stdout when omitted)")
        sp.add_argument("--seed", type=int, default=0,
                        help="seed for any randomized work")

    sp = sub.add_parser("kernel", help="evaluate a closed-form kernel; "
                                       + _CSV_HELP["kernel"])
    sp.add_argument("--kind", choices=["k", "l"], required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0,
                    help="diffusion constant sigma^2/2")
    sp.add_argument("--point", required=True, help="evaluation point x,y,t")
    sp.add_argument("--pole", required=True, help="pole xi,eta,tau")
    sp.add_argument("--tol", type=float, default=1e-8)
    add_common(sp)
    sp.set_defaults(func=_cmd_kernel)

    sp = sub.add_parser("psi", help="optimal-control value; "
                                    + _CSV_HELP["psi"])
    sp.add_argument("--start", required=True, help="start point x,y,t")
    sp.add_argument("--end", required=True, help="end point x,y,t")
    add_common(sp)
    sp.set_defaults(func=_cmd_psi)

    sp = sub.add_parser("price", help="averaged-payoff call price; "
                                      + _CSV_HELP["price"])
    sp.add_argument("--kind", choices=["geometric", "arithmetic"],
                    required=True)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--rate", type=float, default=0.0)
    sp.add_argument("--strike", type=float, default=1.0)
    sp.add_argument("--maturity", type=float, default=1.0)
    sp.add_argument("--spot", type=float, default=1.0)
    sp.add_argument("--method", choices=["kernel", "mc"], default="kernel")
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--steps", type=int, default=256)
    sp.add_argument("--tol", type=float, default=1e-6)
    add_common(sp)
    sp.set_defaults(func=_cmd_price)

    sp = sub.add_parser("fd-solve", help="finite-difference kernel slice to "
                                         "a binary grid file")
    sp.add_argument("--kind", choices=["k", "l"], default="k")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--xrange", default="-4,4")
    sp.add_argument("--yrange", default="-1.2,1.2")
    sp.add_argument("--trange", default="0,0.5")
    sp.add_argument("--nx", type=int, default=129)
    sp.add_argument("--ny", type=int, default=129)
    sp.add_argument("--nt", type=int, default=128)
    sp.add_argument("--pole", default="0,0,0")
    sp.add_argument("--delta-width", dest="delta_width", type=float,
                    default=3.0)
    sp.add_argument("--out", required=True)
    add_common(sp)
    sp.set_defaults(func=_cmd_fd_solve)

    sp = sub.add_parser("mc", help="simulate terminal samples; "
                                   + _CSV_HELP["mc"])
    sp.add_argument("--kind", choices=["geometric", "arithmetic"],
                    default="arithmetic")
    sp.add_argument("--mu", type=float, default=0.0,
                    help="exponent drift of the log price")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--rate", type=float, default=0.0)
    sp.add_argument("--spot", type=float, default=1.0)
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--steps", type=int, default=256)
    sp.add_argument("--antithetic", action="store_true")
    add_common(sp)
    sp.set_defaults(func=_cmd_mc)

    sp = sub.add_parser("validate", help="run a validation suite; exit 2 on "
                                         "failure with a JSON report; "
                                         + _CSV_HELP["validate"])
    sp.add_argument("--suite", required=True,
                    help=f"one of {sorted(_SUITES)}")
    sp.add_argument("--tol", type=float, default=1e-4)
    add_common(sp)
    sp.set_defaults(func=_cmd_validate)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    defaults = {a.dest: a.default
                for sp in parser._subparsers._group_actions
                for a in sp.choices[args.command]._actions}
    try:
        _merge_config(args, defaults)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
