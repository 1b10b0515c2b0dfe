"""Command-line front end: ``chaoscum <command> <mode> [flags]``.

Exit codes: 0 ok, 2 usage or invalid parameters, 3 resource cap exceeded,
4 kernel file parse failure.

``--config FILE`` reads ``key = value`` lines (keys are flag names without the
leading dashes, ``-`` or ``_`` accepted); flags on the command line win.
``CHAOSCUM_SEED`` supplies the default seed when ``--seed`` is absent.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Sequence

from . import applications as app
from . import deviations as dev
from .cumulants import cumulant_report
from .diagrams import (
    CapExceededError,
    ENUMERATION_CAP,
    GroupedIndexSet,
    count_bounds,
    count_partitions,
    enumerate_partitions,
    matching_lower_bound,
    matching_number,
    multigraph_classes,
)
from .kernels import KernelParseError, SymmetricKernel, read_kernel
from .montecarlo import (
    RngSpec,
    chaos_sampler,
    draw,
    estimate_tail,
    fbm_variation_sampler,
    gaussian_sampler,
    hermite_sum_sampler,
    mdp_curve,
    mdp_trend,
    sample_fbm_increments,
)

EXIT_USAGE, EXIT_CAP, EXIT_PARSE = 2, 3, 4
SEED_ENV = "CHAOSCUM_SEED"


class UsageError(Exception):
    pass


# output -------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def render(records: list[dict], fmt: str) -> str:
    records = [_jsonable(r) for r in records]
    if fmt == "json":
        return json.dumps(records, indent=2, sort_keys=True) + "\n"
    keys: list[str] = []
    for r in records:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# commands ---------------------------------------------------------------------------


def cmd_diagrams(args) -> list[dict] | str:
    if args.m < 1 or (args.q < 2 and not getattr(args, "groups", None)):
        raise UsageError("need q >= 2 and m >= 1")
    if args.mode == "enum":
        groups = GroupedIndexSet(tuple(args.groups) if args.groups else (args.q,) * args.m)
        return "".join(f"{s}\n" for s in enumerate_partitions(groups, cap=args.cap))
    count = count_partitions(args.q, args.m, method=args.method, cap=args.cap)
    rec = {"q": args.q, "m": args.m, "count": count}
    if args.q >= 2 and args.m >= 3:
        b = count_bounds(args.q, args.m)
        rec.update(lower=b.lower, upper=b.upper, upper_holds=b.upper_holds(count))
        if count:
            rec["lower_holds"] = b.lower_holds(count)
    return [rec]


def cmd_matching(args) -> list[dict]:
    if args.q < 2 or args.m < 3:
        raise UsageError("matching bound needs q >= 2 and m >= 3")
    L = matching_lower_bound(args.q, args.m)
    classes = covered = 0
    low = None
    for g, w in multigraph_classes(args.q, args.m):
        mu = matching_number(g)
        low = mu if low is None else min(low, mu)
        classes += 1
        covered += w
    return [{"q": args.q, "m": args.m, "L": L, "min_matching": low, "multigraphs": classes,
             "partitions": covered, "holds": low is None or low >= L}]


def cmd_cumulant(args) -> list[dict]:
    if args.kernel:
        h = read_kernel(args.kernel)
    elif args.q and args.N:
        h = SymmetricKernel.hermite_sum(args.q, args.N)
    else:
        raise UsageError("give --kernel FILE or --q and --N for the normalised Hermite-sum kernel")
    orders = args.m
    if any(m < 1 for m in orders):
        raise UsageError("orders must be >= 1")
    samples = None
    rng = RngSpec(args.seed)
    if args.mode == "mc":
        if args.samples < 100:
            raise UsageError("--samples must be >= 100")
        samples = draw(chaos_sampler(h), args.samples, rng, workers=args.workers)
    reports = cumulant_report(h, orders, samples=samples, n_boot=args.boot,
                              rng=rng.generator(1 << 30), exact=args.mode == "exact" or args.with_exact)
    out = []
    for r in reports:
        d = r.to_dict()
        if samples is not None:
            d["rng"] = rng.to_dict()
        out.append(d)
    return out


def cmd_bounds(args) -> list[dict]:
    if args.mode == "delta":
        if (args.K is None) == (args.L is None):
            raise UsageError("give exactly one of --K or --L")
        p = dev.DeviationParams.from_K(args.q, args.K) if args.K is not None else dev.DeviationParams.from_L(args.q, args.L)
        return [{"name": "delta", "inputs": {"q": args.q, "K": args.K, "L": args.L},
                 "value": p.delta, "constants_flagged": [], **{"gamma": p.gamma, "alpha": str(p.alpha)}}]
    if args.z is None:
        raise UsageError("--z is required")
    if args.mode == "tail":
        v = dev.tail_bound(args.z, args.q, args.delta)
        return [dev.BoundRecord("tail", {"z": args.z, "q": args.q, "delta": args.delta}, v).to_dict()]
    if args.mode == "major":
        v = dev.major_bound(args.z, args.q, args.c)
        rec = dev.BoundRecord("major", {"z": args.z, "q": args.q, "c": args.c}, v, ("c",)).to_dict()
        rec["tail_bound_smaller"] = dev.tail_beats_major(args.z, args.q, args.delta, args.c)
        return [rec]
    if args.p is None:
        raise UsageError("--p is required for ratio")
    return [dev.ratio_diagnostic(args.p, args.z, args.q, args.delta, args.c).to_dict()]


def cmd_app(args) -> list[dict] | str:
    if args.mode == "sheet":
        return [app.BrownianSheetModel(args.d, args.n).table()]
    if args.mode == "bispectrum":
        if args.l:
            model = app.BispectrumModel(*args.l)
        else:
            raise UsageError("--l l1 l2 l3 is required")
        return [model.table()]
    model = app.FbmModel(args.H, args.n, args.c_H)
    if args.samples:
        rng = RngSpec(args.seed)
        X = sample_fbm_increments(model, rng.generator(0), 1)[0]
        buf = io.StringIO()
        buf.write("k,increment\n")
        for k, x in enumerate(X):
            buf.write(f"{k},{x!r}\n")
        return buf.getvalue()
    return [model.table()]


def _model_sampler(args, n):
    if args.model == "hermite-sum":
        return hermite_sum_sampler(args.q, int(n))
    if args.model == "gaussian":
        return gaussian_sampler(math.factorial(args.q))
    if args.model == "fbm":
        return fbm_variation_sampler(app.FbmModel(args.H, int(n)))
    if args.model == "chaos":
        if not args.kernel:
            raise UsageError("--kernel is required for model chaos")
        return chaos_sampler(read_kernel(args.kernel))
    raise UsageError(f"unknown model {args.model!r}")


def cmd_mc(args) -> list[dict]:
    if args.samples < 100:
        raise UsageError("--samples must be >= 100")
    rng = RngSpec(args.seed)
    if args.mode == "tail":
        sampler = _model_sampler(args, args.n[0])
        if args.model == "fbm":
            q, delta = 2, app.fbm_deviation(args.H, int(args.n[0])).delta
        elif args.model == "hermite-sum":
            q, delta = args.q, dev.delta_from_K(args.q, 1.0 / math.sqrt(args.n[0]))
        else:
            q, delta = args.q, args.delta
        out = []
        for i, z in enumerate(args.z):
            est = estimate_tail(sampler, z, args.samples, rng.with_stream(i), two_sided=args.two_sided,
                                workers=args.workers)
            rec = est.to_dict()
            rec["tail_bound"] = dev.tail_bound(z, q, delta)
            rec["violation"] = args.two_sided and est.ci_low > rec["tail_bound"]
            rec["status"] = "censored" if est.censored else "ok"
            out.append(rec)
        return out
    if args.a is None and args.a_exponent is None:
        raise UsageError("give --a values or --a-exponent")
    ns = args.n
    scales = dict(zip(ns, args.a)) if args.a else {n: n ** args.a_exponent for n in ns}
    if len(scales) != len(ns):
        raise UsageError("--a needs one value per --n")
    q = 2 if args.model == "fbm" else args.q
    cells = mdp_curve({n: _model_sampler(args, n) for n in ns}, scales, args.z, args.samples, q, rng,
                      workers=args.workers)
    trend = mdp_trend(cells)
    out = []
    for c in cells:
        rec = c.to_dict()
        rec["status"] = "censored" if c.censored else "ok"
        rec["trend"] = trend[c.z]
        rec["rng"] = rng.to_dict()
        out.append(rec)
    return out


# parser --------------------------------------------------------------------------------


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw else 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[tuple[str, str], argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="chaoscum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    leaves: dict[tuple[str, str], argparse.ArgumentParser] = {}

    def common(p, seed=False, workers=False):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--config", help="key=value config file")
        if seed:
            p.add_argument("--seed", type=int, default=_default_seed())
        if workers:
            p.add_argument("--workers", type=int, default=1)

    def leaf(cmd_parser, cmd, mode, func, help_):
        p = cmd_parser.add_parser(mode, help=help_)
        p.set_defaults(func=func, mode=mode)
        leaves[(cmd, mode)] = p
        return p

    d = sub.add_parser("diagrams", help="pair-partition classes").add_subparsers(dest="mode", required=True)
    for mode, help_ in (("count", "count |Pi(q[m])| with bounds"), ("enum", "list partitions")):
        p = leaf(d, "diagrams", mode, cmd_diagrams, help_)
        p.add_argument("--q", type=int, required=True)
        p.add_argument("--m", type=int, required=True)
        p.add_argument("--cap", type=int, default=ENUMERATION_CAP)
        if mode == "count":
            p.add_argument("--method", choices=("formula", "enumerate"), default="formula")
        else:
            p.add_argument("--groups", type=int, nargs="+", help="mixed group sizes (overrides q, m)")
        common(p)

    mt = sub.add_parser("matching", help="matching numbers of diagram multigraphs").add_subparsers(dest="mode", required=True)
    p = leaf(mt, "matching", "bound", cmd_matching, "check M(G) >= L(q, m) over all multigraphs")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    common(p)

    c = sub.add_parser("cumulant", help="cumulants of I_q(h)").add_subparsers(dest="mode", required=True)
    for mode in ("exact", "mc"):
        p = leaf(c, "cumulant", mode, cmd_cumulant, f"{mode} cumulants from a kernel file")
        p.add_argument("--kernel", help="kernel file")
        p.add_argument("--q", type=int, help="Hermite-sum order when no kernel file is given")
        p.add_argument("--N", type=int, help="Hermite-sum dimension when no kernel file is given")
        p.add_argument("--m", type=int, nargs="+", required=True)
        p.add_argument("--samples", type=int, default=100_000)
        p.add_argument("--boot", type=int, default=100)
        p.add_argument("--with-exact", action="store_true")
        common(p, seed=True, workers=True)

    b = sub.add_parser("bounds", help="deviation parameters and tail bounds").add_subparsers(dest="mode", required=True)
    for mode in ("delta", "tail", "major", "ratio"):
        p = leaf(b, "bounds", mode, cmd_bounds, f"{mode} bound")
        p.add_argument("--q", type=int, default=2)
        p.add_argument("--z", type=float)
        p.add_argument("--K", type=float)
        p.add_argument("--L", type=float)
        p.add_argument("--delta", type=float, default=1.0)
        p.add_argument("--c", type=float, default=1.0)
        p.add_argument("--p", type=float)
        common(p)

    a = sub.add_parser("app", help="application models").add_subparsers(dest="mode", required=True)
    p = leaf(a, "app", "sheet", cmd_app, "Brownian sheet explosive integral")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, required=True)
    common(p)
    p = leaf(a, "app", "fbm", cmd_app, "fBm Hermite variation (use --samples 1 to export a path)")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--c-H", dest="c_H", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=0)
    common(p, seed=True)
    p = leaf(a, "app", "bispectrum", cmd_app, "spherical bispectrum parameters")
    p.add_argument("--l", type=int, nargs=3)
    common(p)

    m = sub.add_parser("mc", help="Monte Carlo diagnostics").add_subparsers(dest="mode", required=True)
    for mode in ("tail", "mdp"):
        p = leaf(m, "mc", mode, cmd_mc, f"{mode} estimates")
        p.add_argument("--model", choices=("hermite-sum", "gaussian", "fbm", "chaos"), default="hermite-sum")
        p.add_argument("--q", type=int, default=2)
        p.add_argument("--n", type=float, nargs="+", default=[10_000])
        p.add_argument("--H", type=float, default=0.5)
        p.add_argument("--kernel")
        p.add_argument("--z", type=float, nargs="+", required=True)
        p.add_argument("--samples", type=int, default=100_000)
        p.add_argument("--delta", type=float, default=1.0)
        if mode == "tail":
            p.add_argument("--two-sided", action="store_true")
        else:
            p.add_argument("--a", type=float, nargs="+")
            p.add_argument("--a-exponent", type=float)
        common(p, seed=True, workers=True)
    return parser, leaves


def _read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    for ln in lines:
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise UsageError(f"config line without '=': {ln!r}")
        k, v = (s.strip() for s in ln.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_config(leaf: argparse.ArgumentParser, argv: Sequence[str], config: dict[str, str]):
    actions = {a.dest: a for a in leaf._actions if a.dest not in ("help", "config")}
    extra = []
    for key, raw in config.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        flag = act.option_strings[0]
        if any(tok == o or tok.startswith(o + "=") for tok in argv for o in act.option_strings):
            continue
        if isinstance(act, argparse._StoreTrueAction):
            if raw.lower() in ("1", "true", "yes"):
                extra.append(flag)
        else:
            extra += [flag, *raw.split()]
    return extra


def _config_path(argv: Sequence[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    try:
        path = _config_path(argv)
        if path is not None and (tuple(argv[:2]) in leaves):
            argv = argv + _apply_config(leaves[tuple(argv[:2])], argv, _read_config(path))
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        result = args.func(args)
        text = result if isinstance(result, str) else render(result, args.format)
        emit(text, args.out)
        return 0
    except KernelParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (CapExceededError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
