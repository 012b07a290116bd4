"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 run finished with error rows.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .experiments import ConfigError, ExperimentConfig, frac_str, run_experiment
from .funcspec import NoSpec, draw_no, draw_yes, spec_from_json, spec_to_json
from .hypercube import Params, Point
from .ltf import (LabeledSet, block_family, certify, greedy_disjoint_pack, is_ltf, random_pool,
                  reldist_exact_small, truth_table, violating_family)
from .seeding import derive_stream

PARAM_KEYS = ("n", "r", "s", "t", "q", "delta")


def parse_params(text: str) -> Params:
    kv = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in item:
            raise ConfigError(f"expected key=value in --params, got {item!r}")
        k, v = (x.strip() for x in item.split("=", 1))
        if k not in PARAM_KEYS:
            raise ConfigError(f"unknown parameter {k!r}; expected one of {PARAM_KEYS}")
        kv[k] = v
    if "n" not in kv or "r" not in kv:
        raise ConfigError("--params needs at least n and r")
    try:
        args = {k: int(v) for k, v in kv.items() if k != "delta"}
        if "delta" in kv:
            args["delta"] = Fraction(kv["delta"])
        return Params.manual(**args)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(str(e)) from e


def parse_paper_mode(text: str) -> Params:
    k, _, v = text.partition("=")
    if k.strip() != "n" or not v:
        raise ConfigError("--paper-mode expects n=<int>")
    try:
        return Params.paper_mode(int(v))
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _params(args) -> Params:
    if args.params and args.paper_mode:
        raise ConfigError("give either --params or --paper-mode, not both")
    if args.params:
        return parse_params(args.params)
    if args.paper_mode:
        return parse_paper_mode(args.paper_mode)
    raise ConfigError("this command needs --params or --paper-mode")


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_instance(path: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
        return spec_from_json(text)
    except (OSError, KeyError, ValueError) as e:
        raise ConfigError(f"cannot load instance {path}: {e}") from e


def _point(n: int, text: str) -> Point:
    try:
        if set(text) <= {"0", "1"} and len(text) == n:
            return Point.from_str(text)
        return Point.from_hex(n, text)
    except ValueError as e:
        raise ConfigError(f"bad point {text!r}: {e}") from e


def _emit(args, name: str, text: str):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def _rng(args) -> np.random.Generator:
    return derive_stream(args.seed or 0, 0)


def cmd_gen(args, kind):
    p = _params(args)
    rng = _rng(args)
    spec = draw_yes(p, rng) if kind == "yes" else draw_no(p, rng, args.label_mode)
    _emit(args, f"{kind}.json", spec_to_json(spec) + "\n")
    return 0


def cmd_eval(args):
    spec = _load_instance(args.instance)
    for text in args.points:
        print(spec.eval(_point(spec.n, text)))
    return 0


def cmd_sample(args):
    spec = _load_instance(args.instance)
    pts = spec.samp_many(args.count, _rng(args))
    _emit(args, "samples.txt", "".join((x.to_str() if args.bits else x.to_hex()) + "\n" for x in pts))
    return 0


def _labeled(args):
    if args.table is not None:
        if args.n is None:
            raise ConfigError("--table needs --n")
        return args.n, int(args.table, 16)
    if args.instance is None:
        raise ConfigError("give an instance file or --table")
    spec = _load_instance(args.instance)
    if spec.n > 20:
        raise ConfigError("full truth tables need n <= 20")
    return spec.n, truth_table(spec)


def cmd_ltf_check(args):
    n, table = _labeled(args)
    w = is_ltf(LabeledSet.from_truth_table(n, table))
    out = {"feasible": w.feasible}
    if w.feasible:
        out["weights"] = [frac_str(v) for v in w.weights]
        out["theta"] = frac_str(w.theta)
    else:
        out["multipliers"] = [frac_str(v) for v in w.multipliers]
    _emit(args, "ltf.json", json.dumps(out, sort_keys=True) + "\n")
    return 0


def cmd_certify(args):
    spec = _load_instance(args.instance)
    if not isinstance(spec, NoSpec):
        raise ConfigError("certify needs a no-instance")
    rng = _rng(args)
    if args.family == "block":
        fam = block_family(spec.z, spec.r)
    else:
        pool = random_pool(spec.z, spec.r, args.pool_size, rng)
        fam = violating_family(spec, pool) if args.family == "violating" else greedy_disjoint_pack(pool)
    try:
        cert = certify(spec, fam, args.denominator)
    except ValueError as e:
        raise ConfigError(f"{e}; use --denominator upper_bound at this size") from e
    _emit(args, "certificate.json", json.dumps(cert.to_json(), sort_keys=True) + "\n")
    return 0


def cmd_reldist(args):
    n, table = _labeled(args)
    if n > 4:
        raise ConfigError("exact relative distance needs n <= 4")
    print(frac_str(reldist_exact_small(n, table)))
    return 0


def _finish(args, cfg: ExperimentConfig) -> int:
    res = run_experiment(cfg)
    if args.out:
        paths = res.write(args.out, timing=args.timing)
        for p in paths.values():
            print(p)
    else:
        sys.stdout.write(res.summary_text())
    return 3 if res.errors else 0


def cmd_experiment(args, experiment, option_flags):
    opts = dict(_value_pair(o) for o in args.opt or [])
    for flag, key in option_flags.items():
        v = getattr(args, flag)
        if v is not None:
            opts[key] = v
    cfg = ExperimentConfig(experiment, _params(args), args.trials, args.seed or 0, args.threads or 1, opts)
    return _finish(args, cfg)


def _value_pair(text):
    if "=" not in text:
        raise ConfigError(f"--opt expects key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), _value(v.strip())


def cmd_run(args):
    try:
        text = Path(args.config).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    cfg = ExperimentConfig.from_json(text)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.params or args.paper_mode:
        cfg.params = _params(args)
    cfg.__post_init__()
    return _finish(args, cfg)


# experiment shortcuts: subcommand -> (experiment id, {flag dest: option key})
SHORTCUTS = {
    "tv": ("tv-advantage", {}),
    "typicality": ("typicality", {"sigma": "sigma"}),
    "attack": ("attack", {"strategy": "strategy", "t_prime": "t_prime", "closeness": "closeness",
                          "sigma": "sigma", "sanity": "sanity"}),
    "distinguish": ("distinguisher", {"m": "m", "q": "q"}),
    "learn-test": ("hypothesis-tester", {"eps": "eps", "c": "c", "learn_samples": "learn_samples"}),
}


def _global_flags(default) -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=default, help="64-bit master seed (default 0)")
    g.add_argument("--threads", type=int, default=default)
    g.add_argument("--out", default=default, help="output directory")
    g.add_argument("--params", default=default, help="n=..,r=..,s=..,t=..,q=..,delta=p/q")
    g.add_argument("--paper-mode", default=default, help="n=<int>: asymptotic parameter formulas")
    g.add_argument("--timing", action="store_true", default=default or False,
                   help="also write per-trial wall times")
    return g


def build_parser() -> argparse.ArgumentParser:
    top = _global_flags(None)
    # subcommand copies must not overwrite values given before the subcommand
    common = _global_flags(argparse.SUPPRESS)

    ap = argparse.ArgumentParser(prog="halfspace-lab", parents=[top],
                                 description="Halfspace testing simulation lab.")
    sub = ap.add_subparsers(dest="command", required=True)

    for kind in ("yes", "no"):
        p = sub.add_parser(f"gen-{kind}", parents=[common], help=f"draw a random {kind}-instance")
        if kind == "no":
            p.add_argument("--label-mode", choices=["explicit", "keyed"])
        p.set_defaults(func=lambda a, k=kind: cmd_gen(a, k), label_mode=None)

    p = sub.add_parser("eval", parents=[common], help="evaluate an instance at points")
    p.add_argument("instance")
    p.add_argument("points", nargs="+", help="hex or 0/1 strings")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sample", parents=[common], help="draw satisfying assignments")
    p.add_argument("instance")
    p.add_argument("-k", "--count", type=int, default=1)
    p.add_argument("--bits", action="store_true", help="print 0/1 strings instead of hex")
    p.set_defaults(func=cmd_sample)

    for name, func, about in (("ltf-check", cmd_ltf_check, "exact LTF decision with witness"),
                              ("reldist-exact", cmd_reldist, "exact relative distance to the LTFs (n <= 4)")):
        p = sub.add_parser(name, parents=[common], help=about)
        p.add_argument("instance", nargs="?")
        p.add_argument("--table", help="truth table as hex (bit k = value at point code k)")
        p.add_argument("--n", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("certify", parents=[common], help="disjoint violating-tuple certificate")
    p.add_argument("instance")
    p.add_argument("--family", choices=["violating", "greedy", "block"], default="violating")
    p.add_argument("--pool-size", type=int, default=2000)
    p.add_argument("--denominator", choices=["exact", "upper_bound"], default="exact")
    p.set_defaults(func=cmd_certify)

    for name, (exp, flags) in SHORTCUTS.items():
        p = sub.add_parser(name, parents=[common], help=f"run the {exp} experiment")
        p.add_argument("--trials", type=int, default=100)
        p.add_argument("--opt", action="append", help="extra experiment option key=value")
        if "sigma" in flags:
            p.add_argument("--sigma", type=float)
        if name == "attack":
            p.add_argument("--strategy")
            p.add_argument("--t-prime", type=int)
            p.add_argument("--closeness", type=int)
            p.add_argument("--sanity", action="store_const", const=True)
        if name == "distinguish":
            p.add_argument("--m", type=int)
            p.add_argument("--q", type=int)
        if name == "learn-test":
            p.add_argument("--eps", type=float)
            p.add_argument("--c", type=float)
            p.add_argument("--learn-samples", type=int)
        p.set_defaults(func=lambda a, e=exp, f=flags: cmd_experiment(a, e, f))

    p = sub.add_parser("run", parents=[common], help="run an experiment from a JSON config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
