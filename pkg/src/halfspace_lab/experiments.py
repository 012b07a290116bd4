"""Experiment registry, batch runner, and CSV / JSON emission.

Every experiment is a per-trial function ``(config, rng, shared) -> row`` plus
a summarizer over all rows. Trial ``i`` draws only from
``derive_stream(master_seed, i)``; objects shared by all trials (a fixed
center, a fixed instance) come from :func:`instance_stream`. Rows are written
in index order, so output bytes do not depend on the thread count.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .adversary import STRATEGIES, attack_trial, check_good, consistent_opposite_fraction, joint_draw
from .coupling import STATISTICS, best_threshold_advantage, coupled_draw, draw_tuple, nil_probability, tv_upper_bound
from .funcspec import BallSpec, draw_no, draw_yes, enumerate_satisfying
from .hypercube import (Params, Point, ball_size, off_sphere_probability, points_to_rows, row_codes,
                        sample_ball_many, sample_sphere_many)
from .ltf import (block_family, certify, greedy_disjoint_pack, is_violating, make_good_tuple, random_pool,
                  reldist_exact_small, truth_table, tuple_labels, violating_family)
from .seeding import derive_seed, derive_stream, instance_stream
from .stats import chisquare_pvalue, wilson
from .testers import ball_learner, hypothesis_check_tester, run_tester, sphere_probe_distinguisher


class ConfigError(ValueError):
    pass


def frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _digest(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class ExperimentConfig:
    """A fully serializable run description.

    ``threads`` only controls execution and is left out of the echoed config,
    so runs at different thread counts emit identical bytes.
    """

    experiment: str
    params: Params
    trials: int
    master_seed: int = 0
    threads: int = 1
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        exp = EXPERIMENTS[self.experiment]
        unknown = set(self.options) - set(exp.defaults)
        if unknown:
            raise ConfigError(f"unknown options for {self.experiment}: {sorted(unknown)}")

    def option(self, key):
        return self.options.get(key, EXPERIMENTS[self.experiment].defaults[key])

    def resolved_options(self) -> dict:
        return {k: self.option(k) for k in EXPERIMENTS[self.experiment].defaults}

    def to_dict(self, with_threads: bool = True) -> dict:
        d = {"experiment": self.experiment, "params": self.params.to_dict(), "trials": self.trials,
             "master_seed": self.master_seed, "options": dict(self.options)}
        if with_threads:
            d["threads"] = self.threads
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            if "paper_mode" in d:
                params = Params.paper_mode(int(d["paper_mode"]))
            else:
                params = Params.from_dict(d["params"])
            return cls(experiment=d["experiment"], params=params, trials=int(d["trials"]),
                       master_seed=int(d.get("master_seed", 0)), threads=int(d.get("threads", 1)),
                       options=dict(d.get("options", {})))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"bad config: {e}") from e

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        return cls.from_dict(d)


@dataclass(frozen=True)
class Experiment:
    columns: tuple[str, ...]
    defaults: dict
    trial: Callable[[ExperimentConfig, np.random.Generator, Any], dict]
    summarize: Callable[[ExperimentConfig, list[dict], Any], dict]
    shared: Callable[[ExperimentConfig], Any] | None = None
    check: Callable[[ExperimentConfig], None] | None = None


def _rate(rows, key):
    k = sum(int(r[key]) for r in rows)
    n = len(rows)
    return {"count": k, "n": n, "rate": k / n if n else None, "ci": list(wilson(k, n))}


# sampler-exactness

def _sx_check(cfg):
    if cfg.params.n > 12:
        raise ConfigError("sampler-exactness enumerates the support and needs n <= 12")
    if cfg.option("sampler") not in ("sphere", "ball", "yes", "no"):
        raise ConfigError("sampler must be one of sphere, ball, yes, no")


def _sx_shared(cfg):
    rng = instance_stream(cfg.master_seed)
    p, kind = cfg.params, cfg.option("sampler")
    if kind == "no":
        spec = draw_no(p, rng)
        support = enumerate_satisfying(spec)
    else:
        spec = BallSpec(p.n, Point.random(p.n, rng), p.r)
        support = enumerate_satisfying(spec)
        if kind == "sphere":
            support = [x for x in support if (x ^ spec.z).weight() == p.r]
    mask = np.zeros(1 << p.n, dtype=bool)
    mask[[x.bits for x in support]] = True
    return {"spec": spec, "mask": mask, "digest": _digest(spec.to_json())}


def _sx_trial(cfg, rng, sh):
    p, kind, m = cfg.params, cfg.option("sampler"), int(cfg.option("draws_per_trial"))
    spec = sh["spec"]
    if kind == "sphere":
        mat = sample_sphere_many(spec.z, p.r, m, rng)
    elif kind == "ball":
        mat = sample_ball_many(spec.z, p.r, m, rng)
    elif kind == "yes":
        mat = points_to_rows(spec.samp_many(m, rng))
    else:
        mat = spec.samp_flips(m, rng) ^ spec.z.to_array()
    counts = np.bincount(row_codes(mat), minlength=1 << p.n)
    off = int(counts[~sh["mask"]].sum())
    return {"instance": sh["digest"], "draws": m, "off_support": off,
            "counts_digest": hashlib.sha256(counts.astype("<i8").tobytes()).hexdigest()[:16],
            "_counts": counts}


def _sx_summary(cfg, rows, sh):
    mask = sh["mask"]
    total = np.zeros(mask.size, dtype=np.int64)
    for r in rows:
        total += r["_counts"]
    draws = int(total.sum())
    obs = total[mask]
    return {"sampler": cfg.option("sampler"), "support_size": int(mask.sum()), "draws": draws,
            "off_support": int(total[~mask].sum()),
            "chi2_pvalue": chisquare_pvalue(obs.tolist(), [1] * obs.size) if draws else None}


# violating-rate

def _vr_trial(cfg, rng, sh):
    p = cfg.params
    spec = draw_no(p, rng)
    tup = make_good_tuple(spec.z, p.r, rng)
    labels = tuple_labels(tup, spec)
    pieces = {spec.piece_index(x) for x in tup.points}
    return {"instance": _digest(spec.to_json()), "labels": "".join(map(str, labels)),
            "distinct_pieces": int(len(pieces) == 4), "violating": is_violating(tup, spec)}


def _vr_summary(cfg, rows, sh):
    est = _rate(rows, "violating")
    est["ci_width"] = est["ci"][1] - est["ci"][0]
    return {"violating": est, "distinct_pieces": _rate(rows, "distinct_pieces")}


# packing-cert

def _pc_check(cfg):
    if cfg.option("family") not in ("violating", "greedy", "block"):
        raise ConfigError("family must be violating, greedy or block")
    if cfg.option("denominator") not in ("exact", "upper_bound"):
        raise ConfigError("denominator must be exact or upper_bound")


def _pc_trial(cfg, rng, sh):
    p = cfg.params
    spec = draw_no(p, rng)
    kind = cfg.option("family")
    if kind == "block":
        fam = block_family(spec.z, p.r)
    else:
        pool = random_pool(spec.z, p.r, int(cfg.option("pool_size")), rng)
        fam = violating_family(spec, pool) if kind == "violating" else greedy_disjoint_pack(pool)
    cert = certify(spec, fam, cfg.option("denominator"))
    row = {"instance": _digest(spec.to_json()), "family_size": cert.family_size,
           "violating": cert.violating, "denominator": cert.denominator,
           "cert": frac_str(cert.value), "cert_float": float(cert.value), "exact": "", "sound": ""}
    if p.n <= 4:
        tab = truth_table(spec)
        exact = reldist_exact_small(p.n, tab)
        row["exact"] = frac_str(exact)
        row["sound"] = int(cert.value <= exact)
    return row


def _pc_summary(cfg, rows, sh):
    if not rows:
        return {"mean_cert": None}
    vals = [Fraction(r["cert"]) for r in rows]
    mean = sum(vals, Fraction(0)) / len(vals)
    out = {"mean_cert": frac_str(mean), "mean_cert_float": float(mean),
           "min_cert": frac_str(min(vals)), "max_cert": frac_str(max(vals)),
           "mean_family_size": sum(r["family_size"] for r in rows) / len(rows)}
    checked = [r for r in rows if r["sound"] != ""]
    if checked:
        out["sound"] = sum(r["sound"] for r in checked)
        out["sound_of"] = len(checked)
    return out


# tv-advantage

TV_PAIRS = (("ball", "no"), ("sphere", "ball"), ("sphere", "no"))


def _tv_trial(cfg, rng, sh):
    p = cfg.params
    spec = draw_no(p, rng)
    row = {"instance": _digest(spec.to_json())}
    tuples = {"no": draw_tuple("no", spec.z, p, rng, spec)}
    for kind in ("sphere", "ball"):
        tuples[kind] = draw_tuple(kind, Point.random(p.n, rng), p, rng)
    for kind in ("sphere", "ball", "no"):
        for name in cfg.option("statistics"):
            row[f"{kind}_{name}"] = int(STATISTICS[name](tuples[kind], p))
    return row


def _tv_check(cfg):
    bad = [s for s in cfg.option("statistics") if s not in STATISTICS]
    if bad:
        raise ConfigError(f"unknown statistics {bad}")


def _tv_columns_hint():
    return tuple(f"{k}_{s}" for k in ("sphere", "ball", "no") for s in STATISTICS)


def _tv_summary(cfg, rows, sh):
    p = cfg.params
    off = off_sphere_probability(p.n, p.r)
    out = {"off_sphere_probability": frac_str(off), "s_times_off_sphere": float(p.s * off),
           "coupling_bound": tv_upper_bound(p), "advantages": {}}
    if not rows:
        return out
    for a, b in TV_PAIRS:
        for name in cfg.option("statistics"):
            adv = best_threshold_advantage([r[f"{a}_{name}"] for r in rows], [r[f"{b}_{name}"] for r in rows])
            out["advantages"][f"{a}-vs-{b}/{name}"] = {"advantage": adv.advantage, "ci": list(adv.ci),
                                                       "threshold": adv.threshold}
    return out


# coupling-exactness

def _cx_check(cfg):
    if cfg.params.n > 20:
        raise ConfigError("coupling-exactness records tuples as codes and needs n <= 20")


def _cx_shared(cfg):
    return {"z": Point.random(cfg.params.n, instance_stream(cfg.master_seed))}


def _tuple_code(tup) -> str:
    return "" if tup is None else ":".join(x.to_hex() for x in tup)


def _cx_trial(cfg, rng, sh):
    p, z = cfg.params, sh["z"]
    spec = draw_no(p, rng, z=z)
    d = coupled_draw(z, p, spec, rng)
    return {"instance": _digest(spec.to_json()), "v_nil": int(d.v_star is None), "w_nil": int(d.w_star is None),
            "v_star": _tuple_code(d.v_star), "w_star": _tuple_code(d.w_star),
            "w_equals_v": int(d.v_star is not None and d.v_star == d.w_star)}


def _cx_summary(cfg, rows, sh):
    p = cfg.params
    nil = nil_probability(p.s)
    out = {"exact_nil": frac_str(nil), "exact_nil_float": float(nil)}
    n = len(rows)
    if not n:
        return out
    sd = math.sqrt(float(nil) * (1 - float(nil)) / n)
    for key in ("v_nil", "w_nil"):
        k = sum(r[key] for r in rows)
        out[key] = {"count": k, "rate": k / n, "ci": list(wilson(k, n)),
                    "z_score": (k / n - float(nil)) / sd if sd else 0.0}
    cells = ball_size(p.n, p.r) ** p.s
    if cells <= 10**6:
        z = sh["z"]
        ball = [x.bits for x in enumerate_satisfying(BallSpec(p.n, z, p.r))]
        index = {b: i for i, b in enumerate(ball)}
        counts = np.zeros(cells, dtype=np.int64)
        size = len(ball)
        for r in rows:
            if r["v_nil"]:
                continue
            code = 0
            for h in r["v_star"].split(":"):
                code = code * size + index[Point.from_hex(p.n, h).bits]
            counts[code] += 1
        out["v_star_cells"] = cells
        out["v_star_chi2_pvalue"] = chisquare_pvalue(counts.tolist(), [1] * cells) if counts.sum() else None
    return out


# typicality

def _ty_trial(cfg, rng, sh):
    p = cfg.params
    z, U = joint_draw(p, rng)
    rep = check_good(z, U, p, float(cfg.option("sigma")))
    return {"instance": _digest({"z": z.to_hex(), "U": [u.to_hex() for u in U]}), "good": int(rep.overall),
            "worst_deviation": rep.worst_deviation(), "patterns_failed": int((~rep.passed).sum()),
            "kappa": consistent_opposite_fraction(z, U)}


def _ty_summary(cfg, rows, sh):
    p = cfg.params
    out = {"good": _rate(rows, "good"), "slack": p.n ** float(cfg.option("sigma"))}
    if rows:
        out["mean_worst_deviation"] = float(np.mean([r["worst_deviation"] for r in rows]))
    return out


# attack

def _at_check(cfg):
    st = cfg.option("strategy")
    if st not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}")
    if st == "clairvoyant" and not cfg.option("sanity"):
        raise ConfigError("the clairvoyant strategy sees z; set sanity=true to run it")
    t = int(cfg.option("t_prime"))
    if t < 0 or t % 2 or t > cfg.params.n:
        raise ConfigError("t_prime must be even with 0 <= t_prime <= n")


def _at_trial(cfg, rng, sh):
    out = attack_trial(cfg.option("strategy"), cfg.params, int(cfg.option("t_prime")),
                       int(cfg.option("closeness")), rng, float(cfg.option("sigma")))
    return {"instance": "", **out}


def _at_summary(cfg, rows, sh):
    out = {"strategy": cfg.option("strategy"), "hit": _rate(rows, "hit"), "on_sphere": _rate(rows, "on_sphere"),
           "good": _rate(rows, "good")}
    if rows:
        out["mean_kappa"] = float(np.mean([r["kappa"] for r in rows]))
    return out


# distinguisher and hypothesis tester

def _default_m(p: Params) -> int:
    return math.ceil(100 * p.log(p.n) - 1e-9)


def _di_trial(cfg, rng, sh):
    p = cfg.params
    m = int(cfg.option("m") or _default_m(p))
    tester = sphere_probe_distinguisher(p, m, int(cfg.option("q")))
    yes = draw_yes(p, rng)
    ry = run_tester(tester, yes, rng)
    no = draw_no(p, rng)
    rn = run_tester(tester, no, rng)
    return {"instance": _digest([yes.to_json(), no.to_json()]), "yes_verdict": ry.verdict,
            "no_verdict": rn.verdict,
            "yes_center_ok": int(ry.samples.majority() == yes.z), "no_center_ok": int(rn.samples.majority() == no.z),
            "samples": ry.samples_used, "queries": ry.queries_issued}


def _verdict_summary(cfg, rows, sh):
    y, n = _rate(rows, "yes_verdict"), _rate(rows, "no_verdict")
    return {"p_yes": y["rate"], "p_no": n["rate"], "ci_yes": y["ci"], "ci_no": n["ci"],
            "gap": (y["rate"] - n["rate"]) if rows else None}


def _di_summary(cfg, rows, sh):
    out = _verdict_summary(cfg, rows, sh)
    out["m"] = int(cfg.option("m") or _default_m(cfg.params))
    out["q"] = int(cfg.option("q"))
    if rows:
        out["center_recovery"] = {"yes": _rate(rows, "yes_center_ok")["rate"],
                                  "no": _rate(rows, "no_center_ok")["rate"]}
    return out


def _ht_trial(cfg, rng, sh):
    p = cfg.params
    eps, c = float(cfg.option("eps")), float(cfg.option("c"))
    learn = int(cfg.option("learn_samples") or _default_m(p))
    yes, no = draw_yes(p, rng), draw_no(p, rng)
    hy = hypothesis_check_tester(ball_learner, yes, eps, rng, learn, c)
    hn = hypothesis_check_tester(ball_learner, no, eps, rng, learn, c)
    return {"instance": _digest([yes.to_json(), no.to_json()]), "yes_verdict": hy.verdict,
            "no_verdict": hn.verdict, "checks": hy.checks, "no_h_in_f": hn.h_samples_in_f}


def _ht_check(cfg):
    if not 0 < float(cfg.option("eps")) <= 1:
        raise ConfigError("eps must lie in (0, 1]")


EXPERIMENTS: dict[str, Experiment] = {
    "sampler-exactness": Experiment(
        ("draws", "off_support", "counts_digest"), {"sampler": "no", "draws_per_trial": 10000},
        _sx_trial, _sx_summary, _sx_shared, _sx_check),
    "violating-rate": Experiment(
        ("labels", "distinct_pieces", "violating"), {}, _vr_trial, _vr_summary),
    "packing-cert": Experiment(
        ("family_size", "violating", "denominator", "cert", "cert_float", "exact", "sound"),
        {"family": "violating", "pool_size": 2000, "denominator": "exact"}, _pc_trial, _pc_summary,
        None, _pc_check),
    "tv-advantage": Experiment(
        _tv_columns_hint(), {"statistics": list(STATISTICS)}, _tv_trial, _tv_summary, None, _tv_check),
    "coupling-exactness": Experiment(
        ("v_nil", "w_nil", "w_equals_v", "v_star", "w_star"), {}, _cx_trial, _cx_summary, _cx_shared, _cx_check),
    "typicality": Experiment(
        ("good", "worst_deviation", "patterns_failed", "kappa"), {"sigma": 0.51}, _ty_trial, _ty_summary),
    "attack": Experiment(
        ("hit", "on_sphere", "dist_to_center", "min_dist_to_samples", "good", "kappa"),
        {"strategy": "consistent_flip", "t_prime": 64, "closeness": 32, "sigma": 0.51, "sanity": False},
        _at_trial, _at_summary, None, _at_check),
    "distinguisher": Experiment(
        ("yes_verdict", "no_verdict", "yes_center_ok", "no_center_ok", "samples", "queries"),
        {"m": None, "q": 100}, _di_trial, _di_summary),
    "hypothesis-tester": Experiment(
        ("yes_verdict", "no_verdict", "checks", "no_h_in_f"),
        {"eps": 0.5, "c": 8, "learn_samples": None}, _ht_trial, _verdict_summary, None, _ht_check),
}

BASE_COLUMNS = ("trial", "seed", "instance")


def header(experiment: str) -> tuple[str, ...]:
    return BASE_COLUMNS + EXPERIMENTS[experiment].columns + ("error",)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[dict]
    summary: dict
    wall_times: list[float]

    @property
    def errors(self) -> int:
        return self.summary["errors"]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = header(self.config.experiment)
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_cell(r.get(c, "")) for c in cols])
        return buf.getvalue()

    def summary_text(self) -> str:
        return json.dumps(self.summary, sort_keys=True, indent=2) + "\n"

    def write(self, out_dir, timing: bool = False) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = self.config.experiment
        paths = {"csv": out / f"{name}.csv", "summary": out / f"{name}.summary.json"}
        paths["csv"].write_text(self.csv_text())
        paths["summary"].write_text(self.summary_text())
        if timing:
            paths["timing"] = out / f"{name}.timing.csv"
            lines = ["trial,wall_time_s"] + [f"{i},{t:.6f}" for i, t in enumerate(self.wall_times)]
            paths["timing"].write_text("\n".join(lines) + "\n")
        return paths


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _run_one(cfg: ExperimentConfig, exp: Experiment, shared, i: int) -> tuple[dict, float]:
    t0 = time.perf_counter()
    row = {"trial": i, "seed": derive_seed(cfg.master_seed, i)}
    try:
        out = exp.trial(cfg, derive_stream(cfg.master_seed, i), shared)
        row.update(out)
        row["error"] = ""
    except Exception as e:  # recorded as an error row; the run continues
        row["error"] = f"{type(e).__name__}: {e}"
    return row, time.perf_counter() - t0


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    exp = EXPERIMENTS[cfg.experiment]
    if exp.check:
        exp.check(cfg)
    shared = exp.shared(cfg) if exp.shared else None
    if cfg.threads == 1 or cfg.trials <= 1:
        results = [_run_one(cfg, exp, shared, i) for i in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            # map yields in submission order whatever the completion order
            results = list(pool.map(lambda i: _run_one(cfg, exp, shared, i), range(cfg.trials)))
    rows = [r for r, _ in results]
    good = [r for r in rows if not r["error"]]
    summary = {"experiment": cfg.experiment, "config": cfg.to_dict(with_threads=False),
               "resolved_options": cfg.resolved_options(), "code_version": __version__,
               "trials": cfg.trials, "errors": len(rows) - len(good),
               "estimates": exp.summarize(cfg, good, shared)}
    return ExperimentResult(cfg, rows, summary, [t for _, t in results])
