"""Non-adaptive sample+query testers and the harness that runs them against an oracle.

A tester is a pair (query_map, combiner). ``query_map`` receives only the
samples, so every query is fixed before any answer exists; adaptive testers
are not modeled (a q-query adaptive tester is covered by a 2**q-query
non-adaptive one).
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .coupling import STATISTICS, SampleTuple
from .funcspec import BallSpec, FunctionOracle, draw_no, draw_yes
from .hypercube import Params, Point, hamming, sample_sphere
from .stats import wilson


class BudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class NonAdaptiveTester:
    s: int
    q: int
    query_map: Callable[[SampleTuple], Sequence[Point]]
    combiner: Callable[[SampleTuple, tuple[int, ...]], int]
    name: str = "tester"


@dataclass(frozen=True)
class RunRecord:
    samples: SampleTuple
    queries: tuple[Point, ...]
    answers: tuple[int, ...]
    verdict: int
    samples_used: int
    queries_issued: int


class _CountingOracle:
    def __init__(self, oracle: FunctionOracle, max_samples: int, max_queries: int):
        self._o = oracle
        self.max_samples, self.max_queries = max_samples, max_queries
        self.samples = self.queries = 0

    def samp_many(self, m, rng):
        if self.samples + m > self.max_samples:
            raise BudgetError(f"sample budget {self.max_samples} exceeded")
        self.samples += m
        if hasattr(self._o, "samp_many"):
            return self._o.samp_many(m, rng)
        return [self._o.samp(rng) for _ in range(m)]

    def mq(self, x):
        if self.queries + 1 > self.max_queries:
            raise BudgetError(f"query budget {self.max_queries} exceeded")
        self.queries += 1
        return self._o.eval(x)


def run_tester(tester: NonAdaptiveTester, oracle: FunctionOracle, rng: np.random.Generator,
               max_samples: int | None = None, max_queries: int | None = None) -> RunRecord:
    max_samples = tester.s if max_samples is None else max_samples
    max_queries = tester.q if max_queries is None else max_queries
    if tester.s > max_samples or tester.q > max_queries:
        raise BudgetError("declared budgets exceed the configured limits")
    box = _CountingOracle(oracle, max_samples, max_queries)
    samples = SampleTuple(tuple(box.samp_many(tester.s, rng))) if tester.s else None
    queries = tuple(tester.query_map(samples))
    if len(queries) != tester.q:
        raise BudgetError(f"query map returned {len(queries)} queries, declared {tester.q}")
    answers = tuple(box.mq(y) for y in queries)
    verdict = int(tester.combiner(samples, answers))
    if verdict not in (0, 1):
        raise ValueError("combiner must return 0 or 1")
    return RunRecord(samples, queries, answers, verdict, box.samples, box.queries)


def center_recover_majority(samples: SampleTuple) -> Point:
    """Coordinatewise majority vote, ties to 0."""
    return samples.majority()


def samples_digest(samples: SampleTuple) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    for p in samples:
        h.update(p.bits.to_bytes((p.n + 7) // 8, "little"))
    return h.digest()


def sphere_probe_distinguisher(params: Params, m: int, q: int) -> NonAdaptiveTester:
    """Recover the center by majority over m samples, then accept iff q sphere probes all answer 1.

    Probes are drawn from a generator seeded by a hash of the samples, so the
    query map is a deterministic function of the samples.
    """
    if m < 1 or q < 1:
        raise ValueError("need m >= 1 and q >= 1")

    def query_map(samples):
        center = center_recover_majority(samples)
        rng = np.random.default_rng(int.from_bytes(samples_digest(samples), "little"))
        return [sample_sphere(center, params.r, rng) for _ in range(q)]

    def combiner(samples, answers):
        return int(all(answers))

    return NonAdaptiveTester(m, q, query_map, combiner, name=f"sphere-probe(m={m},q={q})")


def statistic_tester(stat: str, threshold: float, params: Params) -> NonAdaptiveTester:
    """Sample-only tester accepting iff a tuple statistic is at least ``threshold``."""
    fn = STATISTICS[stat]
    return NonAdaptiveTester(params.s, 0, lambda samples: [],
                             lambda samples, answers: int(fn(samples, params) >= threshold),
                             name=f"{stat}>={threshold}")


def constant_tester(verdict: int = 1, s: int = 1, q: int = 0) -> NonAdaptiveTester:
    return NonAdaptiveTester(s, q, lambda samples: [samples[0]] * q, lambda samples, answers: verdict,
                             name=f"constant-{verdict}")


def ball_learner(samples: SampleTuple) -> BallSpec:
    """Hypothesis ball: majority center, radius = largest sample distance to it."""
    c = center_recover_majority(samples)
    return BallSpec(samples.n, c, max(hamming(u, c) for u in samples))


@dataclass(frozen=True)
class HypothesisCheck:
    verdict: int
    hypothesis: FunctionOracle
    f_samples_in_h: int
    h_samples_in_f: int
    checks: int
    samp_calls: int
    mq_calls: int


def hypothesis_check_tester(learner: Callable[[SampleTuple], FunctionOracle], oracle: FunctionOracle,
                            eps: float, rng: np.random.Generator, learn_samples: int = 100,
                            c: float = 8) -> HypothesisCheck:
    """Learn h from samples of f, then check ceil(c/eps) f-samples lie in h and as many h-samples lie in f.

    ``samp_calls`` and ``mq_calls`` count only the oracle calls made after learning.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    learn = SampleTuple(tuple(oracle.samp(rng) for _ in range(learn_samples)))
    h = learner(learn)
    if h is None or h.dimension() != oracle.dimension():
        raise ValueError("learner failed to return a hypothesis of the right dimension")
    k = math.ceil(c / eps)
    f_in_h = sum(h.eval(oracle.samp(rng)) for _ in range(k))
    h_in_f = sum(oracle.eval(h.samp(rng)) for _ in range(k))
    return HypothesisCheck(int(f_in_h == k and h_in_f == k), h, f_in_h, h_in_f, k, k, k)


@dataclass(frozen=True)
class Gap:
    p_yes: float
    p_no: float
    ci_yes: tuple[float, float]
    ci_no: tuple[float, float]
    trials: int

    @property
    def gap(self) -> float:
        return self.p_yes - self.p_no


def acceptance_gap(tester: NonAdaptiveTester, params: Params, trials: int, rng: np.random.Generator) -> Gap:
    if trials < 100:
        raise ValueError("need at least 100 trials")
    yes = sum(run_tester(tester, draw_yes(params, rng), rng).verdict for _ in range(trials))
    no = sum(run_tester(tester, draw_no(params, rng), rng).verdict for _ in range(trials))
    return Gap(yes / trials, no / trials, wilson(yes, trials), wilson(no, trials), trials)
