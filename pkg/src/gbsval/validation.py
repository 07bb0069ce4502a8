"""Bayesian and HOG tests on click-number-conditioned sample sets.

For a sector of L samples with C clicks,

    dH(C) = (1/L) sum_k [ln Pr_SQUA(s_k | C) - ln Pr_SQUE(s_k | C)]
    dE(C) = (1/L) sum_k [ln Pr_SQUE(s'_k | C) - ln Pr_SQUE(s_k | C)]

where ``s'`` are adversary samples. Negative dH favours the squeezed
hypothesis; negative dE means the experimental samples are heavier. Both are
turned into a ratio ``1 / (1 + exp(L * delta))``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import expit

from .errors import InputError, NumericError
from .gaussian import HypothesisKind, SpecLike
from .phasespace import estimate_grouped
from .sampler import SampleSet, condition_on_clicks
from .torontonian import (
    MAX_TABLE_MODES,
    HusimiPair,
    PrecisionMode,
    _as_husimi,
    as_pattern,
    exact_distribution,
    log_click_probability,
    sector_probabilities,
)

log = logging.getLogger(__name__)

#: Click numbers at or above this are always evaluated in extended precision.
EXTENDED_FROM_CLICKS = 20

DEFAULT_SECTOR_SIZE = 4000


@dataclass(frozen=True)
class SectorProbabilities:
    """``Pr(C)`` for C = 0..M with absolute uncertainties and their origin."""

    probs: np.ndarray
    stderr: np.ndarray
    source: str

    def log_prob(self, C: int) -> float:
        p = float(self.probs[C])
        if not p > 0:
            raise NumericError(
                f"Pr(C={C}) estimate is {p!r} (source: {self.source}); "
                "increase the phase-space sample count"
            )
        return math.log(p)

    def rel_err(self, C: int) -> float:
        return float(self.stderr[C]) / float(self.probs[C])


def exact_sector_probabilities(sigma) -> SectorProbabilities:
    table = exact_distribution(sigma, method="vacuum")
    probs = sector_probabilities(table)
    return SectorProbabilities(probs, np.zeros_like(probs), "exact")


def sector_probabilities_for(
    kind,
    spec: SpecLike,
    T,
    sigma=None,
    n_samples: int = 1_000_000,
    groups: int = 100,
    seed: int | None = 0,
    threads: int = 1,
) -> SectorProbabilities:
    """Exact sector sums when M <= 12, the phase-space estimate otherwise."""
    M = np.shape(T)[0]
    if M <= MAX_TABLE_MODES:
        if sigma is None:
            from .gaussian import build_hypothesis

            sigma = build_hypothesis(kind, spec, T)
        return exact_sector_probabilities(sigma)
    dist = estimate_grouped(spec, T, kind, n_samples, groups, seed, threads)
    return SectorProbabilities(dist.probs, dist.stderr, f"phasespace(N={n_samples},G={groups},seed={dist.seed})")


def conditional_log_prob(
    h: HusimiPair,
    s,
    prc: float,
    clicks: int | None = None,
    precision: PrecisionMode | str = PrecisionMode.DOUBLE,
) -> float:
    """``ln Pr(s) - ln Pr(C)`` for a pattern ``s`` in sector ``C``."""
    pattern = as_pattern(s, h.M)
    if clicks is not None and int(pattern.sum()) != clicks:
        raise InputError(f"pattern has {int(pattern.sum())} clicks, expected {clicks}")
    if not prc > 0:
        raise NumericError(f"Pr(C) estimate is {prc!r}; increase the phase-space sample count")
    return log_click_probability(h, pattern, precision) - math.log(prc)


class LogProbCache:
    """Memoised ``ln Pr(s)`` per distinct pattern for one hypothesis."""

    def __init__(self, state, precision=PrecisionMode.DOUBLE, threads: int = 1):
        self.h = _as_husimi(state)
        self.precision = PrecisionMode.parse(precision)
        self.threads = threads
        self._store: dict[bytes, float] = {}

    def _precision_for(self, C: int) -> PrecisionMode:
        return PrecisionMode.EXTENDED if C >= EXTENDED_FROM_CLICKS else self.precision

    def _one(self, pattern: np.ndarray) -> float:
        return log_click_probability(self.h, pattern, self._precision_for(int(pattern.sum())))

    def __call__(self, patterns: np.ndarray) -> np.ndarray:
        keys = [p.tobytes() for p in patterns]
        todo = {}
        for k, p in zip(keys, patterns):
            if k not in self._store and k not in todo:
                todo[k] = p
        if todo:
            items = list(todo.items())
            if self.threads > 1 and len(items) > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    vals = list(pool.map(lambda kv: self._one(kv[1]), items))
            else:
                vals = [self._one(p) for _, p in items]
            for (k, _), v in zip(items, vals):
                self._store[k] = v
        return np.array([self._store[k] for k in keys])


@dataclass
class SectorRow:
    C: int
    L: int
    delta: float
    stderr: float
    ratio: float
    sample_stderr: float = 0.0
    prc_stderr: float = 0.0


@dataclass
class TestResult:
    """Per-sector results of one test plus provenance."""

    test: str
    rows: list[SectorRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def row(self, C: int) -> SectorRow:
        for r in self.rows:
            if r.C == C:
                return r
        raise KeyError(C)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["C", "L", "delta", "stderr", "ratio"])
        for r in self.rows:
            w.writerow([r.C, r.L, format(r.delta, ".17g"), format(r.stderr, ".17g"), format(r.ratio, ".17g")])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "test": self.test,
            "meta": self.meta,
            "sectors": [asdict(r) for r in self.rows],
            "negative_sectors": [r.C for r in self.rows if r.delta < 0],
            "positive_sectors": [r.C for r in self.rows if r.delta > 0],
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def ratio_from_delta(delta: float, L: int) -> float:
    """``1 / (1 + exp(L * delta))`` without overflow."""
    return float(expit(-L * delta))


def _sector_samples(samples, C: int, L: int | None, randomize: bool, seed) -> np.ndarray:
    if isinstance(samples, Mapping):
        part = samples.get(C)
        if part is None:
            return np.zeros((0, 0), dtype=np.uint8)
        part = part if isinstance(part, SampleSet) else SampleSet(np.asarray(part))
        part = condition_on_clicks(part, C)
    else:
        part = condition_on_clicks(samples, C)
    P = part.patterns
    if randomize and L is not None and len(P) > L:
        from .rng import substream

        idx = np.sort(substream(seed, "sector-select", C).choice(len(P), L, replace=False))
        return P[idx]
    return P if L is None else P[:L]


def _available_sectors(samples) -> list[int]:
    if isinstance(samples, Mapping):
        return sorted(int(c) for c in samples)
    return sorted(int(c) for c in np.unique(samples.click_counts))


def _sample_term(d: np.ndarray) -> float:
    return math.sqrt(np.var(d, ddof=1) / len(d)) if len(d) > 1 else 0.0


def bayesian_test(
    samples,
    sigma_sque,
    sigma_squa,
    prc_sque: SectorProbabilities,
    prc_squa: SectorProbabilities,
    sectors=None,
    L: int | None = DEFAULT_SECTOR_SIZE,
    precision: PrecisionMode | str = PrecisionMode.DOUBLE,
    threads: int = 1,
    randomize: bool = False,
    seed: int | None = 0,
    labels: tuple[str, str] = ("SQUE", "SQUA"),
) -> TestResult:
    """Cross-entropy difference between the second and first hypothesis per sector.

    ``samples`` is a :class:`SampleSet` or a mapping ``C -> SampleSet``. Only
    the first ``L`` samples of each sector are used (a random selection if
    ``randomize``); sectors with fewer samples use all they have.
    """
    cache_a = LogProbCache(sigma_sque, precision, threads)
    cache_b = LogProbCache(sigma_squa, precision, threads)
    sectors = _available_sectors(samples) if sectors is None else [int(c) for c in sectors]
    result = TestResult(
        "bayes",
        meta={
            "hypotheses": list(labels),
            "prc_source": [prc_sque.source, prc_squa.source],
            "precision": PrecisionMode.parse(precision).value,
            "requested_L": L,
        },
    )
    for C in sectors:
        P = _sector_samples(samples, C, L, randomize, seed)
        if len(P) == 0:
            log.warning("sector C=%d has no samples; skipped", C)
            continue
        d = cache_b(P) - cache_a(P)
        delta = math.fsum(d) / len(d) + (prc_sque.log_prob(C) - prc_squa.log_prob(C))
        s_err = _sample_term(d)
        p_err = math.hypot(prc_sque.rel_err(C), prc_squa.rel_err(C))
        result.rows.append(
            SectorRow(C, len(P), delta, math.hypot(s_err, p_err), ratio_from_delta(delta, len(P)), s_err, p_err)
        )
    return result


def hog_test(
    experimental,
    adversary,
    sigma_sque,
    prc_sque: SectorProbabilities | None = None,
    sectors=None,
    L: int | None = DEFAULT_SECTOR_SIZE,
    precision: PrecisionMode | str = PrecisionMode.DOUBLE,
    threads: int = 1,
) -> TestResult:
    """Mean ground-truth log-probability of adversary minus experimental samples.

    ``Pr(C)`` enters both terms identically and cancels, so ``prc_sque`` only
    feeds the provenance record.
    """
    cache = LogProbCache(sigma_sque, precision, threads)
    if sectors is None:
        sectors = sorted(set(_available_sectors(experimental)) | set(_available_sectors(adversary)))
    result = TestResult(
        "hog",
        meta={
            "hypotheses": ["SQUE"],
            "prc_source": prc_sque.source if prc_sque is not None else "cancels",
            "precision": PrecisionMode.parse(precision).value,
            "requested_L": L,
        },
    )
    for C in sectors:
        P = _sector_samples(experimental, int(C), L, False, None)
        Q = _sector_samples(adversary, int(C), L, False, None)
        if len(P) != len(Q):
            raise InputError(f"sector C={C}: {len(P)} experimental vs {len(Q)} adversary samples; L must match")
        if len(P) == 0:
            log.warning("sector C=%d has no samples; skipped", C)
            continue
        e = cache(Q) - cache(P)
        delta = math.fsum(e) / len(e)
        s_err = _sample_term(e)
        result.rows.append(SectorRow(int(C), len(P), delta, s_err, ratio_from_delta(delta, len(P)), s_err, 0.0))
    return result
