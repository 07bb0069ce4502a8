"""Click cumulants, their empirical counterparts and correlation statistics.

Moments of click indicators are all-click marginal probabilities. Cumulants
follow from moments through the set-partition formula

    kappa(X_1..X_n) = sum_pi (|pi| - 1)! (-1)^(|pi| - 1) prod_{B in pi} E[prod_{i in B} X_i].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import InputError
from .gaussian import HBAR, HypothesisKind
from .rng import substream
from .sampler import SampleSet
from .torontonian import _as_husimi, _check_modes, batch_marginals, marginal_probability

MAX_ORDER = 4


def set_partitions(items: Sequence) -> list[list[tuple]]:
    """All partitions of ``items`` into non-empty blocks."""
    items = list(items)
    if not items:
        return [[]]
    first, rest = items[0], items[1:]
    out = []
    for part in set_partitions(rest):
        out.append([(first,)] + part)
        for i, block in enumerate(part):
            out.append(part[:i] + [(first,) + block] + part[i + 1 :])
    return out


@lru_cache(maxsize=None)
def _partitions_of_positions(n: int):
    # (coefficient, blocks of positions)
    out = []
    for part in set_partitions(range(n)):
        k = len(part)
        out.append(((-1) ** (k - 1) * math.factorial(k - 1), tuple(tuple(sorted(b)) for b in part)))
    return tuple(out)


def cumulant_from_moments(moment_fn: Callable[[tuple], float], modes: Sequence[int]) -> float:
    """Joint cumulant of the click indicators on ``modes`` (order 1 to 4)."""
    modes = tuple(modes)
    n = len(modes)
    if not 1 <= n <= MAX_ORDER:
        raise InputError(f"cumulant order must be between 1 and {MAX_ORDER}, got {n}")
    total = 0.0
    for coeff, blocks in _partitions_of_positions(n):
        prod = 1.0
        for b in blocks:
            prod *= moment_fn(tuple(modes[i] for i in b))
        total += coeff * prod
    return total


def theoretical_moment(sigma, modes, hbar: float = HBAR) -> float:
    """Exact probability that every mode in ``modes`` clicks."""
    return marginal_probability(sigma, modes, hbar=hbar)


def theoretical_cumulant(sigma, modes, hbar: float = HBAR) -> float:
    h = _as_husimi(sigma, hbar)
    return cumulant_from_moments(lambda b: marginal_probability(h, b), modes)


def _check_samples(samples: SampleSet):
    if len(samples) == 0:
        raise InputError("sample set is empty")


def empirical_moment(samples: SampleSet, modes) -> float:
    """Fraction of samples clicking on every listed mode."""
    _check_samples(samples)
    modes = _check_modes(modes, samples.M)
    if modes.size == 0:
        return 1.0
    return float(np.all(samples.patterns[:, modes] == 1, axis=1).mean())


def empirical_cumulant(samples: SampleSet, modes) -> float:
    _check_samples(samples)
    _check_modes(modes, samples.M)
    return cumulant_from_moments(lambda b: empirical_moment(samples, b), modes)


def random_mode_subsets(M: int, order: int, count: int, seed: int | None = 0) -> list[tuple[int, ...]]:
    """Distinct sorted subsets of ``order`` modes, drawn uniformly without replacement.

    If ``count`` reaches the number of possible subsets, all of them are
    returned in lexicographic order.
    """
    if not 1 <= order <= M:
        raise InputError(f"subset order must be between 1 and M={M}, got {order}")
    total = math.comb(M, order)
    if count >= total:
        return list(itertools.combinations(range(M), order))
    rng = substream(seed, "mode-subsets", order)
    if total <= 5_000_000 and count > total // 4:
        allsubs = list(itertools.combinations(range(M), order))
        return [allsubs[i] for i in rng.choice(total, size=count, replace=False)]
    seen: dict[tuple, None] = {}
    while len(seen) < count:
        need = count - len(seen)
        draws = np.argsort(rng.random((need, M)), axis=1)[:, :order]
        for row in np.sort(draws, axis=1):
            seen.setdefault(tuple(int(i) for i in row))
            if len(seen) == count:
                break
    return list(seen)


# ---------------------------------------------------------------------------
# correlation statistics
# ---------------------------------------------------------------------------


def _check_pair(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InputError("correlation inputs must be 1-D arrays of equal length")
    if len(xs) < 3:
        raise InputError("correlation needs at least 3 points")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise InputError("correlation inputs must be finite")
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise InputError("correlation is undefined for a constant input")
    return xs, ys


def pearson(xs, ys) -> float:
    xs, ys = _check_pair(xs, ys)
    return float(stats.pearsonr(xs, ys)[0])


def spearman(xs, ys) -> float:
    """Rank correlation with average ranks for ties."""
    xs, ys = _check_pair(xs, ys)
    return float(stats.spearmanr(xs, ys)[0])


STATISTICS = {"pearson": pearson, "spearman": spearman}


def bootstrap_ci(xs, ys, stat="pearson", resamples: int = 1000, seed: int | None = 0) -> tuple[float, float]:
    """Statistic on the full data and its bootstrap standard deviation.

    Index pairs are resampled with replacement. Resamples on which the
    statistic is undefined (constant input) are dropped.
    """
    fn = STATISTICS[stat] if isinstance(stat, str) else stat
    xs, ys = _check_pair(xs, ys)
    estimate = fn(xs, ys)
    rng = substream(seed, f"bootstrap-{stat if isinstance(stat, str) else 'custom'}")
    idx = rng.integers(0, len(xs), size=(resamples, len(xs)))
    vals = []
    for row in idx:
        try:
            vals.append(fn(xs[row], ys[row]))
        except InputError:
            continue
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else float("nan")
    return estimate, std


# ---------------------------------------------------------------------------
# cumulant tables
# ---------------------------------------------------------------------------


@dataclass
class CumulantRecord:
    modes: tuple[int, ...]
    theory: dict[str, float] = field(default_factory=dict)
    empirical: float | None = None
    count: int = 0

    @property
    def order(self) -> int:
        return len(self.modes)


def _all_blocks(subsets: Iterable[tuple]) -> list[tuple]:
    blocks = set()
    for s in subsets:
        for k in range(1, len(s) + 1):
            blocks.update(itertools.combinations(s, k))
    return sorted(blocks, key=lambda b: (len(b), b))


def theoretical_moments(state, subsets: Iterable[tuple], hbar: float = HBAR) -> dict[tuple, float]:
    """All-click marginals for every sub-block of every subset."""
    h = _as_husimi(state, hbar)
    blocks = _all_blocks(subsets)
    return dict(zip(blocks, batch_marginals(h, blocks))) if blocks else {}


def empirical_moments(samples: SampleSet, subsets: Iterable[tuple]) -> dict[tuple, float]:
    _check_samples(samples)
    blocks = _all_blocks(subsets)
    P = samples.patterns.astype(bool)
    return {b: float(np.all(P[:, list(b)], axis=1).mean()) for b in blocks}


def cumulant_table(
    states: Mapping[str, np.ndarray],
    subsets: Sequence[tuple],
    samples: SampleSet | None = None,
    hbar: float = HBAR,
) -> list[CumulantRecord]:
    """Cumulants per subset under each hypothesis and, if given, from samples."""
    subsets = [tuple(int(i) for i in s) for s in subsets]
    theory = {HypothesisKind.parse(k).value: theoretical_moments(v, subsets, hbar) for k, v in states.items()}
    emp = empirical_moments(samples, subsets) if samples is not None else None
    records = []
    for s in subsets:
        rec = CumulantRecord(s, count=len(samples) if samples is not None else 0)
        for k, moments in theory.items():
            rec.theory[k] = cumulant_from_moments(moments.__getitem__, s)
        if emp is not None:
            rec.empirical = cumulant_from_moments(emp.__getitem__, s)
        records.append(rec)
    return records


def correlation_summary(records: Sequence[CumulantRecord], resamples: int = 1000, seed: int | None = 0) -> list[dict]:
    """Pearson and Spearman coefficients (with bootstrap std) of theory vs samples.

    One entry per (order, hypothesis, statistic).
    """
    out = []
    orders = sorted({r.order for r in records})
    for order in orders:
        recs = [r for r in records if r.order == order and r.empirical is not None]
        if len(recs) < 3:
            continue
        emp = np.array([r.empirical for r in recs])
        for kind in sorted(recs[0].theory):
            th = np.array([r.theory[kind] for r in recs])
            for name in ("pearson", "spearman"):
                try:
                    est, std = bootstrap_ci(th, emp, name, resamples, seed)
                except InputError:
                    est, std = float("nan"), float("nan")
                out.append({"order": order, "hypothesis": kind, "statistic": name, "coefficient": est, "bootstrap_std": std, "n": len(recs)})
    return out
