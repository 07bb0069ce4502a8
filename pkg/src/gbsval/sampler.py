"""Click-pattern samplers.

``sample_squashed`` is the polynomial-time adversary. A squashed input is a
mixture of coherent states, so one draws a coherent amplitude, propagates it
through ``T' = T B`` and lets every detector click independently with
probability ``1 - exp(-|abar_j|^2)``.

``exact_sample`` draws from the full ``2**M`` table and is only an oracle for
small M.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .gaussian import HypothesisKind, SpecLike, as_spec
from .phasespace import _amplitudes, composed_transmission, input_moments
from .rng import substream
from .torontonian import MAX_TABLE_MODES, exact_distribution, popcounts

log = logging.getLogger(__name__)

_CHUNK = 1 << 16


@dataclass
class SampleSet:
    """Ordered click patterns (rows of a uint8 array) plus a source tag."""

    patterns: np.ndarray
    source: str = "unknown"
    complete: bool = True
    _counts: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        p = np.asarray(self.patterns)
        if p.ndim != 2:
            raise InputError(f"patterns must be a 2-D array, got shape {p.shape}")
        if p.size and not np.all((p == 0) | (p == 1)):
            raise InputError("pattern entries must be 0 or 1")
        self.patterns = p.astype(np.uint8, copy=False)

    def __len__(self) -> int:
        return self.patterns.shape[0]

    @property
    def M(self) -> int:
        return self.patterns.shape[1]

    @property
    def click_counts(self) -> np.ndarray:
        if self._counts is None:
            self._counts = self.patterns.sum(axis=1, dtype=np.int64)
        return self._counts

    def sectors(self) -> dict[int, "SampleSet"]:
        return {int(C): condition_on_clicks(self, int(C)) for C in np.unique(self.click_counts)}

    def head(self, n: int) -> "SampleSet":
        return SampleSet(self.patterns[:n], self.source, self.complete)


def condition_on_clicks(samples: SampleSet, C: int) -> SampleSet:
    """Patterns with exactly ``C`` clicks, in their original order."""
    keep = samples.click_counts == C
    out = SampleSet(samples.patterns[keep], samples.source, samples.complete)
    if len(out) == 0:
        log.info("no samples with %d clicks", C)
    return out


@dataclass(frozen=True)
class SamplerConfig:
    kind: HypothesisKind
    spec: SpecLike
    T: np.ndarray
    L: int
    seed: int | None = 0
    clicks: int | None = None
    max_attempts: int = 10_000_000

    def __post_init__(self):
        object.__setattr__(self, "kind", HypothesisKind.parse(self.kind))
        object.__setattr__(self, "spec", as_spec(self.spec))
        if self.L < 0:
            raise InputError("sample count must be >= 0")
        if self.max_attempts < 1:
            raise InputError("rejection cap must be >= 1")
        M = np.shape(self.T)[0]
        if self.clicks is not None and not 0 <= self.clicks <= M:
            raise InputError(f"click number {self.clicks} outside [0, {M}]")


def _squashed_chunk(n, m, Tp, rng, size):
    alpha, _ = _amplitudes(n, m, rng, size)
    abar = alpha @ Tp.T
    prob = -np.expm1(-(abar.real**2 + abar.imag**2))
    return (rng.random(prob.shape) < prob).astype(np.uint8)


def sample_squashed(config: SamplerConfig) -> SampleSet:
    """Draw ``config.L`` patterns from the squashed-state hypothesis.

    With ``config.clicks`` set, draws are rejected until L patterns with that
    click number are found or ``max_attempts`` draws were made; a short set is
    returned with ``complete=False`` and a warning.
    """
    if config.kind is not HypothesisKind.SQUA:
        raise InputError("only the squashed hypothesis has a polynomial sampler; use exact_sample for SQUE")
    Tp = composed_transmission(config.T)
    if Tp.shape[1] != config.spec.K:
        raise InputError(f"transmission has {Tp.shape[1]} columns, squeezing spec expands to {config.spec.K} inputs")
    n, m = input_moments(config.spec, HypothesisKind.SQUA)
    target = config.L
    stream = "squashed" if config.clicks is None else f"squashed-C{config.clicks}"
    out, have, attempts, chunk = [], 0, 0, 0
    while have < target and attempts < config.max_attempts:
        size = min(_CHUNK, config.max_attempts - attempts)
        if config.clicks is None:
            size = min(size, target - have)
        bits = _squashed_chunk(n, m, Tp, substream(config.seed, stream, chunk), size)
        if config.clicks is not None:
            bits = bits[bits.sum(axis=1) == config.clicks]
        out.append(bits[: target - have])
        have += len(out[-1])
        attempts += size
        chunk += 1
    patterns = np.concatenate(out) if out else np.zeros((0, Tp.shape[0]), dtype=np.uint8)
    complete = have >= target
    if not complete:
        log.warning("rejection cap reached: %d of %d samples with %s clicks", have, target, config.clicks)
    return SampleSet(patterns, "squashed-sampler", complete)


def _masks_to_patterns(masks: np.ndarray, M: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(M)) & 1).astype(np.uint8)


def exact_sample(sigma, L: int, seed: int | None = 0, clicks: int | None = None, table=None) -> SampleSet:
    """Inverse-CDF sampling from the full probability table (M <= 12).

    With ``clicks`` given, samples come from the table restricted to that
    sector and renormalised, which equals rejection sampling exactly.
    """
    if table is None:
        sigma = np.asarray(sigma, dtype=float)
        M = sigma.shape[0] // 2
        if M > MAX_TABLE_MODES:
            raise InputError(f"exact sampling needs M <= {MAX_TABLE_MODES}, got M = {M}")
        table = exact_distribution(sigma, method="vacuum")
    table = np.clip(np.asarray(table, dtype=float), 0.0, None)
    M = int(np.log2(len(table)))
    if clicks is not None:
        if not 0 <= clicks <= M:
            raise InputError(f"click number {clicks} outside [0, {M}]")
        table = np.where(popcounts(M) == clicks, table, 0.0)
        if table.sum() <= 0:
            raise InputError(f"sector C={clicks} has zero probability")
    cdf = np.cumsum(table)
    cdf /= cdf[-1]
    rng = substream(seed, "exact" if clicks is None else f"exact-C{clicks}", 0)
    masks = np.searchsorted(cdf, rng.random(int(L)), side="right")
    masks = np.minimum(masks, len(table) - 1)
    return SampleSet(_masks_to_patterns(masks, M), "exact-sampler")
