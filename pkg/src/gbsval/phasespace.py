r"""Positive-P Monte Carlo estimates of grouped click probabilities ``Pr(C)``.

Input mode ``j`` with signed squeezing ``zeta_j`` has ``n_j = sinh(zeta_j)^2``
and coherence ``m_j = sinh(2 zeta_j) / 2`` (squeezed) or ``m_j = sign(zeta_j) n_j``
(squashed). Amplitudes are drawn as

    alpha = u sqrt((n+m)/2) + i v sqrt((n-m)/2)
    beta  = u sqrt((n+m)/2) - i v sqrt((n-m)/2)

with principal complex square roots, so that ``E[alpha beta] = n`` and
``E[alpha^2] = E[beta^2] = m``. For squashed inputs ``beta = conj(alpha)`` and
the weight is an ordinary probability density.

The coherence sign here is the opposite of the one implied by the covariance
matrices in :mod:`gbsval.gaussian`. That amounts to a global quarter-turn of
every input phase, which commutes with the real beamsplitters and the linear
interferometer and leaves all click statistics unchanged.

After the interferometer, ``abar = T' alpha``, ``bbar = conj(T') beta`` with
``T' = T B``. With ``p_j = exp(-abar_j bbar_j)``,

    G(theta) = prod_j [p_j + e^{i theta} (1 - p_j)]

is the generating polynomial of the click number, evaluated at the M+1 roots of
unity and inverted by a discrete Fourier transform.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .gaussian import HypothesisKind, SpecLike, as_spec, beamsplitter_modes, check_transmission
from .rng import substream

#: Modes multiplied in linear space before taking one logarithm.
_LOG_BLOCK = 8

#: Soft cap on complex entries held per work chunk.
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class AmplitudeBatch:
    """Paired amplitude vectors, one row per Monte Carlo sample."""

    alpha: np.ndarray
    beta: np.ndarray
    kind: HypothesisKind
    seed: int | None = None

    @property
    def count(self) -> int:
        return self.alpha.shape[0]

    @property
    def modes(self) -> int:
        return self.alpha.shape[1]


def input_moments(spec: SpecLike, kind) -> tuple[np.ndarray, np.ndarray]:
    """Per-input mean photon number ``n`` and coherence ``m`` (length K)."""
    kind = HypothesisKind.parse(kind)
    zeta = as_spec(spec).signed
    n = np.sinh(zeta) ** 2
    if kind is HypothesisKind.SQUE:
        m = 0.5 * np.sinh(2 * zeta)
    else:
        m = np.sign(zeta) * n
    return n, m


def _amplitudes(n, m, rng: np.random.Generator, count: int):
    a = np.sqrt(((n + m) / 2).astype(complex))
    b = np.sqrt(((n - m) / 2).astype(complex))
    u = rng.standard_normal((count, len(n)))
    v = rng.standard_normal((count, len(n)))
    return u * a + 1j * v * b, u * a - 1j * v * b


def sample_amplitudes(spec: SpecLike, kind, count: int, seed: int | None = None, rng=None) -> AmplitudeBatch:
    """Draw ``count`` amplitude pairs for the K single-mode inputs."""
    if count < 1:
        raise InputError(f"sample count must be >= 1, got {count}")
    kind = HypothesisKind.parse(kind)
    n, m = input_moments(spec, kind)
    if rng is None:
        rng = substream(seed, "amplitudes", 0)
    alpha, beta = _amplitudes(n, m, rng, int(count))
    return AmplitudeBatch(alpha, beta, kind, seed)


def composed_transmission(T, B=None) -> np.ndarray:
    """``T' = T B`` with B defaulting to the pairwise 50:50 beamsplitters."""
    T = check_transmission(T)
    if B is None:
        B = beamsplitter_modes(T.shape[1])
    B = np.asarray(B)
    if B.shape != (T.shape[1], T.shape[1]):
        raise InputError(f"beamsplitter matrix must be {T.shape[1]}x{T.shape[1]}, got {B.shape}")
    return T @ B


def transform_amplitudes(batch: AmplitudeBatch, T, B=None) -> AmplitudeBatch:
    """Propagate amplitudes: ``abar = T' alpha``, ``bbar = conj(T') beta``."""
    Tp = composed_transmission(T, B)
    if Tp.shape[1] != batch.modes:
        raise InputError(f"transmission has {Tp.shape[1]} columns but amplitudes have {batch.modes} modes")
    return AmplitudeBatch(batch.alpha @ Tp.T, batch.beta @ Tp.conj().T, batch.kind, batch.seed)


# ---------------------------------------------------------------------------
# generating function
# ---------------------------------------------------------------------------


def _log_factors_direct(p0, q, phase):
    return np.log(p0[:, :, None] + phase[None, None, :] * q[:, :, None]).sum(axis=1)


def generating_function(abar: np.ndarray, bbar: np.ndarray) -> np.ndarray:
    """``G(theta_l)`` for every sample (rows) and ``l = 0..M`` (columns).

    The product over modes is accumulated as a sum of logarithms of short
    linear-space blocks; rows whose block product overflows are redone one
    factor at a time.
    """
    n, M = abar.shape
    x = abar * bbar
    p0 = np.exp(-x)
    q = -np.expm1(-x)
    phase = np.exp(2j * np.pi * np.arange(M + 1) / (M + 1))
    logG = np.zeros((n, M + 1), dtype=complex)
    bad = np.zeros(n, dtype=bool)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for start in range(0, M, _LOG_BLOCK):
            block = np.ones((n, M + 1), dtype=complex)
            for j in range(start, min(start + _LOG_BLOCK, M)):
                block *= p0[:, j, None] + phase[None, :] * q[:, j, None]
            bad |= ~np.all(np.isfinite(block), axis=1)
            logG += np.log(block)
        if bad.any():
            logG[bad] = _log_factors_direct(p0[bad], q[bad], phase)
        return np.exp(logG)


def fourier_coefficients(G: np.ndarray) -> np.ndarray:
    """``Gt(C) = (1/(M+1)) sum_l G(theta_l) exp(-i C theta_l)`` along the last axis."""
    return np.fft.fft(G, axis=-1) / G.shape[-1]


def pattern_probability_estimate(transformed: AmplitudeBatch, s) -> tuple[float, float]:
    """Monte Carlo estimate of ``Pr(s)`` and its standard error of the mean."""
    s = np.asarray(s, dtype=bool)
    if s.shape != (transformed.modes,):
        raise InputError(f"pattern length {s.size} does not match {transformed.modes} modes")
    x = transformed.alpha * transformed.beta
    lam = np.prod(np.where(s, -np.expm1(-x), np.exp(-x)), axis=1).real
    sem = lam.std(ddof=1) / math.sqrt(len(lam)) if len(lam) > 1 else float("nan")
    return float(lam.mean()), float(sem)


# ---------------------------------------------------------------------------
# grouped estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupedClickDistribution:
    """Estimated ``Pr(C)``, C = 0..M, from ``groups`` equal groups of samples.

    ``stderr`` is the standard deviation of the per-group estimates; ``sem``
    divides it by ``sqrt(groups)``.
    """

    probs: np.ndarray
    stderr: np.ndarray
    sem: np.ndarray
    group_probs: np.ndarray
    n_samples: int
    groups: int
    kind: HypothesisKind
    max_imag: float
    seed: int | None = None

    @property
    def M(self) -> int:
        return len(self.probs) - 1

    def clamped(self) -> np.ndarray:
        """Probabilities clipped to [0, 1] for presentation."""
        return np.clip(self.probs, 0.0, 1.0)

    def rows(self):
        for C, (p, e) in enumerate(zip(self.probs, self.stderr)):
            yield {"C": C, "Pr": float(p), "stderr": float(e), "hypothesis": self.kind.value}


def _group_mean_G(abar, bbar) -> np.ndarray:
    n, M = abar.shape
    step = max(1, _CHUNK_ELEMENTS // ((M + 1) * max(M, 1)))
    acc = np.zeros(M + 1, dtype=complex)
    for i in range(0, n, step):
        acc += generating_function(abar[i : i + step], bbar[i : i + step]).sum(axis=0)
    return acc / n


def _from_group_means(Gbar: np.ndarray, n_samples, kind, seed) -> GroupedClickDistribution:
    Gt = fourier_coefficients(Gbar)
    groups = len(Gt)
    per_group = Gt.real
    probs = per_group.mean(axis=0)
    std = per_group.std(axis=0, ddof=1) if groups > 1 else np.full(per_group.shape[1], np.nan)
    max_imag = float(np.abs(Gt.mean(axis=0).imag).max())
    return GroupedClickDistribution(probs, std, std / math.sqrt(groups), per_group, n_samples, groups, kind, max_imag, seed)


def grouped_click_probabilities(transformed: AmplitudeBatch, groups: int = 100) -> GroupedClickDistribution:
    """Estimate ``Pr(C)`` from an already propagated batch split into equal groups."""
    N = transformed.count
    if groups < 1 or N % groups:
        raise InputError(f"sample count {N} is not divisible by the group count {groups}")
    size = N // groups
    Gbar = np.array(
        [
            _group_mean_G(transformed.alpha[g * size : (g + 1) * size], transformed.beta[g * size : (g + 1) * size])
            for g in range(groups)
        ]
    )
    return _from_group_means(Gbar, N, transformed.kind, transformed.seed)


def estimate_grouped(
    spec: SpecLike,
    T,
    kind,
    n_samples: int = 1_000_000,
    groups: int = 100,
    seed: int | None = 0,
    threads: int = 1,
) -> GroupedClickDistribution:
    """Draw, propagate and reduce ``n_samples`` amplitudes in ``groups`` groups.

    Group ``g`` draws from its own substream ``(seed, kind, g)``, so results
    are identical for any ``threads``.
    """
    kind = HypothesisKind.parse(kind)
    n_samples, groups = int(n_samples), int(groups)
    if groups < 1 or n_samples < groups or n_samples % groups:
        raise InputError(f"sample count {n_samples} is not divisible by the group count {groups}")
    spec = as_spec(spec)
    Tp = composed_transmission(T)
    if Tp.shape[1] != spec.K:
        raise InputError(f"transmission has {Tp.shape[1]} columns, squeezing spec expands to {spec.K} inputs")
    n, m = input_moments(spec, kind)
    size = n_samples // groups
    M = Tp.shape[0]
    step = max(1, _CHUNK_ELEMENTS // ((M + 1) * max(M, spec.K, 1)))
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (1 << 63))

    def one_group(g: int) -> np.ndarray:
        rng = substream(seed, f"phasespace-{kind.value}", g)
        acc = np.zeros(M + 1, dtype=complex)
        done = 0
        while done < size:
            k = min(step, size - done)
            alpha, beta = _amplitudes(n, m, rng, k)
            acc += generating_function(alpha @ Tp.T, beta @ Tp.conj().T).sum(axis=0)
            done += k
        return acc / size

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            Gbar = np.array(list(pool.map(one_group, range(groups))))
    else:
        Gbar = np.array([one_group(g) for g in range(groups)])
    return _from_group_means(Gbar, n_samples, kind, seed)


@dataclass(frozen=True)
class ClickSummary:
    mean: float
    mean_err: float
    std: float
    std_err: float


def summarize(dist: GroupedClickDistribution) -> ClickSummary:
    """Mean and standard deviation of C with first-order propagated uncertainties.

    The covariance of the per-group estimates across C is used, so correlated
    errors between neighbouring sectors are accounted for. Errors are on the
    same footing as ``dist.stderr`` (spread of group estimates).
    """
    C = np.arange(dist.M + 1, dtype=float)
    p = dist.probs
    mean = float(C @ p)
    var = float(C**2 @ p - mean**2)
    std = math.sqrt(max(var, 0.0))
    if dist.groups < 2:
        return ClickSummary(mean, float("nan"), std, float("nan"))
    cov = np.atleast_2d(np.cov(dist.group_probs, rowvar=False, ddof=1))
    g_mean = C
    mean_err = math.sqrt(max(float(g_mean @ cov @ g_mean), 0.0))
    if std > 0:
        g_std = (C**2 - 2 * mean * C) / (2 * std)
        std_err = math.sqrt(max(float(g_std @ cov @ g_std), 0.0))
    else:
        std_err = 0.0
    return ClickSummary(mean, mean_err, std, std_err)
