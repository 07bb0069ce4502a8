r"""Exact threshold-detector click probabilities.

For a zero-mean Gaussian state with covariance ``sigma`` the Husimi matrix is
``Sigma = I/2 + R sigma R^dagger / hbar`` and ``O = I - Sigma^{-1}``. A click
pattern ``s`` with clicked modes ``j_1..j_C`` has probability

    Pr(s) = Tor(O_(s)) / sqrt(det Sigma),

where ``O_(s)`` keeps rows/columns ``j_1..j_C, j_1+M..j_C+M`` and

    Tor(A) = sum_{Z subset [N]} (-1)^(N-|Z|) / sqrt(det (I - A)_(Z))

with ``(I - A)_(Z)`` again keeping the rows/columns of ``Z``.

The subset sum is evaluated by eliminating one mode at a time: every subset is
its parent subset plus (or minus) the next mode, and including a mode is a
rank-2 Schur-complement update of the parent's remaining block. Each leaf
therefore costs O(1) amortised work instead of a fresh O(N^3) determinant,
and all subsets at one depth are processed as a single numpy batch.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ddarray import CDD, DD
from .errors import InputError, NumericError
from .gaussian import HBAR, mode_count, reduced_covariance

log = logging.getLogger(__name__)

#: Largest Torontonian size evaluated exactly (2**30 subsets).
MAX_TORONTONIAN_SIZE = 30

#: Probabilities this far outside [0, 1] are clamped with a warning; beyond, abort.
PROBABILITY_SLACK = 1e-9


class PrecisionMode(str, enum.Enum):
    DOUBLE = "double"
    EXTENDED = "extended"

    @classmethod
    def parse(cls, value) -> "PrecisionMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(f"unknown precision {value!r}; expected 'double' or 'extended'") from None


# ---------------------------------------------------------------------------
# Husimi matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HusimiPair:
    """Husimi matrix ``Sigma``, ``O = I - Sigma^{-1}`` and ``log sqrt(det Sigma)``."""

    sigma_q: np.ndarray
    sigma_q_inv: np.ndarray
    log_sqrt_det: float
    vacuum_probability: float
    label: str | None = None
    O: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        O = np.eye(len(self.sigma_q)) - self.sigma_q_inv
        object.__setattr__(self, "O", O)

    @property
    def M(self) -> int:
        return len(self.sigma_q) // 2

    @property
    def sqrt_det(self) -> float:
        return math.exp(self.log_sqrt_det)

    def keep(self, modes) -> np.ndarray:
        """Row/column indices ``modes`` and ``modes + M``."""
        modes = np.asarray(modes, dtype=int)
        return np.concatenate([modes, modes + self.M])

    def reduced(self, modes, label: str | None = None) -> "HusimiPair":
        """Husimi pair of the marginal state on ``modes``."""
        idx = self.keep(modes)
        return _husimi_from_sigma_q(self.sigma_q[np.ix_(idx, idx)], label or self.label)


def _quadrature_to_ladder(M: int) -> np.ndarray:
    I = np.eye(M)
    return np.block([[I, 1j * I], [I, -1j * I]]) / np.sqrt(2)


def _husimi_from_sigma_q(sigma_q: np.ndarray, label: str | None) -> HusimiPair:
    n = len(sigma_q)
    if n == 0:
        return HusimiPair(sigma_q, sigma_q.copy(), 0.0, 1.0, label)
    try:
        L = np.linalg.cholesky(sigma_q)
    except np.linalg.LinAlgError:
        raise NumericError(f"Husimi matrix of {label or 'the state'} is singular or not positive definite") from None
    log_sqrt_det = float(np.sum(np.log(np.diag(L).real)))
    if log_sqrt_det < -1e-10:
        raise NumericError(f"Husimi matrix of {label or 'the state'} has det < 1; the covariance is unphysical")
    # LU determinant keeps exactly representable cases exact (thermal: det = (1+n)^2)
    det = np.linalg.det(sigma_q).real
    if np.isfinite(det) and det > 0 and abs(0.5 * math.log(det) - log_sqrt_det) < 1e-8:
        vacuum = 1.0 / math.sqrt(det)
    else:
        vacuum = math.exp(-log_sqrt_det)
    inv = np.linalg.inv(sigma_q)
    inv = (inv + inv.conj().T) / 2
    return HusimiPair(sigma_q, inv, log_sqrt_det, vacuum, label)


def husimi_from_covariance(sigma, hbar: float = HBAR, label: str | None = None) -> HusimiPair:
    """Build ``(Sigma, O)`` from an xxpp covariance matrix.

    Raises:
        NumericError: if ``Sigma`` is numerically singular or not positive definite.
    """
    sigma = np.asarray(sigma, dtype=float)
    M = mode_count(sigma)
    # closed form of R sigma R^dagger; avoids rounding from 1/sqrt(2) entries
    X, Y, P = sigma[:M, :M], sigma[:M, M:], sigma[M:, M:]
    a = (X + P) + 1j * (Y.T - Y)
    b = (X - P) + 1j * (Y + Y.T)
    sigma_q = np.eye(2 * M) / 2 + np.block([[a, b], [b.conj(), a.conj()]]) / (2 * hbar)
    sigma_q = (sigma_q + sigma_q.conj().T) / 2
    return _husimi_from_sigma_q(sigma_q, label)


def _as_husimi(state, hbar: float = HBAR) -> HusimiPair:
    return state if isinstance(state, HusimiPair) else husimi_from_covariance(state, hbar)


# ---------------------------------------------------------------------------
# click patterns
# ---------------------------------------------------------------------------


def as_pattern(s, M: int | None = None) -> np.ndarray:
    """Validate a click pattern (sequence or ``"0101"`` string) and return it as uint8."""
    if isinstance(s, str):
        if set(s) - {"0", "1"}:
            raise InputError(f"click pattern string {s!r} may only contain 0 and 1")
        s = [int(c) for c in s]
    arr = np.asarray(s)
    if arr.ndim != 1:
        raise InputError(f"click pattern must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise InputError("click pattern entries must be 0 or 1")
    if M is not None and arr.size != M:
        raise InputError(f"click pattern has length {arr.size}, expected {M}")
    return arr.astype(np.uint8)


def pattern_from_mask(mask: int, M: int) -> np.ndarray:
    return np.array([(mask >> j) & 1 for j in range(M)], dtype=np.uint8)


def mask_from_pattern(s) -> int:
    return int(sum(int(b) << j for j, b in enumerate(s)))


# ---------------------------------------------------------------------------
# the subset-sum kernel
# ---------------------------------------------------------------------------

# Leaves per independently processed chunk. Fixed per precision so that the
# summation order never depends on the worker count.
_CHUNK_LEAVES = {PrecisionMode.DOUBLE: 1 << 18, PrecisionMode.EXTENDED: 1 << 16}


def _hi(x):
    return x.hi if isinstance(x, DD) else x


def _concat(parts):
    if isinstance(parts[0], CDD):
        return CDD.concat(parts)
    if isinstance(parts[0], DD):
        return DD.concat(parts)
    return np.concatenate(parts)


def _eliminate(S, det, size):
    """Branch every state on the leading mode: excluded first, then included.

    ``S`` has shape (B, 2n, 2n) in paired ordering (mode k on rows 2k, 2k+1)
    and is the Schur complement of the not-yet-decided modes. Returns the
    doubled batch for the remaining n-1 modes.
    """
    a00 = S[:, 0, 0].real
    a11 = S[:, 1, 1].real
    a01 = S[:, 0, 1]
    a10 = S[:, 1, 0]
    d2 = a00 * a11 - (a01.real * a01.real + a01.imag * a01.imag)
    if np.any(_hi(a00) <= 0) or np.any(_hi(d2) <= 0):
        raise NumericError("det(I - A_(Z)) <= 0 for some subset; the Torontonian input is unphysical")
    rest = S[:, 2:, 2:]
    if S.shape[1] > 2:
        b0 = S[:, 0, 2:]
        b1 = S[:, 1, 2:]
        c0 = S[:, 2:, 0]
        c1 = S[:, 2:, 1]
        x0 = b0 * a11[:, None] - a01[:, None] * b1
        x1 = b1 * a00[:, None] - a10[:, None] * b0
        update = c0[:, :, None] * x0[:, None, :] + c1[:, :, None] * x1[:, None, :]
        inv = 1.0 / d2
        included = rest - update * inv[:, None, None]
    else:
        included = rest
    return _concat([rest, included]), _concat([det, det * d2]), np.concatenate([size, size + 1])


def _leaf_sum(det, size, N, precision):
    signs = np.where((N - size) % 2 == 0, 1.0, -1.0)
    if precision is PrecisionMode.EXTENDED:
        return (det.rsqrt() * signs).sum()
    return DD(np.sum(signs / np.sqrt(det)))


def _chunks(S, det, size, remaining, limit):
    if len(size) << remaining <= limit or remaining == 0:
        yield S, det, size
        return
    if len(size) > 1:
        h = len(size) // 2
        yield from _chunks(S[:h], det[:h], size[:h], remaining, limit)
        yield from _chunks(S[h:], det[h:], size[h:], remaining, limit)
        return
    S, det, size = _eliminate(S, det, size)
    yield from _chunks(S, det, size, remaining - 1, limit)


def _reduce_chunk(chunk, N, precision):
    S, det, size = chunk
    while S.shape[1]:
        S, det, size = _eliminate(S, det, size)
    return _leaf_sum(det, size, N, precision)


def _tor_of_complement(X: np.ndarray, precision=PrecisionMode.DOUBLE, threads: int = 1) -> DD:
    """Subset sum for ``X = I - A`` (Hermitian, 2N x 2N). Returns a scalar DD."""
    N = len(X) // 2
    if N == 0:
        return DD(1.0)
    perm = np.empty(2 * N, dtype=int)
    perm[0::2] = np.arange(N)
    perm[1::2] = np.arange(N) + N
    Xp = np.asarray(X, dtype=complex)[np.ix_(perm, perm)][None]
    if precision is PrecisionMode.EXTENDED:
        S, det = CDD.from_complex(Xp), DD(np.ones(1))
    else:
        S, det = Xp, np.ones(1)
    size = np.zeros(1, dtype=np.int64)
    chunks = _chunks(S, det, size, N, _CHUNK_LEAVES[precision])

    total = DD(0.0)
    if threads <= 1:
        for chunk in chunks:
            total = total + _reduce_chunk(chunk, N, precision)
        return total
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while True:
            window = list(itertools.islice(chunks, 2 * threads))
            if not window:
                break
            for partial in pool.map(lambda c: _reduce_chunk(c, N, precision), window):
                total = total + partial
    return total


def _check_tor_input(A, max_size: int) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
        raise InputError(f"Torontonian needs a square matrix of even size, got shape {A.shape}")
    N = A.shape[0] // 2
    if N > max_size:
        raise InputError(
            f"Torontonian of size {N} exceeds the exact-evaluation cap of {max_size} "
            "(2**N subsets); use the phase-space estimator for grouped click probabilities instead"
        )
    if not np.all(np.isfinite(A)):
        raise InputError("Torontonian input has non-finite entries")
    if A.size and np.abs(A - A.conj().T).max() > 1e-10 * max(1.0, np.abs(A).max()):
        raise InputError("Torontonian input must be Hermitian")
    return A


def torontonian(
    A,
    precision: PrecisionMode | str = PrecisionMode.DOUBLE,
    max_size: int = MAX_TORONTONIAN_SIZE,
    threads: int = 1,
) -> float:
    """Torontonian of a Hermitian 2N x 2N matrix (keep-rows convention).

    Args:
        A: matrix in (a, a^dagger) block ordering, e.g. a submatrix ``O_(s)``.
        precision: ``double`` or ``extended`` (double-double) accumulation.
        max_size: refuse matrices with N above this.
        threads: worker threads; the result does not depend on this.

    Returns:
        float: the Torontonian; 1 for the empty matrix.
    """
    precision = PrecisionMode.parse(precision)
    A = _check_tor_input(A, max_size)
    X = np.eye(len(A)) - A
    return float(_tor_of_complement(X, precision, threads))


def torontonian_naive(A) -> float:
    """Reference Torontonian: one fresh determinant per subset."""
    A = np.asarray(A, dtype=complex)
    N = len(A) // 2
    X = np.eye(2 * N) - A
    total = 0.0
    for k in range(N + 1):
        for Z in itertools.combinations(range(N), k):
            idx = list(Z) + [z + N for z in Z]
            d = np.linalg.det(X[np.ix_(idx, idx)]).real if idx else 1.0
            if d <= 0:
                raise NumericError("det(I - A_(Z)) <= 0; unphysical Torontonian input")
            total += (-1) ** (N - k) / math.sqrt(d)
    return total


# ---------------------------------------------------------------------------
# probabilities
# ---------------------------------------------------------------------------


def _clicked_tor(h: HusimiPair, pattern: np.ndarray, precision, threads, max_size) -> float:
    modes = np.flatnonzero(pattern)
    if len(modes) > max_size:
        raise InputError(
            f"pattern has {len(modes)} clicks, above the exact-evaluation cap of {max_size}; "
            "use the phase-space estimator for grouped quantities"
        )
    idx = h.keep(modes)
    return float(_tor_of_complement(h.sigma_q_inv[np.ix_(idx, idx)], precision, threads))


def click_probability(
    h: HusimiPair,
    s,
    precision: PrecisionMode | str = PrecisionMode.DOUBLE,
    threads: int = 1,
    max_size: int = MAX_TORONTONIAN_SIZE,
) -> float:
    """Probability of the click pattern ``s``.

    Values within 1e-9 outside [0, 1] are clamped with a warning; larger
    violations raise :class:`NumericError`.
    """
    precision = PrecisionMode.parse(precision)
    pattern = as_pattern(s, h.M)
    p = _clicked_tor(h, pattern, precision, threads, max_size) * h.vacuum_probability
    if 0.0 <= p <= 1.0:
        return p
    if -PROBABILITY_SLACK <= p <= 1 + PROBABILITY_SLACK:
        log.warning("click probability %.3e outside [0, 1] within tolerance; clamped", p)
        return min(max(p, 0.0), 1.0)
    raise NumericError(f"click probability {p!r} is outside [0, 1]; try extended precision")


def log_click_probability(
    h: HusimiPair,
    s,
    precision: PrecisionMode | str = PrecisionMode.DOUBLE,
    threads: int = 1,
    max_size: int = MAX_TORONTONIAN_SIZE,
) -> float:
    """Natural log of :func:`click_probability`, without underflow for large M."""
    precision = PrecisionMode.parse(precision)
    pattern = as_pattern(s, h.M)
    tor = _clicked_tor(h, pattern, precision, threads, max_size)
    if not tor > 0:
        raise NumericError(
            f"Torontonian {tor!r} is not positive for pattern {''.join(map(str, pattern))}; "
            "log-probability undefined (try extended precision)"
        )
    return math.log(tor) - h.log_sqrt_det


def _check_modes(modes, M: int) -> np.ndarray:
    modes = np.asarray(list(modes), dtype=int).ravel()
    if len(set(modes.tolist())) != len(modes):
        raise InputError(f"duplicate mode indices in {modes.tolist()}")
    if modes.size and (modes.min() < 0 or modes.max() >= M):
        raise InputError(f"mode indices {modes.tolist()} out of range for {M} modes")
    return modes


def marginal_probability(
    state,
    modes: Iterable[int],
    precision: PrecisionMode | str = PrecisionMode.DOUBLE,
    hbar: float = HBAR,
) -> float:
    """Probability that every mode in ``modes`` clicks (others unconstrained).

    ``state`` is a covariance matrix or a :class:`HusimiPair`.
    """
    precision = PrecisionMode.parse(precision)
    if isinstance(state, HusimiPair):
        modes = _check_modes(modes, state.M)
        if modes.size == 0:
            return 1.0
        h = state.reduced(modes)
    else:
        sigma = np.asarray(state, dtype=float)
        modes = _check_modes(modes, mode_count(sigma))
        if modes.size == 0:
            return 1.0
        h = husimi_from_covariance(reduced_covariance(sigma, modes), hbar)
    return click_probability(h, np.ones(len(modes), dtype=np.uint8), precision)


# ---------------------------------------------------------------------------
# batched low-order marginals via vacuum probabilities
# ---------------------------------------------------------------------------


def vacuum_probabilities(state, subsets, hbar: float = HBAR) -> np.ndarray:
    """``Pr(no click in V)`` for each equal-size index set ``V`` (rows of ``subsets``).

    Uses ``Pr(no click in V) = 1 / sqrt(det Sigma_V)`` with batched Cholesky.
    """
    h = _as_husimi(state, hbar)
    subsets = np.asarray(subsets, dtype=int)
    if subsets.ndim != 2:
        raise InputError("subsets must be a 2-D array of mode indices")
    if subsets.shape[1] == 0:
        return np.ones(len(subsets))
    idx = np.concatenate([subsets, subsets + h.M], axis=1)
    mats = h.sigma_q[idx[:, :, None], idx[:, None, :]]
    try:
        L = np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        raise NumericError("reduced Husimi matrix is not positive definite") from None
    logdiag = np.log(np.diagonal(L, axis1=1, axis2=2).real)
    return np.exp(-logdiag.sum(axis=1))


def batch_marginals(state, blocks: Sequence[Sequence[int]], hbar: float = HBAR) -> np.ndarray:
    """All-click marginals for many small mode sets by inclusion-exclusion.

    ``Pr(all of W click) = sum_{V subset W} (-1)^{|V|} Pr(no click in V)``.
    Intended for the low orders (<= 4) used by cumulant tables.
    """
    h = _as_husimi(state, hbar)
    blocks = [tuple(sorted(_check_modes(b, h.M).tolist())) for b in blocks]
    needed: dict[int, set] = {}
    for b in blocks:
        for k in range(1, len(b) + 1):
            needed.setdefault(k, set()).update(itertools.combinations(b, k))
    q: dict[tuple, float] = {(): 1.0}
    for k, subs in needed.items():
        subs = sorted(subs)
        vals = vacuum_probabilities(h, np.array(subs, dtype=int).reshape(len(subs), k))
        q.update(zip(subs, vals))
    out = np.empty(len(blocks))
    for i, b in enumerate(blocks):
        acc = 0.0
        for k in range(len(b) + 1):
            sign = -1.0 if k % 2 else 1.0
            for V in itertools.combinations(b, k):
                acc += sign * q[V]
        out[i] = acc
    return out


def click_count_mean_std(state, hbar: float = HBAR) -> tuple[float, float]:
    """Mean and standard deviation of the total click number.

    Uses single- and two-mode marginals only: ``C = sum_i p_i`` and
    ``Var C = sum_i p_i (1 - p_i) + sum_{i != j} (p_ij - p_i p_j)``.
    """
    h = _as_husimi(state, hbar)
    M = h.M
    if M == 0:
        return 0.0, 0.0
    q1 = vacuum_probabilities(h, np.arange(M)[:, None])
    p1 = 1.0 - q1
    mean = float(np.sum(p1))
    var = float(np.sum(p1 * (1 - p1)))
    if M > 1:
        i, j = np.triu_indices(M, k=1)
        q2 = vacuum_probabilities(h, np.column_stack([i, j]))
        p2 = 1.0 - q1[i] - q1[j] + q2
        var += 2.0 * float(np.sum(p2 - p1[i] * p1[j]))
    return mean, math.sqrt(max(var, 0.0))


# ---------------------------------------------------------------------------
# full tables (small M)
# ---------------------------------------------------------------------------

#: Mode cap for full 2**M probability tables.
MAX_TABLE_MODES = 12


def exact_distribution(
    state,
    method: str = "torontonian",
    precision: PrecisionMode | str = PrecisionMode.DOUBLE,
    max_modes: int = MAX_TABLE_MODES,
    hbar: float = HBAR,
) -> np.ndarray:
    """Probabilities of all ``2**M`` patterns, indexed by bitmask (bit j = mode j).

    ``method='torontonian'`` evaluates every pattern with :func:`click_probability`;
    ``method='vacuum'`` computes all no-click probabilities and applies a
    Moebius transform over the subset lattice. The two routes share no code
    beyond the Husimi matrix and serve as oracles for each other.
    """
    h = _as_husimi(state, hbar)
    M = h.M
    if M > max_modes:
        raise InputError(f"full probability table needs M <= {max_modes}, got M = {M}")
    if method == "torontonian":
        return np.array([click_probability(h, pattern_from_mask(m, M), precision) for m in range(1 << M)])
    if method != "vacuum":
        raise InputError(f"unknown table method {method!r}")
    masks = np.arange(1 << M)
    bits = (masks[:, None] >> np.arange(M)) & 1
    # f[D] = Pr(no click outside D)
    f = np.empty(1 << M)
    sizes = M - bits.sum(axis=1)
    for k in range(M + 1):
        rows = np.flatnonzero(sizes == k)
        comp = np.array([np.flatnonzero(bits[r] == 0) for r in rows], dtype=int).reshape(len(rows), k)
        f[rows] = vacuum_probabilities(h, comp)
    for j in range(M):
        view = f.reshape(-1, 2, 1 << j)
        view[:, 1, :] -= view[:, 0, :]
    return f


def popcounts(M: int) -> np.ndarray:
    masks = np.arange(1 << M)
    return ((masks[:, None] >> np.arange(M)) & 1).sum(axis=1)


def sector_probabilities(table: np.ndarray) -> np.ndarray:
    """Collapse a full pattern table to ``Pr(C)`` for C = 0..M."""
    M = int(round(math.log2(len(table))))
    return np.bincount(popcounts(M), weights=table, minlength=M + 1)
