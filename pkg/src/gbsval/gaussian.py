r"""Covariance matrices of the squeezed and squashed input hypotheses.

All covariance matrices use xxpp ordering, ``(x_1..x_M, p_1..p_M)``, and the
internal convention ``hbar = 2`` so that the vacuum covariance is the identity.
Every public constructor still accepts an ``hbar`` keyword so the
hbar-invariance of click probabilities can be checked.

Input states come in two-mode pairs. A user supplies one squeezing parameter
``r_i`` per pair; internally it is expanded to the alternating list
``(-r_1, r_1, -r_2, r_2, ...)`` and the pair is interfered on a real 50:50
beamsplitter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import InputError, NumericError

HBAR = 2.0

#: Relative slack on singular values of a transmission matrix.
PHYSICAL_TOL = 1e-10


class HypothesisKind(str, enum.Enum):
    """Ground-truth squeezed input (SQUE) or classical squashed input (SQUA)."""

    SQUE = "SQUE"
    SQUA = "SQUA"

    @classmethod
    def parse(cls, value: "HypothesisKind | str") -> "HypothesisKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise InputError(f"unknown hypothesis {value!r}; expected SQUE or SQUA") from None


@dataclass(frozen=True)
class SqueezeSpec:
    """One non-negative squeezing parameter per two-mode squeezer."""

    r: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        if r.ndim != 1:
            raise InputError("squeezing parameters must be a flat list")
        if not np.all(np.isfinite(r)):
            raise InputError("squeezing parameters must be finite")
        if np.any(r < 0):
            raise InputError(f"squeezing parameters must be >= 0, got min {r.min()!r}")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def K(self) -> int:
        """Number of single-mode inputs, twice the number of squeezers."""
        return 2 * len(self.r)

    @property
    def signed(self) -> np.ndarray:
        """The alternating expansion ``(-r_1, r_1, ..., -r_n, r_n)``."""
        out = np.empty(self.K)
        out[0::2] = -self.r
        out[1::2] = self.r
        return out

    @property
    def mean_photons(self) -> np.ndarray:
        """Per-input mean photon number ``sinh(r)**2`` (length K)."""
        return np.sinh(self.signed) ** 2


SpecLike = Union[SqueezeSpec, Sequence[float], np.ndarray]


def as_spec(spec: SpecLike) -> SqueezeSpec:
    return spec if isinstance(spec, SqueezeSpec) else SqueezeSpec(np.asarray(spec, dtype=float))


# ---------------------------------------------------------------------------
# single-mode building blocks (per-mode signed parameters)
# ---------------------------------------------------------------------------


def squeezed_vacuum_covariance(zeta, hbar: float = HBAR) -> np.ndarray:
    """Diagonal covariance of independent squeezed vacua.

    Mode ``k`` gets x-variance ``exp(-2 zeta_k)`` and p-variance ``exp(2 zeta_k)``
    (times hbar/2), so a negative parameter squeezes p instead of x.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    return (hbar / 2) * np.diag(np.concatenate([np.exp(-2 * zeta), np.exp(2 * zeta)]))


def squashed_mode_covariance(zeta, hbar: float = HBAR) -> np.ndarray:
    """Squeezed-vacuum covariance with ``e^{-2|z|} -> 1`` and ``e^{2|z|} -> 1 + 4 sinh(z)^2``.

    The squashed mode keeps the orientation of the squeezed mode it replaces:
    vacuum noise in the squeezed quadrature, excess classical noise in the other.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    big = 1 + 4 * np.sinh(zeta) ** 2
    x_var = np.where(zeta > 0, 1.0, big)
    p_var = np.where(zeta > 0, big, 1.0)
    return (hbar / 2) * np.diag(np.concatenate([x_var, p_var]))


def thermal_covariance(nbar, hbar: float = HBAR) -> np.ndarray:
    """Product of thermal states with mean photon numbers ``nbar``."""
    nbar = np.atleast_1d(np.asarray(nbar, dtype=float))
    return (hbar / 2) * np.diag(np.tile(1 + 2 * nbar, 2))


def vacuum_covariance(M: int, hbar: float = HBAR) -> np.ndarray:
    return (hbar / 2) * np.eye(2 * M)


# ---------------------------------------------------------------------------
# the two hypotheses
# ---------------------------------------------------------------------------


def smss_covariance(spec: SpecLike, hbar: float = HBAR) -> np.ndarray:
    """Covariance of the K single-mode squeezed inputs, before the beamsplitters."""
    return squeezed_vacuum_covariance(as_spec(spec).signed, hbar)


def squashed_covariance(spec: SpecLike, hbar: float = HBAR) -> np.ndarray:
    """Covariance of the K single-mode squashed inputs with ``nbar = sinh(r)**2``."""
    return squashed_mode_covariance(as_spec(spec).signed, hbar)


_H = np.array([[1.0, -1.0], [1.0, 1.0]]) / np.sqrt(2)


def beamsplitter_modes(K: int) -> np.ndarray:
    """K x K mode transformation of the 50:50 beamsplitters on pairs (0,1), (2,3), ..."""
    if K < 0 or K % 2:
        raise InputError(f"number of inputs must be even, got {K}")
    return np.kron(np.eye(K // 2), _H)


def pairwise_beamsplitter(K: int) -> np.ndarray:
    """Orthogonal 2K x 2K symplectic matrix of the pairwise beamsplitters (xxpp)."""
    H = beamsplitter_modes(K)
    return np.kron(np.eye(2), H)


def transmission_to_symplectic(T: np.ndarray) -> np.ndarray:
    """Real 2M x 2K matrix ``[[Re T, -Im T], [Im T, Re T]]``."""
    T = np.asarray(T)
    return np.block([[T.real, -T.imag], [T.imag, T.real]])


def check_transmission(T, tol: float = PHYSICAL_TOL) -> np.ndarray:
    """Validate a transmission matrix and return it as a complex array.

    Raises:
        InputError: if ``T`` is not a finite 2-D matrix or has a singular
            value above ``1 + tol``.
    """
    T = np.asarray(T, dtype=complex)
    if T.ndim != 2:
        raise InputError(f"transmission matrix must be 2-D, got shape {T.shape}")
    if not np.all(np.isfinite(T)):
        raise InputError("transmission matrix has non-finite entries")
    if T.size:
        smax = np.linalg.norm(T, 2)
        if smax > 1 + tol:
            raise InputError(f"transmission matrix is not physical: largest singular value {smax:.12g} > 1")
    return T


def apply_channel(T, sigma_in: np.ndarray, hbar: float = HBAR) -> np.ndarray:
    """Push a K-mode covariance through the lossy interferometer ``T`` (M x K)."""
    T = check_transmission(T)
    sigma_in = np.asarray(sigma_in, dtype=float)
    M, K = T.shape
    if sigma_in.shape != (2 * K, 2 * K):
        raise InputError(f"transmission has {K} columns but covariance describes {sigma_in.shape[0] // 2} modes")
    V = transmission_to_symplectic(T)
    # same as (hbar/2)(I - V V^T) + V sigma V^T, but exact on vacuum inputs
    excess = sigma_in - (hbar / 2) * np.eye(2 * K)
    out = (hbar / 2) * np.eye(2 * M) + V @ excess @ V.T
    return (out + out.T) / 2


def build_hypothesis(kind, spec: SpecLike, T, hbar: float = HBAR) -> np.ndarray:
    """Output covariance of a hypothesis: inputs -> pairwise beamsplitters -> channel."""
    kind = HypothesisKind.parse(kind)
    spec = as_spec(spec)
    T = check_transmission(T)
    if T.shape[1] != spec.K:
        raise InputError(f"transmission has {T.shape[1]} columns, squeezing spec expands to {spec.K} inputs")
    single = smss_covariance(spec, hbar) if kind is HypothesisKind.SQUE else squashed_covariance(spec, hbar)
    B = pairwise_beamsplitter(spec.K)
    excess = single - (hbar / 2) * np.eye(2 * spec.K)
    return apply_channel(T, (hbar / 2) * np.eye(2 * spec.K) + B @ excess @ B.T, hbar)


# ---------------------------------------------------------------------------
# checks and diagnostics
# ---------------------------------------------------------------------------


def symplectic_form(M: int) -> np.ndarray:
    return np.block([[np.zeros((M, M)), np.eye(M)], [-np.eye(M), np.zeros((M, M))]])


def mode_count(sigma: np.ndarray) -> int:
    n = np.shape(sigma)[0]
    if np.ndim(sigma) != 2 or np.shape(sigma)[1] != n or n % 2:
        raise InputError(f"covariance must be square with even size, got shape {np.shape(sigma)}")
    return n // 2


def validate_covariance(sigma, hbar: float = HBAR, tol: float = 1e-10) -> np.ndarray:
    """Check symmetry, positivity and the uncertainty bound; return ``sigma`` as float array."""
    sigma = np.asarray(sigma, dtype=float)
    M = mode_count(sigma)
    if not np.all(np.isfinite(sigma)):
        raise InputError("covariance has non-finite entries")
    scale = max(1.0, np.abs(sigma).max()) if sigma.size else 1.0
    if np.abs(sigma - sigma.T).max(initial=0.0) > 1e-12 * scale:
        raise InputError("covariance is not symmetric")
    if M == 0:
        return sigma
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise InputError("covariance is not positive definite") from None
    bound = sigma + 1j * (hbar / 2) * symplectic_form(M)
    if np.linalg.eigvalsh(bound).min() < -tol * scale:
        raise InputError("covariance violates the uncertainty relation")
    return sigma


def min_excess_eigenvalue(sigma: np.ndarray, hbar: float = HBAR) -> float:
    """Smallest eigenvalue of ``sigma - (hbar/2) I``; >= 0 means a classical state."""
    sigma = np.asarray(sigma, dtype=float)
    return float(np.linalg.eigvalsh(sigma - (hbar / 2) * np.eye(len(sigma))).min())


def mean_photon_number(sigma: np.ndarray, hbar: float = HBAR) -> float:
    """Total mean photon number of a zero-mean Gaussian state."""
    M = mode_count(sigma)
    d = np.diag(sigma)
    return float(np.sum((d[:M] + d[M:]) / (2 * hbar) - 0.5))


def photon_density(sigma: np.ndarray, hbar: float = HBAR) -> float:
    """Mean photons per output mode."""
    return mean_photon_number(sigma, hbar) / mode_count(sigma)


def click_photon_relation_check(sigma: np.ndarray, mean_clicks: float, hbar: float = HBAR) -> float:
    """Relative deviation ``|1/C - (1/N + 1/M)| * C`` from the click/photon relation.

    This is a diagnostic: the relation is exact for thermal marginals and only
    approximate otherwise.
    """
    if mean_clicks == 0:
        raise NumericError("mean click number is zero; the click/photon relation is undefined")
    M = mode_count(sigma)
    N = mean_photon_number(sigma, hbar)
    if N <= 0:
        raise NumericError("mean photon number is zero; the click/photon relation is undefined")
    return abs(1 / mean_clicks - (1 / N + 1 / M)) * mean_clicks


# ---------------------------------------------------------------------------
# ordering converters (I/O boundaries only)
# ---------------------------------------------------------------------------


def xxpp_to_xpxp(sigma: np.ndarray) -> np.ndarray:
    M = mode_count(sigma)
    perm = np.ravel(np.column_stack([np.arange(M), np.arange(M) + M]))
    return np.asarray(sigma)[np.ix_(perm, perm)]


def xpxp_to_xxpp(sigma: np.ndarray) -> np.ndarray:
    M = mode_count(sigma)
    perm = np.concatenate([np.arange(0, 2 * M, 2), np.arange(1, 2 * M, 2)])
    return np.asarray(sigma)[np.ix_(perm, perm)]


def reduced_covariance(sigma: np.ndarray, modes) -> np.ndarray:
    """Keep the x and p rows/columns of ``modes``."""
    M = mode_count(sigma)
    modes = np.asarray(modes, dtype=int)
    keep = np.concatenate([modes, modes + M])
    return np.asarray(sigma)[np.ix_(keep, keep)]
