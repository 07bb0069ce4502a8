"""Seeded desk-scale test instances (Haar-random lossy interferometers)."""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .errors import InputError
from .gaussian import SqueezeSpec
from .rng import substream


def haar_transmission(M: int, K: int, eta: float, seed: int | None = 0) -> np.ndarray:
    """``sqrt(eta)`` times the first K columns of a Haar-random M x M unitary."""
    if not 0 < K <= M:
        raise InputError(f"need 0 < K <= M, got K={K}, M={M}")
    if not 0 <= eta <= 1:
        raise InputError(f"transmission efficiency must lie in [0, 1], got {eta}")
    U = unitary_group.rvs(M, random_state=substream(seed, "haar", M, K)) if M > 1 else np.ones((1, 1))
    return np.sqrt(eta) * np.asarray(U)[:, :K]


def desk_instance(M: int, r, eta: float, seed: int | None = 0, K: int | None = None):
    """``(spec, T)`` with ``K`` inputs (default: largest even K <= M).

    ``r`` is a scalar applied to every squeezer or a list of K/2 values.
    """
    if K is None:
        K = M - (M % 2)
    if K % 2 or K == 0:
        raise InputError(f"number of inputs must be even and positive, got {K}")
    r = np.broadcast_to(np.asarray(r, dtype=float), (K // 2,)).copy()
    return SqueezeSpec(r), haar_transmission(M, K, eta, seed)


def r_for_density(nu: float, eta: float, M: int, K: int) -> float:
    """Uniform squeezing giving photon density ``nu`` after uniform loss ``eta``.

    Mean photons out = eta * K * sinh(r)^2, so ``sinh(r)^2 = nu M / (eta K)``.
    """
    return float(np.arcsinh(np.sqrt(nu * M / (eta * K))))
