"""Reference implementations used only by the tests.

They are written directly from the defining formulas, share no code with the
package kernels, and favour clarity over speed.
"""

import itertools
import math

import numpy as np


def haar_unitary(n, rng):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def tmss_covariance(r, hbar=2.0):
    """Two-mode squeezed vacuum in xxpp order with x1x2 = +sh, p1p2 = -sh."""
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    X = np.array([[c, s], [s, c]])
    P = np.array([[c, -s], [-s, c]])
    out = np.zeros((4, 4))
    out[:2, :2] = X
    out[2:, 2:] = P
    return (hbar / 2) * out


def husimi(sigma, hbar=2.0):
    """Sigma from the definition with the complex R matrix."""
    M = len(sigma) // 2
    I = np.eye(M)
    R = np.block([[I, 1j * I], [I, -1j * I]]) / math.sqrt(2)
    return np.eye(2 * M) / 2 + R @ sigma @ R.conj().T / hbar


def pattern_probability(sigma, s, hbar=2.0):
    """Inclusion-exclusion over vacuum projections, one determinant per subset."""
    S = husimi(sigma, hbar)
    M = len(sigma) // 2
    s = np.asarray(s)
    off = [j for j in range(M) if s[j] == 0]
    on = [j for j in range(M) if s[j] == 1]
    total = 0.0
    for k in range(len(on) + 1):
        for Z in itertools.combinations(on, k):
            V = off + list(Z)
            idx = V + [v + M for v in V]
            d = np.linalg.det(S[np.ix_(idx, idx)]).real if idx else 1.0
            total += (-1) ** k / math.sqrt(d)
    return total


def full_table(sigma, hbar=2.0):
    M = len(sigma) // 2
    return np.array([pattern_probability(sigma, [(m >> j) & 1 for j in range(M)], hbar) for m in range(1 << M)])


def moment_from_table(table, M, modes):
    return sum(p for m, p in enumerate(table) if all((m >> i) & 1 for i in modes))


def cumulant_recursive(moment, modes):
    """Joint cumulant by the recursion kappa(S) = m(S) - sum kappa(B) m(S\\B),
    B running over proper subsets that contain the first element."""
    modes = tuple(modes)
    if len(modes) == 1:
        return moment(modes)
    first, rest = modes[0], modes[1:]
    total = moment(modes)
    for k in range(len(rest)):
        for extra in itertools.combinations(rest, k):
            B = (first,) + extra
            comp = tuple(i for i in rest if i not in extra)
            total -= cumulant_recursive(moment, B) * moment(comp)
    return total


def ranks(x):
    """Average ranks, 1-based."""
    x = list(x)
    order = sorted(range(len(x)), key=lambda i: x[i])
    r = [0.0] * len(x)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and x[order[j + 1]] == x[order[i]]:
            j += 1
        for k in range(i, j + 1):
            r[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return r


def pearson(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    xc, yc = x - x.mean(), y - y.mean()
    return float((xc @ yc) / math.sqrt((xc @ xc) * (yc @ yc)))
