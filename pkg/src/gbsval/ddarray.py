"""Vectorised double-double arithmetic on numpy arrays.

A :class:`DD` holds an unevaluated sum ``hi + lo`` of two float64 arrays,
giving a 106-bit significand. :class:`CDD` is the complex counterpart built
from two :class:`DD` parts. Only the operations the Torontonian kernel needs
are provided. Error-free transforms follow Dekker and Knuth; there is no FMA
in numpy so products use Dekker splitting.
"""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


class DD:
    """Real double-double array."""

    __slots__ = ("hi", "lo")

    def __init__(self, hi, lo=None):
        self.hi = np.asarray(hi, dtype=float)
        self.lo = np.zeros_like(self.hi) if lo is None else np.asarray(lo, dtype=float)

    # -- structure ---------------------------------------------------------
    @property
    def shape(self):
        return self.hi.shape

    def __getitem__(self, key):
        return DD(self.hi[key], self.lo[key])

    def __len__(self):
        return len(self.hi)

    def __neg__(self):
        return DD(-self.hi, -self.lo)

    def __float__(self):
        return float(self.hi + self.lo)

    def to_float(self):
        return self.hi + self.lo

    @staticmethod
    def concat(parts, axis=0):
        return DD(np.concatenate([p.hi for p in parts], axis), np.concatenate([p.lo for p in parts], axis))

    # -- arithmetic --------------------------------------------------------
    @staticmethod
    def _wrap(x):
        return x if isinstance(x, DD) else DD(x)

    def __add__(self, other):
        other = self._wrap(other)
        s, e = two_sum(self.hi, other.hi)
        t, f = two_sum(self.lo, other.lo)
        e = e + t
        s, e = quick_two_sum(s, e)
        e = e + f
        return DD(*quick_two_sum(s, e))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) - self

    def __mul__(self, other):
        if not isinstance(other, DD):
            other = np.asarray(other, dtype=float)
            p, e = two_prod(self.hi, other)
            e = e + self.lo * other
            return DD(*quick_two_sum(p, e))
        p, e = two_prod(self.hi, other.hi)
        e = e + (self.hi * other.lo + self.lo * other.hi)
        return DD(*quick_two_sum(p, e))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._wrap(other)
        q1 = self.hi / other.hi
        r = self - other * q1
        q2 = r.hi / other.hi
        r = r - other * q2
        q3 = r.hi / other.hi
        q1, q2 = quick_two_sum(q1, q2)
        return DD(q1, q2) + q3

    def __rtruediv__(self, other):
        return self._wrap(other) / self

    def rsqrt(self):
        """``1 / sqrt(self)`` by one Newton step from the float64 estimate."""
        y = 1.0 / np.sqrt(self.hi)
        # y <- y + y * (1 - x y^2) / 2
        resid = 1.0 - self * DD(y) * DD(y)
        return DD(y) + DD(y) * resid * 0.5

    def sum(self):
        """Sum of all entries by pairwise reduction; returns a scalar DD."""
        hi, lo = self.hi.ravel(), self.lo.ravel()
        if hi.size == 0:
            return DD(0.0)
        x = DD(hi, lo)
        while len(x) > 1:
            if len(x) % 2:
                x = DD.concat([x, DD(np.zeros(1))])
            x = x[0::2] + x[1::2]
        return x[0]


class CDD:
    """Complex double-double array stored as two :class:`DD` parts."""

    __slots__ = ("real", "imag")

    def __init__(self, real: DD, imag: DD):
        self.real = real
        self.imag = imag

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z, dtype=complex)
        return cls(DD(z.real.copy()), DD(z.imag.copy()))

    @property
    def shape(self):
        return self.real.shape

    def __getitem__(self, key):
        return CDD(self.real[key], self.imag[key])

    def __len__(self):
        return len(self.real)

    def __neg__(self):
        return CDD(-self.real, -self.imag)

    def to_complex(self):
        return self.real.to_float() + 1j * self.imag.to_float()

    def conj(self):
        return CDD(self.real, -self.imag)

    @staticmethod
    def concat(parts, axis=0):
        return CDD(DD.concat([p.real for p in parts], axis), DD.concat([p.imag for p in parts], axis))

    def __add__(self, other):
        return CDD(self.real + other.real, self.imag + other.imag)

    def __sub__(self, other):
        return CDD(self.real - other.real, self.imag - other.imag)

    def __mul__(self, other):
        if isinstance(other, CDD):
            return CDD(
                self.real * other.real - self.imag * other.imag,
                self.real * other.imag + self.imag * other.real,
            )
        # real scalar / DD / float array
        return CDD(self.real * other, self.imag * other)

    __rmul__ = __mul__

    def abs2(self) -> DD:
        return self.real * self.real + self.imag * self.imag
