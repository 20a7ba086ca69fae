"""Exact conversion helpers between mpmath scalars and gmpy2 mpfr/mpc.

The hot loops (theta Gram assembly, basis-kernel summation) run on native
gmpy2 types, which multiply several times faster than mpmath's Python-level
mpc; everything else stays in mpmath.  All conversions here are exact bit
transfers, not string round-trips.
"""

from __future__ import annotations

from contextlib import contextmanager

import gmpy2
from mpmath import mp, mpf, mpc


@contextmanager
def local_precision(bits: int):
    with gmpy2.local_context(gmpy2.get_context(), precision=bits):
        yield


def to_mpfr(x):
    """mpmath mpf (or int/float) -> gmpy2 mpfr, exactly."""
    if isinstance(x, int):
        return gmpy2.mpfr(x)
    v = x if hasattr(x, "_mpf_") else mpf(x)
    sign, man, exp, _ = v._mpf_
    if man == 0:
        if exp == 0:
            return gmpy2.mpfr(0)
        # inf/nan encodings
        return gmpy2.mpfr(float(v))
    r = gmpy2.mpfr(-man if sign else man)
    return gmpy2.mul_2exp(r, exp) if exp >= 0 else gmpy2.div_2exp(r, -exp)


def to_gmpy_mpc(z):
    v = z if isinstance(z, mpc) else mpc(z)
    return gmpy2.mpc(to_mpfr(v.real), to_mpfr(v.imag))


def from_mpfr(x):
    """gmpy2 mpfr -> mpmath mpf at the current mpmath precision."""
    if gmpy2.is_nan(x) or gmpy2.is_infinite(x):
        return mpf(float(x))
    m, e = x.as_mantissa_exp()
    return mpf(int(m)) * mpf(2) ** int(e)


def from_gmpy_mpc(z):
    return mpc(from_mpfr(z.real), from_mpfr(z.imag))
