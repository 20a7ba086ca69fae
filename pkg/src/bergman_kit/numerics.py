"""Extended-precision scalar arithmetic, quadrature and decay-rate fits.

Everything downstream deals with quantities of size exp(-c*N) for N up to
a few hundred, so plain doubles are useless for both the values and the
quadrature.  The working representation is

  * mpmath mpf/mpc at a context-controlled mantissa (>= 53 bits),
  * LogReal for signed quantities carried in the log domain end-to-end.

Quadrature is deliberately *not* adaptive: fixed-order composite
Gauss-Legendre with a panel-doubling self-check.  The integrands in this
package are smooth and radial, and a deterministic rule keeps every
experiment bit-reproducible.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass

from mpmath import mp, mpf

__all__ = [
    "PrecisionContext",
    "LogReal",
    "DecayFit",
    "DomainError",
    "QuadratureNotConvergedError",
    "InsufficientDataError",
    "RootSolveError",
    "GramNotPositiveDefiniteError",
    "CutoffError",
    "gauss_legendre",
    "composite_nodes",
    "integrate_1d",
    "fit_log_linear",
    "sym_eig_min",
]


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class QuadratureNotConvergedError(ArithmeticError):
    """Panel-doubling self-check failed; carries both values."""

    def __init__(self, coarse, fine, rel_diff):
        self.coarse = coarse
        self.fine = fine
        self.rel_diff = rel_diff
        super().__init__(
            f"quadrature not converged: coarse={coarse}, fine={fine}, "
            f"relative discrepancy {rel_diff}"
        )


class InsufficientDataError(ValueError):
    """Fewer usable points than a fit requires."""


class RootSolveError(ArithmeticError):
    """Newton iteration for a quadrature node failed to converge."""

    def __init__(self, index, order):
        self.index = index
        self.order = order
        super().__init__(f"Newton iteration for root {index} of order-{order} rule did not converge")


class GramNotPositiveDefiniteError(ArithmeticError):
    """Gram matrix lost positive definiteness (quadrature too coarse)."""

    def __init__(self, smallest_eigenvalue):
        self.smallest_eigenvalue = smallest_eigenvalue
        super().__init__(f"Gram matrix not positive definite (smallest eigenvalue ~ {smallest_eigenvalue})")


class CutoffError(ArithmeticError):
    """Series or lattice cutoff too small for the requested tolerance."""


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision and quadrature resolution, threaded through every
    numerical operation.

    mantissa_bits: binary mantissa size (256 by default; errors of size
        exp(-c*N) with N ~ 150 need >= 220 bits of headroom).
    quad_order: Gauss-Legendre points per panel.
    panels: number of panels of the composite rule.
    target_rel_tol: relative tolerance the panel-doubling self-check must meet.
    """

    mantissa_bits: int = 256
    quad_order: int = 40
    panels: int = 10
    target_rel_tol: float = 1e-50

    def __post_init__(self):
        if self.mantissa_bits < 53:
            raise ValueError("mantissa_bits must be >= 53")
        if self.quad_order < 2:
            raise ValueError("quad_order must be >= 2")
        if self.panels < 1:
            raise ValueError("panels must be >= 1")
        if not self.target_rel_tol > 0:
            raise ValueError("target_rel_tol must be positive")

    @contextmanager
    def workprec(self, extra_bits: int = 16):
        with mp.workprec(self.mantissa_bits + extra_bits):
            yield

    def with_(self, **kw) -> "PrecisionContext":
        d = dict(
            mantissa_bits=self.mantissa_bits,
            quad_order=self.quad_order,
            panels=self.panels,
            target_rel_tol=self.target_rel_tol,
        )
        d.update(kw)
        return PrecisionContext(**d)

    @staticmethod
    def for_bits(bits: int) -> "PrecisionContext":
        """Context whose self-check tolerance tracks the mantissa (~90 bits
        of slack between roundoff and tolerance)."""
        tol = float(mpf(2) ** (-(bits - 90))) if bits > 143 else 1e-16
        return PrecisionContext(mantissa_bits=bits, target_rel_tol=tol)


_NEG_INF = mpf("-inf")


@dataclass(frozen=True)
class LogReal:
    """A signed real carried as (sign, log|value|).

    Multiplication adds logs; addition goes through a stable signed
    log-sum-exp.  log_abs is -inf exactly when sign == 0.
    """

    sign: int
    log_abs: object  # mpf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")
        if self.sign == 0 and self.log_abs != _NEG_INF:
            object.__setattr__(self, "log_abs", _NEG_INF)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero() -> "LogReal":
        return LogReal(0, _NEG_INF)

    @staticmethod
    def one() -> "LogReal":
        return LogReal(1, mpf(0))

    @staticmethod
    def from_real(x) -> "LogReal":
        x = mpf(x) if not hasattr(x, "_mpf_") else x
        if x == 0:
            return LogReal.zero()
        return LogReal(1 if x > 0 else -1, mp.log(abs(x)))

    @staticmethod
    def from_log(log_abs, sign: int = 1) -> "LogReal":
        if sign == 0:
            return LogReal.zero()
        return LogReal(sign, mpf(log_abs) if not hasattr(log_abs, "_mpf_") else log_abs)

    # -- conversions -------------------------------------------------------

    def to_mpf(self):
        if self.sign == 0:
            return mpf(0)
        return self.sign * mp.exp(self.log_abs)

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        return float(self.sign) * math.exp(float(self.log_abs)) if self.log_abs < 700 else float(self.to_mpf())

    def log_abs_float(self) -> float:
        return float(self.log_abs)

    # -- arithmetic --------------------------------------------------------

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0 or other.sign == 0:
            return LogReal.zero()
        return LogReal(self.sign * other.sign, self.log_abs + other.log_abs)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.sign == 0:
            raise ZeroDivisionError("LogReal division by zero")
        if self.sign == 0:
            return LogReal.zero()
        return LogReal(self.sign * other.sign, self.log_abs - other.log_abs)

    def __neg__(self) -> "LogReal":
        return LogReal(-self.sign, self.log_abs)

    def __abs__(self) -> "LogReal":
        return LogReal(abs(self.sign), self.log_abs)

    def __add__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        if self.log_abs >= other.log_abs:
            big, small = self, other
        else:
            big, small = other, self
        d = small.log_abs - big.log_abs  # <= 0
        if self.sign == other.sign:
            return LogReal(big.sign, big.log_abs + mp.log1p(mp.exp(d)))
        if d == 0:
            return LogReal.zero()
        return LogReal(big.sign, big.log_abs + mp.log1p(-mp.exp(d)))

    def __sub__(self, other: "LogReal") -> "LogReal":
        return self + (-other)

    def scaled(self, factor) -> "LogReal":
        """Multiply by an ordinary (possibly huge or tiny) real."""
        return self * LogReal.from_real(factor)

    def powi(self, k: int) -> "LogReal":
        if self.sign == 0:
            return LogReal.one() if k == 0 else LogReal.zero()
        sign = self.sign if k % 2 else abs(self.sign)
        return LogReal(sign, self.log_abs * k)

    def sqrt(self) -> "LogReal":
        if self.sign < 0:
            raise DomainError("sqrt of a negative LogReal")
        if self.sign == 0:
            return LogReal.zero()
        return LogReal(1, self.log_abs / 2)

    # -- comparisons on magnitude ------------------------------------------

    def mag_le(self, other: "LogReal") -> bool:
        return self.log_abs <= other.log_abs

    def __repr__(self):
        if self.sign == 0:
            return "LogReal(0)"
        s = "-" if self.sign < 0 else ""
        return f"LogReal({s}exp({mp.nstr(self.log_abs, 10)}))"


def logsum(terms) -> "LogReal":
    """Signed log-sum-exp of an iterable of LogReal, in iteration order."""
    acc = LogReal.zero()
    for t in terms:
        acc = acc + t
    return acc


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of log_error = intercept - slope * N."""

    slope: float
    intercept: float
    r_squared: float
    points: tuple

    def predicted(self, n: float) -> float:
        return self.intercept - self.slope * n


# ---------------------------------------------------------------------------
# Gauss-Legendre nodes
# ---------------------------------------------------------------------------

_GL_CACHE: dict = {}


def _legendre_pair(order, x):
    """(P_n(x), P_{n-1}(x)) by upward recurrence."""
    p0, p1 = mpf(1), x
    for k in range(2, order + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    return p1, p0


def _gl_reference(order):
    """Nodes/weights on [-1, 1] at the current working precision."""
    key = (order, mp.prec)
    cached = _GL_CACHE.get(key)
    if cached is not None:
        return cached
    n = order
    tol = mpf(2) ** (-mp.prec + 6)
    m = (n + 1) // 2
    pairs = []
    for i in range(m):
        # Chebyshev-like initial guess, then Newton on P_n.  Guesses descend
        # from just below +1; for odd n the last one is the middle root 0.
        x = mpf(math.cos(math.pi * (i + 0.75) / (n + 0.5)))
        converged = False
        for _ in range(200):
            pn, pnm1 = _legendre_pair(n, x)
            dp = n * (x * pn - pnm1) / (x * x - 1)
            dx = pn / dp
            x = x - dx
            if abs(dx) < tol:
                converged = True
                break
        if not converged:
            raise RootSolveError(i, n)
        if n % 2 == 1 and i == m - 1:
            x = mpf(0)  # middle root is exact by symmetry
        pn, pnm1 = _legendre_pair(n, x)
        dp = n * (x * pn - pnm1) / (x * x - 1)
        w = 2 / ((1 - x * x) * dp * dp)
        if n % 2 == 1 and i == m - 1:
            pairs.append((x, w))
        else:
            pairs.append((x, w))
            pairs.append((-x, w))
    pairs.sort(key=lambda t: t[0])
    total = sum((w for _, w in pairs), mpf(0))
    if abs(total - 2) > order * mpf(2) ** (-mp.prec + 8):
        raise RootSolveError(-1, n)
    result = (tuple(x for x, _ in pairs), tuple(w for _, w in pairs))
    _GL_CACHE[key] = result
    return result


def gauss_legendre(order: int, a, b, ctx: PrecisionContext | None = None):
    """Gauss-Legendre nodes and weights on (a, b).

    Exact for polynomials of degree <= 2*order - 1.  Precision follows
    ctx.mantissa_bits when given, the ambient mpmath precision otherwise.
    """
    if order < 2:
        raise DomainError("gauss_legendre needs order >= 2")
    a, b = mpf(a), mpf(b)
    if not a < b:
        raise DomainError("gauss_legendre needs a < b")

    def build():
        xs, ws = _gl_reference(order)
        half = (b - a) / 2
        mid = (b + a) / 2
        return [(mid + half * x, half * w) for x, w in zip(xs, ws)]

    if ctx is None:
        return build()
    with ctx.workprec():
        return build()


def composite_nodes(a, b, ctx: PrecisionContext, panels: int | None = None):
    """Composite Gauss-Legendre nodes for [a, b]: panels x quad_order points."""
    a, b = mpf(a), mpf(b)
    npanels = ctx.panels if panels is None else panels
    h = (b - a) / npanels
    out = []
    for p in range(npanels):
        out.extend(gauss_legendre(ctx.quad_order, a + p * h, a + (p + 1) * h))
    return out


def integrate_1d(f, a, b, ctx: PrecisionContext, panels: int | None = None) -> LogReal:
    """Composite Gauss-Legendre integral of f: real -> LogReal over [a, b].

    The value returned is the panel-doubled refinement; the coarse and fine
    passes must agree to ctx.target_rel_tol or the self-check raises.
    Summation order is fixed (panel-major, ascending nodes).
    """
    a, b = mpf(a), mpf(b)
    if a == b:
        return LogReal.zero()
    if a > b:
        raise DomainError("integrate_1d needs a <= b")
    base_panels = ctx.panels if panels is None else panels

    with ctx.workprec():
        def run(npanels):
            acc = LogReal.zero()
            for x, w in composite_nodes(a, b, ctx, panels=npanels):
                acc = acc + f(x).scaled(w)
            return acc

        coarse = run(base_panels)
        fine = run(2 * base_panels)
        diff = abs(fine - coarse)
        if diff.sign != 0:
            if fine.sign == 0:
                scale = coarse.log_abs
            else:
                scale = fine.log_abs
            rel = diff.log_abs - scale
            if rel > mp.log(mpf(ctx.target_rel_tol)):
                raise QuadratureNotConvergedError(coarse, fine, mp.exp(rel))
        return fine


def fit_log_linear(points) -> DecayFit:
    """Fit log_error = intercept - slope * N by least squares.

    points: iterable of (N, LogReal error).  Points with error exactly zero
    carry no information in the log domain and are dropped; at least three
    usable points are required.
    """
    usable = [(mpf(n), e.log_abs) for n, e in points if e.sign != 0]
    if len(usable) < 3:
        raise InsufficientDataError(
            f"fit_log_linear needs >= 3 nonzero points, got {len(usable)}"
        )
    n = mpf(len(usable))
    sx = sum((p[0] for p in usable), mpf(0))
    sy = sum((p[1] for p in usable), mpf(0))
    sxx = sum((p[0] ** 2 for p in usable), mpf(0))
    sxy = sum((p[0] * p[1] for p in usable), mpf(0))
    denom = n * sxx - sx * sx
    if denom == 0:
        raise InsufficientDataError("degenerate abscissae in fit_log_linear")
    beta = (n * sxy - sx * sy) / denom  # slope of y vs N
    slope = -beta
    intercept = sy / n + slope * sx / n
    ss_res = mpf(0)
    ss_tot = mpf(0)
    ybar = sy / n
    for x, y in usable:
        ss_res += (y - (intercept - slope * x)) ** 2
        ss_tot += (y - ybar) ** 2
    if ss_tot == 0:
        r2 = mpf(1) if ss_res == 0 else mpf(0)
    else:
        r2 = 1 - ss_res / ss_tot
    r2 = min(max(r2, mpf(0)), mpf(1))
    return DecayFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r2),
        points=tuple((float(x), float(y)) for x, y in usable),
    )


def sym_eig_min(matrix) -> object:
    """Smallest eigenvalue of a small real symmetric matrix (Jacobi sweeps).

    Sizes here are at most 4x4 (real Hessians in complex dimension <= 2),
    so a plain cyclic Jacobi iteration is plenty.
    """
    a = [[mpf(x) for x in row] for row in matrix]
    n = len(a)
    tol = mpf(2) ** (-mp.prec + 8)
    scale = max(abs(a[i][j]) for i in range(n) for j in range(n)) or mpf(1)
    for _ in range(100):
        off = mpf(0)
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i][j] ** 2
        if off <= (tol * scale) ** 2:
            break
        for p in range(n):
            for q in range(p + 1, n):
                if abs(a[p][q]) <= tol * scale:
                    continue
                theta = (a[q][q] - a[p][p]) / (2 * a[p][q])
                t = 1 / (abs(theta) + mp.sqrt(theta * theta + 1))
                if theta < 0:
                    t = -t
                c = 1 / mp.sqrt(t * t + 1)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
    return min(a[i][i] for i in range(n))
