"""Constant-curvature model geometry: radial potentials, the two-point
envelope, distances, volume densities and the coefficient polynomial.

One real parameter kappa selects the model family:

  kappa > 0   rescaled projective space (spherical regime)
  kappa = 0   flat complex space
  kappa < 0   rescaled hyperbolic ball

The radial potential is f_k(t) = log(1 + k t) / k (f_0(t) = t), the weight
is exp(-N f_k(|z|^2)), the volume density is (1 + k|z|^2)^-(d+1) relative
to Lebesgue measure, and the two-point envelope has h-norm exp(N D / 2)
with D(z, w) = 2 Re F(z.w~) - f(|z|^2) - f(|w|^2), F the holomorphic
extension of f.  This triple is calibrated so that the three model
Bergman kernels are *exactly* P_k(N) times the envelope, with
P_k(N) = pi^-d (N + k)(N + 2k)...(N + dk); the basis-summation oracles in
model_kernels verify the calibration before anything else relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass

from mpmath import mp, mpf, mpc

from .numerics import DomainError, LogReal

__all__ = [
    "Curvature",
    "ModelSpace",
    "ChartPoint",
    "KernelValue",
    "f_eval",
    "f_polarized",
    "psi_exponent",
    "psi_value",
    "geodesic_distance",
    "volume_density",
    "p_poly",
    "p_poly_coeffs",
    "herm_dot",
    "kernel_difference",
    "normalize_phase",
    "radial_potential_hessian",
]


@dataclass(frozen=True)
class Curvature:
    """Sectional curvature parameter with its derived regime tag."""

    kappa: object  # mpf

    def __post_init__(self):
        object.__setattr__(self, "kappa", mpf(self.kappa))

    @property
    def regime(self) -> str:
        if self.kappa > 0:
            return "spherical"
        if self.kappa < 0:
            return "hyperbolic"
        return "flat"

    @property
    def is_flat(self) -> bool:
        return self.kappa == 0


def _default_radius(curv: Curvature):
    if curv.kappa < 0:
        # safely inside the potential's domain |z|^2 < 1/|kappa|
        return mpf("0.9") / mp.sqrt(-curv.kappa)
    return mpf(2)


@dataclass(frozen=True)
class ModelSpace:
    """A model chart: curvature, complex dimension, chart radius.

    chart_radius = inf marks the full-space variant (whole plane for
    kappa >= 0, ball up to the domain boundary for kappa < 0), used for
    closed-form cross checks; the finite-radius chart is the default.
    """

    curvature: Curvature
    dim: int
    chart_radius: object = None  # mpf; None -> regime default

    def __post_init__(self):
        if not isinstance(self.curvature, Curvature):
            object.__setattr__(self, "curvature", Curvature(self.curvature))
        if self.dim < 1:
            raise DomainError("dim must be >= 1")
        r = self.chart_radius
        if r is None:
            r = _default_radius(self.curvature)
        r = mpf(r)
        k = self.curvature.kappa
        if r <= 0:
            raise DomainError("chart_radius must be positive")
        if k < 0:
            bound = 1 / mp.sqrt(-k)
            if not r < bound and r != mp.inf:
                raise DomainError(
                    f"hyperbolic chart needs chart_radius < 1/sqrt(|kappa|) = {mp.nstr(bound, 8)}"
                )
        object.__setattr__(self, "chart_radius", r)

    @classmethod
    def full_space(cls, curvature, dim: int) -> "ModelSpace":
        c = curvature if isinstance(curvature, Curvature) else Curvature(curvature)
        if c.kappa < 0:
            return cls(c, dim, mp.inf)  # interpreted as the open domain ball
        return cls(c, dim, mp.inf)

    @property
    def kappa(self):
        return self.curvature.kappa

    @property
    def is_full_space(self) -> bool:
        return self.chart_radius == mp.inf

    @property
    def domain_radius(self):
        """Radius actually available for integration (finite for kappa < 0)."""
        if self.kappa < 0:
            bound = 1 / mp.sqrt(-self.kappa)
            return bound if self.is_full_space else self.chart_radius
        return self.chart_radius

    def contains(self, p: "ChartPoint") -> bool:
        r2 = p.norm_sq()
        if self.kappa < 0 and r2 * (-self.kappa) >= 1:
            return False
        if self.is_full_space:
            return True
        return r2 <= self.chart_radius ** 2 * (1 + mpf(2) ** (-mp.prec // 2))


@dataclass(frozen=True)
class ChartPoint:
    """A point of the model chart, as a tuple of mpc coordinates."""

    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(mpc(c) for c in self.coords))

    @classmethod
    def of(cls, *values) -> "ChartPoint":
        return cls(tuple(values))

    @classmethod
    def origin(cls, dim: int) -> "ChartPoint":
        return cls(tuple(mpc(0) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def norm_sq(self):
        s = mpf(0)
        for c in self.coords:
            s += c.real * c.real + c.imag * c.imag
        return s

    def norm(self):
        return mp.sqrt(self.norm_sq())


def herm_dot(z: ChartPoint, w: ChartPoint):
    """Hermitian pairing sum_i z_i * conj(w_i)."""
    if z.dim != w.dim:
        raise DomainError("dimension mismatch in herm_dot")
    s = mpc(0)
    for a, b in zip(z.coords, w.coords):
        s += a * mp.conj(b)
    return s


def normalize_phase(phi):
    """Reduce a phase to (-pi, pi]."""
    phi = mpf(phi)
    twopi = 2 * mp.pi
    phi = phi - twopi * mp.floor((phi + mp.pi) / twopi)
    if phi <= -mp.pi:
        phi += twopi
    return phi


@dataclass(frozen=True)
class KernelValue:
    """Two-point kernel sample relative to the model frames.

    log_magnitude carries the h-norm of the value (survives the e^{-cN}
    dynamic range); phase is the frame-relative argument in (-pi, pi].
    converged flags basis/lattice truncations that met their tolerance.
    """

    log_magnitude: LogReal
    phase: object  # mpf
    converged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "phase", normalize_phase(self.phase))

    def conj(self) -> "KernelValue":
        return KernelValue(self.log_magnitude, -self.phase, self.converged)

    def __mul__(self, other: "KernelValue") -> "KernelValue":
        return KernelValue(
            self.log_magnitude * other.log_magnitude,
            self.phase + other.phase,
            self.converged and other.converged,
        )


def kernel_difference(k1: KernelValue, k2: KernelValue) -> LogReal:
    """h-norm |k1 - k2| of two frame-relative kernel samples, in log form."""
    m1, m2 = k1.log_magnitude, k2.log_magnitude
    if m1.sign == 0:
        return abs(m2)
    if m2.sign == 0:
        return abs(m1)
    if m2.log_abs > m1.log_abs:
        k1, k2 = k2, k1
        m1, m2 = m2, m1
    ratio = mp.exp(m2.log_abs - m1.log_abs)  # <= 1
    dphi = k2.phase - k1.phase
    re = 1 - ratio * mp.cos(dphi)
    im = ratio * mp.sin(dphi)
    d = mp.sqrt(re * re + im * im)
    if d == 0:
        return LogReal.zero()
    return LogReal.from_log(m1.log_abs + mp.log(d))


# ---------------------------------------------------------------------------
# Radial potential family
# ---------------------------------------------------------------------------

def f_eval(curv: Curvature, t):
    """Radial potential f_k(t) = log(1 + k t)/k, f_0(t) = t, for t = |z|^2."""
    k = curv.kappa
    t = mpf(t)
    if t < 0:
        raise DomainError("f_eval needs t >= 0")
    if k == 0:
        return t
    if k < 0 and t >= 1 / (-k):
        raise DomainError(
            f"hyperbolic potential undefined at t = {mp.nstr(t, 8)} >= 1/|kappa| = {mp.nstr(1 / -k, 8)}"
        )
    return mp.log1p(k * t) / k


def f_polarized(curv: Curvature, s):
    """Holomorphic extension of f_k, principal branch.

    Defined for 1 + k s off the closed negative real axis.  Inside a chart
    with |z|, |w| < r and kappa * r^2 < 1 this is automatic for s = z.w~ by
    Cauchy-Schwarz (|k s| <= |k| r^2 < 1); spherical charts with larger
    radius stay off the cut except on the exact antipodal locus.
    """
    k = curv.kappa
    s = mpc(s)
    if k == 0:
        return s
    w = k * s
    one_plus = 1 + w
    if one_plus.imag == 0 and one_plus.real <= 0:
        raise DomainError(
            f"branch cut: 1 + kappa*s = {mp.nstr(one_plus, 8)} on the closed negative axis"
        )
    return mp.log1p(w) / k


def psi_exponent(m: ModelSpace, z: ChartPoint, w: ChartPoint):
    """Two-point envelope exponent D(z, w) <= 0, equal to 0 iff z = w.

    The envelope's h-norm at tensor power N is exp(N D / 2).
    """
    _check_points(m, z, w)
    s = herm_dot(z, w)
    ft = f_polarized(m.curvature, s)
    return 2 * ft.real - f_eval(m.curvature, z.norm_sq()) - f_eval(m.curvature, w.norm_sq())


def psi_value(m: ModelSpace, N: int, z: ChartPoint, w: ChartPoint) -> KernelValue:
    """Envelope at tensor power N: h-norm exp(N D / 2), frame phase N Im F(z.w~)."""
    if N < 1:
        raise DomainError("tensor power N must be >= 1")
    _check_points(m, z, w)
    s = herm_dot(z, w)
    ft = f_polarized(m.curvature, s)
    d = 2 * ft.real - f_eval(m.curvature, z.norm_sq()) - f_eval(m.curvature, w.norm_sq())
    return KernelValue(LogReal.from_log(mpf(N) * d / 2), mpf(N) * ft.imag)


def geodesic_distance(m: ModelSpace, z: ChartPoint, w: ChartPoint):
    """Model geodesic distance; continuous in kappa with flat limit |z - w|.

    All three regimes are read off exp(kappa * D / 2): arccos of it for
    kappa > 0, arccosh for kappa < 0, sqrt(-D) in the flat limit.
    """
    _check_points(m, z, w)
    k = m.kappa
    d = psi_exponent(m, z, w)
    if k == 0:
        return mp.sqrt(-d) if d < 0 else mpf(0)
    val = mp.exp(k * d / 2)
    if k > 0:
        val = min(val, mpf(1))
        return mp.acos(val) / mp.sqrt(k)
    val = max(val, mpf(1))
    return mp.acosh(val) / mp.sqrt(-k)


def volume_density(m: ModelSpace, z: ChartPoint):
    """Riemannian volume density (1 + kappa |z|^2)^-(d+1) w.r.t. Lebesgue."""
    if z.dim != m.dim:
        raise DomainError("point dimension mismatch")
    t = z.norm_sq()
    k = m.kappa
    if k < 0 and t >= 1 / (-k):
        raise DomainError("point outside hyperbolic domain")
    return (1 + k * t) ** (-(m.dim + 1))


def p_poly(curv: Curvature, d: int, N):
    """Coefficient polynomial P_k(N) = pi^-d * prod_{j=1..d} (N + j k).

    Satisfies the rescaling identity P_{1/k}(N) = k^-d P_1(k N) for integer
    k >= 1 and is real-analytic in kappa.
    """
    if d < 1:
        raise DomainError("p_poly needs d >= 1")
    k = curv.kappa if isinstance(curv, Curvature) else mpf(curv)
    N = mpf(N)
    out = mpf(1)
    for j in range(1, d + 1):
        out *= N + j * k
    return out / mp.pi ** d


def p_poly_coeffs(curv: Curvature, d: int):
    """Coefficients of P_k as a polynomial in N, descending powers N^d..N^0."""
    k = curv.kappa if isinstance(curv, Curvature) else mpf(curv)
    coeffs = [mpf(1)]
    for j in range(1, d + 1):
        nxt = [mpf(0)] * (len(coeffs) + 1)
        for i, c in enumerate(coeffs):
            nxt[i] += c
            nxt[i + 1] += c * j * k
        coeffs = nxt
    pd = mp.pi ** d
    return [c / pd for c in coeffs]


def _check_points(m: ModelSpace, *points):
    for p in points:
        if p.dim != m.dim:
            raise DomainError("point dimension mismatch")
        if not m.contains(p):
            raise DomainError(
                f"point with |z| = {mp.nstr(p.norm(), 8)} outside chart of radius {mp.nstr(m.chart_radius, 8)}"
            )


# ---------------------------------------------------------------------------
# Finite-difference Hessian of the radial potential (convexity checks)
# ---------------------------------------------------------------------------

def radial_potential_hessian(m: ModelSpace, x, step=None):
    """Central-difference real Hessian of R^{2d} ni x -> f_k(|x|^2).

    x is a flat real vector of length 2*dim.  Positive definiteness holds on
    the whole domain for kappa <= 0 and for |x|^2 < 1/kappa when kappa > 0
    (beyond that radius the radial direction turns concave even though the
    Levi form stays positive).
    """
    n = 2 * m.dim
    x = [mpf(v) for v in x]
    if len(x) != n:
        raise DomainError("expected a real vector of length 2*dim")
    h = mpf(step) if step is not None else mpf(2) ** (-mp.prec // 3)

    def phi(vec):
        t = sum((v * v for v in vec), mpf(0))
        return f_eval(m.curvature, t)

    hess = [[mpf(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            if i == j:
                xp = list(x); xp[i] += h
                xm = list(x); xm[i] -= h
                val = (phi(xp) - 2 * phi(x) + phi(xm)) / (h * h)
            else:
                xpp = list(x); xpp[i] += h; xpp[j] += h
                xpm = list(x); xpm[i] += h; xpm[j] -= h
                xmp = list(x); xmp[i] -= h; xmp[j] += h
                xmm = list(x); xmm[i] -= h; xmm[j] -= h
                val = (phi(xpp) - phi(xpm) - phi(xmp) + phi(xmm)) / (4 * h * h)
            hess[i][j] = val
            hess[j][i] = val
    return hess
