"""The ancillary Hilbert space on the chart ball.

Holomorphic functions on B(0, r) in C^d with the weighted product

    <u, v> = int_B u v~ exp(-N f_k(|z|^2)) (1 + k|z|^2)^-(d+1) dLeb,

the Riemannian measure being the one that makes the inverse normalization
integral a(N)^-1 land exponentially close to the coefficient polynomial
P_k(N).  Monomials of distinct multidegree are exactly orthogonal under
the radial weight, so the basis data reduces to radial moments plus an
explicit angular factor

    int_{S^{2d-1}} |zeta^nu|^2 dsigma = 2 pi^d prod(nu_i!) / (d-1+|nu|)!

validated against a Monte-Carlo oracle in the test suite.

Coherent-state overlaps are supported in dimension 1 and 2.  The state
transported from center y keeps the support it has in its own chart ball,
which excises a crescent from the integration domain; that truncation is
what makes the overlap differ from its closed form a(N)^-1 e^{N D(0,y)/2}
by an exponentially small amount instead of agreeing identically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from mpmath import mp, mpf, mpc

from .geometry import (
    ChartPoint,
    KernelValue,
    ModelSpace,
    f_eval,
    f_polarized,
    herm_dot,
    psi_exponent,
)
from .numerics import (
    DomainError,
    LogReal,
    PrecisionContext,
    QuadratureNotConvergedError,
    composite_nodes,
    gauss_legendre,
    integrate_1d,
)

__all__ = [
    "AncillaryBasis",
    "CoherentSample",
    "a_of_n",
    "a_of_n_closed",
    "monomial_norms",
    "radial_moment_closed",
    "reproduce_at_zero",
    "coherent_overlap",
    "coherent_overlap_closed",
    "inner_product_quad",
    "poly_eval",
    "poly_norm",
    "multi_indices",
    "angular_factor",
]


def multi_indices(d: int, max_degree: int):
    """All nu in N^d with |nu| <= max_degree, graded lexicographic."""
    out = []
    for total in range(max_degree + 1):
        for cuts in itertools.combinations(range(total + d - 1), d - 1):
            nu = []
            prev = -1
            for c in cuts:
                nu.append(c - prev - 1)
                prev = c
            nu.append(total + d - 1 - prev - 1)
            out.append(tuple(nu))
    return out


def angular_factor(nu):
    """Surface integral of |zeta^nu|^2 over the unit sphere S^{2d-1}."""
    d = len(nu)
    total = sum(nu)
    num = 2 * mp.pi ** d
    for n in nu:
        num *= mp.factorial(n)
    return num / mp.factorial(d - 1 + total)


def _surface_const(d: int):
    return 2 * mp.pi ** d / mp.factorial(d - 1)


def _flat_truncation_radius(N, extra_bits):
    # weight exp(-N rho^2) below 2^-(prec+extra) at the returned radius
    b = (mp.prec + extra_bits) * mp.log(2)
    return mp.sqrt(b / N) + 1


# ---------------------------------------------------------------------------
# Radial moments: quadrature route and closed-form oracle route
# ---------------------------------------------------------------------------

def _radial_moment_quad(m: ModelSpace, N: int, k: int, ctx: PrecisionContext) -> LogReal:
    """int rho^{2k+2d-1} exp(-N f(rho^2)) (1+kappa rho^2)^-(d+1) drho over the chart."""
    d = m.dim
    kap = m.kappa
    if kap > 0:
        # substitute w = kappa rho^2 / (1 + kappa rho^2): finite smooth integral
        M = mpf(N) / kap
        if m.is_full_space and k > M:
            raise DomainError("monomial not integrable on the full spherical model")
        wmax = mpf(1) if m.is_full_space else kap * m.chart_radius ** 2 / (1 + kap * m.chart_radius ** 2)

        def integrand(w):
            if w <= 0 or w >= 1:
                return LogReal.zero()
            lg = (k + d - 1) * mp.log(w) + (M - k) * mp.log1p(-w)
            return LogReal.from_log(lg)

        val = integrate_1d(integrand, mpf(0), wmax, ctx)
        return val.scaled(1 / (2 * kap ** (k + d)))
    if kap == 0:
        upper = _flat_truncation_radius(N, 40) if m.is_full_space else m.chart_radius

        def integrand(rho):
            if rho <= 0:
                return LogReal.zero()
            return LogReal.from_log((2 * k + 2 * d - 1) * mp.log(rho) - N * rho * rho)

        return integrate_1d(integrand, mpf(0), upper, ctx)
    # hyperbolic: domain bounded by 1/sqrt(|kappa|)
    a = -kap
    Mt = mpf(N) / a
    upper = m.domain_radius
    if m.is_full_space and Mt <= d:
        raise DomainError("weight not integrable: need N > d |kappa| on the full ball")

    def integrand(rho):
        if rho <= 0:
            return LogReal.zero()
        t = rho * rho
        om = 1 - a * t
        if om <= 0:
            return LogReal.zero()
        lg = (2 * k + 2 * d - 1) * mp.log(rho) + (Mt - d - 1) * mp.log(om)
        return LogReal.from_log(lg)

    return integrate_1d(integrand, mpf(0), upper, ctx)


def radial_moment_closed(m: ModelSpace, N: int, k: int) -> LogReal:
    """Closed form of the radial moment via (incomplete) Beta/Gamma integrals."""
    d = m.dim
    kap = m.kappa
    if kap > 0:
        M = mpf(N) / kap
        if m.is_full_space:
            if k > M:
                raise DomainError("monomial not integrable on the full spherical model")
            val = mp.beta(k + d, M + 1 - k)
        else:
            x = kap * m.chart_radius ** 2 / (1 + kap * m.chart_radius ** 2)
            val = mp.betainc(k + d, M + 1 - k, 0, x)
        return LogReal.from_real(val / (2 * kap ** (k + d)))
    if kap == 0:
        if m.is_full_space:
            val = mp.gamma(k + d) / mpf(N) ** (k + d)
        else:
            val = mp.gammainc(k + d, 0, N * m.chart_radius ** 2) / mpf(N) ** (k + d)
        return LogReal.from_real(val / 2)
    a = -kap
    Mt = mpf(N) / a
    if m.is_full_space:
        if Mt <= d:
            raise DomainError("need N > d |kappa| on the full ball")
        val = mp.beta(k + d, Mt - d)
    else:
        x = a * m.chart_radius ** 2
        val = mp.betainc(k + d, Mt - d, 0, x)
    return LogReal.from_real(val / (2 * a ** (k + d)))


def a_of_n(m: ModelSpace, N: int, ctx: PrecisionContext) -> LogReal:
    """Normalization integral a(N) over the chart ball, by radial quadrature.

    a(N) = int_B exp(-N f_k(|z|^2)) dVol, strictly positive and decreasing
    in N; its inverse approaches P_k(N) up to an excised-tail error of
    order exp(-N f_k(r^2)).
    """
    if N < 1:
        raise DomainError("a_of_n needs N >= 1")
    with ctx.workprec():
        return _radial_moment_quad(m, N, 0, ctx).scaled(_surface_const(m.dim))


def a_of_n_closed(m: ModelSpace, N: int) -> LogReal:
    """Closed-form a(N) (independent oracle for the quadrature route)."""
    if N < 1:
        raise DomainError("a_of_n needs N >= 1")
    return radial_moment_closed(m, N, 0).scaled(_surface_const(m.dim))


@dataclass(frozen=True)
class AncillaryBasis:
    """Monomial norms ||z^nu|| for |nu| <= max_degree (diagonal Gram)."""

    model: ModelSpace
    N: int
    max_degree: int
    norms: dict  # multi-index tuple -> LogReal norm (not squared)

    def norm(self, nu) -> LogReal:
        return self.norms[tuple(nu)]

    def norm_sq(self, nu) -> LogReal:
        n = self.norms[tuple(nu)]
        return n * n

    def indices(self):
        return sorted(self.norms.keys())


def monomial_norms(
    m: ModelSpace, N: int, max_degree: int, ctx: PrecisionContext, method: str = "quadrature"
) -> AncillaryBasis:
    """Norms of the monomial basis.

    method="quadrature" integrates the radial moments with the composite
    rule; method="closed" uses the Beta/Gamma closed forms.  Both must
    agree wherever both are defined (covered by the tests).
    """
    if max_degree < 0:
        raise DomainError("max_degree must be >= 0")
    with ctx.workprec():
        if method == "quadrature":
            radial = {k: _radial_moment_quad(m, N, k, ctx) for k in range(max_degree + 1)}
        elif method == "closed":
            radial = {k: radial_moment_closed(m, N, k) for k in range(max_degree + 1)}
        else:
            raise ValueError("method must be 'quadrature' or 'closed'")
        norms = {}
        for nu in multi_indices(m.dim, max_degree):
            sq = radial[sum(nu)].scaled(angular_factor(nu))
            norms[nu] = sq.sqrt()
    return AncillaryBasis(model=m, N=N, max_degree=max_degree, norms=norms)


# ---------------------------------------------------------------------------
# Polynomials on the chart
# ---------------------------------------------------------------------------

def poly_eval(u: dict, coords):
    """Evaluate a polynomial given as {multi-index: coefficient}."""
    out = mpc(0)
    for nu, c in u.items():
        term = mpc(c)
        for z, p in zip(coords, nu):
            if p:
                term *= z ** p
        out += term
    return out


def poly_norm(u: dict, basis: AncillaryBasis) -> LogReal:
    """Hilbert norm of a polynomial from the diagonal monomial Gram."""
    acc = LogReal.zero()
    for nu, c in u.items():
        cc = abs(mpc(c))
        if cc == 0:
            continue
        acc = acc + basis.norm_sq(nu).scaled(cc * cc)
    return acc.sqrt()


def _theta_trapezoid_nodes(count: int):
    h = 2 * mp.pi / count
    return [(k * h, h) for k in range(count)]


def _unit(theta):
    return mpc(mp.cos(theta), mp.sin(theta))


def inner_product_quad(m: ModelSpace, N: int, u: dict, v: dict, ctx: PrecisionContext):
    """<u, v> over the chart ball by tensor quadrature (d <= 2).

    Angular directions use the trapezoid rule (exact for the trigonometric
    polynomials that monomials restrict to), radial directions the
    composite Gauss-Legendre rule with the panel-doubling self-check.
    """
    d = m.dim
    if d not in (1, 2):
        raise DomainError("inner_product_quad supports d in {1, 2}")
    deg = max([sum(nu) for nu in u] + [sum(nu) for nu in v] + [0])
    mtheta = 2 * deg + 8
    kap = m.kappa
    if m.is_full_space:
        if kap > 0:
            raise DomainError("full-space inner products: use the closed-form norms")
        upper = _flat_truncation_radius(N, 40) if kap == 0 else m.domain_radius
    else:
        upper = m.chart_radius

    with ctx.workprec():
        if d == 1:
            def outer(rho):
                if rho <= 0:
                    return mpc(0)
                acc = mpc(0)
                for th, wt in _theta_trapezoid_nodes(mtheta):
                    z = (rho * _unit(th),)
                    acc += poly_eval(u, z) * mp.conj(poly_eval(v, z)) * wt
                t = rho * rho
                return acc * rho * mp.exp(-N * f_eval(m.curvature, t)) * (1 + kap * t) ** (-(d + 1))

            return _integrate_complex(outer, mpf(0), upper, ctx)

        def outer(rho1):
            if rho1 <= 0:
                return mpc(0)
            r2max = mp.sqrt(max(upper ** 2 - rho1 ** 2, mpf(0)))
            if r2max <= 0:
                return mpc(0)

            def inner(rho2):
                if rho2 <= 0:
                    return mpc(0)
                acc = mpc(0)
                for th1, w1 in _theta_trapezoid_nodes(mtheta):
                    z1 = rho1 * _unit(th1)
                    for th2, w2 in _theta_trapezoid_nodes(mtheta):
                        z2 = rho2 * _unit(th2)
                        acc += poly_eval(u, (z1, z2)) * mp.conj(poly_eval(v, (z1, z2))) * w1 * w2
                t = rho1 * rho1 + rho2 * rho2
                return acc * rho2 * mp.exp(-N * f_eval(m.curvature, t)) * (1 + kap * t) ** (-(d + 1))

            return rho1 * _integrate_complex(inner, mpf(0), r2max, ctx, check=False)

        return _integrate_complex(outer, mpf(0), upper, ctx)


def _integrate_complex(f, a, b, ctx: PrecisionContext, check: bool = True):
    """Composite GL for mpc-valued integrands of ordinary dynamic range."""
    if a == b:
        return mpc(0)

    def run(npanels):
        acc = mpc(0)
        for x, w in composite_nodes(a, b, ctx, panels=npanels):
            acc += f(x) * w
        return acc

    coarse = run(ctx.panels)
    if not check:
        return coarse
    fine = run(2 * ctx.panels)
    diff = abs(fine - coarse)
    scale = max(abs(fine), abs(coarse))
    if scale > 0 and diff > mpf(ctx.target_rel_tol) * scale:
        raise QuadratureNotConvergedError(coarse, fine, diff / scale)
    return fine


def reproduce_at_zero(m: ModelSpace, N: int, u: dict, ctx: PrecisionContext):
    """Evaluation at the origin against the pairing with the constants.

    Returns (u(0), a(N)^-1 <u, 1>); the two agree up to quadrature error
    because monomials of positive degree are orthogonal to constants under
    any radial weight.
    """
    with ctx.workprec():
        lhs = mpc(u.get(tuple([0] * m.dim), 0))
        one = {tuple([0] * m.dim): mpf(1)}
        ip = inner_product_quad(m, N, u, one, ctx)
        a_val = a_of_n(m, N, ctx)
        rhs = ip / a_val.to_mpf()
        return lhs, rhs


# ---------------------------------------------------------------------------
# Coherent-state overlaps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoherentSample:
    """Overlap of the coherent state at `center` with the one at the origin."""

    center: ChartPoint
    N: int
    overlap: KernelValue


def _arc_cos_bound(kap, T, rho_s_prod):
    """cos(theta) threshold: the support condition holds iff cos(theta) > c*."""
    if rho_s_prod == 0:
        return mpf(-2)  # full circle
    if kap == 0:
        return T / (2 * rho_s_prod)
    return (mp.exp(kap * T) - 1 - kap * kap * rho_s_prod ** 2) / (2 * kap * rho_s_prod)


def _integrate_piece(igrand, lo, hi, ctx, sing_lo=False, sing_hi=False) -> LogReal:
    """Composite GL over [lo, hi], with rho = end -/+ u^2 substitution at a
    singular end (the arc bound theta*(rho) has a sqrt kink where the
    support circle starts or stops cutting the domain)."""
    if hi <= lo:
        return LogReal.zero()
    if sing_lo and sing_hi:
        mid = (lo + hi) / 2
        return _integrate_piece(igrand, lo, mid, ctx, sing_lo, False) + _integrate_piece(
            igrand, mid, hi, ctx, False, sing_hi
        )
    if sing_lo:
        return integrate_1d(
            lambda u: igrand(lo + u * u).scaled(2 * u), mpf(0), mp.sqrt(hi - lo), ctx
        )
    if sing_hi:
        return integrate_1d(
            lambda u: igrand(hi - u * u).scaled(2 * u), mpf(0), mp.sqrt(hi - lo), ctx
        )
    return integrate_1d(igrand, lo, hi, ctx)


def _find_crossings(fun, a, b, n_scan=400):
    """Roots of a scalar function on (a, b) by scan plus bisection."""
    roots = []
    xs = [a + (b - a) * mpf(i) / n_scan for i in range(n_scan + 1)]
    vals = [fun(x) for x in xs]
    for i in range(n_scan):
        v0, v1 = vals[i], vals[i + 1]
        if v0 == 0:
            roots.append(xs[i])
            continue
        if v0 * v1 < 0:
            lo, hi = xs[i], xs[i + 1]
            flo = v0
            for _ in range(mp.prec + 8):
                mid = (lo + hi) / 2
                fm = fun(mid)
                if fm == 0:
                    break
                if flo * fm < 0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            roots.append((lo + hi) / 2)
    return roots


def _arc_integral(curv, N, rho_s, theta_star, ctx: PrecisionContext):
    """int_{-theta*}^{theta*} exp(N F(rho_s e^{i theta})) dtheta, exactly in theta.

    exp(N F(w)) = sum_k c_k w^k with c_{k+1} = c_k (N - k kappa)/(k + 1)
    (the flat case is the exponential series), and each power integrates to
    2 sin(k theta*)/k over the symmetric arc.  The series converges for
    |kappa| rho_s < 1, which the chart radius bounds guarantee; for
    spherical models with N/kappa integral it terminates.
    """
    if theta_star <= 0:
        return mpf(0)
    kap = curv.kappa
    tol_log = -(mp.prec + 24) * mp.log(2)
    c1, s1 = mp.cos(theta_star), mp.sin(theta_star)
    ck, sk = mpf(1), mpf(0)  # cos/sin of k*theta*
    coeff = mpf(1)  # c_k * rho_s^k
    acc = mpf(0)
    peak = mpf(0)
    k = 0
    max_terms = 8 * (N + mp.prec + 64)
    while True:
        if k == 0:
            acc += 2 * theta_star
            peak = 2 * theta_star
        else:
            term = coeff * 2 * sk / k
            acc += term
            peak = max(peak, abs(term))
        ratio = (N - k * kap) * rho_s / (k + 1)
        coeff *= ratio
        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
        k += 1
        if coeff == 0:
            break
        bound = abs(coeff) * 2 * theta_star
        if peak > 0 and abs(ratio) < mpf("0.95") and mp.log(bound / peak) < tol_log:
            break
        if k > max_terms:
            raise QuadratureNotConvergedError(acc, acc, mp.inf)
    return acc


def coherent_overlap(m: ModelSpace, N: int, y: ChartPoint, ctx: PrecisionContext) -> CoherentSample:
    """Overlap <psi_y, psi_0> of unit-frame coherent states, by quadrature.

    The state at y is supported on its own chart ball, so the integral runs
    over B(0, r) intersected with that ball; for each radius the admissible
    angular arc is computed in closed form and integrated smoothly.  The
    result is a^{-2} e^{-N f(|y|^2)/2} * I with I the truncated-domain
    integral of exp(N F(z.y~)) against the weight.
    """
    d = m.dim
    if d not in (1, 2):
        raise DomainError("coherent_overlap supports d in {1, 2}")
    if m.kappa > 0 and m.is_full_space:
        raise DomainError("full-space spherical overlaps are not supported")
    s = y.norm()
    if not m.is_full_space and s > m.chart_radius / 2 + mpf(2) ** (-mp.prec // 2):
        raise DomainError("center must satisfy |y| <= chart_radius / 2")

    with ctx.workprec():
        a_val = a_of_n(m, N, ctx)
        if s == 0:
            mag = LogReal.one() / a_val
            return CoherentSample(center=y, N=N, overlap=KernelValue(mag, mpf(0)))

        kap = m.kappa
        curv = m.curvature
        if m.is_full_space:
            F_bound = mp.inf
            upper = _flat_truncation_radius(N, 40) + s if kap == 0 else m.domain_radius
        else:
            F_bound = f_eval(curv, m.chart_radius ** 2)
            upper = m.chart_radius

        fs2 = f_eval(curv, s * s)

        def cstar(rho, rho2sq=mpf(0)):
            if F_bound == mp.inf:
                return mpf(-2)
            T = f_eval(curv, rho * rho + rho2sq) + fs2 - F_bound
            return _arc_cos_bound(kap, T, rho * s)

        def theta_star(rho, rho2sq=mpf(0)):
            c = cstar(rho, rho2sq)
            if c <= -1:
                return mp.pi
            if c >= 1:
                return mpf(0)
            return mp.acos(c)

        if d == 1:
            def outer_igrand(rho):
                if rho <= 0:
                    return LogReal.zero()
                ts = theta_star(rho)
                if ts <= 0:
                    return LogReal.zero()
                arc = _arc_integral(curv, N, rho * s, ts, ctx)
                t = rho * rho
                base = rho * (1 + kap * t) ** (-(d + 1))
                return LogReal.from_real(arc * base) * LogReal.from_log(-N * f_eval(curv, t))

            # split where the arc stops being the full circle / becomes empty
            cuts = []
            if F_bound != mp.inf:
                for target in (-1, 1):
                    cuts.extend(_find_crossings(lambda r, tg=target: cstar(r) - tg, mpf(1e-9), upper))
            pieces = sorted({mpf(0), upper, *cuts})
            interior = set(pieces) - {mpf(0), upper}
            total = LogReal.zero()
            for lo, hi in zip(pieces, pieces[1:]):
                total = total + _integrate_piece(
                    outer_igrand, lo, hi, ctx, sing_lo=lo in interior, sing_hi=hi in interior
                )
        else:
            def inner_igrand(rho1, rho2):
                rho2sq = rho2 * rho2
                ts = theta_star(rho1, rho2sq)
                if ts <= 0:
                    return LogReal.zero()
                arc = _arc_integral(curv, N, rho1 * s, ts, ctx)
                t = rho1 * rho1 + rho2sq
                base = rho1 * rho2 * (1 + kap * t) ** (-(d + 1))
                return LogReal.from_real(arc * base) * LogReal.from_log(-N * f_eval(curv, t))

            def outer_igrand(rho1):
                if rho1 <= 0:
                    return LogReal.zero()
                hi2 = mp.sqrt(max(upper ** 2 - rho1 ** 2, mpf(0)))
                if hi2 <= 0:
                    return LogReal.zero()
                cuts2 = []
                if F_bound != mp.inf:
                    for target in (-1, 1):
                        cuts2.extend(
                            _find_crossings(
                                lambda r2, tg=target: cstar(rho1, r2 * r2) - tg, mpf(0), hi2, n_scan=80
                            )
                        )
                pieces2 = sorted({mpf(0), hi2, *cuts2})
                acc = LogReal.zero()
                for lo, hi in zip(pieces2, pieces2[1:]):
                    if hi > lo:
                        acc = acc + integrate_1d(lambda r2: inner_igrand(rho1, r2), lo, hi, ctx)
                return acc.scaled(2 * mp.pi)

            total = integrate_1d(outer_igrand, mpf(0), upper, ctx)

        mag = total / (a_val * a_val)
        mag = mag * LogReal.from_log(-mpf(N) * fs2 / 2)
        phase = mpf(0) if mag.sign >= 0 else mp.pi
        return CoherentSample(center=y, N=N, overlap=KernelValue(abs(mag), phase))


def coherent_overlap_closed(m: ModelSpace, N: int, y: ChartPoint, ctx: PrecisionContext) -> LogReal:
    """Closed-form magnitude a(N)^-1 exp(N D(0, y) / 2) the overlap approaches."""
    with ctx.workprec():
        a_val = a_of_n(m, N, ctx)
        d_exp = psi_exponent(m, ChartPoint.origin(m.dim), y)
        return (LogReal.one() / a_val).scaled(mp.exp(mpf(N) * d_exp / 2))
