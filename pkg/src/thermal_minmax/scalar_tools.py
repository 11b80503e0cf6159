"""
Gaussian special functions, Gauss-Hermite rules and closed-form one-site integrals.

Every solver in the package reduces to expectations over the standard normal
measure ``Dz`` and to one-dimensional integrals of the form

    Z(c, h, U) = ∫_0^U exp(-c y²/2 + h y) dy

together with the first two Gibbs moments of the same measure.  For ``c > 0``
this is a truncated normal, for ``c = 0`` a truncated exponential, and
negative curvature is handled by a graded composite Gauss-Legendre rule.  All
partition functions are returned in log form and the moments are computed from
Mills-ratio expressions (via ``erfcx``) so that extreme fields never produce
NaN or overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtr, ndtri, roots_hermitenorm

__all__ = [
    "QuadratureRule",
    "TruncGaussMoments",
    "TruncExpMoments",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_quantile",
    "trunc_gauss_A",
    "trunc_gauss_B",
    "q_ratio",
    "gauss_hermite_rule",
    "trunc_normal_moments",
    "trunc_exp_moments",
    "quadratic_exp_moments",
    "quadratic_exp_log_partition",
]

LOG_2PI = float(np.log(2.0 * np.pi))
SQRT_HALF_PI = float(np.sqrt(0.5 * np.pi))
# Below this threshold A, B and the Mills-ratio differences are evaluated by
# their asymptotic series instead of the (cancelling) closed forms.
_SERIES_SWITCH = 8.0
# |curvature| * upper² below which the curvature is treated perturbatively
FLAT_CURVATURE = 1e-4


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights with ``sum(w * f(nodes)) ≈ ∫ Dz f(z)``."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def expect(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.tensordot(values, self.weights, axes=([axis], [0]))


@dataclass(frozen=True)
class TruncGaussMoments:
    log_partition: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray
    # True where field/sqrt(curvature) < -37; values are still finite and accurate
    ill_conditioned: np.ndarray | bool = False


@dataclass(frozen=True)
class TruncExpMoments:
    log_partition: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Normal distribution
# ---------------------------------------------------------------------------

def std_normal_pdf(a):
    a = np.asarray(a, dtype=float)
    return _scalar_or_array(np.exp(-0.5 * a * a - 0.5 * LOG_2PI))


def std_normal_cdf(a):
    """Standard normal CDF; saturates to 0/1 in the far tails."""
    return _scalar_or_array(ndtr(np.asarray(a, dtype=float)))


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("std_normal_quantile requires p in (0, 1)")
    return _scalar_or_array(ndtri(p))


def _mills(t):
    """Mills ratio Φc(t)/φ(t), finite for every real t up to overflow of exp(t²/2)."""
    return SQRT_HALF_PI * erfcx(t / np.sqrt(2.0))


def _series_A(t):
    # (1 - t R(t)) for large t:  Σ_{n≥1} (-1)^{n+1} (2n-1)!! / t^{2n}
    inv = 1.0 / (t * t)
    total = np.zeros_like(t)
    term = np.ones_like(t)
    for n in range(1, 30):
        term = term * (2 * n - 1) * inv if n > 1 else inv.copy()
        total += term if n % 2 == 1 else -term
    return total


def _series_B(t):
    # t((t²+1)R(t) - t) for large t:  Σ_{n≥1} (-1)^{n+1} 2n (2n-1)!! / t^{2n}
    inv = 1.0 / (t * t)
    total = np.zeros_like(t)
    dfact = np.ones_like(t)
    for n in range(1, 30):
        dfact = dfact * (2 * n - 1) * inv if n > 1 else inv.copy()
        term = 2 * n * dfact
        total += term if n % 2 == 1 else -term
    return total


def _log_A_B(alpha):
    """log A(α) and log B(α), accurate for all finite α."""
    alpha = np.asarray(alpha, dtype=float)
    log_a = np.empty_like(alpha)
    log_b = np.empty_like(alpha)
    deep = alpha < -_SERIES_SWITCH
    if np.any(~deep):
        a = alpha[~deep]
        cdf = ndtr(a)
        pdf = np.exp(-0.5 * a * a - 0.5 * LOG_2PI)
        log_a[~deep] = np.log(a * cdf + pdf)
        log_b[~deep] = np.log((a * a + 1.0) * cdf + a * pdf)
    if np.any(deep):
        t = -alpha[deep]
        log_pdf = -0.5 * t * t - 0.5 * LOG_2PI
        log_a[deep] = log_pdf + np.log(_series_A(t))
        log_b[deep] = log_pdf - np.log(t) + np.log(_series_B(t))
    return log_a, log_b


def trunc_gauss_A(alpha):
    """A(α) = E[(Z+α)_+] = αΦ(α) + φ(α)."""
    return _scalar_or_array(np.exp(_log_A_B(np.atleast_1d(alpha))[0]).reshape(np.shape(alpha)))


def trunc_gauss_B(alpha):
    """B(α) = E[(Z+α)_+²] = (α²+1)Φ(α) + αφ(α)."""
    return _scalar_or_array(np.exp(_log_A_B(np.atleast_1d(alpha))[1]).reshape(np.shape(alpha)))


def q_ratio(alpha):
    """q(α) = B(α)/A(α)², evaluated in the log domain for deep negative α."""
    log_a, log_b = _log_A_B(np.atleast_1d(alpha))
    return _scalar_or_array(np.exp(log_b - 2.0 * log_a).reshape(np.shape(alpha)))


def _A_over_Phi(alpha):
    """A(α)/Φ(α) and B(α)/Φ(α): moments of (Z+α) given Z+α > 0."""
    alpha = np.asarray(alpha, dtype=float)
    ra = np.empty_like(alpha)
    rb = np.empty_like(alpha)
    deep = alpha < -_SERIES_SWITCH
    if np.any(~deep):
        a = alpha[~deep]
        with np.errstate(over="ignore"):
            # the ratio overflows to inf for large α, where φ(α)/Φ(α) is 0
            inv_mills = 1.0 / _mills(-a)  # φ(α)/Φ(α)
        ra[~deep] = a + inv_mills
        rb[~deep] = a * a + 1.0 + a * inv_mills
    if np.any(deep):
        t = -alpha[deep]
        r = _mills(t)
        ra[deep] = _series_A(t) / r
        rb[deep] = _series_B(t) / (t * r)
    return ra, rb


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def gauss_hermite_rule(order: int) -> QuadratureRule:
    """Gauss-Hermite rule normalized for the standard Gaussian measure Dz.

    Parameters
    ----------
    order : int
        Number of nodes, ``2 <= order <= 512``.

    Notes
    -----
    Above order ~400 the outermost weights are below the double-precision
    range and are stored as exact zeros.
    """
    order = int(order)
    if not 2 <= order <= 512:
        raise ValueError(f"Gauss-Hermite order must lie in [2, 512], got {order}")
    z, w = roots_hermitenorm(order)
    w = w / np.sqrt(2.0 * np.pi)
    total = w.sum()
    ok = (
        np.all(np.isfinite(z))
        and np.all(np.isfinite(w))
        and np.all(w >= 0)
        and abs(total - 1.0) < 1e-12
        and np.all(np.diff(z) > 0)
        and np.max(np.abs(z + z[::-1])) < 1e-10 * max(1.0, np.max(np.abs(z)))
    )
    if not ok:
        raise RuntimeError(f"Gauss-Hermite nodes did not converge for order {order}")
    w = w / total
    z.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(nodes=z, weights=w, order=order)


# ---------------------------------------------------------------------------
# One-site integrals  ∫_0^U exp(-c y²/2 + h y) dy
# ---------------------------------------------------------------------------

def _trunc_exp(h, upper):
    """log-partition, mean and second moment of exp(h y) on [0, upper]."""
    h = np.asarray(h, dtype=float)
    u = np.atleast_1d(h * upper)
    a = np.abs(u)
    # L(u) = log((e^u - 1)/u); mean = U L'(u); var = U² L''(u)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        em = np.exp(-a)
        one_minus = -np.expm1(-a)
        log_l = np.maximum(u, 0.0) + np.log(one_minus / a)
        d1 = np.where(u > 0, 1.0, -em) / one_minus - 1.0 / u
        d2 = 1.0 / (u * u) - em / (one_minus * one_minus)
    small = a < 1e-2
    if small.any():
        sv = u[small]
        s2 = sv * sv
        log_l[small] = sv / 2 + s2 / 24 - s2 * s2 / 2880 + s2 ** 3 / 181440
        d1[small] = 0.5 + sv / 12 - sv * s2 / 720 + sv * s2 * s2 / 30240
        d2[small] = 1.0 / 12 - s2 / 240 + s2 * s2 / 6048 - s2 ** 3 / 172800
    shape = np.broadcast_shapes(h.shape, np.shape(upper))
    mean = (upper * d1).reshape(shape)
    return (
        (np.log(upper) + log_l).reshape(shape),
        mean,
        (upper * upper * d2).reshape(shape) + mean * mean,
    )


def _bernoulli_series():
    # L(u) = log((e^u - 1)/u) = u/2 + sum_n B_2n u^2n / (2n (2n)!)
    from scipy.special import bernoulli, factorial

    b = bernoulli(24)
    coef = np.zeros(25)
    coef[1] = 0.5
    for n in range(1, 13):
        coef[2 * n] = b[2 * n] / (2 * n * factorial(2 * n, exact=True))
    return np.polynomial.Polynomial(coef)


_L_SERIES = _bernoulli_series()
_L_SERIES_DERIVS = [_L_SERIES.deriv(j) for j in range(1, 5)]


def _trunc_exp_cumulants(h, upper):
    """First four cumulants of the measure exp(h y) on [0, upper]."""
    h = np.asarray(h, dtype=float)
    u = np.atleast_1d(h * upper)
    a = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        em = np.exp(-a)
        one_minus = 1.0 - em
        f = np.where(u > 0, 1.0, -em) / one_minus
        fm1 = np.where(u > 0, em, -1.0) / one_minus
        d1f = -f * fm1
        d2f = d1f * (1.0 - 2.0 * f)
        d3f = d2f * (1.0 - 2.0 * f) - 2.0 * d1f * d1f
        derivs = [f - 1.0 / u, d1f + 1.0 / u ** 2, d2f - 2.0 / u ** 3, d3f + 6.0 / u ** 4]
    small = a < 0.5
    if small.any():
        for j in range(4):
            derivs[j][small] = _L_SERIES_DERIVS[j](u[small])
    shape = np.broadcast_shapes(h.shape, np.shape(upper))
    return [(upper ** (j + 1) * d).reshape(shape) for j, d in enumerate(derivs)]


def _near_flat(c, h, upper):
    """Second-order expansion in the curvature around the truncated exponential.

    Valid for |c| upper² < 1e-4: the log-partition error is below
    (|c| upper²)³ / 48 and the moments carry a relative error O((c upper²)²).
    """
    log_z0, _, _ = _trunc_exp(h, upper)
    k1, k2, k3, k4 = _trunc_exp_cumulants(h, upper)
    m2 = k2 + k1 * k1
    var_w = k4 + 4.0 * k1 * k3 + 2.0 * k2 * k2 + 4.0 * k1 * k1 * k2
    cov_yw = k3 + 2.0 * k1 * k2
    log_z = log_z0 - 0.5 * c * m2 + 0.125 * c * c * var_w
    mean = k1 - 0.5 * c * cov_yw
    second = m2 - 0.5 * c * var_w
    return log_z, mean, second


def _onesided_gauss(c, h):
    """exp(-c y²/2 + h y) on [0, ∞), c > 0."""
    sc = np.sqrt(c)
    alpha = h / sc
    ap = np.maximum(alpha, 0.0)
    log_z = np.where(
        alpha > 0,
        0.5 * ap * ap + np.log(ndtr(ap)) + 0.5 * LOG_2PI,
        np.log(_mills(-np.minimum(alpha, 0.0))),
    ) - 0.5 * np.log(c)
    ra, rb = _A_over_Phi(alpha)
    return log_z, ra / sc, rb / c


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_GEOM = 0.02 * 2.0 ** np.arange(40)


def _composite_gl(c, h, upper):
    """Composite Gauss-Legendre rule with panels graded geometrically from both ends.

    Used where no stable closed form exists (non-positive curvature, or a
    nearly flat truncated Gaussian).  The exponent is at most quadratic, so
    panels scaled by the local decay length resolve it to near machine
    precision.
    """
    c, h, upper = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (c, h, upper))
    slope0 = np.abs(h)
    slope1 = np.abs(h - c * upper)
    curv = np.sqrt(np.abs(c))
    scale0 = 1.0 / np.maximum(slope0 + curv, 1e-300)
    scale1 = 1.0 / np.maximum(slope1 + curv, 1e-300)
    left = np.minimum(_GEOM[None, :] * scale0[:, None], upper[:, None])
    right = np.maximum(upper[:, None] - _GEOM[None, :] * scale1[:, None], 0.0)
    centre = -h / np.where(c != 0, -c, np.inf)
    extra = np.clip(np.stack([centre, 0.5 * upper], axis=1), 0.0, upper[:, None])
    brk = np.sort(
        np.concatenate([np.zeros_like(upper)[:, None], left, right, extra, upper[:, None]], axis=1),
        axis=1,
    )
    a, b = brk[:, :-1], brk[:, 1:]
    half = 0.5 * (b - a)
    y = (a + half)[:, :, None] + half[:, :, None] * _GL_X[None, None, :]
    w = half[:, :, None] * _GL_W[None, None, :]
    y = y.reshape(len(c), -1)
    w = w.reshape(len(c), -1)
    expo = -0.5 * c[:, None] * y * y + h[:, None] * y
    top = expo.max(axis=1, keepdims=True)
    wts = np.exp(expo - top) * w
    z = wts.sum(axis=1)
    mean = (wts * y).sum(axis=1) / z
    second = (wts * y * y).sum(axis=1) / z
    return np.log(z) + top[:, 0], mean, second


def _trunc_gauss(c, h, upper):
    """c > 0 on [0, upper] (upper may be +inf)."""
    c, h, upper = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (c, h, upper)))
    c, h, upper = c.ravel(), h.ravel(), upper.ravel()
    finite = np.isfinite(upper)
    # reflect y -> U - y when the Gaussian centre lies in the upper half
    reflect = finite & (h > 0.5 * c * upper)
    uu = np.where(finite, upper, 0.0)
    h_eff = np.where(reflect, c * uu - h, h)
    offset = np.where(reflect, h * uu - 0.5 * c * uu * uu, 0.0)

    log_z0, m0, s0 = _onesided_gauss(c, h_eff)
    log_z = log_z0.copy()
    mean = m0.copy()
    second = s0.copy()
    if np.any(finite):
        idx = np.nonzero(finite)[0]
        cu, hu, uf = c[idx], h_eff[idx], uu[idx]
        log_z1, m1, s1 = _onesided_gauss(cu, hu - cu * uf)
        log_p = log_z1 + hu * uf - 0.5 * cu * uf * uf - log_z0[idx]
        p = np.exp(np.minimum(log_p, 0.0))
        ok = p < 0.5
        good = idx[ok]
        pg = p[ok]
        log_z[good] = log_z0[good] + np.log1p(-pg)
        mean[good] = (m0[good] - pg * (uf[ok] + m1[ok])) / (1.0 - pg)
        second[good] = (
            s0[good] - pg * (uf[ok] ** 2 + 2.0 * uf[ok] * m1[ok] + s1[ok])
        ) / (1.0 - pg)
        flat = idx[~ok]
        if flat.size:
            lz, mm, ss = _composite_gl(c[flat], h_eff[flat], uu[flat])
            log_z[flat], mean[flat], second[flat] = lz, mm, ss
    # undo the reflection
    log_z = log_z + offset
    mean_r = np.where(reflect, uu - mean, mean)
    second_r = np.where(reflect, uu * uu - 2.0 * uu * mean + second, second)
    return log_z, mean_r, second_r


def quadratic_exp_moments(curvature, field, upper):
    """Log-partition and Gibbs moments of ``exp(-curvature y²/2 + field y)`` on ``[0, upper]``.

    Any sign of ``curvature`` is accepted; non-positive curvature requires a
    finite ``upper``.  Returns a tuple ``(log_partition, mean, second_moment)``
    of arrays broadcast over the inputs.
    """
    if np.ndim(curvature) == 0 and np.ndim(upper) == 0:
        cs, us = float(curvature), float(upper)
        if not us > 0:
            raise ValueError("upper bound must be positive")
        if math.isfinite(us) and abs(cs) * us * us < 1e-13:
            # scalar flat measure: the common case inside the finite-temperature solver
            res = _trunc_exp(field, us)
            return tuple(_scalar_or_array(r) for r in res)
    c, h, u = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (curvature, field, upper)))
    shape = c.shape
    c, h, u = c.ravel(), h.ravel(), u.ravel()
    if np.any(~(u > 0)):
        raise ValueError("upper bound must be positive")
    if np.any((c <= 0) & ~np.isfinite(u)):
        raise ValueError("non-positive curvature needs a finite upper bound")
    out = [np.empty_like(c) for _ in range(3)]
    # curvature that cannot be distinguished from 0 over the domain
    spread = np.abs(c) * np.where(np.isfinite(u), u * u, np.inf)
    tiny = spread < 1e-13
    flat = (spread < FLAT_CURVATURE) & ~tiny
    pos = (c > 0) & ~tiny & ~flat
    neg = (c < 0) & ~tiny & ~flat
    for mask, fn in ((pos, _trunc_gauss), (neg, _composite_gl), (flat, _near_flat), (tiny, None)):
        if not np.any(mask):
            continue
        if fn is None:
            res = _trunc_exp(h[mask], u[mask])
        else:
            res = fn(c[mask], h[mask], u[mask])
        for o, r in zip(out, res):
            o[mask] = r
    return tuple(_scalar_or_array(o.reshape(shape)) for o in out)


def quadratic_exp_log_partition(curvature, field, upper):
    return quadratic_exp_moments(curvature, field, upper)[0]


def trunc_normal_moments(curvature, field, upper=np.inf) -> TruncGaussMoments:
    """Moments of the measure ∝ exp(-curvature x²/2 + field x) on [0, upper], curvature > 0."""
    if np.any(np.asarray(curvature) <= 0):
        raise ValueError("trunc_normal_moments requires positive curvature")
    alpha = np.asarray(field, dtype=float) / np.sqrt(np.asarray(curvature, dtype=float))
    ill = alpha < -37.0
    return TruncGaussMoments(
        *quadratic_exp_moments(curvature, field, upper),
        ill_conditioned=bool(ill) if ill.ndim == 0 else ill,
    )


def trunc_exp_moments(field, ymax) -> TruncExpMoments:
    """Moments of the measure ∝ exp(field y) on [0, ymax]."""
    field = np.asarray(field, dtype=float)
    ymax = np.asarray(ymax, dtype=float)
    if np.any(~(ymax > 0)) or np.any(~np.isfinite(ymax)):
        raise ValueError("ymax must be positive and finite")
    shape = np.broadcast_shapes(field.shape, ymax.shape)
    res = _trunc_exp(np.broadcast_to(field, shape).ravel(), np.broadcast_to(ymax, shape).ravel())
    return TruncExpMoments(*(_scalar_or_array(r.reshape(shape)) for r in res))
