"""
Ordered zero-temperature saddle of the random Gaussian matrix game.

In the limit where the maximizer becomes rational first and then the
minimizer, the replica-symmetric saddle collapses to two thresholds
``(alpha_x, alpha_y)``.  The equilibrium strategies are rectified Gaussians,

    x = (z + alpha_x)_+ / A(alpha_x),   y = (z + alpha_y)_+ / A(alpha_y),

and the thresholds are fixed by the support-matching law
``Phi(alpha_y) = gamma * Phi(alpha_x)`` together with a balance condition
between the two simplex multipliers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .scalar_tools import (
    gauss_hermite_rule,
    q_ratio,
    std_normal_cdf,
    std_normal_quantile,
    trunc_gauss_A,
)

__all__ = [
    "ZeroTSaddle",
    "ZeroTObservables",
    "InfeasibleBracketError",
    "MultipleRootsError",
    "solve_zero_t",
    "zero_t_observables",
    "onesite_strategy_law",
    "gamma_expansion",
    "support_residual",
    "balance_residual",
    "law_moments",
]

_ALPHA_LO = -6.0
_ALPHA_HI = 6.0
_EDGE = 1e-9
_N_SCAN = 240


class InfeasibleBracketError(ValueError):
    """Raised when gamma * Phi(alpha_x) >= 1 over the whole search interval."""


class MultipleRootsError(RuntimeError):
    """Raised when the balance equation changes sign more than once."""


@dataclass(frozen=True)
class ZeroTSaddle:
    """Thresholds of the ordered zero-temperature saddle.

    Attributes
    ----------
    alpha_x, alpha_y : float
        Minimizer and maximizer thresholds.
    gamma : float
        Aspect ratio N/M.
    sigma : float
        Payoff variance scale.
    m_hat_x, m_hat_y : float
        Rescaled simplex multipliers; the value density is their half difference.
    """

    alpha_x: float
    alpha_y: float
    gamma: float
    sigma: float
    m_hat_x: float
    m_hat_y: float


@dataclass(frozen=True)
class ZeroTObservables:
    value_density: float
    rho_x: float
    rho_y: float
    q_x: float
    q_y: float


def _alpha_y_of(alpha_x: float, gamma: float) -> float:
    return float(std_normal_quantile(gamma * std_normal_cdf(alpha_x)))


def support_residual(alpha_x: float, alpha_y: float, gamma: float) -> float:
    """Phi(alpha_y) - gamma * Phi(alpha_x)."""
    return float(std_normal_cdf(alpha_y) - gamma * std_normal_cdf(alpha_x))


def balance_residual(alpha_x: float, alpha_y: float, gamma: float) -> float:
    """sqrt(gamma) * alpha_x * sqrt(q(alpha_y)) + alpha_y * sqrt(q(alpha_x))."""
    return float(
        math.sqrt(gamma) * alpha_x * math.sqrt(q_ratio(alpha_y))
        + alpha_y * math.sqrt(q_ratio(alpha_x))
    )


def _balance(alpha_x: float, gamma: float) -> float:
    return balance_residual(alpha_x, _alpha_y_of(alpha_x, gamma), gamma)


def _search_interval(gamma: float) -> tuple[float, float]:
    hi = _ALPHA_HI
    if gamma > 1.0:
        hi = min(hi, float(std_normal_quantile(1.0 / gamma)))
    hi -= _EDGE
    lo = _ALPHA_LO
    # alpha_y must also stay finite: gamma * Phi(alpha_x) has to exceed 0 numerically
    if not hi > lo:
        raise InfeasibleBracketError(
            f"gamma={gamma}: admissible alpha_x range is (-inf, {hi + _EDGE:.6g}), "
            f"which does not meet the search interval [{_ALPHA_LO}, {_ALPHA_HI}]"
        )
    return lo, hi


def solve_zero_t(gamma: float, sigma: float = 1.0, tol: float = 1e-13) -> ZeroTSaddle:
    """Solve the two threshold equations for aspect ratio ``gamma``.

    ``alpha_y`` is eliminated through the support law and the remaining
    scalar balance equation is bracketed on a scan grid, bisected to width
    1e-6 and then refined by a safeguarded secant (Brent) step.

    Parameters
    ----------
    gamma : float
        Aspect ratio N/M, positive.
    sigma : float
        Payoff variance scale, positive.
    tol : float
        Target for both residuals, in (0, 1e-6].

    Raises
    ------
    InfeasibleBracketError
        If no admissible alpha_x exists on the search interval.
    MultipleRootsError
        If the balance equation changes sign more than once.
    """
    if not gamma > 0 or not math.isfinite(gamma):
        raise ValueError("gamma must be positive and finite")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not 0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")

    lo, hi = _search_interval(gamma)
    grid = np.linspace(lo, hi, _N_SCAN + 1)
    ay_grid = np.asarray(std_normal_quantile(gamma * std_normal_cdf(grid)))
    vals = math.sqrt(gamma) * grid * np.sqrt(q_ratio(ay_grid)) + ay_grid * np.sqrt(q_ratio(grid))
    sign = np.sign(vals)
    exact = np.nonzero(sign == 0)[0]
    changes = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    n_roots = len(changes) + len(exact)
    if n_roots == 0:
        raise InfeasibleBracketError(
            f"balance equation has no sign change on [{lo:.6g}, {hi:.6g}] for gamma={gamma}"
        )
    if n_roots > 1:
        roots = sorted(list(grid[exact]) + [0.5 * (grid[i] + grid[i + 1]) for i in changes])
        raise MultipleRootsError(f"gamma={gamma}: balance equation has several roots near {roots}")

    if len(exact):
        ax = float(grid[exact[0]])
    else:
        a, b = float(grid[changes[0]]), float(grid[changes[0] + 1])
        fa = vals[changes[0]]
        while b - a > 1e-6:
            mid = 0.5 * (a + b)
            fm = _balance(mid, gamma)
            if fm == 0:
                a = b = mid
                break
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b = mid
        if a == b:
            ax = a
        else:
            ax = brentq(_balance, a, b, args=(gamma,), xtol=1e-300, rtol=4 * np.finfo(float).eps,
                        maxiter=200)
    ay = _alpha_y_of(ax, gamma)
    if abs(balance_residual(ax, ay, gamma)) > tol or abs(support_residual(ax, ay, gamma)) > tol:
        raise RuntimeError(
            f"zero-temperature solve for gamma={gamma} did not reach tol={tol}: "
            f"balance={balance_residual(ax, ay, gamma):.3e}, support={support_residual(ax, ay, gamma):.3e}"
        )
    rs = math.sqrt(sigma)
    m_hat_x = rs * gamma ** -0.25 * ax * math.sqrt(q_ratio(ay))
    m_hat_y = rs * gamma ** 0.25 * ay * math.sqrt(q_ratio(ax))
    return ZeroTSaddle(float(ax), float(ay), float(gamma), float(sigma), float(m_hat_x), float(m_hat_y))


def zero_t_observables(saddle: ZeroTSaddle) -> ZeroTObservables:
    """Value density, support fractions and second moments at a saddle."""
    ax, ay, g = saddle.alpha_x, saddle.alpha_y, saddle.gamma
    qx = float(q_ratio(ax))
    qy = float(q_ratio(ay))
    value = 0.5 * math.sqrt(saddle.sigma) * (
        g ** -0.25 * ax * math.sqrt(qy) - g ** 0.25 * ay * math.sqrt(qx)
    )
    rho_x = float(std_normal_cdf(ax))
    # rho_y is reported through the support law so that rho_y = gamma * rho_x holds exactly
    rho_y = g * rho_x
    return ZeroTObservables(float(value), rho_x, float(rho_y), qx, qy)


def onesite_strategy_law(saddle: ZeroTSaddle, z):
    """Rescaled equilibrium strategy weights driven by the Gaussian field ``z``."""
    z = np.asarray(z, dtype=float)
    x = np.maximum(z + saddle.alpha_x, 0.0) / trunc_gauss_A(saddle.alpha_x)
    y = np.maximum(z + saddle.alpha_y, 0.0) / trunc_gauss_A(saddle.alpha_y)
    if z.ndim == 0:
        return float(x), float(y)
    return x, y


def gamma_expansion(epsilon: float, sigma: float = 1.0, value_order: int = 1):
    """Perturbative thresholds and value for gamma = 1 + epsilon.

    The thresholds are returned to second order.  The value density is
    linear in epsilon by default; ``value_order=2`` adds the quadratic
    correction ``sigma**0.5 * pi * sqrt(2) / 8 * epsilon**2``.

    Returns
    -------
    alpha_x_pred, alpha_y_pred, value_pred : float
    """
    if abs(epsilon) >= 0.2:
        raise ValueError("gamma_expansion requires |epsilon| < 0.2")
    if value_order not in (1, 2):
        raise ValueError("value_order must be 1 or 2")
    c1 = math.sqrt(math.pi / 8.0)
    c2 = math.sqrt(2.0 * math.pi) / 16.0
    ax = -c1 * epsilon + c2 * (5.0 - math.pi) * epsilon ** 2
    ay = c1 * epsilon + c2 * (1.0 - math.pi) * epsilon ** 2
    rs = math.sqrt(sigma)
    value = -0.5 * math.pi * math.sqrt(0.5) * rs * epsilon
    if value_order == 2:
        value += rs * math.pi * math.sqrt(2.0) / 8.0 * epsilon ** 2
    return ax, ay, value


def law_moments(saddle: ZeroTSaddle, order: int = 128, rule: str = "split"):
    """Gaussian expectations E[x], E[x²], E[y], E[y²] under the one-site laws.

    ``rule="split"`` integrates each rectified law with a Gauss-Legendre rule
    on ``[-alpha, 40]``, which starts at the kink and is accurate to machine
    precision.  ``rule="hermite"`` applies a plain Gauss-Hermite rule across
    the kink; it converges only algebraically (about 1e-3 at order 128).
    """
    if rule == "hermite":
        gh = gauss_hermite_rule(order)
        x, y = onesite_strategy_law(saddle, gh.nodes)
        return (
            float(gh.expect(x)),
            float(gh.expect(x * x)),
            float(gh.expect(y)),
            float(gh.expect(y * y)),
        )
    if rule != "split":
        raise ValueError(f"unknown rule {rule!r}")
    t, w = np.polynomial.legendre.leggauss(order)
    out = []
    for alpha in (saddle.alpha_x, saddle.alpha_y):
        lo, hi = -alpha, 40.0
        z = 0.5 * (hi - lo) * (t + 1.0) + lo
        wz = 0.5 * (hi - lo) * w * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        v = (z + alpha) / trunc_gauss_A(alpha)
        out.extend([float(wz @ v), float(wz @ (v * v))])
    return out[0], out[1], out[2], out[3]
