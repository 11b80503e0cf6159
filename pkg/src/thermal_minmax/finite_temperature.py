"""
Finite-temperature saddle of the two-temperature Boltzmann strategy model.

The saddle is described by five overlaps ``(Q_x, q_x, Q_y, q_1, q_0)``, two
simplex multipliers ``(m_x, m_y)`` and five conjugates.  Given the overlaps,
the conjugates follow in closed form; the multipliers are fixed by the mean
constraints of the two one-site measures; and the one-site moments produce
the next overlaps.  :func:`solve_finite_t` iterates this map with damping.

The maximizer's one-site partition function is averaged over an auxiliary
Gaussian ``eta`` tilted by ``Z_y**k``.  Because ``k < 0`` the tilt is strictly
log-concave in ``eta`` and can become very sharp near the point where the
local field changes sign, so the default ``eta`` quadrature is a composite
Gauss-Legendre rule placed around the tilt mode and that sign change rather
than a fixed Gauss-Hermite grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .scalar_tools import FLAT_CURVATURE, QuadratureRule, gauss_hermite_rule, quadratic_exp_moments

__all__ = [
    "ModelParams",
    "OrderParams",
    "ConjugateParams",
    "SolverConfig",
    "XStats",
    "YStats",
    "FiniteTSolution",
    "SigmaExpansion",
    "MultiplierBracketError",
    "conjugates_from_overlaps",
    "qhat_x_alternative",
    "onesite_x_stats",
    "onesite_y_stats",
    "moment_map",
    "solve_finite_t",
    "sweep_finite_t",
    "saddle_functional",
    "eval_saddle_functional",
    "saddle_value_eliminated",
    "payoff_density",
    "moment_residuals",
    "entropy_baseline",
    "sigma_expansion",
    "overlap_slopes",
]

logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_GL_CACHE: dict = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Scalar model parameters.

    Attributes
    ----------
    sigma : float
        Payoff variance scale (``sigma >= 0``; zero gives the entropy-only model).
    gamma : float
        Aspect ratio N/M.
    beta_max, beta_min : float
        Inverse temperatures of the maximizer and the minimizer.
    """

    sigma: float
    gamma: float
    beta_max: float
    beta_min: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")
        for name in ("gamma", "beta_max", "beta_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def k(self) -> float:
        return -self.beta_min / self.beta_max

    def kappa(self, n_rows: int, n_cols: int) -> float:
        """Payoff scaling sqrt(sigma / L) with L = sqrt(N M)."""
        return math.sqrt(self.sigma / math.sqrt(n_rows * n_cols))

    @classmethod
    def from_k(cls, sigma: float, gamma: float, beta_max: float, k: float) -> "ModelParams":
        if not k < 0:
            raise ValueError("k must be negative")
        return cls(sigma=sigma, gamma=gamma, beta_max=beta_max, beta_min=-k * beta_max)


@dataclass(frozen=True)
class OrderParams:
    Q_x: float
    q_x: float
    Q_y: float
    q_1: float
    q_0: float
    m_x: float = 0.0
    m_y: float = 0.0

    def overlaps(self) -> np.ndarray:
        return np.array([self.Q_x, self.q_x, self.Q_y, self.q_1, self.q_0])

    def with_overlaps(self, v: Sequence[float]) -> "OrderParams":
        return replace(self, Q_x=float(v[0]), q_x=float(v[1]), Q_y=float(v[2]),
                       q_1=float(v[3]), q_0=float(v[4]))

    def is_ordered(self, slack: float = 1e-12) -> bool:
        return (
            self.Q_x + slack >= self.q_x >= -slack
            and self.Q_y + slack >= self.q_1
            and self.q_1 + slack >= self.q_0 >= -slack
        )

    @classmethod
    def baseline(cls) -> "OrderParams":
        """The entropy-only solution, used as the default initial point."""
        return cls(2.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class ConjugateParams:
    Qhat_x: float
    chihat_x: float
    Qhat_y: float
    chihat_0: float
    chihat_1: float


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings of the finite-temperature solver.

    ``eta_rule`` selects the quadrature of the tilted ``eta`` average:
    ``"adaptive"`` (composite Gauss-Legendre around the tilt mode and the
    field sign change, ``eta_panel_nodes`` nodes per panel) or ``"hermite"``
    (fixed Gauss-Hermite rule of order ``eta_order``).
    """

    z_order: int = 96
    eta_order: int = 96
    eta_rule: str = "adaptive"
    eta_panel_nodes: int = 10
    x_max: float = 50.0
    y_max: float = 50.0
    damping: float = 0.3
    tol: float = 1e-10
    max_iter: int = 5000
    multiplier_tol: float = 1e-12
    accelerate: bool = True
    anderson_depth: int = 5

    def rule_z(self) -> QuadratureRule:
        return gauss_hermite_rule(self.z_order)

    def rule_eta(self) -> Optional[QuadratureRule]:
        if self.eta_rule == "hermite":
            return gauss_hermite_rule(self.eta_order)
        if self.eta_rule != "adaptive":
            raise ValueError(f"unknown eta_rule {self.eta_rule!r}")
        return None


@dataclass(frozen=True)
class XStats:
    mean: float
    Q_x_new: float
    q_x_new: float
    log_term: float


@dataclass(frozen=True)
class YStats:
    mean: float
    Q_y_new: float
    q_1_new: float
    q_0_new: float
    log_term: float
    max_tilt_weight: float = 0.0


@dataclass(frozen=True)
class FiniteTSolution:
    theta: OrderParams
    conj: ConjugateParams
    nu: float
    e: float
    g_value: float
    residual: float
    iterations: int
    converged: bool = True
    params: Optional[ModelParams] = None


class MultiplierBracketError(RuntimeError):
    """No sign change of a mean constraint was found within the multiplier cap."""


# ---------------------------------------------------------------------------
# Conjugates
# ---------------------------------------------------------------------------

def conjugates_from_overlaps(theta: OrderParams, params: ModelParams) -> ConjugateParams:
    """Closed-form conjugates at stationarity of the saddle functional.

    A nonpositive ``Qhat_x`` is logged: the x one-site measure then relies on
    the finite cutoff ``x_max`` to be normalizable.
    """
    k = params.k
    s = params.sigma * params.beta_max ** 2
    rg = math.sqrt(params.gamma)
    chihat_x = s / rg * k * k * theta.q_0
    chihat_0 = rg * s * theta.q_x
    chihat_1 = rg * s * (theta.Q_x - theta.q_x)
    qhat_x = k * s / rg * (k * (theta.q_0 - theta.q_1) - (theta.Q_y - theta.q_1))
    if qhat_x <= 0 and s > 0:
        logger.debug("Qhat_x = %.3e <= 0: x one-site measure uses the truncated domain", qhat_x)
    return ConjugateParams(qhat_x, chihat_x, 0.0, chihat_0, chihat_1)


def qhat_x_alternative(theta: OrderParams, params: ModelParams) -> float:
    """Qhat_x written as chihat_x - (sigma beta_max² / sqrt(gamma)) (k Q_y + k(k-1) q_1)."""
    k = params.k
    s = params.sigma * params.beta_max ** 2
    chihat_x = s / math.sqrt(params.gamma) * k * k * theta.q_0
    return chihat_x - s / math.sqrt(params.gamma) * (k * theta.Q_y + k * (k - 1.0) * theta.q_1)


# ---------------------------------------------------------------------------
# One-site statistics
# ---------------------------------------------------------------------------

def _x_tables(conj: ConjugateParams, m_x: float, nodes: np.ndarray, x_max: float):
    fields = m_x + math.sqrt(max(conj.chihat_x, 0.0)) * nodes
    return quadratic_exp_moments(conj.Qhat_x, fields, x_max)


def onesite_x_stats(conj: ConjugateParams, m_x: float, rule: QuadratureRule,
                    x_max: float = 50.0) -> XStats:
    """Gaussian averages of the minimizer's one-site Gibbs moments.

    Returns ``∫Dz<x>``, ``∫Dz<x²>``, ``∫Dz<x>²`` and ``∫Dz log Z_x``.
    """
    log_z, mean, second = _x_tables(conj, m_x, rule.nodes, x_max)
    w = rule.weights
    return XStats(float(w @ mean), float(w @ second), float(w @ (mean * mean)), float(w @ log_z))


def _tilt_mode(a, s1, k, c, y_max):
    """Mode of l(eta) = k log Z_y(a + s1 eta) - eta²/2 and the curvature there.

    In the field variable h = a + s1 eta the stationarity condition reads
    G(h) = h - k s1² <y>(h) - a = 0 with G increasing.  For the flat measure
    <y>(h) is sigmoidal with its inflection at h = 0, so G is convex for
    h < 0 and concave for h > 0 and Newton started at h = 0 approaches the
    root monotonically.  A bracket guards the (tiny) curvature case.
    """
    ks2 = -k * s1 * s1
    lo = a - ks2 * y_max - 1e-12
    hi = a + 1e-12
    h = np.clip(np.zeros_like(a), lo, hi)
    curv = np.ones_like(a)
    active = np.ones(a.shape, dtype=bool)
    for _ in range(100):
        idx = np.nonzero(active)[0]
        hh = h[idx]
        _, m, sec = quadratic_exp_moments(c, hh, y_max)
        gval = hh + ks2 * m - a[idx]
        cv = 1.0 + ks2 * np.maximum(sec - m * m, 0.0)
        curv[idx] = cv
        lo[idx] = np.where(gval < 0, hh, lo[idx])
        hi[idx] = np.where(gval < 0, hi[idx], hh)
        step = hh - gval / cv
        inside = (step >= lo[idx]) & (step <= hi[idx])
        new = np.where(inside, step, 0.5 * (lo[idx] + hi[idx]))
        h[idx] = new
        scale = 1e-10 * (1.0 + np.abs(new))
        active[idx] = (np.abs(new - hh) > scale) & (hi[idx] - lo[idx] > scale)
        if not active.any():
            break
    return (h - a) / s1, curv


_MODE_OFFSETS = np.array([0.25, 0.5, 1.0, 1.75, 2.75, 4.0, 5.75, 8.0])
_UNIT_OFFSETS = np.array([0.5, 1.0, 2.0, 3.5, 5.5, 7.5])
_WALL_OFFSETS = 3.0 ** np.arange(11)
_HALF_WINDOW = 9.5


def _adaptive_eta_nodes(a, s1, k, c, y_max, panel_nodes):
    """Per-row eta nodes and log-weights (including the Gaussian density).

    When the curvature is perturbative the nodes are placed for the flat
    measure, so that nearby curvatures share one rule and finite differences
    in ``c`` carry no placement jitter.
    """
    if abs(c) * y_max * y_max < FLAT_CURVATURE:
        c = 0.0
    mode, curv = _tilt_mode(a, s1, k, c, y_max)
    width = 1.0 / np.sqrt(curv)
    lo = mode - _HALF_WINDOW
    hi = mode + _HALF_WINDOW
    wall = -a / s1
    delta0 = 0.25 / (s1 * y_max)
    pts = [
        lo[:, None], hi[:, None], mode[:, None],
        mode[:, None] + width[:, None] * _MODE_OFFSETS, mode[:, None] - width[:, None] * _MODE_OFFSETS,
        mode[:, None] + _UNIT_OFFSETS, mode[:, None] - _UNIT_OFFSETS,
        wall[:, None], wall[:, None] + delta0 * _WALL_OFFSETS, wall[:, None] - delta0 * _WALL_OFFSETS,
    ]
    brk = np.concatenate(pts, axis=1)
    brk = np.sort(np.clip(brk, lo[:, None], hi[:, None]), axis=1)
    x, w = _gauss_legendre(panel_nodes)
    left, right = brk[:, :-1], brk[:, 1:]
    half = 0.5 * (right - left)
    eta = (left + half)[:, :, None] + half[:, :, None] * x
    wt = half[:, :, None] * w
    eta = eta.reshape(len(a), -1)
    wt = wt.reshape(len(a), -1)
    with np.errstate(divide="ignore"):
        logw = np.log(wt) - 0.5 * eta * eta - _LOG_SQRT_2PI
    return eta, logw


def _y_tables(a, s1, k, c, y_max, rule_eta, panel_nodes):
    """log Psi and tilted moments <<y>>, <<y²>>, <<y>²> for each base field ``a``."""
    a = np.asarray(a, dtype=float)
    if s1 <= 0.0:
        lz, m, sec = quadratic_exp_moments(c, a, y_max)
        return k * lz, m, sec, m * m, np.ones_like(a)
    if rule_eta is None:
        eta, logw = _adaptive_eta_nodes(a, s1, k, c, y_max, panel_nodes)
    else:
        eta = np.broadcast_to(rule_eta.nodes, (len(a), rule_eta.order))
        with np.errstate(divide="ignore"):
            logw = np.broadcast_to(np.log(rule_eta.weights), eta.shape)
    lz, m, sec = quadratic_exp_moments(c, a[:, None] + s1 * eta, y_max)
    logt = k * lz + logw
    log_psi = logsumexp(logt, axis=1)
    p = np.exp(logt - log_psi[:, None])
    t1 = np.sum(p * m, axis=1)
    t2 = np.sum(p * sec, axis=1)
    t11 = np.sum(p * m * m, axis=1)
    return log_psi, t1, t2, t11, p.max(axis=1)


def onesite_y_stats(conj: ConjugateParams, m_y: float, k: float, rule_z: QuadratureRule,
                    rule_eta: Optional[QuadratureRule] = None, y_max: float = 50.0,
                    panel_nodes: int = 10) -> YStats:
    """Gaussian averages of the maximizer's tilted one-site moments.

    Returns the mean constraint ``∫Dz<<y>>``, ``Q_y = ∫Dz<<y²>>``,
    ``q_1 = ∫Dz<<y>²>``, ``q_0 = ∫Dz<<y>>²`` and ``∫Dz log ∫Dη Z_y^k``.
    ``rule_eta=None`` selects the adaptive eta quadrature.
    """
    if not k < 0:
        raise ValueError("k must be negative")
    a = m_y + math.sqrt(max(conj.chihat_0, 0.0)) * rule_z.nodes
    s1 = math.sqrt(max(conj.chihat_1, 0.0))
    log_psi, t1, t2, t11, pmax = _y_tables(a, s1, k, conj.Qhat_y, y_max, rule_eta, panel_nodes)
    top = float(pmax.max())
    if rule_eta is not None and top > 1.0 - 1e-6:
        logger.warning("eta tilt concentrated on a single node (weight %.6f); raise eta order", top)
    w = rule_z.weights
    return YStats(float(w @ t1), float(w @ t2), float(w @ t11), float(w @ (t1 * t1)),
                  float(w @ log_psi), top)


# ---------------------------------------------------------------------------
# Multipliers and the fixed-point map
# ---------------------------------------------------------------------------

_MULTIPLIER_LIMIT = 1e8


def _solve_multiplier(stats_fn, slope_fn, label: str, start: float, tol: float):
    """Solve the mean constraint for one multiplier; returns (m, stats at m).

    The mean increases with the multiplier.  Newton steps use its exact slope
    (a Gibbs variance, tilted for the maximizer).  Until the root is
    bracketed a step may move at most ``cap``, which doubles each time it
    binds; once bracketed, a step that leaves the bracket or follows a step
    that failed to halve the residual is replaced by bisection.
    """
    lo, hi = -math.inf, math.inf
    m = start
    st = stats_fn(m)
    f = st.mean - 1.0
    cap = max(1.0, 0.5 * abs(m))
    slow = False
    for _ in range(400):
        if abs(f) <= tol:
            return m, st
        if f < 0:
            lo = m
        else:
            hi = m
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(m)):
            return m, st
        slope = slope_fn(st)
        cand = m - f / slope if slope > 0 and math.isfinite(slope) else math.nan
        if math.isfinite(lo) and math.isfinite(hi):
            if slow or not lo < cand < hi:
                cand = 0.5 * (lo + hi)
        elif not math.isfinite(cand) or abs(cand - m) > cap:
            cand = m + math.copysign(cap, -f)
            cap *= 2.0
        if abs(cand) > _MULTIPLIER_LIMIT:
            raise MultiplierBracketError(
                f"{label}: mean constraint not bracketed within ±{_MULTIPLIER_LIMIT:g} "
                f"(mean-1 = {f:.3e} at {m:.6e})"
            )
        st_new = stats_fn(cand)
        f_new = st_new.mean - 1.0
        slow = abs(f_new) > 0.5 * abs(f)
        m, st, f = cand, st_new, f_new
    raise MultiplierBracketError(f"{label}: no convergence (mean-1 = {f:.3e} at {m:.6e})")


def _multipliers(conj, params, cfg, rule_z, rule_eta, start_x, start_y):
    """Multipliers satisfying both mean constraints and the one-site stats there."""
    k = params.k

    def stats_x(m):
        return onesite_x_stats(conj, m, rule_z, cfg.x_max)

    def stats_y(m):
        return onesite_y_stats(conj, m, k, rule_z, rule_eta, cfg.y_max, cfg.eta_panel_nodes)

    def slope_x(st):
        return st.Q_x_new - st.q_x_new

    def slope_y(st):
        return (st.Q_y_new - st.q_1_new) + k * (st.q_1_new - st.q_0_new)

    m_x, xs = _solve_multiplier(stats_x, slope_x, "m_x", start_x, cfg.multiplier_tol)
    m_y, ys = _solve_multiplier(stats_y, slope_y, "m_y", start_y, cfg.multiplier_tol)
    return m_x, m_y, xs, ys


def moment_map(theta: OrderParams, params: ModelParams, cfg: SolverConfig = SolverConfig(),
               *, rule_z: Optional[QuadratureRule] = None,
               rule_eta: Optional[QuadratureRule] = None) -> OrderParams:
    """One sweep of the self-consistency map.

    Computes the conjugates from ``theta``, solves both mean constraints for
    the multipliers (starting from the multipliers stored in ``theta``), and
    returns the new overlaps with the new multipliers.
    """
    rule_z = rule_z or cfg.rule_z()
    if rule_eta is None:
        rule_eta = cfg.rule_eta()
    conj = conjugates_from_overlaps(theta, params)
    start_x = theta.m_x if theta.m_x != 0.0 else -1.0
    start_y = theta.m_y if theta.m_y != 0.0 else -1.0
    m_x, m_y, xs, ys = _multipliers(conj, params, cfg, rule_z, rule_eta, start_x, start_y)
    return OrderParams(xs.Q_x_new, xs.q_x_new, ys.Q_y_new, ys.q_1_new, ys.q_0_new, m_x, m_y)


# ---------------------------------------------------------------------------
# Saddle functional and observables
# ---------------------------------------------------------------------------

def saddle_functional(theta: OrderParams, conj: ConjugateParams, params: ModelParams,
                      cfg: SolverConfig = SolverConfig(), *,
                      rule_z: Optional[QuadratureRule] = None,
                      rule_eta: Optional[QuadratureRule] = None) -> float:
    """The saddle functional g at an arbitrary point of its twelve arguments."""
    rule_z = rule_z or cfg.rule_z()
    if rule_eta is None:
        rule_eta = cfg.rule_eta()
    k = params.k
    s = params.sigma * params.beta_max ** 2
    rg = math.sqrt(params.gamma)
    t = theta
    poly = 0.5 * s * (k * t.Q_x * t.Q_y + k * (k - 1.0) * t.Q_x * t.q_1 - k * k * t.q_x * t.q_0)
    x_block = 0.5 * rg * (conj.Qhat_x * t.Q_x - conj.chihat_x * (t.Q_x - t.q_x))
    y_block = 0.5 / rg * (
        k * conj.Qhat_y * t.Q_y
        - k * (conj.chihat_1 + conj.chihat_0) * (t.Q_y + (k - 1.0) * t.q_1)
        + k * k * conj.chihat_0 * t.q_0
    )
    mult = -rg * t.m_x - k / rg * t.m_y
    xs = onesite_x_stats(conj, t.m_x, rule_z, cfg.x_max)
    ys = onesite_y_stats(conj, t.m_y, k, rule_z, rule_eta, cfg.y_max, cfg.eta_panel_nodes)
    return poly + x_block + y_block + mult + rg * xs.log_term + ys.log_term / rg


def eval_saddle_functional(theta: OrderParams, params: ModelParams,
                           cfg: SolverConfig = SolverConfig(), **rules) -> float:
    """g with the conjugates recomputed from the overlaps."""
    return saddle_functional(theta, conjugates_from_overlaps(theta, params), params, cfg, **rules)


def saddle_value_eliminated(theta: OrderParams, params: ModelParams,
                            cfg: SolverConfig = SolverConfig(), **rules) -> float:
    """g after eliminating the conjugate blocks analytically.

    With the conjugates at their stationary values the two coupling blocks
    add up to minus twice the overlap polynomial, so g reduces to
    ``-P - sqrt(gamma) m_x - k m_y / sqrt(gamma) + one-site log terms``.
    """
    rule_z = rules.get("rule_z") or cfg.rule_z()
    rule_eta = rules.get("rule_eta")
    if rule_eta is None:
        rule_eta = cfg.rule_eta()
    k = params.k
    s = params.sigma * params.beta_max ** 2
    rg = math.sqrt(params.gamma)
    t = theta
    conj = conjugates_from_overlaps(theta, params)
    poly = 0.5 * s * (k * t.Q_x * t.Q_y + k * (k - 1.0) * t.Q_x * t.q_1 - k * k * t.q_x * t.q_0)
    xs = onesite_x_stats(conj, t.m_x, rule_z, cfg.x_max)
    ys = onesite_y_stats(conj, t.m_y, k, rule_z, rule_eta, cfg.y_max, cfg.eta_panel_nodes)
    return -poly - rg * t.m_x - k / rg * t.m_y + rg * xs.log_term + ys.log_term / rg


def payoff_density(theta: OrderParams, params: ModelParams) -> float:
    """Typical payoff per unit L: sigma beta_max (Q_x Q_y + (k-1) Q_x q_1 - k q_x q_0)."""
    k = params.k
    t = theta
    return params.sigma * params.beta_max * (
        t.Q_x * t.Q_y + (k - 1.0) * t.Q_x * t.q_1 - k * t.q_x * t.q_0
    )


def moment_residuals(theta: OrderParams, params: ModelParams,
                     cfg: SolverConfig = SolverConfig(), **rules) -> np.ndarray:
    """All seven self-consistency residuals evaluated independently at ``theta``.

    Order: x-mean - 1, y-mean - 1, then new-minus-old for Q_x, q_x, Q_y, q_1, q_0.
    """
    rule_z = rules.get("rule_z") or cfg.rule_z()
    rule_eta = rules.get("rule_eta")
    if rule_eta is None:
        rule_eta = cfg.rule_eta()
    conj = conjugates_from_overlaps(theta, params)
    xs = onesite_x_stats(conj, theta.m_x, rule_z, cfg.x_max)
    ys = onesite_y_stats(conj, theta.m_y, params.k, rule_z, rule_eta, cfg.y_max,
                         cfg.eta_panel_nodes)
    return np.array([
        xs.mean - 1.0,
        ys.mean - 1.0,
        xs.Q_x_new - theta.Q_x,
        xs.q_x_new - theta.q_x,
        ys.Q_y_new - theta.Q_y,
        ys.q_1_new - theta.q_1,
        ys.q_0_new - theta.q_0,
    ])


def entropy_baseline(params: ModelParams) -> float:
    """Free-energy density of the payoff-free model with Lebesgue priors."""
    rg = math.sqrt(params.gamma)
    return -rg / params.beta_min + 1.0 / (params.beta_max * rg)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

def _finish(theta, params, cfg, rule_z, rule_eta, residual, iterations, converged):
    conj = conjugates_from_overlaps(theta, params)
    g = saddle_functional(theta, conj, params, cfg, rule_z=rule_z, rule_eta=rule_eta)
    return FiniteTSolution(
        theta=theta, conj=conj, nu=-g / params.beta_min, e=payoff_density(theta, params),
        g_value=g, residual=residual, iterations=iterations, converged=converged, params=params,
    )


def _entropy_only(params, cfg, rule_z, rule_eta):
    conj = ConjugateParams(0.0, 0.0, 0.0, 0.0, 0.0)
    m_x, m_y, xs, ys = _multipliers(conj, params, cfg, rule_z, rule_eta, -1.0, -1.0)
    theta = OrderParams(xs.Q_x_new, xs.q_x_new, ys.Q_y_new, ys.q_1_new, ys.q_0_new, m_x, m_y)
    return _finish(theta, params, cfg, rule_z, rule_eta, 0.0, 0, True)


def solve_finite_t(params: ModelParams, init: Optional[OrderParams] = None,
                   cfg: SolverConfig = SolverConfig(), *, damping: Optional[float] = None,
                   tol: Optional[float] = None, max_iter: Optional[int] = None) -> FiniteTSolution:
    """Damped fixed-point iteration of :func:`moment_map`.

    The update is ``theta <- (1-d) theta + d G(theta)``.  With
    ``cfg.accelerate`` the damped iterates are combined by Anderson mixing
    over the last ``cfg.anderson_depth`` steps; an increase of the residual
    falls back to the plain damped step.  Oscillation of the plain iteration
    (residual growing over three consecutive steps) halves the damping, at
    most four times.  On non-convergence the best iterate is returned with
    ``converged=False``.
    """
    d = cfg.damping if damping is None else damping
    tol = cfg.tol if tol is None else tol
    max_iter = cfg.max_iter if max_iter is None else max_iter
    if not 0.0 < d <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    rule_z = cfg.rule_z()
    rule_eta = cfg.rule_eta()
    if params.sigma == 0.0:
        return _entropy_only(params, cfg, rule_z, rule_eta)

    theta = init or OrderParams.baseline()
    if not theta.is_ordered():
        raise ValueError("initial overlaps must satisfy Q_x >= q_x >= 0 and Q_y >= q_1 >= q_0 >= 0")
    x = theta.overlaps()
    ms = (theta.m_x, theta.m_y)
    best = (math.inf, theta)
    hist_x, hist_f = [], []
    halvings = 0
    growth = 0
    prev_res = math.inf
    for it in range(1, max_iter + 1):
        cur = OrderParams(*x, *ms)
        new = moment_map(cur, params, cfg, rule_z=rule_z, rule_eta=rule_eta)
        ms = (new.m_x, new.m_y)
        fx = new.overlaps() - x
        res = float(np.max(np.abs(fx)))
        if res < best[0]:
            best = (res, OrderParams(*x, *ms))
        if res < tol:
            # report the image point so that the moment equations hold to the residual
            theta_star = OrderParams(*new.overlaps(), *ms)
            return _finish(theta_star, params, cfg, rule_z, rule_eta, res, it, True)
        if res > prev_res:
            growth += 1
            if growth >= 3 and halvings < 4:
                d *= 0.5
                halvings += 1
                growth = 0
                hist_x.clear()
                hist_f.clear()
                logger.info("oscillation detected; damping reduced to %.4g", d)
        else:
            growth = 0
        prev_res = res
        step = x + d * fx
        if cfg.accelerate:
            hist_x.append(x.copy())
            hist_f.append(fx.copy())
            if len(hist_x) > cfg.anderson_depth + 1:
                hist_x.pop(0)
                hist_f.pop(0)
            if len(hist_x) >= 2:
                dx = np.diff(np.array(hist_x), axis=0).T
                df = np.diff(np.array(hist_f), axis=0).T
                coef, *_ = np.linalg.lstsq(df, fx, rcond=None)
                cand = x + d * fx - (dx + d * df) @ coef
                if np.all(np.isfinite(cand)) and OrderParams(*cand).is_ordered(0.0):
                    step = cand
                else:
                    hist_x.clear()
                    hist_f.clear()
        x = step
    res, theta_best = best
    logger.warning("finite-T solver did not converge in %d iterations (residual %.3e)", max_iter, res)
    return _finish(theta_best, params, cfg, rule_z, rule_eta, res, max_iter, False)


def sweep_finite_t(param_list: Sequence[ModelParams], cfg: SolverConfig = SolverConfig()):
    """Solve along a parameter path, warm-starting in both directions.

    Each point is solved twice, once continuing from the previous point and
    once from the next point.  When the two fixed points differ, the one with
    the larger saddle functional g is kept and both are logged.
    """
    n = len(param_list)
    forward: list = [None] * n
    backward: list = [None] * n
    init = None
    for i, p in enumerate(param_list):
        forward[i] = solve_finite_t(p, init, cfg)
        init = forward[i].theta
    init = None
    for i in range(n - 1, -1, -1):
        backward[i] = solve_finite_t(param_list[i], init, cfg)
        init = backward[i].theta
    out = []
    for f, b in zip(forward, backward):
        if np.max(np.abs(f.theta.overlaps() - b.theta.overlaps())) > 1e-6:
            logger.info("two fixed points: g=%.12g (forward) and g=%.12g (backward); nu=%.12g, %.12g",
                        f.g_value, b.g_value, f.nu, b.nu)
        candidates = [s for s in (f, b) if s.converged] or [f, b]
        out.append(max(candidates, key=lambda s: s.g_value))
    return out


# ---------------------------------------------------------------------------
# Small-sigma expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SigmaExpansion:
    v_ent: float
    v1: float
    v2: float
    e1: float
    e2: float
    P0: float = field(default=0.0)
    P1: float = field(default=0.0)


def sigma_expansion(params: ModelParams) -> SigmaExpansion:
    """Coefficients of nu = v_ent + v1 sigma + v2 sigma² and e = e1 sigma + e2 sigma²."""
    k = params.k
    b = params.beta_max
    rg = math.sqrt(params.gamma)
    v_ent = entropy_baseline(params)
    v1 = b - 0.5 * params.beta_min
    p0 = k * (k + 2.0)
    p1 = b * b * (k * k * (k * k + 4.0 * k + 2.0) / rg + rg * (4.0 * k + 3.0 * k * k))
    v2 = -b * b * p1 / (4.0 * params.beta_min)
    return SigmaExpansion(v_ent, v1, v2, 2.0 * v1, 4.0 * v2, p0, p1)


def overlap_slopes(params: ModelParams) -> np.ndarray:
    """d/dsigma of (Q_x, q_x, Q_y, q_1, q_0) at sigma = 0."""
    k = params.k
    b2 = params.beta_max ** 2
    rg = math.sqrt(params.gamma)
    return np.array([
        2.0 * b2 * k * (k + 1.0) / rg,
        b2 * k * k / rg,
        4.0 * rg * b2,
        2.0 * rg * b2,
        rg * b2,
    ])
