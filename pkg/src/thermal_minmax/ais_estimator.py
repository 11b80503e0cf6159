"""Annealed importance sampling for the finite-size two-temperature free energy.

The outer partition function of a payoff matrix ``C`` is

    Z(C) = int_{X_N} exp(-beta_min * phi(x)) dx,    phi(x) = log Z_y(x) / beta_max,

with Lebesgue measure on the rescaled simplices. Chains start from the
uniform law on ``X_N`` and are annealed through ``pi_t ∝ exp(-beta_t phi)``
with a pairwise-exchange Metropolis kernel; the simplex volume is added back
analytically.

The inner integral ``Z_y`` is evaluated exactly by an inverse-Laplace
contour integral through the real saddle point, which stays accurate for
any ``M`` where the explicit divided-difference formula cancels
catastrophically beyond a dozen strategies.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

try:  # optional JIT for the contour kernel; the numpy path is the reference
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

from .finite_temperature import ModelParams
from .game_ensemble import GameInstance

__all__ = [
    "AIS_CSV_FIELDS",
    "AisConfig",
    "AisEstimate",
    "DegenerateWeightsWarning",
    "NearCoincidentFieldsWarning",
    "SaddleBracketError",
    "SimplexState",
    "ais_free_energy",
    "estimate_to_row",
    "geometric_schedule",
    "log_simplex_volume",
    "log_Zy_divided_difference",
    "log_Zy_exact",
    "log_Zy_batch",
    "mh_pair_exchange_step",
    "phi_of_x",
    "sample_uniform_simplex",
    "tune_step_half_width",
]

AIS_CSV_FIELDS = (
    "seed", "N", "M", "gamma", "sigma", "beta_max", "k", "n_chains", "n_temps",
    "F_hat", "norm_v_hat", "stderr", "ess", "acceptance_rate", "wall_time_s",
)

# Trapezoid steps (in units of the saddle width) and initial reach of the contour rule;
# few-strategy integrands decay slowly and need the finer step.
_CONTOUR_STEP = 0.4
_CONTOUR_STEP_SMALL_M = 0.3
_SMALL_M = 8
_CONTOUR_REACH = 14.0
_TAIL_DECADES = 40.0
_PRODUCT_CHUNK = 16
_REFRESH_EVERY = 1000


class SaddleBracketError(RuntimeError):
    """The real saddle of the inverse-Laplace integrand could not be located."""


class NearCoincidentFieldsWarning(UserWarning):
    """Fields were split apart to make the divided-difference formula defined."""


class DegenerateWeightsWarning(UserWarning):
    """The AIS effective sample size collapsed; a finer schedule is advisable."""


def log_simplex_volume(n: int) -> float:
    """Log of the volume ``n^(n-1)/(n-1)!`` of ``{x >= 0, sum x = n}``."""
    if n < 1:
        raise ValueError("n must be positive")
    return float((n - 1) * math.log(n) - gammaln(n))


# ---------------------------------------------------------------------------
# inner log-partition
# ---------------------------------------------------------------------------


def _saddle(b: np.ndarray, tol: float = 4e-15, max_iter: int = 200) -> np.ndarray:
    """Root ``mu > max(b)`` of ``sum_j 1/(mu - b_j) = M`` for each row of ``b``.

    Newton from the left end ``max(b) + 1/M`` of the bracket
    ``[max(b) + 1/M, max(b) + 1]``; the left side of a convex decreasing
    function gives monotone convergence, so iterates never leave the bracket.
    """
    m = b.shape[-1]
    top = b.max(axis=-1, keepdims=True)
    # work with offsets from the top field so that large fields lose no digits
    off = b - top
    d0 = np.full(top.shape, 1.0 / m)
    for _ in range(max_iter):
        inv = 1.0 / (d0 - off)
        g = inv.sum(axis=-1, keepdims=True) - m
        gp = (inv * inv).sum(axis=-1, keepdims=True)
        step = g / gp
        d0 = np.minimum(d0 + step, 1.0)
        if np.all(np.abs(step) <= tol * d0):
            break
    else:
        bad = ~(np.abs(step) <= tol * d0)
        rows = np.flatnonzero(bad.ravel())[:3]
        flat = b.reshape(-1, m)
        summary = ", ".join(
            f"row {r}: min {flat[r].min():.6g}, max {flat[r].max():.6g}" for r in rows
        )
        raise SaddleBracketError(f"saddle iteration did not converge ({summary})")
    return top + d0, d0 - off


def _contour_sum(
    d: np.ndarray, m: int, s: np.ndarray, c: np.ndarray, u: np.ndarray
) -> np.ndarray:
    """Integrand ``Im[exp(f(mu) - f(mu*)) mu'(u)]`` at nodes ``u`` for every row."""
    z = (1j * s) * u + (c * s * s) * (u * u)  # (rows, K)
    ratio = 1.0 + z[:, :, None] / d[:, None, :]  # (rows, K, M)
    pad = (-m) % _PRODUCT_CHUNK
    if pad:
        ratio = np.concatenate(
            [ratio, np.ones(ratio.shape[:2] + (pad,), dtype=complex)], axis=2
        )
    chunks = ratio.reshape(ratio.shape[0], ratio.shape[1], -1, _PRODUCT_CHUNK)
    log_prod = np.log(chunks.prod(axis=3)).sum(axis=2)
    dmu = 1j * s + (2.0 * c * s * s) * u
    return np.exp(m * z - log_prod) * dmu


def _contour_rows_py(d, s, c, h, cut, max_nodes):
    """Contour integral per row with early stopping, written for the JIT.

    Accumulates the trapezoid sum node by node and retires a row once its
    integrand magnitude is ``cut`` (natural-log units) below the value
    ``s`` at the saddle. Complex products are kept in real arithmetic with
    the row index innermost so that the loops vectorize. Returns the
    integral divided by pi, or -1 for rows still live after ``max_nodes``.
    """
    rows, m = d.shape
    inv_t = np.ascontiguousarray((1.0 / d).T)
    total = 0.5 * h * s.copy()
    log_s = np.log(s)
    alive = np.ones(rows, dtype=np.bool_)
    n_alive = rows
    pr = np.empty(rows)
    pi = np.empty(rows)
    log_scale = np.empty(rows)
    zr = np.empty(rows)
    zi = np.empty(rows)
    node = 1
    while n_alive > 0 and node < max_nodes:
        u = node * h
        for r in range(rows):
            zr[r] = c[r] * s[r] * s[r] * u * u
            zi[r] = s[r] * u
            pr[r] = 1.0
            pi[r] = 0.0
            log_scale[r] = 0.0
        # prod_j (1 + z / d_j), renormalized every 16 factors
        for j in range(m):
            inv_j = inv_t[j]
            for r in range(rows):
                ar = 1.0 + zr[r] * inv_j[r]
                ai = zi[r] * inv_j[r]
                t = pr[r] * ar - pi[r] * ai
                pi[r] = pr[r] * ai + pi[r] * ar
                pr[r] = t
            if (j & 15) == 15:
                for r in range(rows):
                    a = math.hypot(pr[r], pi[r])
                    log_scale[r] += math.log(a)
                    pr[r] /= a
                    pi[r] /= a
        for r in range(rows):
            if not alive[r]:
                continue
            a = math.hypot(pr[r], pi[r])
            qr = pr[r] / a
            qi = pi[r] / a
            mag = m * zr[r] - log_scale[r] - math.log(a)
            phase = m * zi[r]
            er = math.exp(mag) * math.cos(phase)
            ei = math.exp(mag) * math.sin(phase)
            # exp(m z) / prod, with prod = |prod| * q and |q| = 1
            vr = er * qr + ei * qi
            vi = ei * qr - er * qi
            dr = 2.0 * c[r] * s[r] * s[r] * u
            di = s[r]
            total[r] += h * (vr * di + vi * dr)
            if mag + 0.5 * math.log(dr * dr + di * di) - log_s[r] < -cut:
                alive[r] = False
                n_alive -= 1
        node += 1
    out = total / math.pi
    for r in range(rows):
        if alive[r]:
            out[r] = -1.0
    return out


_contour_rows = njit(cache=True)(_contour_rows_py) if njit is not None else None


def log_Zy_batch(fields: np.ndarray, use_jit: bool = True) -> np.ndarray:
    """Log of ``int_{y >= 0, sum y = M} exp(b . y) dy`` for every row of ``fields``.

    Parameters
    ----------
    fields : array_like, shape (..., M)
        Linear exponents ``b``.
    use_jit : bool
        Use the compiled kernel when numba is available; the pure numpy
        path evaluates the same rule.

    Returns
    -------
    ndarray, shape (...)

    Notes
    -----
    The integral is the inverse Laplace transform of ``prod_j 1/(mu - b_j)``
    evaluated at ``M``. The Bromwich line is deformed into a parabola that
    leaves the real saddle ``mu*`` vertically and bends left with the local
    steepest-descent curvature,

        mu(u) = mu* + i s u + c s^2 u^2,

    where ``s`` is the Gaussian width at the saddle. In the ``u`` variable
    every pole stays an O(1) distance from the real axis, so a fixed-step
    trapezoid rule converges geometrically. Nodes are added until the
    integrand has fallen 40 decades below its value at the saddle.
    """
    b = np.asarray(fields, dtype=float)
    if b.ndim == 0 or b.shape[-1] < 1:
        raise ValueError("fields must have at least one component")
    if not np.all(np.isfinite(b)):
        raise ValueError("fields must be finite")
    lead = b.shape[:-1]
    m = b.shape[-1]
    flat = b.reshape(-1, m)
    if m == 1:
        return flat[:, 0].reshape(lead).copy()

    mu, d = _saddle(flat)
    inv = 1.0 / d
    v2 = (inv * inv).sum(axis=1, keepdims=True)
    v3 = (inv * inv * inv).sum(axis=1, keepdims=True)
    s = 1.0 / np.sqrt(v2)
    c = -v3 / (3.0 * v2)
    log_peak = m * mu[:, 0] - np.log(d).sum(axis=1)

    h = _CONTOUR_STEP_SMALL_M if m < _SMALL_M else _CONTOUR_STEP
    cut = math.log(10.0) * _TAIL_DECADES
    if _contour_rows is not None and use_jit:
        total = _contour_rows(np.ascontiguousarray(d), s[:, 0], c[:, 0], h, cut, int(1e4 / h))
        if np.any(total < 0):
            raise SaddleBracketError("contour integrand failed to decay")
        if np.any(total == 0):
            raise SaddleBracketError("contour quadrature lost positivity")
        return (log_peak + np.log(total)).reshape(lead)
    n_nodes = int(math.ceil(_CONTOUR_REACH / h)) + 1
    u = np.arange(n_nodes) * h
    vals = _contour_sum(d, m, s, c, u)
    total = h * (vals.imag.sum(axis=1) - 0.5 * vals.imag[:, 0])
    # the integrand equals i*s at u = 0, which is its peak along the contour
    live = np.log(np.abs(vals[:, -1]) + 1e-320) - np.log(s[:, 0]) > -cut
    start = n_nodes
    while np.any(live):
        idx = np.flatnonzero(live)
        u_more = (start + np.arange(n_nodes)) * h
        more = _contour_sum(d[idx], m, s[idx], c[idx], u_more)
        total[idx] += h * more.imag.sum(axis=1)
        tail = np.log(np.abs(more[:, -1]) + 1e-320) - np.log(s[idx, 0]) > -cut
        live = np.zeros_like(live)
        live[idx[tail]] = True
        start += n_nodes
        if start * h > 1e4:
            raise SaddleBracketError("contour integrand failed to decay")
    total /= math.pi
    if np.any(total <= 0):
        raise SaddleBracketError("contour quadrature lost positivity")
    return (log_peak + np.log(total)).reshape(lead)


def log_Zy_exact(fields: Sequence[float], m: Optional[int] = None) -> float:
    """Log of ``int_{y >= 0, sum y = M} exp(b . y) dy`` for one field vector.

    Parameters
    ----------
    fields : sequence of float
        Linear exponents ``b_j``, typically ``beta_max * kappa * (C^T x)_j``.
    m : int, optional
        Number of strategies; must equal ``len(fields)`` when given.

    Examples
    --------
    >>> round(log_Zy_exact([0.0, 0.0]), 12)  # volume of {y1 + y2 = 2}
    0.693147180560
    """
    b = np.asarray(fields, dtype=float).ravel()
    if m is not None and m != b.size:
        raise ValueError("m must equal the number of fields")
    return float(log_Zy_batch(b[None, :])[0])


def log_Zy_divided_difference(
    fields: Sequence[float], dps: Optional[int] = None
) -> float:
    """Extended-precision reference value of ``log Z_y`` for small ``M``.

    Evaluates ``sum_j exp(M b_j) / prod_{k != j} (b_j - b_k)`` with mpmath.
    Fields closer than ``1e-12`` times their scale are split symmetrically
    by ``1e-10`` and a :class:`NearCoincidentFieldsWarning` is issued.
    """
    import mpmath

    b = np.asarray(fields, dtype=float).ravel()
    m = b.size
    if m == 1:
        return float(b[0])
    order = np.argsort(b, kind="stable")
    bs = b[order].copy()
    scale = max(1.0, float(np.max(np.abs(bs))))
    if np.min(np.diff(bs)) < 1e-12 * scale:
        warnings.warn(
            "near-coincident fields perturbed by 1e-10", NearCoincidentFieldsWarning,
            stacklevel=2,
        )
        # spread each run of close values symmetrically about its centre
        i = 0
        while i < m:
            j = i
            while j + 1 < m and bs[j + 1] - bs[j] < 1e-12 * scale:
                j += 1
            if j > i:
                centre = bs[i:j + 1].mean()
                bs[i:j + 1] = centre + 1e-10 * (np.arange(j - i + 1) - 0.5 * (j - i))
            i = j + 1
    gaps = np.diff(bs) * m
    digits = int(40 + m * max(0.0, -math.log10(float(gaps.min()))) + 2 * m)
    with mpmath.workdps(digits if dps is None else dps):
        nodes = [mpmath.mpf(float(x)) for x in bs]
        total = mpmath.fsum(
            mpmath.exp(m * bj) / mpmath.fprod(bj - bk for k, bk in enumerate(nodes) if k != j)
            for j, bj in enumerate(nodes)
        )
        return float(mpmath.log(total))


# ---------------------------------------------------------------------------
# chain state and kernel
# ---------------------------------------------------------------------------


@dataclass
class SimplexState:
    """Point of ``X_N`` with its cached inner fields ``kappa * C^T x`` and ``phi``."""

    x: np.ndarray
    cached_fields: np.ndarray
    cached_phi: float = float("nan")

    @classmethod
    def from_x(cls, x: np.ndarray, game: GameInstance, params: ModelParams) -> "SimplexState":
        x = np.asarray(x, dtype=float).copy()
        kappa = params.kappa(game.n_rows, game.n_cols)
        state = cls(x, kappa * (x @ game.payoff))
        phi_of_x(state, game, params)
        return state


def phi_of_x(state: SimplexState, game: GameInstance, params: ModelParams) -> float:
    """``log Z_y(x) / beta_max`` from the cached fields; stores the result."""
    phi = log_Zy_exact(params.beta_max * state.cached_fields) / params.beta_max
    state.cached_phi = phi
    return phi


def sample_uniform_simplex(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from ``{x >= 0, sum x = n}`` via normalized exponentials."""
    if n < 1:
        raise ValueError("n must be positive")
    e = rng.standard_exponential(n)
    x = e * (n / e.sum())
    # put the rounding residue on the largest coordinate so the sum is n
    x[np.argmax(x)] += n - x.sum()
    return x


def _kernel_step(
    x: np.ndarray,
    a: np.ndarray,
    phi: np.ndarray,
    payoff: np.ndarray,
    kappa: float,
    beta_max: float,
    beta_t: float,
    h: float,
    draws: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One pairwise-exchange Metropolis step for a batch of chains, in place.

    ``draws`` holds four uniforms per chain: the two coordinates, the
    exchange amount and the acceptance test. Returns (accepted, in_domain).
    """
    n = x.shape[1]
    rows = np.arange(x.shape[0])
    i = np.minimum((draws[:, 0] * n).astype(np.intp), n - 1)
    j = (i + 1 + np.minimum((draws[:, 1] * (n - 1)).astype(np.intp), n - 2)) % n
    delta = h * (2.0 * draws[:, 2] - 1.0)
    xi = x[rows, i] + delta
    xj = x[rows, j] - delta
    inside = (xi >= 0.0) & (xj >= 0.0)
    accepted = np.zeros(x.shape[0], dtype=bool)
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return accepted, inside
    a_new = a[idx] + (kappa * delta[idx])[:, None] * (payoff[i[idx]] - payoff[j[idx]])
    if beta_t == 0.0:
        ok = np.ones(idx.size, dtype=bool)
        phi_new = None
    else:
        phi_new = log_Zy_batch(beta_max * a_new) / beta_max
        log_ratio = -beta_t * (phi_new - phi[idx])
        ok = np.log(np.maximum(draws[idx, 3], 1e-300)) < log_ratio
    take = idx[ok]
    x[take, i[take]] = xi[take]
    x[take, j[take]] = xj[take]
    a[take] = a_new[ok]
    if phi_new is None:
        phi[take] = log_Zy_batch(beta_max * a_new[ok]) / beta_max if take.size else phi[take]
    else:
        phi[take] = phi_new[ok]
    accepted[take] = True
    return accepted, inside


def mh_pair_exchange_step(
    state: SimplexState,
    game: GameInstance,
    params: ModelParams,
    beta_t: float,
    h: float,
    rng: np.random.Generator,
) -> tuple[SimplexState, bool]:
    """Single Metropolis step targeting ``exp(-beta_t phi)`` on ``X_N``.

    Picks ``i != j`` uniformly, moves ``delta ~ U(-h, h)`` from ``x_j`` to
    ``x_i`` and rejects moves that leave the simplex. The fields are updated
    with the two changed rows of ``C``. Returns a new state and the decision.
    """
    if beta_t < 0:
        raise ValueError("beta_t must be nonnegative")
    if not h > 0:
        raise ValueError("h must be positive")
    if state.x.size < 2:
        return state, False
    x = state.x[None, :].copy()
    a = state.cached_fields[None, :].copy()
    phi = np.array([state.cached_phi])
    if not np.isfinite(phi[0]):
        phi[0] = log_Zy_exact(params.beta_max * a[0]) / params.beta_max
    kappa = params.kappa(game.n_rows, game.n_cols)
    acc, _ = _kernel_step(
        x, a, phi, game.payoff, kappa, params.beta_max, beta_t, h, rng.random((1, 4))
    )
    return SimplexState(x[0], a[0], float(phi[0])), bool(acc[0])


# ---------------------------------------------------------------------------
# annealing driver
# ---------------------------------------------------------------------------


def geometric_schedule(beta_min: float, n_temperatures: int, first_ratio: float = 1e-4) -> np.ndarray:
    """Grid ``0 = beta_0 < beta_1 < ... < beta_T = beta_min``.

    The positive rungs are geometric from ``first_ratio * beta_min`` to
    ``beta_min``; the endpoints are exact.
    """
    if n_temperatures < 1:
        raise ValueError("n_temperatures must be positive")
    if not beta_min > 0:
        raise ValueError("beta_min must be positive")
    if n_temperatures == 1:
        return np.array([0.0, beta_min])
    rungs = np.geomspace(first_ratio * beta_min, beta_min, n_temperatures)
    rungs[-1] = beta_min
    return np.concatenate([[0.0], rungs])


@dataclass(frozen=True)
class AisConfig:
    """Annealing budget and kernel settings.

    Attributes
    ----------
    n_chains : int
        Independent annealing runs ``S``.
    n_temperatures : int
        Positive rungs ``T`` of the schedule.
    mcmc_steps_per_temp : int
        Kernel steps after each weight increment.
    step_half_width : float or None
        Proposal half-width ``h``; ``None`` tunes it by a pilot run at the
        coldest rung towards 30 to 50% acceptance.
    schedule : sequence of float or None
        Explicit grid starting at 0 and ending at ``beta_min``; ``None``
        uses :func:`geometric_schedule`.
    seed : int
        Root of the per-chain random streams.
    """

    n_chains: int = 500
    n_temperatures: int = 300
    mcmc_steps_per_temp: int = 5
    step_half_width: Optional[float] = None
    schedule: Optional[tuple[float, ...]] = None
    seed: int = 0
    chain_block: int = 500

    def __post_init__(self):
        if min(self.n_chains, self.n_temperatures, self.mcmc_steps_per_temp, self.chain_block) < 1:
            raise ValueError("all counts must be positive")
        if self.step_half_width is not None and not self.step_half_width > 0:
            raise ValueError("step_half_width must be positive")
        if self.schedule is not None:
            grid = np.asarray(self.schedule, dtype=float)
            if grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
                raise ValueError("schedule must start at 0 and increase strictly")

    def grid(self, beta_min: float) -> np.ndarray:
        if self.schedule is None:
            return geometric_schedule(beta_min, self.n_temperatures)
        grid = np.asarray(self.schedule, dtype=float)
        if grid[-1] != beta_min:
            raise ValueError("schedule must end exactly at beta_min")
        return grid


@dataclass(frozen=True)
class AisEstimate:
    """Result of one annealing run on a fixed payoff matrix.

    ``log_Z_hat`` includes the analytic ``log Vol(X_N)``; ``stderr`` is the
    delta-method standard error of ``F_hat``. ``acceptance_rate`` counts
    out-of-simplex proposals as rejections, ``in_domain_acceptance_rate``
    excludes them.
    """

    log_Z_hat: float
    F_hat: float
    norm_v_hat: float
    stderr: float
    ess: float
    acceptance_rate: float
    in_domain_acceptance_rate: float
    log_weights: np.ndarray
    schedule: np.ndarray
    step_half_width: float
    n_rows: int
    n_cols: int
    seed: int
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)


def _chain_rngs(seed: int, stream: int, chains: range) -> list[np.random.Generator]:
    """Independent counter-based generator for each chain index."""
    return [
        np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream, c))))
        for c in chains
    ]


def _start_block(rngs, game, kappa, beta_max):
    x = np.stack([sample_uniform_simplex(game.n_rows, r) for r in rngs])
    a = kappa * (x @ game.payoff)
    phi = log_Zy_batch(beta_max * a) / beta_max
    return x, a, phi


def tune_step_half_width(
    game: GameInstance,
    params: ModelParams,
    seed: int = 0,
    n_chains: int = 32,
    rounds: int = 12,
    steps: int = 20,
    target: tuple[float, float] = (0.3, 0.5),
) -> tuple[float, float]:
    """Pilot run at ``beta_min`` adjusting ``h`` towards the target acceptance.

    Returns ``(h, acceptance)`` where ``acceptance`` counts out-of-simplex
    proposals as rejections. Chains continue across rounds so the later
    rounds see states closer to the coldest bridging law.
    """
    n = game.n_rows
    if n < 2:
        return 1.0, 0.0
    kappa = params.kappa(game.n_rows, game.n_cols)
    rngs = _chain_rngs(seed, 1, range(n_chains))
    x, a, phi = _start_block(rngs, game, kappa, params.beta_max)
    h = 0.5
    lo, hi = target
    mid = 0.5 * (lo + hi)
    rate = 0.0
    for _ in range(rounds):
        acc = 0
        for _ in range(steps):
            draws = np.stack([r.random(4) for r in rngs])
            ok, _ = _kernel_step(
                x, a, phi, game.payoff, kappa, params.beta_max, params.beta_min, h, draws
            )
            acc += int(ok.sum())
        rate = acc / (steps * n_chains)
        if lo <= rate <= hi:
            break
        # larger moves lower the acceptance; clamp the multiplicative change
        h *= float(np.clip(math.exp(2.5 * (rate - mid)), 0.25, 4.0))
        h = min(h, float(n))
    return h, rate


def ais_free_energy(
    game: GameInstance, params: ModelParams, cfg: AisConfig = AisConfig()
) -> AisEstimate:
    """Annealed importance sampling estimate of ``F = -log Z(C) / beta_min``.

    Each chain starts from the uniform law on ``X_N`` and, for
    ``t = 1..T``, first adds ``-(beta_t - beta_{t-1}) phi(x_{t-1})`` to its
    log-weight and then takes ``mcmc_steps_per_temp`` kernel steps targeting
    ``pi_t``. The estimate is

        log Z_hat = log Vol(X_N) + log mean_s W_s.

    Parameters
    ----------
    game : GameInstance
        Payoff matrix ``C`` of shape ``(N, M)``.
    params : ModelParams
        Temperatures and payoff scale; ``gamma`` is taken from the matrix.
    cfg : AisConfig

    Returns
    -------
    AisEstimate

    Warns
    -----
    DegenerateWeightsWarning
        When the effective sample size falls below 1% of the chains.
    """
    start = time.perf_counter()
    c = np.asarray(game.payoff, dtype=float)
    n, m = c.shape
    kappa = params.kappa(n, m)
    grid = cfg.grid(params.beta_min)
    if cfg.step_half_width is None:
        h, pilot_rate = tune_step_half_width(game, params, seed=cfg.seed)
    else:
        h, pilot_rate = float(cfg.step_half_width), float("nan")
    steps = cfg.mcmc_steps_per_temp

    log_w = np.empty(cfg.n_chains)
    accepted = 0
    in_domain = 0
    proposals = 0
    for first in range(0, cfg.n_chains, cfg.chain_block):
        block = range(first, min(first + cfg.chain_block, cfg.n_chains))
        rngs = _chain_rngs(cfg.seed, 0, block)
        x, a, phi = _start_block(rngs, game, kappa, params.beta_max)
        lw = np.zeros(len(block))
        done = 0
        for t in range(1, grid.size):
            lw -= (grid[t] - grid[t - 1]) * phi
            if n < 2:
                continue
            draws = np.stack([r.random((steps, 4)) for r in rngs], axis=1)
            for s in range(steps):
                ok, inside = _kernel_step(
                    x, a, phi, c, kappa, params.beta_max, grid[t], h, draws[s]
                )
                accepted += int(ok.sum())
                in_domain += int(inside.sum())
                proposals += len(block)
                done += 1
                if done % _REFRESH_EVERY == 0:
                    a = kappa * (x @ c)
                    phi = log_Zy_batch(params.beta_max * a) / params.beta_max
        log_w[block.start:block.stop] = lw

    log_mean_w = float(logsumexp(log_w) - math.log(cfg.n_chains))
    w = np.exp(log_w - log_w.max())
    ess = float(w.sum() ** 2 / np.sum(w * w))
    if cfg.n_chains > 1:
        rel_sd = float(np.std(w, ddof=1) / np.mean(w))
    else:
        rel_sd = float("nan")
    se_log_z = rel_sd / math.sqrt(cfg.n_chains)
    if ess < 0.01 * cfg.n_chains:
        warnings.warn(
            f"effective sample size {ess:.1f} of {cfg.n_chains} chains; use a finer schedule",
            DegenerateWeightsWarning,
            stacklevel=2,
        )
    log_z = log_simplex_volume(n) + log_mean_w
    f_hat = -log_z / params.beta_min
    return AisEstimate(
        log_Z_hat=log_z,
        F_hat=f_hat,
        norm_v_hat=f_hat / math.sqrt(n * m),
        stderr=se_log_z / params.beta_min,
        ess=ess,
        acceptance_rate=accepted / proposals if proposals else 0.0,
        in_domain_acceptance_rate=accepted / in_domain if in_domain else 0.0,
        log_weights=log_w,
        schedule=grid,
        step_half_width=h,
        n_rows=n,
        n_cols=m,
        seed=cfg.seed,
        wall_time_s=time.perf_counter() - start,
        extra={"pilot_acceptance": pilot_rate},
    )


def estimate_to_row(est: AisEstimate, params: ModelParams, game_seed: int) -> dict:
    """Flatten an estimate into the AIS CSV schema."""
    return {
        "seed": game_seed,
        "N": est.n_rows,
        "M": est.n_cols,
        "gamma": est.n_rows / est.n_cols,
        "sigma": params.sigma,
        "beta_max": params.beta_max,
        "k": params.k,
        "n_chains": est.log_weights.size,
        "n_temps": est.schedule.size - 1,
        "F_hat": est.F_hat,
        "norm_v_hat": est.norm_v_hat,
        "stderr": est.stderr,
        "ess": est.ess,
        "acceptance_rate": est.acceptance_rate,
        "wall_time_s": est.wall_time_s,
    }
