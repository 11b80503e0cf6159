"""
Random Gaussian matrix games solved exactly by linear programming.

The minimizer chooses a row mixture ``p`` and the maximizer a column mixture
``q`` for a payoff matrix ``C`` with i.i.d. standard normal entries.  The
min-max value ``t(C) = min_p max_q pᵀ C q`` is obtained from the primal LP

    minimize u   subject to   Cᵀ p <= u 1,   sum(p) = 1,   p >= 0,

whose inequality duals are the maximizer's equilibrium mixture.  The LP
itself is handed to HiGHS; the optimal vertex is then polished on its support
by solving the square indifference systems, and every returned solution is
checked against the two-sided equilibrium inequalities.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "GameInstance",
    "NashSolution",
    "EquilibriumStats",
    "EnsembleResult",
    "GameTooLargeError",
    "LPFailure",
    "DEFAULT_SEEDS",
    "CSV_FIELDS",
    "sample_payoff",
    "solve_matrix_game_lp",
    "normalized_value",
    "empirical_stats",
    "ensemble_run",
    "summarize",
]

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = tuple(range(10))
CSV_FIELDS = ("seed", "N", "M", "gamma", "sigma", "value", "norm_value", "rho_x", "rho_y",
              "q_x", "q_y", "lp_status", "pivots")
MAX_DIM = 4000
_EQ_TOL = 1e-8
_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


class GameTooLargeError(ValueError):
    """A payoff dimension exceeds the configured cap."""


class LPFailure(RuntimeError):
    """The LP solver did not return a verified equilibrium."""


@dataclass(frozen=True)
class GameInstance:
    """Payoff matrix with the seed and shape that regenerate it."""

    payoff: np.ndarray
    n_rows: int
    n_cols: int
    seed: int


@dataclass(frozen=True)
class NashSolution:
    """Equilibrium of a finite matrix game.

    Attributes
    ----------
    value : float
        Min-max value ``t(C)``.
    p_star, q_star : ndarray
        Minimizer (row) and maximizer (column) mixtures.
    lp_status : str
        ``"optimal"``, or ``"degenerate_optimal"`` when some unplayed pure
        strategy is also a best response (zero reduced cost), so that other
        optimal vertices may exist.
    pivots : int
        Simplex iterations reported by the LP solver.
    duality_gap : float
        ``max_j (Cᵀp)_j - min_i (Cq)_i`` at the returned pair.
    polished : bool
        Whether the support re-solve replaced the raw LP vertex.
    """

    value: float
    p_star: np.ndarray
    q_star: np.ndarray
    lp_status: str
    pivots: int = 0
    duality_gap: float = 0.0
    polished: bool = False


@dataclass(frozen=True)
class EquilibriumStats:
    norm_value: float
    rho_x: float
    rho_y: float
    q_x: float
    q_y: float


def sample_payoff(n_rows: int, n_cols: int, seed: int) -> GameInstance:
    """Standard normal payoff matrix from a counter-based (Philox) stream keyed by ``seed``."""
    if n_rows < 1 or n_cols < 1:
        raise ValueError("matrix dimensions must be positive")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    c = rng.standard_normal((n_rows, n_cols))
    c.setflags(write=False)
    return GameInstance(c, int(n_rows), int(n_cols), int(seed))


def _as_matrix(game) -> np.ndarray:
    c = game.payoff if isinstance(game, GameInstance) else game
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.size == 0:
        raise ValueError("payoff must be a non-empty 2-D array")
    if not np.all(np.isfinite(c)):
        raise ValueError("payoff must be finite")
    return c


def _square_solve(a: np.ndarray) -> Optional[tuple[np.ndarray, float]]:
    """Solve aᵀ w = v 1, sum(w) = 1 for a square block ``a``; None if singular."""
    s = a.shape[0]
    lhs = np.zeros((s + 1, s + 1))
    lhs[:s, :s] = a.T
    lhs[:s, s] = -1.0
    lhs[s, :s] = 1.0
    rhs = np.zeros(s + 1)
    rhs[s] = 1.0
    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)) or np.linalg.cond(lhs) > 1e12:
        return None
    return sol[:s], float(sol[s])


def _polish(c, p, q):
    """Re-solve the indifference systems on the supports of (p, q)."""
    sp = np.flatnonzero(p > 1e-9)
    sq = np.flatnonzero(q > 1e-9)
    if len(sp) != len(sq):
        return None
    block = c[np.ix_(sp, sq)]
    rp = _square_solve(block)
    rq = _square_solve(block.T)
    if rp is None or rq is None:
        return None
    pp = np.zeros_like(p)
    qq = np.zeros_like(q)
    pp[sp] = rp[0]
    qq[sq] = rq[0]
    if pp.min() < 0 or qq.min() < 0:
        return None
    return pp, qq


def _gap(c, p, q):
    upper = float(np.max(c.T @ p))
    lower = float(np.min(c @ q))
    return upper, lower


def solve_matrix_game_lp(game, max_dim: int = MAX_DIM) -> NashSolution:
    """Exact equilibrium and value of a zero-sum matrix game.

    Parameters
    ----------
    game : GameInstance or array_like
        Payoff matrix ``C`` (rows: minimizer, columns: maximizer).
    max_dim : int
        Largest admissible dimension.

    Raises
    ------
    GameTooLargeError
        If either dimension exceeds ``max_dim``.
    LPFailure
        If the solver fails or the equilibrium inequalities are violated
        beyond 1e-8.
    """
    c = _as_matrix(game)
    n, m = c.shape
    if max(n, m) > max_dim:
        raise GameTooLargeError(f"payoff shape {c.shape} exceeds the cap {max_dim}")
    obj = np.zeros(n + 1)
    obj[-1] = 1.0
    a_ub = np.hstack([c.T, -np.ones((m, 1))])
    a_eq = np.append(np.ones(n), 0.0)[None, :]
    bounds = [(0.0, None)] * n + [(None, None)]
    res = linprog(obj, A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=[1.0], bounds=bounds,
                  method="highs-ds", options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise LPFailure(f"LP solver status {res.status}: {res.message}")
    p = np.clip(res.x[:n], 0.0, None)
    q = np.clip(-res.ineqlin.marginals, 0.0, None)
    if p.sum() <= 0 or q.sum() <= 0:
        raise LPFailure("LP returned an empty mixture")
    p /= p.sum()
    q /= q.sum()

    polished = False
    refined = _polish(c, p, q)
    if refined is not None:
        up, lo = _gap(c, *refined)
        if up - lo <= max(_gap(c, p, q)[0] - _gap(c, p, q)[1], 1e-12):
            p, q = refined
            polished = True
    upper, lower = _gap(c, p, q)
    gap = upper - lower
    if gap > _EQ_TOL or gap < -_EQ_TOL:
        raise LPFailure(f"equilibrium check failed: max(Cᵀp) - min(Cq) = {gap:.3e}")
    value = float(p @ c @ q)

    # zero reduced cost on a pure strategy outside the support signals degeneracy
    row_slack = c @ q - value
    col_slack = value - c.T @ p
    tie_rows = np.any((p <= 1e-12) & (row_slack < 1e-9))
    tie_cols = np.any((q <= 1e-12) & (col_slack < 1e-9))
    status = "degenerate_optimal" if (tie_rows or tie_cols) else "optimal"
    return NashSolution(value, p, q, status, int(res.nit), float(gap), polished)


def normalized_value(value: float, n_rows: int, n_cols: int, sigma: float = 1.0) -> float:
    """Finite-size estimate sqrt(sigma) (N M)^{1/4} t(C) of the value density."""
    return math.sqrt(sigma) * (n_rows * n_cols) ** 0.25 * value


def empirical_stats(sol: NashSolution, sigma: float = 1.0, support_tol: float = 1e-8) -> EquilibriumStats:
    """Support fractions and second moments of the rescaled strategies x = N p, y = M q."""
    n = len(sol.p_star)
    m = len(sol.q_star)
    x = n * np.asarray(sol.p_star)
    y = m * np.asarray(sol.q_star)
    return EquilibriumStats(
        norm_value=normalized_value(sol.value, n, m, sigma),
        rho_x=float(np.mean(x > support_tol)),
        rho_y=float(np.mean(y > support_tol)),
        q_x=float(x @ x / n),
        q_y=float(y @ y / m),
    )


@dataclass
class EnsembleResult:
    """Per-instance rows and per-gamma aggregates of an LP ensemble."""

    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)


def _solve_one(task):
    n, m, gamma, sigma, seed, support_tol = task
    row = {"seed": seed, "N": n, "M": m, "gamma": gamma, "sigma": sigma}
    try:
        sol = solve_matrix_game_lp(sample_payoff(n, m, seed))
    except (LPFailure, GameTooLargeError) as exc:
        logger.warning("instance N=%d M=%d seed=%d failed: %s", n, m, seed, exc)
        row.update(value=math.nan, norm_value=math.nan, rho_x=math.nan, rho_y=math.nan,
                   q_x=math.nan, q_y=math.nan, lp_status="failed", pivots=0)
        return row
    stats = empirical_stats(sol, sigma, support_tol)
    row.update(value=sol.value, **asdict(stats), lp_status=sol.lp_status, pivots=sol.pivots)
    return row


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    if len(v) == 0:
        return math.nan, math.nan
    if len(v) == 1:
        return float(v[0]), math.nan
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def summarize(rows: Iterable[dict]) -> list:
    """Mean and standard error per gamma; failed instances are counted and excluded.

    The support-ratio error bar uses the delta method with the sample
    covariance of (rho_x, rho_y) across instances.
    """
    rows = list(rows)
    out = []
    for gamma in sorted({r["gamma"] for r in rows}):
        grp = [r for r in rows if r["gamma"] == gamma]
        ok = [r for r in grp if r["lp_status"] != "failed"]
        entry = {"gamma": gamma, "N": grp[0]["N"], "M": grp[0]["M"], "n_ok": len(ok),
                 "n_failed": len(grp) - len(ok),
                 "n_degenerate": sum(r["lp_status"] == "degenerate_optimal" for r in ok)}
        for key in ("norm_value", "rho_x", "rho_y", "q_x", "q_y"):
            entry[key], entry[key + "_se"] = _mean_se([r[key] for r in ok])
        rx = np.array([r["rho_x"] for r in ok])
        ry = np.array([r["rho_y"] for r in ok])
        if len(ok) >= 2 and rx.mean() > 0:
            ratio = ry.mean() / rx.mean()
            cov = np.cov(np.vstack([rx, ry])) / len(ok)
            grad = np.array([-ratio / rx.mean(), 1.0 / rx.mean()])
            entry["support_ratio"] = float(ratio)
            entry["support_ratio_se"] = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
        else:
            entry["support_ratio"] = entry["support_ratio_se"] = math.nan
        out.append(entry)
    return out


def ensemble_run(n_cols: int, gamma_grid: Sequence[float], sigma: float = 1.0,
                 seeds: Sequence[int] = DEFAULT_SEEDS, support_tol: float = 1e-8,
                 workers: int = 1) -> EnsembleResult:
    """Solve one LP per (gamma, seed) with N = round(gamma M).

    Rows are returned in grid order (gamma, then sorted seed) regardless of
    ``workers``; each instance draws from its own seed-keyed stream.
    """
    tasks = []
    for gamma in gamma_grid:
        n = int(round(gamma * n_cols))
        if n < 1:
            raise ValueError(f"gamma={gamma} gives N < 1 for M={n_cols}")
        for seed in sorted(seeds):
            tasks.append((n, int(n_cols), float(gamma), float(sigma), int(seed), support_tol))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_solve_one, tasks))
    else:
        rows = [_solve_one(t) for t in tasks]
    return EnsembleResult(rows, summarize(rows))
