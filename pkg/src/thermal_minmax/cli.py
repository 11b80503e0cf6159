"""Command-line driver: parameter sweeps, theory-versus-simulation tables, figure data.

Every command writes three artifacts into the output directory:

* ``<command>_results.<csv|json>``: one row per parameter point or instance;
* ``<command>_summary.txt``: a fixed-width table for reading;
* ``<command>_manifest.json``: every resolved setting, the seeds and the
  package version. Passing the manifest back with ``--config`` reruns the
  same computation.

Settings are resolved as command-line flags over config file over defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

from . import __version__
from .ais_estimator import AIS_CSV_FIELDS, AisConfig, ais_free_energy, estimate_to_row
from .finite_temperature import ModelParams, SolverConfig, solve_finite_t, sigma_expansion
from .game_ensemble import CSV_FIELDS, DEFAULT_SEEDS, ensemble_run, sample_payoff
from .zero_temperature import gamma_expansion, solve_zero_t, zero_t_observables

logger = logging.getLogger(__name__)

OUTPUT_ENV = "THERMAL_MINMAX_OUTPUT"
COMMANDS = ("zero-t", "finite-t", "lp-ensemble", "ais", "expand-sigma", "expand-gamma", "compare")
FIGURE_FIELDS = ("x", "series", "theory", "empirical", "stderr")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3


class ConfigError(ValueError):
    """Invalid flag, config-file entry or parameter grid."""


# ---------------------------------------------------------------------------
# value parsers
# ---------------------------------------------------------------------------


def parse_grid(text: Any) -> list[float]:
    """Comma list ``"0.5,1,2"`` or inclusive range ``"start:stop:step"``.

    The step magnitude is used in the direction from start to stop, and
    points are rounded to 12 decimals, so ``-0.75:-1.25:0.05`` yields
    exactly the eleven values one would type.
    """
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if not text:
        raise ConfigError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step == 0:
            raise ConfigError(f"range {text!r} has a zero step")
        step = math.copysign(abs(step), stop - start)
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc


def parse_seeds(text: Any) -> list[int]:
    """A count ``"10"`` (seeds 0..9), a list ``"0,3,7"`` or a range ``"a:b"``."""
    if isinstance(text, int):
        return list(range(text))
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).strip()
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        if "," in text:
            return [int(v) for v in text.split(",") if v.strip()]
        return list(range(int(text)))
    except ValueError as exc:
        raise ConfigError(f"cannot parse seeds {text!r}") from exc


def _optional_float(text: Any) -> Optional[float]:
    if text is None or str(text).lower() in ("none", "auto", ""):
        return None
    return float(text)


def _choice(*allowed: str) -> Callable[[Any], str]:
    def conv(text: Any) -> str:
        value = str(text)
        if value not in allowed:
            raise ConfigError(f"{value!r} is not one of {', '.join(allowed)}")
        return value
    return conv


@dataclass(frozen=True)
class _Option:
    converter: Callable[[Any], Any]
    default: Any
    help: str


_SOLVER = SolverConfig()

OPTIONS: dict[str, _Option] = {
    "gammas": _Option(parse_grid, [1.0], "aspect ratios N/M"),
    "sigma": _Option(parse_grid, [1.0], "payoff variance scales"),
    "beta_max": _Option(parse_grid, [0.5], "maximizer inverse temperatures"),
    "k": _Option(parse_grid, [-1.0], "temperature ratios -beta_min/beta_max"),
    "eps": _Option(parse_grid, [1e-3], "offsets gamma - 1 for expand-gamma"),
    "m": _Option(int, 200, "maximizer strategy count M"),
    "seeds": _Option(parse_seeds, list(DEFAULT_SEEDS), "instance seeds: count, list or a:b"),
    "mode": _Option(_choice("zero-t", "finite-t"), "zero-t", "comparison to run"),
    "tol": _Option(float, _SOLVER.tol, "fixed-point tolerance"),
    "max_iter": _Option(int, _SOLVER.max_iter, "fixed-point iteration cap"),
    "damping": _Option(float, _SOLVER.damping, "fixed-point damping"),
    "z_order": _Option(int, _SOLVER.z_order, "Gauss-Hermite order for the Gaussian field"),
    "eta_panel_nodes": _Option(int, _SOLVER.eta_panel_nodes, "nodes per adaptive eta panel"),
    "x_max": _Option(_optional_float, None, "minimizer cutoff (default: module value, N when comparing)"),
    "y_max": _Option(_optional_float, None, "maximizer cutoff (default: module value, M when comparing)"),
    "zero_t_tol": _Option(float, 1e-13, "zero-temperature residual target"),
    "support_tol": _Option(float, 1e-8, "support threshold on rescaled strategies"),
    "chains": _Option(int, 500, "AIS chains"),
    "temps": _Option(int, 300, "AIS positive temperatures"),
    "steps": _Option(int, 5, "kernel steps per temperature"),
    "step_half_width": _Option(_optional_float, None, "proposal half-width (default: pilot-tuned)"),
    "output": _Option(str, None, f"output directory (default: ${OUTPUT_ENV} or ./results)"),
    "format": _Option(_choice("csv", "json"), "csv", "results file format"),
    "threads": _Option(int, 1, "worker processes"),
}

# per-command overrides of the shared defaults
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "zero-t": {"gammas": [0.5, 0.75, 1.0, 1.5, 2.0]},
    "finite-t": {},
    "lp-ensemble": {"gammas": [0.5, 0.75, 1.0, 1.5, 2.0]},
    "ais": {"m": 80, "seeds": [0]},
    "expand-sigma": {"sigma": [1e-4, 1e-3, 1e-2]},
    "expand-gamma": {"eps": [1e-3, 1e-2, 5e-2]},
    "compare": {},
}

COMMAND_OPTIONS: dict[str, tuple[str, ...]] = {
    "zero-t": ("gammas", "sigma", "zero_t_tol"),
    "finite-t": ("gammas", "sigma", "beta_max", "k", "tol", "max_iter", "damping", "z_order",
                 "eta_panel_nodes", "x_max", "y_max"),
    "lp-ensemble": ("gammas", "sigma", "m", "seeds", "support_tol"),
    "ais": ("gammas", "sigma", "beta_max", "k", "m", "seeds", "chains", "temps", "steps",
            "step_half_width"),
    "expand-sigma": ("gammas", "sigma", "beta_max", "k", "tol", "max_iter", "damping", "z_order",
                     "eta_panel_nodes", "x_max", "y_max"),
    "expand-gamma": ("sigma", "eps", "zero_t_tol"),
    "compare": ("mode", "gammas", "sigma", "beta_max", "k", "m", "seeds", "support_tol", "tol",
                "max_iter", "damping", "z_order", "eta_panel_nodes", "x_max", "y_max", "chains",
                "temps", "steps", "step_half_width", "zero_t_tol"),
}
_COMMON = ("output", "format", "threads")


@dataclass
class RunConfig:
    """Fully resolved settings of one invocation."""

    command: str
    settings: dict
    config_file: Optional[str] = None

    @property
    def output_dir(self) -> Path:
        out = self.settings.get("output") or os.environ.get(OUTPUT_ENV) or "results"
        return Path(out)

    def manifest(self) -> dict:
        return {
            "command": self.command,
            "settings": self.settings,
            "version": f"thermal_minmax {__version__}",
        }


@dataclass(frozen=True)
class ComparisonRow:
    """Theory against the seed-averaged simulation at one parameter point.

    ``z = (empirical - theory) / stderr``; a zero standard error gives
    ``z = 0`` when the two agree to 1e-12 and infinity otherwise.
    """

    point: dict
    x: float
    series: str
    theory: float
    empirical: float
    stderr: float
    n: int

    @property
    def z(self) -> float:
        diff = self.empirical - self.theory
        if not math.isfinite(self.stderr):
            return math.nan
        if self.stderr == 0:
            return 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)
        return diff / self.stderr

    def as_dict(self) -> dict:
        out = dict(self.point)
        out.update(series=self.series, x=self.x, theory=self.theory, empirical=self.empirical,
                   stderr=self.stderr, z=self.z, n=self.n)
        return out


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config_file(path: str) -> dict:
    """Read ``key = value`` lines (``#`` comments) or a JSON manifest."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if p.suffix == ".json":
        data = json.loads(text)
        return dict(data.get("settings", data))
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermal-minmax",
        description="Replica predictions and finite-size simulations of random zero-sum games.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="key = value file or a previous manifest")
        for name in COMMAND_OPTIONS[cmd] + _COMMON:
            opt = OPTIONS[name]
            default = COMMAND_DEFAULTS[cmd].get(name, opt.default)
            flag = "--" + name.replace("_", "-")
            sp.add_argument(flag, dest=name, help=f"{opt.help} (default: {default})")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(command: str, flags: dict, file_settings: Optional[dict] = None) -> RunConfig:
    """Merge defaults, config file and flags (later wins) and convert values."""
    allowed = COMMAND_OPTIONS[command] + _COMMON
    settings = {}
    for name in allowed:
        settings[name] = COMMAND_DEFAULTS[command].get(name, OPTIONS[name].default)
    for source, values in (("config file", file_settings or {}), ("flag", flags)):
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in allowed:
                raise ConfigError(f"unknown {source} setting {key!r} for {command}")
            try:
                settings[key] = OPTIONS[key].converter(raw) if raw is not None else None
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value {raw!r} for {key}: {exc}") from exc
    _validate(command, settings)
    return RunConfig(command, settings)


def _validate(command: str, s: dict) -> None:
    for key in ("gammas", "sigma", "beta_max", "k", "eps", "seeds"):
        if key in s and not s[key]:
            raise ConfigError(f"grid {key} is empty")
    if "m" in s and s["m"] < 1:
        raise ConfigError("m must be positive")
    for g in s.get("gammas", []):
        if not g > 0:
            raise ConfigError(f"gamma={g} must be positive")
        if "m" in s and int(round(g * s["m"])) < 1:
            raise ConfigError(f"gamma={g} with M={s['m']} gives N = 0")
    if any(k >= 0 for k in s.get("k", [])):
        raise ConfigError("k must be negative")
    if any(b <= 0 for b in s.get("beta_max", [])):
        raise ConfigError("beta_max must be positive")
    if s.get("threads", 1) < 1:
        raise ConfigError("threads must be positive")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(rows: list[dict], path: Path, fmt: str, fields: Optional[Sequence[str]] = None) -> None:
    if fields is None:
        fields = list(dict.fromkeys(k for r in rows for k in r))
    try:
        if fmt == "json":
            path.write_text(json.dumps(rows, indent=1, default=float) + "\n")
            return
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for r in rows:
            writer.writerow([_fmt(r.get(f, "")) for f in fields])
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def format_table(rows: list[dict], columns: Sequence[str]) -> str:
    """Fixed-width text table of the given columns."""
    cells = [[c for c in columns]]
    for r in rows:
        line = []
        for c in columns:
            v = r.get(c, "")
            line.append(f"{v:.6g}" if isinstance(v, float) else str(v))
        cells.append(line)
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells) + "\n"


def emit_figure_data(rows: Iterable[ComparisonRow], path) -> Path:
    """Write tidy long-format CSV ``x, series, theory, empirical, stderr``.

    The file is byte-identical for identical inputs. Rows are written in the
    order given; floats use their shortest round-trip representation.

    Raises
    ------
    ValueError
        If ``rows`` is empty; no file is created.
    OSError
        On write failure, with the path in the message.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no comparison rows to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIGURE_FIELDS)
    for r in rows:
        writer.writerow([_fmt(float(r.x)), r.series, _fmt(float(r.theory)),
                         _fmt(float(r.empirical)), _fmt(float(r.stderr))])
    path = Path(path)
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write figure data to {path}: {exc}") from exc
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _pool_map(fn, tasks: list, threads: int) -> list:
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _solver_config(s: dict, n: Optional[int] = None, m: Optional[int] = None) -> SolverConfig:
    x_max = s.get("x_max") or (float(n) if n else _SOLVER.x_max)
    y_max = s.get("y_max") or (float(m) if m else _SOLVER.y_max)
    return SolverConfig(z_order=s["z_order"], eta_panel_nodes=s["eta_panel_nodes"], x_max=x_max,
                        y_max=y_max, damping=s["damping"], tol=s["tol"], max_iter=s["max_iter"])


def _cmd_zero_t(s: dict) -> tuple[list[dict], int]:
    rows = []
    failed = 0
    for sigma in s["sigma"]:
        for gamma in s["gammas"]:
            row = {"gamma": gamma, "sigma": sigma}
            try:
                sad = solve_zero_t(gamma, sigma, tol=s["zero_t_tol"])
            except (ValueError, RuntimeError) as exc:
                logger.error("zero-t failed at gamma=%g sigma=%g: %s", gamma, sigma, exc)
                row["status"] = f"failed: {exc}"
                failed += 1
                rows.append(row)
                continue
            obs = zero_t_observables(sad)
            row.update(alpha_x=sad.alpha_x, alpha_y=sad.alpha_y, value=obs.value_density,
                       rho_x=obs.rho_x, rho_y=obs.rho_y, q_x=obs.q_x, q_y=obs.q_y, status="ok")
            rows.append(row)
    return rows, failed


def _finite_task(task):
    gamma, sigma, beta_max, k, cfg = task
    params = ModelParams.from_k(sigma, gamma, beta_max, k)
    row = {"gamma": gamma, "sigma": sigma, "beta_max": beta_max, "k": k}
    try:
        sol = solve_finite_t(params, cfg=cfg)
    except (ValueError, RuntimeError) as exc:
        row.update(status=f"failed: {exc}")
        return row
    t = sol.theta
    row.update(nu=sol.nu, e=sol.e, g=sol.g_value, Q_x=t.Q_x, q_x=t.q_x, Q_y=t.Q_y, q_1=t.q_1,
               q_0=t.q_0, residual=sol.residual, iterations=sol.iterations,
               status="ok" if sol.converged else "not_converged")
    return row


def _cmd_finite_t(s: dict) -> tuple[list[dict], int]:
    cfg = _solver_config(s)
    tasks = [(g, sg, b, k, cfg) for g in s["gammas"] for sg in s["sigma"] for b in s["beta_max"]
             for k in s["k"]]
    rows = _pool_map(_finite_task, tasks, s["threads"])
    return rows, sum(r["status"] != "ok" for r in rows)


def _cmd_lp(s: dict) -> tuple[list[dict], int]:
    failed = 0
    rows = []
    for sigma in s["sigma"]:
        res = ensemble_run(s["m"], s["gammas"], sigma, s["seeds"], s["support_tol"], s["threads"])
        rows.extend(res.rows)
        failed += sum(r["lp_status"] == "failed" for r in res.rows)
    return rows, failed


def _ais_task(task):
    n, m, gamma, sigma, beta_max, k, seed, ais = task
    params = ModelParams.from_k(sigma, gamma, beta_max, k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = ais_free_energy(sample_payoff(n, m, seed), params, AisConfig(seed=seed, **ais))
    row = estimate_to_row(est, params, seed)
    row["ess_fraction"] = est.ess / ais["n_chains"]
    row["in_domain_acceptance_rate"] = est.in_domain_acceptance_rate
    row["step_half_width"] = est.step_half_width
    return row


def _ais_settings(s: dict) -> dict:
    return {"n_chains": s["chains"], "n_temperatures": s["temps"],
            "mcmc_steps_per_temp": s["steps"], "step_half_width": s["step_half_width"]}


def _ais_tasks(s: dict) -> list:
    m = s["m"]
    ais = _ais_settings(s)
    return [(int(round(g * m)), m, g, sg, b, k, seed, ais) for g in s["gammas"] for sg in s["sigma"]
            for b in s["beta_max"] for k in s["k"] for seed in s["seeds"]]


def _cmd_ais(s: dict) -> tuple[list[dict], int]:
    return _pool_map(_ais_task, _ais_tasks(s), s["threads"]), 0


def _cmd_expand_sigma(s: dict) -> tuple[list[dict], int]:
    cfg = _solver_config(s)
    rows = []
    failed = 0
    for g in s["gammas"]:
        for b in s["beta_max"]:
            for k in s["k"]:
                for sigma in s["sigma"]:
                    params = ModelParams.from_k(sigma, g, b, k)
                    ex = sigma_expansion(params)
                    lin = ex.v_ent + ex.v1 * sigma
                    quad = lin + ex.v2 * sigma * sigma
                    row = {"gamma": g, "beta_max": b, "k": k, "sigma": sigma, "v_ent": ex.v_ent,
                           "v1": ex.v1, "v2": ex.v2, "nu_linear": lin, "nu_quadratic": quad}
                    try:
                        sol = solve_finite_t(params, cfg=cfg)
                    except (ValueError, RuntimeError) as exc:
                        row["status"] = f"failed: {exc}"
                        failed += 1
                    else:
                        row.update(nu=sol.nu, remainder_linear=sol.nu - lin,
                                   remainder_quadratic=sol.nu - quad,
                                   status="ok" if sol.converged else "not_converged")
                        failed += not sol.converged
                    rows.append(row)
    return rows, failed


def _cmd_expand_gamma(s: dict) -> tuple[list[dict], int]:
    rows = []
    failed = 0
    for sigma in s["sigma"]:
        for eps in s["eps"]:
            row = {"sigma": sigma, "eps": eps, "gamma": 1.0 + eps}
            try:
                ax_p, ay_p, v_p = gamma_expansion(eps, sigma)
                _, _, v_p2 = gamma_expansion(eps, sigma, value_order=2)
                sad = solve_zero_t(1.0 + eps, sigma, tol=s["zero_t_tol"])
            except (ValueError, RuntimeError) as exc:
                row["status"] = f"failed: {exc}"
                failed += 1
                rows.append(row)
                continue
            v = zero_t_observables(sad).value_density
            row.update(alpha_x=sad.alpha_x, alpha_x_pred=ax_p, alpha_y=sad.alpha_y, alpha_y_pred=ay_p,
                       value=v, value_pred=v_p, value_pred_order2=v_p2,
                       err_alpha_x=sad.alpha_x - ax_p, err_alpha_y=sad.alpha_y - ay_p,
                       err_value=v - v_p, err_value_order2=v - v_p2, status="ok")
            rows.append(row)
    return rows, failed


def compare_zero_t(s: dict) -> tuple[list[ComparisonRow], int]:
    """LP ensemble against the zero-temperature predictions, per gamma and observable."""
    out = []
    failed = 0
    for sigma in s["sigma"]:
        res = ensemble_run(s["m"], s["gammas"], sigma, s["seeds"], s["support_tol"], s["threads"])
        failed += sum(r["lp_status"] == "failed" for r in res.rows)
        for summ in res.summary:
            gamma = summ["gamma"]
            obs = zero_t_observables(solve_zero_t(gamma, sigma, tol=s["zero_t_tol"]))
            theory = {"value": obs.value_density, "rho_x": obs.rho_x, "rho_y": obs.rho_y,
                      "q_x": obs.q_x, "q_y": obs.q_y, "support_ratio": gamma}
            point = {"gamma": gamma, "sigma": sigma, "N": summ["N"], "M": summ["M"]}
            for key, th in theory.items():
                col = "norm_value" if key == "value" else key
                out.append(ComparisonRow(point, gamma, key, th, summ[col], summ[col + "_se"], summ["n_ok"]))
    return out, failed


def compare_finite_t(s: dict) -> tuple[list[ComparisonRow], int]:
    """Seed-averaged AIS estimates of F/L against the replica free energy.

    The replica solve uses the physical cutoffs ``x_max = N`` and
    ``y_max = M`` unless cutoffs are given. With a single seed the AIS
    standard error is used as the error bar.
    """
    tasks = _ais_tasks(s)
    est_rows = _pool_map(_ais_task, tasks, s["threads"])
    theory_tasks = []
    keys = []
    for (n, m, g, sg, b, k, _, _) in tasks:
        key = (g, sg, b, k)
        if key not in keys:
            keys.append(key)
            theory_tasks.append((g, sg, b, k, _solver_config(s, n, m)))
    theory_rows = _pool_map(_finite_task, theory_tasks, s["threads"])
    out = []
    failed = 0
    for key, th in zip(keys, theory_rows):
        g, sg, b, k = key
        vals = [r for r, t in zip(est_rows, tasks) if (t[2], t[3], t[4], t[5]) == key]
        v = [r["norm_v_hat"] for r in vals]
        n_seeds = len(v)
        mean = sum(v) / n_seeds
        if n_seeds > 1:
            se = math.sqrt(sum((x - mean) ** 2 for x in v) / (n_seeds - 1) / n_seeds)
        else:
            se = vals[0]["stderr"] / math.sqrt(vals[0]["N"] * vals[0]["M"])
        if th["status"] != "ok":
            failed += 1
        point = {"gamma": g, "sigma": sg, "beta_max": b, "k": k, "N": vals[0]["N"], "M": vals[0]["M"]}
        series = f"nu|gamma={g:g}|beta_max={b:g}|sigma={sg:g}"
        out.append(ComparisonRow(point, k, series, th.get("nu", math.nan), mean, se, n_seeds))
    return out, failed


def _cmd_compare(s: dict) -> tuple[list[ComparisonRow], int]:
    if s["mode"] == "zero-t":
        return compare_zero_t(s)
    return compare_finite_t(s)


_SUMMARY_COLUMNS = {
    "zero-t": ("gamma", "sigma", "alpha_x", "alpha_y", "value", "rho_x", "rho_y", "q_x", "q_y", "status"),
    "finite-t": ("gamma", "sigma", "beta_max", "k", "nu", "e", "Q_x", "q_x", "Q_y", "q_1", "q_0",
                 "iterations", "status"),
    "lp-ensemble": CSV_FIELDS,
    "ais": AIS_CSV_FIELDS,
    "expand-sigma": ("gamma", "beta_max", "k", "sigma", "nu", "nu_linear", "remainder_linear",
                     "remainder_quadratic", "status"),
    "expand-gamma": ("sigma", "eps", "alpha_x", "alpha_x_pred", "alpha_y", "alpha_y_pred", "value",
                     "value_pred", "err_value", "err_value_order2", "status"),
    "compare": ("series", "x", "theory", "empirical", "stderr", "z", "n"),
}

_HANDLERS = {
    "zero-t": _cmd_zero_t,
    "finite-t": _cmd_finite_t,
    "lp-ensemble": _cmd_lp,
    "ais": _cmd_ais,
    "expand-sigma": _cmd_expand_sigma,
    "expand-gamma": _cmd_expand_gamma,
    "compare": _cmd_compare,
}


def run(config: RunConfig) -> int:
    """Execute one command and write its artifacts; returns the exit status."""
    s = config.settings
    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    result, failed = _HANDLERS[config.command](s)
    if config.command == "compare":
        comparisons = result
        rows = [c.as_dict() for c in comparisons]
        if comparisons:
            emit_figure_data(comparisons, out_dir / "compare_figure_data.csv")
    else:
        rows = result
    stem = config.command
    fields = None
    if config.command == "lp-ensemble":
        fields = list(CSV_FIELDS)
    elif config.command == "ais":
        fields = list(AIS_CSV_FIELDS) + ["ess_fraction", "in_domain_acceptance_rate", "step_half_width"]
    _write_rows(rows, out_dir / f"{stem}_results.{s['format']}", s["format"], fields)
    table = format_table(rows, _SUMMARY_COLUMNS[config.command])
    (out_dir / f"{stem}_summary.txt").write_text(table)
    manifest = config.manifest()
    manifest["n_rows"] = len(rows)
    manifest["n_failed"] = failed
    (out_dir / f"{stem}_manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    sys.stdout.write(table)
    if failed:
        total = len(rows)
        sys.stderr.write(f"{failed} of {total} computations failed; see {out_dir}\n")
        return EXIT_FAILURE if failed >= total else EXIT_PARTIAL
    return EXIT_OK


_NEGATIVE_VALUE = re.compile(r"^-\.?\d")


def _attach_negative_values(argv: Sequence[str]) -> list[str]:
    """Join ``--k -0.75:-1.25:0.05`` into ``--k=-0.75:-1.25:0.05``.

    argparse only accepts plain negative numbers as option values.
    """
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE_VALUE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else EXIT_USAGE
    command = args.pop("command")
    verbose = args.pop("verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config_path = args.pop("config", None)
    try:
        file_settings = load_config_file(config_path) if config_path else None
        config = resolve_config(command, args, file_settings)
    except ConfigError as exc:
        sys.stderr.write(f"thermal-minmax {command}: {exc}\n")
        return EXIT_USAGE
    config.config_file = config_path
    try:
        return run(config)
    except OSError as exc:
        sys.stderr.write(f"thermal-minmax {command}: {exc}\n")
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
