"""Rolling out-of-sample evaluation, simulation campaigns and output files."""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import affine_sim
from .aggregate import WeightInputs, aggregate, effective_b, optimal_weight
from .data import NormalizedReturns, PanelSeries, ingest_csv, normalize, resolve_factor_col, write_panel_csv
from .errors import DegenerateDesign, InsufficientData, VolAggError
from .metrics import (
    adaptive_prediction_error,
    entropy_loss,
    independence_diagnostic,
    prediction_error,
    quadratic_loss,
    sign_test,
    summarize,
)
from .statedomain import (
    EPANECHNIKOV,
    StateDomainConfig,
    default_candidates,
    gcv_bandwidth,
    get_kernel,
    kernel_density,
    local_linear_sigma,
    silverman_bandwidth,
)
from .symmat import tril_indices
from .timedomain import TimeDomainConfig, exp_smooth, tau

log = logging.getLogger(__name__)

ESTIMATORS = ("time", "state", "aggregated")
MODES = ("simulate", "evaluate", "corr-test")
SIM_WINDOW = 1050
REAL_WINDOW = 900


class ReplicationFailed(VolAggError):
    def __init__(self, rep: int, seed: int, cause: Exception):
        super().__init__(f"replication {rep} (seed {seed}) failed: {type(cause).__name__}: {cause}")
        self.rep = rep
        self.seed = seed


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run.

    ``n_obs`` counts normalized observations available for estimation; the
    simulator draws ``n_obs + 1 + max(ape_k)`` yield levels so the last
    ``max(ape_k)`` returns serve only as look-ahead targets for the
    adaptive prediction error.
    """

    mode: str = "simulate"
    reps: int = 50
    n_obs: int = 1200
    out_sample: int = 150
    time_cfg: TimeDomainConfig = TimeDomainConfig()
    state_cfg: StateDomainConfig = StateDomainConfig(window=SIM_WINDOW)
    ape_k: tuple = (0, 1, 2)
    seed: int = 0
    affine: affine_sim.AffineParams = affine_sim.AffineParams()
    out_dir: Optional[str] = None
    input_path: Optional[str] = None
    factor_col: Union[str, int, None] = None
    delta: float = 1.0 / 52.0
    density_bw: Optional[float] = None
    gcv_points: int = 20
    portfolio: Optional[tuple] = None
    jobs: int = 1
    emit_panels: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.out_sample < 1:
            raise ValueError("out_sample must be >= 1")
        if any(k < 0 for k in self.ape_k) or not self.ape_k:
            raise ValueError("ape_k must be non-empty non-negative integers")
        if self.mode != "evaluate" and self.out_sample + self.history > self.n_obs:
            raise ValueError(
                f"out_sample + max(window, n) = {self.out_sample + self.history} exceeds n_obs = {self.n_obs}"
            )

    @property
    def history(self) -> int:
        return max(self.state_cfg.window, self.time_cfg.n)

    @property
    def k_max(self) -> int:
        return max(self.ape_k)

    @property
    def tag(self) -> str:
        return f"{self.mode}_seed{self.seed}_reps{self.reps}"


# ---------------------------------------------------------------------------
# rolling evaluation


@dataclass
class RollingResult:
    """Estimates at each out-sample return index (Y scale, i.e. diffusion matrix)."""

    index: np.ndarray
    time: np.ndarray
    state: np.ndarray
    aggregated: np.ndarray
    omega: np.ndarray
    density: np.ndarray
    state_ok: np.ndarray
    bandwidth: float

    def estimates(self, name: str) -> np.ndarray:
        return getattr(self, name)


def out_sample_range(n_returns: int, cfg: RunConfig) -> tuple:
    """[start, stop) of the out-sample, leaving max(ape_k) trailing returns."""
    stop = n_returns - cfg.k_max
    start = stop - cfg.out_sample
    if start < cfg.history:
        required = cfg.out_sample + cfg.history + cfg.k_max + 1
        raise InsufficientData(
            f"need at least {required} level observations for out_sample={cfg.out_sample}, "
            f"history={cfg.history}, max k={cfg.k_max}; have {n_returns + 1}",
            required=required,
        )
    return start, stop


def select_bandwidth(y: NormalizedReturns, start: int, cfg: RunConfig) -> float:
    if cfg.state_cfg.bandwidth is not None:
        return cfg.state_cfg.bandwidth
    window = y.factor[start - cfg.state_cfg.window:start]
    return gcv_bandwidth(y, default_candidates(window, cfg.gcv_points), cfg.state_cfg, t=start)


def rolling_evaluation(y: NormalizedReturns, start: int, stop: int, cfg: RunConfig,
                       bandwidth: Optional[float] = None) -> RollingResult:
    """Roll over out-sample indices t in [start, stop).

    Every estimate at t uses rows with index < t only, plus the current
    factor level f_t (the left endpoint of Y_t, observed at t).
    """
    tcfg, scfg = cfg.time_cfg, cfg.state_cfg
    if start < cfg.history:
        raise InsufficientData(f"out-sample starts at {start}, before {cfg.history} rows of history")
    h = select_bandwidth(y, start, cfg) if bandwidth is None else bandwidth
    b = effective_b(scfg.window, h, tcfg.n)
    tau_val = tau(tcfg)
    nu0 = scfg.kernel.nu0
    d = y.dim
    m = stop - start
    out = RollingResult(
        index=np.arange(start, stop),
        time=np.empty((m, d, d)),
        state=np.empty((m, d, d)),
        aggregated=np.empty((m, d, d)),
        omega=np.empty(m),
        density=np.empty(m),
        state_ok=np.ones(m, dtype=bool),
        bandwidth=float(h),
    )
    for i, t in enumerate(range(start, stop)):
        # no look-ahead: both windows end at row t-1
        assert t - scfg.window >= 0 and t - tcfg.n >= 0 and t <= len(y)
        sig_t = exp_smooth(y, t, tcfg)
        x = float(y.factor[t])
        f_win = y.factor[t - scfg.window:t]
        try:
            sig_s = local_linear_sigma(y, x, scfg, t, bandwidth=h)
        except DegenerateDesign:
            sig_s = None
        bw = cfg.density_bw if cfg.density_bw is not None else silverman_bandwidth(f_win)
        p = kernel_density(f_win, x, bw=bw, kernel=scfg.kernel) if bw > 0 else 0.0
        omega = optimal_weight(WeightInputs(tau_val, nu0, b, p))
        agg = aggregate(sig_s, sig_t, omega)
        out.time[i] = sig_t
        # the state-only estimator falls back like the aggregate does
        out.state[i] = sig_s if sig_s is not None else sig_t
        out.state_ok[i] = sig_s is not None
        out.aggregated[i] = agg.sigma
        out.omega[i] = agg.omega
        out.density[i] = p
    return out


def prediction_table(y: NormalizedReturns, roll: RollingResult, ape_k: Sequence[int]) -> dict:
    """{k: {estimator: APE}}; k = 0 is the plain prediction error."""
    table = {}
    for k in ape_k:
        table[int(k)] = {
            name: adaptive_prediction_error(y.rows, roll.estimates(name), int(k), index=roll.index)
            for name in ESTIMATORS
        }
    return table


# ---------------------------------------------------------------------------
# simulation study


@dataclass
class ReplicationResult:
    rep: int
    bandwidth: float
    entropy: np.ndarray      # (3, m)
    quadratic: np.ndarray    # (3, m)
    table: dict              # {k: {estimator: value}}
    omega: np.ndarray
    degenerate_steps: int
    time_est: np.ndarray     # (m, d, d)
    state_est: np.ndarray    # (m, d, d)
    truth: np.ndarray        # (m, d, d)


def run_replication(cfg: RunConfig, rep: int, solution: Optional[affine_sim.AffineSolution] = None,
                    panel_dir: Optional[Path] = None) -> ReplicationResult:
    rng = affine_sim.replication_rng(cfg.seed, rep)
    sol = solution if solution is not None else affine_sim.solve_riccati(cfg.affine)
    market = affine_sim.simulate_market(cfg.affine, cfg.n_obs + 1 + cfg.k_max, rng, sol)
    panel = market.to_panel()
    if panel_dir is not None:
        write_panel_csv(panel, panel_dir / f"panel_rep{rep}.csv")
        affine_sim.write_truth_csv(market.truth[:-1], panel_dir / f"truth_rep{rep}.csv")
    y = normalize(panel)
    start, stop = out_sample_range(len(y), cfg)
    roll = rolling_evaluation(y, start, stop, cfg)
    truth = market.truth[start:stop]
    m = stop - start
    ent = np.empty((3, m))
    quad = np.empty((3, m))
    for e, name in enumerate(ESTIMATORS):
        est = roll.estimates(name)
        for i in range(m):
            ent[e, i] = entropy_loss(truth[i], est[i])
            quad[e, i] = quadratic_loss(truth[i], est[i])
    return ReplicationResult(
        rep=rep,
        bandwidth=roll.bandwidth,
        entropy=ent,
        quadratic=quad,
        table=prediction_table(y, roll, cfg.ape_k),
        omega=roll.omega,
        degenerate_steps=int(np.sum(~roll.state_ok)),
        time_est=roll.time,
        state_est=roll.state,
        truth=truth,
    )


def _run_rep_safe(args):
    cfg, rep, sol, panel_dir = args
    try:
        return run_replication(cfg, rep, sol, panel_dir)
    except Exception as exc:  # surfaced with rep and seed
        raise ReplicationFailed(rep, cfg.seed, exc) from exc


def run_replications(cfg: RunConfig) -> list:
    sol = affine_sim.solve_riccati(cfg.affine)
    panel_dir = None
    if cfg.emit_panels and cfg.out_dir:
        panel_dir = Path(cfg.out_dir) / f"{cfg.tag}_panels"
        panel_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, rep, sol, panel_dir) for rep in range(cfg.reps)]
    if cfg.jobs > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_rep_safe, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_rep_safe(job))
            log.info("replication %d/%d done", job[1] + 1, cfg.reps)
    return results


def default_portfolio(d: int, cfg: Optional[RunConfig] = None) -> np.ndarray:
    if cfg is not None and cfg.portfolio is not None:
        a = np.asarray(cfg.portfolio, dtype=float)
        if a.shape != (d,):
            raise ValueError(f"portfolio must have {d} weights")
        return a
    return np.full(d, 1.0 / d)


def summarize_study(cfg: RunConfig, results: list) -> dict:
    """Summary statistics, comparison tests and the correlation diagnostic."""
    ent = np.stack([r.entropy for r in results])      # (R, 3, m)
    quad = np.stack([r.quadratic for r in results])
    rep_ent = ent.mean(axis=2)                        # (R, 3)
    rep_quad = quad.mean(axis=2)
    table = {
        k: {name: float(np.mean([r.table[k][name] for r in results])) for name in ESTIMATORS}
        for k in cfg.ape_k
    }
    pe = np.array([[r.table[0][name] for name in ESTIMATORS] for r in results]) if 0 in cfg.ape_k else None
    summary = {
        "config": config_to_dict(cfg),
        "reps": len(results),
        "bandwidth": summarize([r.bandwidth for r in results]),
        "omega": summarize(np.concatenate([r.omega for r in results])),
        "degenerate_steps": int(sum(r.degenerate_steps for r in results)),
        "entropy": {name: summarize(rep_ent[:, e]) for e, name in enumerate(ESTIMATORS)},
        "quadratic": {name: summarize(rep_quad[:, e]) for e, name in enumerate(ESTIMATORS)},
        "ape_table": {str(k): v for k, v in table.items()},
    }
    if pe is not None:
        summary["pe"] = {name: summarize(pe[:, e]) for e, name in enumerate(ESTIMATORS)}
    if len(results) >= 2:
        tests = {}
        for loss, arr in (("entropy", rep_ent), ("quadratic", rep_quad)):
            tests[loss] = {
                f"aggregated_vs_{other}": sign_test(arr[:, 2], arr[:, e])
                for e, other in enumerate(ESTIMATORS[:2])
            }
        summary["sign_tests"] = tests
    if pe is not None:
        q_impr = (rep_quad[:, :2].mean(axis=0) - rep_quad[:, 2].mean()) / rep_quad[:, :2].mean(axis=0)
        pe_impr = (pe[:, :2].mean(axis=0) - pe[:, 2].mean()) / pe[:, :2].mean(axis=0)
        summary["relative_improvement"] = {
            other: {"quadratic": float(q_impr[e]), "pe": float(pe_impr[e])}
            for e, other in enumerate(ESTIMATORS[:2])
        }
    if len(results) >= 4:
        corr = correlation_series(cfg, results)
        summary["correlation"] = {
            "portfolio": corr["portfolio"],
            "band": corr["series"].band,
            "mean_abs_r": float(np.nanmean(np.abs(corr["series"].r))),
            "max_abs_r": float(np.nanmax(np.abs(corr["series"].r))),
            "accept_fraction": float(np.mean(corr["series"].accept)),
            "error_mean_abs_r": float(np.nanmean(np.abs(corr["errors"].r))),
            "error_accept_fraction": float(np.mean(corr["errors"].accept)),
        }
    return summary


def correlation_series(cfg: RunConfig, results: list) -> dict:
    t_est = np.stack([r.time_est for r in results])
    s_est = np.stack([r.state_est for r in results])
    truth = np.stack([r.truth for r in results])
    a = default_portfolio(t_est.shape[-1], cfg)
    return {
        "portfolio": a.tolist(),
        "series": independence_diagnostic(a, t_est, s_est),
        "errors": independence_diagnostic(a, t_est, s_est, truth=truth),
    }


def run_simulation_study(cfg: RunConfig) -> dict:
    """Run every replication, write the output files (if ``cfg.out_dir``)
    and return the summary."""
    results = run_replications(cfg)
    summary = summarize_study(cfg, results)
    if cfg.out_dir:
        write_study_outputs(cfg, results, summary)
    return summary


def run_corr_test(cfg: RunConfig) -> dict:
    return run_simulation_study(replace(cfg, mode="corr-test"))


# ---------------------------------------------------------------------------
# real data


def run_real_evaluation(cfg: RunConfig, source: Union[PanelSeries, str, Path, None] = None) -> dict:
    """Rolling PE/APE of the three estimators on an observed panel.

    ``source`` is a PanelSeries or a CSV path (defaults to
    ``cfg.input_path``). Returns the summary dict and writes files when
    ``cfg.out_dir`` is set.
    """
    source = cfg.input_path if source is None else source
    if source is None:
        raise ValueError("no input panel given")
    if isinstance(source, PanelSeries):
        panel = source
    else:
        panel = ingest_csv(source, cfg.delta, factor_col=cfg.factor_col)
    if cfg.factor_col is not None and isinstance(source, PanelSeries):
        panel = replace(panel, factor_col=resolve_factor_col(panel.columns, cfg.factor_col))
    y = normalize(panel)
    start, stop = out_sample_range(len(y), cfg)
    roll = rolling_evaluation(y, start, stop, cfg)
    table = prediction_table(y, roll, cfg.ape_k)
    summary = {
        "config": config_to_dict(cfg),
        "columns": list(panel.columns),
        "factor": panel.columns[panel.factor_col or 0],
        "n_levels": panel.n_obs,
        "out_sample": [int(start), int(stop)],
        "bandwidth": roll.bandwidth,
        "omega": summarize(roll.omega),
        "degenerate_steps": int(np.sum(~roll.state_ok)),
        "ape_table": {str(k): v for k, v in table.items()},
    }
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / f"{cfg.tag}_summary.json", summary)
        _write_pe_table(out / f"{cfg.tag}_pe_table.csv", table)
        _write_estimates(out / f"{cfg.tag}_estimates.csv", roll, panel.delta)
    return summary


# ---------------------------------------------------------------------------
# configuration


CONFIG_KEYS = {
    "mode": "simulate | evaluate | corr-test",
    "reps": "number of simulated replications",
    "steps": "normalized observations per replication (default 1200)",
    "out_sample": "out-sample length (default 150)",
    "lambda": "exponential smoothing constant (default 0.94)",
    "n": "time-domain window (default 104)",
    "window": "state-domain window (default 1050 simulate, 900 evaluate)",
    "bandwidth": "state-domain bandwidth, or 'gcv' (default)",
    "kernel": "epanechnikov | gaussian",
    "gcv_points": "number of GCV candidates (default 20)",
    "density_bw": "density bandwidth (default Silverman)",
    "ape_k": "comma-separated APE half-widths (default 0,1,2)",
    "seed": "master seed",
    "out_dir": "output directory",
    "input": "CSV panel for evaluate",
    "factor_col": "factor column name or index",
    "delta": "sampling interval in years for CSV input (default 1/52)",
    "portfolio": "comma-separated portfolio weights for the correlation diagnostic",
    "jobs": "worker processes across replications",
    "emit_panels": "write simulated panels and truth as CSV (true/false)",
}


def read_config_file(path: Union[str, Path]) -> dict:
    """Flat ``key = value`` file (``#`` comments) to a dict of strings."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string("[run]\n" + text)
    values = {k.replace("-", "_"): v for k, v in parser["run"].items()}
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    return values


def _float_or_fraction(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _int_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def config_from_mapping(values: dict) -> RunConfig:
    """Build a RunConfig from string or typed values keyed as in CONFIG_KEYS."""
    v = {k: x for k, x in values.items() if x is not None}
    mode = v.get("mode", "simulate")
    window = int(v.get("window", REAL_WINDOW if mode == "evaluate" else SIM_WINDOW))
    bw = v.get("bandwidth", "gcv")
    bandwidth = None if str(bw).lower() == "gcv" else float(bw)
    kernel = get_kernel(v.get("kernel", EPANECHNIKOV))
    state_cfg = StateDomainConfig(kernel=kernel, bandwidth=bandwidth, window=window)
    time_cfg = TimeDomainConfig(n=int(v.get("n", 104)), lam=float(v.get("lambda", 0.94)))
    portfolio = v.get("portfolio")
    if isinstance(portfolio, str):
        portfolio = tuple(float(x) for x in portfolio.split(","))
    factor_col = v.get("factor_col")
    emit = v.get("emit_panels", False)
    if isinstance(emit, str):
        emit = emit.strip().lower() in ("1", "true", "yes", "on")
    defaults = RunConfig.__dataclass_fields__
    return RunConfig(
        mode=mode,
        reps=int(v.get("reps", 200 if mode == "corr-test" else 50)),
        n_obs=int(v.get("steps", defaults["n_obs"].default)),
        out_sample=int(v.get("out_sample", 20 if mode == "corr-test" else 150)),
        time_cfg=time_cfg,
        state_cfg=state_cfg,
        ape_k=_int_list(v.get("ape_k", "0,1,2")),
        seed=int(v.get("seed", 0)),
        out_dir=v.get("out_dir"),
        input_path=v.get("input"),
        factor_col=factor_col,
        delta=_float_or_fraction(str(v.get("delta", 1.0 / 52.0))),
        density_bw=float(v["density_bw"]) if "density_bw" in v else None,
        gcv_points=int(v.get("gcv_points", 20)),
        portfolio=tuple(portfolio) if portfolio is not None else None,
        jobs=int(v.get("jobs", 1)),
        emit_panels=bool(emit),
    )


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "mode": cfg.mode,
        "reps": cfg.reps,
        "steps": cfg.n_obs,
        "out_sample": cfg.out_sample,
        "lambda": cfg.time_cfg.lam,
        "n": cfg.time_cfg.n,
        "window": cfg.state_cfg.window,
        "bandwidth": cfg.state_cfg.bandwidth if cfg.state_cfg.bandwidth is not None else "gcv",
        "kernel": cfg.state_cfg.kernel.name,
        "gcv_points": cfg.gcv_points,
        "density_bw": cfg.density_bw,
        "ape_k": list(cfg.ape_k),
        "seed": cfg.seed,
        "factor_col": cfg.factor_col,
        "delta": cfg.delta,
        "portfolio": list(cfg.portfolio) if cfg.portfolio is not None else None,
        "affine": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg.affine).items()},
    }


# ---------------------------------------------------------------------------
# output files


def _fmt(x) -> str:
    return repr(float(x))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def _write_pe_table(path: Path, table: dict) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + list(ESTIMATORS))
        for k in sorted(table):
            w.writerow([k] + [_fmt(table[k][name]) for name in ESTIMATORS])


def _write_estimates(path: Path, roll: RollingResult, delta: float) -> None:
    """Conditional covariance estimates (delta x the diffusion-matrix scale)."""
    d = roll.time.shape[-1]
    rows, cols = tril_indices(d)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "estimator", "omega"] + affine_sim.vech_headers(d))
        for i, t in enumerate(roll.index):
            for name in ESTIMATORS:
                m = roll.estimates(name)[i] * delta
                w.writerow([int(t), name, _fmt(roll.omega[i])] + [_fmt(x) for x in m[rows, cols]])


def write_study_outputs(cfg: RunConfig, results: list, summary: dict) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = cfg.tag
    _write_json(out / f"{tag}_summary.json", summary)

    ent = np.stack([r.entropy for r in results])
    quad = np.stack([r.quadratic for r in results])
    m = ent.shape[2]
    with (out / f"{tag}_per_step.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["step"]
        for loss in ("entropy", "quadratic"):
            for name in ESTIMATORS:
                head += [f"{loss}_{name}_mean", f"{loss}_{name}_sd"]
        w.writerow(head)
        for i in range(m):
            row = [i]
            for arr in (ent, quad):
                for e in range(3):
                    col = arr[:, e, i]
                    row += [_fmt(col.mean()), _fmt(col.std(ddof=1) if len(col) > 1 else 0.0)]
            w.writerow(row)

    with (out / f"{tag}_per_rep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["rep", "bandwidth", "mean_omega", "degenerate_steps"]
        head += [f"entropy_{n}" for n in ESTIMATORS] + [f"quadratic_{n}" for n in ESTIMATORS]
        head += [f"ape{k}_{n}" for k in cfg.ape_k for n in ESTIMATORS]
        w.writerow(head)
        for r in results:
            row = [r.rep, _fmt(r.bandwidth), _fmt(r.omega.mean()), r.degenerate_steps]
            row += [_fmt(x) for x in r.entropy.mean(axis=1)] + [_fmt(x) for x in r.quadratic.mean(axis=1)]
            row += [_fmt(r.table[k][n]) for k in cfg.ape_k for n in ESTIMATORS]
            w.writerow(row)

    table = {k: {name: summary["ape_table"][str(k)][name] for name in ESTIMATORS} for k in cfg.ape_k}
    _write_pe_table(out / f"{tag}_pe_table.csv", table)

    if len(results) >= 4:
        with (out / f"{tag}_corr.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            corr = correlation_series(cfg, results)
            series, errs = corr["series"], corr["errors"]
            w.writerow(["step", "r", "lower", "upper", "band", "accept", "error_r"])
            for i in range(len(series.r)):
                w.writerow([i, _fmt(series.r[i]), _fmt(series.lower[i]), _fmt(series.upper[i]),
                            _fmt(series.band), int(series.accept[i]), _fmt(errs.r[i])])
