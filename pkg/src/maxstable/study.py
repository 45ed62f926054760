"""Monte Carlo study harness: efficiency, truncation, and cost projection.

Each experiment draws its own sites and data from a per-experiment RNG
stream, fits the requested composite orders (warm-starting each order
from the previous one), and reports bias / standard deviation / root
mean squared error / root relative efficiency per cell.  Raw estimates
are persisted so every metric can be re-derived bit-exactly; wall-clock
measurements live in a separate timing table because they are the one
output that legitimately varies between runs.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, MaxStableError
from .fit import FamilySpec, fit_model
from .likelihood import build_scheme, expected_partial_evaluations
from .models import MixtureParams, variogram
from .simulate import (
    RngSpec,
    sample_brown_resnick,
    sample_logistic,
    sample_mixture,
    sample_reich_shaby,
)

FAILURE_ABORT_FRACTION = 0.05


def uniform_knot_grid(k: int) -> np.ndarray:
    """k x k grid of kernel knots covering the unit square."""
    if k < 1:
        raise DomainError(f"knot grid size must be at least 1, got {k}")
    g = np.linspace(0.0, 1.0, k) if k > 1 else np.array([0.5])
    return np.array([[a, b] for a in g for b in g])


@dataclass
class StudyConfig:
    """Design of one Monte Carlo study."""

    family: str
    true_params: tuple
    Q: int
    m: int
    J: int
    q_list: tuple
    t_list: tuple = (1.0,)
    seed: int = 0
    knots: np.ndarray | None = None
    mixture_weights: tuple = ()
    sites: np.ndarray | None = None  # fixed sites; None redraws per experiment
    n_jobs: int = 1
    mvn_sample_budget: int = 16_384
    max_iterations: int = 1000

    def __post_init__(self):
        self.q_list = tuple(int(q) for q in self.q_list)
        self.t_list = tuple(float(t) for t in self.t_list)
        if self.J < 1 or self.m < 1:
            raise DomainError("J and m must be at least 1")
        if not self.q_list:
            raise DomainError("q_list must not be empty")
        for q in self.q_list:
            if not 2 <= q <= self.Q:
                raise DomainError(f"composite order {q} outside {{2..{self.Q}}}")
        for t in self.t_list:
            if not 0.0 < t <= 1.0:
                raise DomainError(f"truncation fraction {t} outside (0, 1]")
        if self.sites is not None:
            self.sites = np.atleast_2d(np.asarray(self.sites, dtype=float))
            if len(self.sites) != self.Q:
                raise DomainError(f"expected {self.Q} fixed sites")
        if self.knots is not None:
            self.knots = np.atleast_2d(np.asarray(self.knots, dtype=float))
        self.family_spec()  # validate family/structure coherence early

    def family_spec(self) -> FamilySpec:
        return FamilySpec(self.family, weights=tuple(self.mixture_weights),
                          knots=self.knots,
                          mvn_sample_budget=self.mvn_sample_budget)

    def cells(self) -> list:
        """(q, t) grid; the top order is never truncated (single subset)."""
        out = []
        for q in sorted(self.q_list):
            ts = self.t_list if q < self.Q else (1.0,)
            for t in sorted(set(ts), reverse=True):
                out.append((q, t))
        return out


@dataclass
class RawFit:
    j: int
    q: int
    t: float
    converged: bool
    evaluations: int
    iterations: int
    objective: float
    theta: tuple
    wall_time: float = 0.0

    # wall_time deliberately excluded: raw metric files must be bit-stable
    CSV_FIELDS = ("j", "q", "t", "converged", "evaluations", "iterations",
                  "objective", "theta")


@dataclass
class ReportRow:
    q: int
    t: float
    param: str
    n_ok: int
    n_fail: int
    bias: float
    sd: float
    rmse: float
    rre: float
    abs_bias_over_sd: float
    mean_evaluations: float


@dataclass
class TimingRow:
    q: int
    t: float
    Q: int
    n_fits: int
    mean_fit_seconds: float
    mean_eval_seconds: float
    partials_per_call: int


@dataclass
class StudyReport:
    config: StudyConfig
    raw: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    truncation_ratios: list = field(default_factory=list)
    n_failures: int = 0


def _simulate(config: StudyConfig, spec: FamilySpec, gen, sites) -> "Dataset":
    theta = np.asarray(config.true_params, dtype=float)
    if config.family == "logistic":
        return sample_logistic(config.Q, float(theta[0]), config.m, gen)
    if config.family == "mixture":
        mix = MixtureParams(weights=tuple(config.mixture_weights),
                            alphas=tuple(float(a) for a in theta))
        return sample_mixture(config.Q, mix, config.m, gen)
    model = spec.build_model(theta, sites)
    if config.family == "reich_shaby":
        return sample_reich_shaby(model, config.m, gen)
    return sample_brown_resnick(model, config.m, gen)


def run_single_experiment(config: StudyConfig, j: int) -> list:
    """All (q, t) fits for experiment j; pure function of (config, j)."""
    spec = config.family_spec()
    gen = RngSpec(seed=config.seed, stream=j).generator()
    sites = (config.sites if config.sites is not None
             else gen.uniform(0.0, 1.0, (config.Q, 2)))
    data = _simulate(config, spec, gen, sites)
    data = replace(data, locations=sites)

    out = []
    warm = np.asarray(config.true_params, dtype=float)
    for q in sorted(config.q_list):
        top_theta = None
        ts = config.t_list if q < config.Q else (1.0,)
        for t in sorted(set(ts), reverse=True):
            scheme = build_scheme(config.Q, q, locations=sites, t=t)
            try:
                fit = fit_model(data, spec, scheme, warm,
                                max_iterations=config.max_iterations)
                row = RawFit(j=j, q=q, t=t, converged=fit.converged,
                             evaluations=fit.evaluations,
                             iterations=fit.iterations,
                             objective=fit.objective,
                             theta=tuple(float(v) for v in fit.theta_hat),
                             wall_time=fit.wall_time)
            except MaxStableError:
                row = RawFit(j=j, q=q, t=t, converged=False, evaluations=0,
                             iterations=0, objective=math.nan,
                             theta=tuple(math.nan for _ in config.true_params))
            out.append(row)
            if t == 1.0 and row.converged:
                top_theta = np.asarray(row.theta)
        if top_theta is not None:
            warm = top_theta
    return out


def _run_experiment_star(args):
    return run_single_experiment(*args)


def aggregate(config: StudyConfig, raw: list) -> list:
    """ReportRows from raw fits; reference cell is (max q, t=1)."""
    names = config.family_spec().parameter_names()
    truth = np.asarray(config.true_params, dtype=float)
    cells = config.cells()
    q_ref = max(config.q_list)

    stats = {}
    for (q, t) in cells:
        ok = [r for r in raw if r.q == q and r.t == t and r.converged]
        n_fail = sum(1 for r in raw if r.q == q and r.t == t and not r.converged)
        thetas = np.array([r.theta for r in ok]) if ok else np.empty((0, len(names)))
        mean_ev = (math.fsum(r.evaluations for r in ok) / len(ok)) if ok else math.nan
        for p, name in enumerate(names):
            if len(thetas) >= 2:
                bias = float(np.mean(thetas[:, p]) - truth[p])
                sd = float(np.std(thetas[:, p], ddof=1))
                rmse = math.hypot(bias, sd)
            else:
                bias = sd = rmse = math.nan
            stats[(q, t, name)] = (len(thetas), n_fail, bias, sd, rmse, mean_ev)

    rows = []
    for (q, t) in cells:
        for name in names:
            n_ok, n_fail, bias, sd, rmse, mean_ev = stats[(q, t, name)]
            rmse_ref = stats[(q_ref, 1.0, name)][4]
            rre = rmse_ref / rmse if rmse and not math.isnan(rmse) else math.nan
            ratio = abs(bias) / sd if sd else math.nan
            rows.append(ReportRow(q=q, t=t, param=name, n_ok=n_ok, n_fail=n_fail,
                                  bias=bias, sd=sd, rmse=rmse, rre=rre,
                                  abs_bias_over_sd=ratio, mean_evaluations=mean_ev))
    return rows


def _aggregate_timings(config: StudyConfig, raw: list) -> list:
    out = []
    for (q, t) in config.cells():
        ok = [r for r in raw if r.q == q and r.t == t and r.converged]
        if ok:
            mean_fit = math.fsum(r.wall_time for r in ok) / len(ok)
            mean_eval = (math.fsum(r.wall_time for r in ok)
                         / max(1, sum(r.evaluations for r in ok)))
        else:
            mean_fit = mean_eval = math.nan
        out.append(TimingRow(q=q, t=t, Q=config.Q, n_fits=len(ok),
                             mean_fit_seconds=mean_fit,
                             mean_eval_seconds=mean_eval,
                             partials_per_call=expected_partial_evaluations(
                                 config.Q, q, config.m, t)))
    return out


def run_efficiency_study(config: StudyConfig) -> StudyReport:
    """Simulate-fit-aggregate over J experiments; see module docstring."""
    jobs = [(config, j) for j in range(config.J)]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as ex:
            per_exp = list(ex.map(_run_experiment_star, jobs))
    else:
        per_exp = [run_single_experiment(config, j) for j in range(config.J)]
    raw = [row for rows in per_exp for row in rows]

    n_fail = sum(1 for r in raw if not r.converged)
    if n_fail > FAILURE_ABORT_FRACTION * len(raw):
        raise MaxStableError(
            f"{n_fail}/{len(raw)} fits failed, above the "
            f"{FAILURE_ABORT_FRACTION:.0%} abort threshold"
        )
    return StudyReport(config=config, raw=raw, rows=aggregate(config, raw),
                       timings=_aggregate_timings(config, raw),
                       n_failures=n_fail)


def run_truncation_study(config: StudyConfig) -> StudyReport:
    """Efficiency study over a (q, t) grid plus elapsed-time ratios.

    The report gains two timing diagnostics: each cell's elapsed time as
    a percentage of its own order's t=1 column, and for each order the
    percentage ratio of the previous order's best-rre cell to this
    order's untruncated cell.
    """
    report = run_efficiency_study(config)
    full_time = {r.q: r.mean_fit_seconds for r in report.timings if r.t == 1.0}
    by_cell = {(r.q, r.t): r.mean_fit_seconds for r in report.timings}

    best_cells = {}
    for q in sorted(config.q_list):
        cand = [(r.rre, r.t) for r in report.rows
                if r.q == q and not math.isnan(r.rre)]
        if cand:
            best_cells[q] = max(cand)[1]

    report.truncation_ratios = []
    qs = sorted(config.q_list)
    for i, q in enumerate(qs):
        for t in sorted({t for (qq, t) in by_cell if qq == q}, reverse=True):
            within = 100.0 * by_cell[(q, t)] / full_time[q]
            prev_ratio = math.nan
            if i > 0 and t == 1.0:
                q_prev = qs[i - 1]
                if q_prev in best_cells:
                    prev_ratio = (100.0 * by_cell[(q_prev, best_cells[q_prev])]
                                  / full_time[q])
            report.truncation_ratios.append(
                {"q": q, "t": t, "pct_of_untruncated": within,
                 "pct_best_prev_order_vs_full": prev_ratio})
    return report


def variogram_l2_ratio(true_params, fitted_params_q, fitted_params_Q) -> float:
    """L2 distance ratio ||g - g_Q|| / ||g - g_q|| over distances [0, sqrt(2)].

    1024-interval composite Simpson quadrature; if both fits reproduce
    the true variogram to within 1e-12 the ratio is 1 by convention.
    """
    h = np.linspace(0.0, math.sqrt(2.0), 1025)
    g_true = variogram(*true_params, h)
    d_Q = math.sqrt(simpson((g_true - variogram(*fitted_params_Q, h)) ** 2, x=h))
    d_q = math.sqrt(simpson((g_true - variogram(*fitted_params_q, h)) ** 2, x=h))
    if d_Q < 1e-12 and d_q < 1e-12:
        return 1.0
    return d_Q / d_q


@dataclass
class ProjectionRow:
    q: int
    Q: int
    Q_measured: int | None
    measured_seconds: float
    projected_seconds: float
    t_for_budget: float | None
    gap: bool = False


def project_cost(measured, targets, budget: float | None = None) -> list:
    """Scale measured per-evaluation times by the subset-count ratio.

    `measured` holds (q, Q_measured, seconds) triples; each target (q, Q)
    is projected from the largest available Q_measured <= Q at the same
    q.  With a seconds `budget`, the truncation fraction that brings the
    projection back inside the budget is reported (capped at 1).
    Missing measurements produce a flagged gap row, not an error.
    """
    rows = []
    for (q, Q) in targets:
        cands = [(Qm, e) for (qm, Qm, e) in measured if qm == q and Qm <= Q]
        if not cands:
            rows.append(ProjectionRow(q=q, Q=Q, Q_measured=None,
                                      measured_seconds=math.nan,
                                      projected_seconds=math.nan,
                                      t_for_budget=None, gap=True))
            continue
        Qm, e = max(cands)
        proj = e * math.comb(Q, q) / math.comb(Qm, q)
        t_budget = min(1.0, budget / proj) if budget is not None else None
        rows.append(ProjectionRow(q=q, Q=Q, Q_measured=Qm, measured_seconds=e,
                                  projected_seconds=proj, t_for_budget=t_budget))
    return rows


# ---------------------------------------------------------------------------
# persistence


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_raw_estimates(path, config: StudyConfig, raw: list):
    names = config.family_spec().parameter_names()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "q", "t", "converged", "evaluations", "iterations",
                    "objective", *names])
        for r in raw:
            w.writerow([r.j, r.q, _fmt(r.t), int(r.converged), r.evaluations,
                        r.iterations, _fmt(r.objective),
                        *[_fmt(v) for v in r.theta]])


def read_raw_estimates(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_theta = len(header) - 7
        for rec in reader:
            out.append(RawFit(
                j=int(rec[0]), q=int(rec[1]), t=float(rec[2]),
                converged=bool(int(rec[3])), evaluations=int(rec[4]),
                iterations=int(rec[5]), objective=float(rec[6]),
                theta=tuple(float(v) for v in rec[7:7 + n_theta])))
    return out


def write_report(path, rows: list):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "t", "param", "n_ok", "n_fail", "bias", "sd", "rmse",
                    "rre", "abs_bias_over_sd", "mean_evaluations"])
        for r in rows:
            w.writerow([r.q, _fmt(r.t), r.param, r.n_ok, r.n_fail, _fmt(r.bias),
                        _fmt(r.sd), _fmt(r.rmse), _fmt(r.rre),
                        _fmt(r.abs_bias_over_sd), _fmt(r.mean_evaluations)])


def write_timings(path, rows: list):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "t", "Q", "n_fits", "mean_fit_seconds",
                    "mean_eval_seconds", "partials_per_call"])
        for r in rows:
            w.writerow([r.q, _fmt(r.t), r.Q, r.n_fits, _fmt(r.mean_fit_seconds),
                        _fmt(r.mean_eval_seconds), r.partials_per_call])


def read_timings(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            out.append(TimingRow(q=int(rec[0]), t=float(rec[1]), Q=int(rec[2]),
                                 n_fits=int(rec[3]),
                                 mean_fit_seconds=float(rec[4]),
                                 mean_eval_seconds=float(rec[5]),
                                 partials_per_call=int(rec[6])))
    return out
