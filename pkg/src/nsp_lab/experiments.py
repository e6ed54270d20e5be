"""Experiment orchestration: Monte Carlo recovery probabilities, the explicit
three-dimensional boundary instance, and plot-data emission.

Every experiment is a pure function of (config, seed); per-trial generators
are derived from the run seed and the trial index, so results are
reproducible and aggregation is order-independent.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .config import TOL
from .measures import CostFunction, builtin_measure, parse_measure
from .nsp import Violation, erc_member, region_boundary_map, rrc_probe
from .solver import adversarial_pair
from .subspaces import (
    MeasurementMatrix,
    gaussian_measurement,
    null_space,
    read_matrix_csv,
    sample_haar,
)
from .width import tradeoff

Array = np.ndarray

__all__ = [
    "ExperimentConfig",
    "WilsonInterval",
    "MonteCarloSummary",
    "Ce1Entry",
    "Ce1Report",
    "wilson_interval",
    "mc_probability",
    "verify_counterexample1",
    "emit_plot_data",
    "config_hash",
]

MATRIX_SOURCES = ("gaussian_iid", "haar_nullspace", "file")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m: int
    k: int
    measure: str = "l1"
    trials: int = 1000
    d_grid: tuple = (1e-3,)
    seed: int = 0
    matrix_source: str = "gaussian_iid"
    matrix_file: str | None = None
    probe_budget: int = 20_000

    def __post_init__(self):
        if not (0 < self.m < self.n):
            raise ValueError(f"need 0 < m < n, got m={self.m}, n={self.n}")
        if not (0 <= self.k < self.n):
            raise ValueError(f"need 0 <= k < n, got k={self.k}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(d <= 0 for d in self.d_grid):
            raise ValueError(f"d_grid entries must be positive, got {self.d_grid}")
        if self.matrix_source not in MATRIX_SOURCES:
            raise ValueError(f"matrix_source must be one of {MATRIX_SOURCES}")
        if self.matrix_source == "file" and not self.matrix_file:
            raise ValueError("matrix_source 'file' requires matrix_file")
        parse_measure(self.measure)  # fail fast on bad specs
        object.__setattr__(self, "d_grid", tuple(float(d) for d in self.d_grid))

    def to_dict(self) -> dict:
        return asdict(self)


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class WilsonInterval:
    """95% Wilson score interval for a binomial proportion."""

    successes: int
    trials: int
    p_hat: float
    low: float
    high: float

    @property
    def half_width(self) -> float:
        return (self.high - self.low) / 2.0


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> WilsonInterval:
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"bad counts: {successes}/{trials}")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return WilsonInterval(successes, trials, p, max(0.0, center - half), min(1.0, center + half))


@dataclass
class MonteCarloSummary:
    config: ExperimentConfig
    trials: int
    erc: WilsonInterval
    rrc: dict                  # d -> WilsonInterval
    boundary_fraction: float
    failures: int

    @property
    def p_erc(self) -> float:
        return self.erc.p_hat


def _trial_subspace(cfg: ExperimentConfig, rng, fixed: MeasurementMatrix | None):
    if cfg.matrix_source == "gaussian_iid":
        return null_space(gaussian_measurement(cfg.m, cfg.n, rng))
    if cfg.matrix_source == "haar_nullspace":
        return sample_haar(cfg.n, cfg.n - cfg.m, rng)
    return null_space(fixed)


def _run_trials(cfg: ExperimentConfig, indices) -> list:
    cost = CostFunction(parse_measure(cfg.measure), cfg.n)
    fixed = None
    if cfg.matrix_source == "file":
        fixed = MeasurementMatrix(read_matrix_csv(cfg.matrix_file))
    out = []
    for idx in indices:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, int(idx)]))
        try:
            sub = _trial_subspace(cfg, rng, fixed)
            verdict = erc_member(sub, cost, cfg.k, seed=int(rng.integers(2**32)))
            passes = []
            for d in cfg.d_grid:
                probe = rrc_probe(sub, cost, cfg.k, d, budget=cfg.probe_budget,
                                  seed=int(rng.integers(2**32)))
                passes.append(not probe.violated)
            out.append((True, verdict.member, verdict.margin, passes))
        except Exception:   # certificate failures are counted, never silent
            out.append((False, False, math.nan, [False] * len(cfg.d_grid)))
    return out


def mc_probability(cfg: ExperimentConfig, threads: int = 1) -> MonteCarloSummary:
    """Estimate exact/robust recovery probabilities over random null spaces.

    Per trial the null space is drawn (Gaussian matrix or Haar), membership
    of the exact-recovery set is decided, and the perturbation probe runs at
    every radius in the grid.  The containment of the robust set in the
    exact set is asserted trial by trial, not just in expectation.
    """
    indices = list(range(cfg.trials))
    if threads <= 1:
        rows = _run_trials(cfg, indices)
    else:
        chunks = [indices[i::threads] for i in range(threads)]
        rows_by_idx: dict[int, tuple] = {}
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(_run_trials, cfg, ch): ch for ch in chunks if ch}
            for fut in concurrent.futures.as_completed(futures):
                for idx, row in zip(futures[fut], fut.result()):
                    rows_by_idx[idx] = row
        rows = [rows_by_idx[i] for i in indices]

    failures = sum(1 for ok, *_ in rows if not ok)
    valid = [r for r in rows if r[0]]
    erc_count = sum(1 for _, member, _, _ in valid if member)
    boundary = sum(1 for _, _, margin, _ in valid if abs(margin) < TOL.mc_boundary_band)
    rrc_counts = [0] * len(cfg.d_grid)
    for _, member, _, passes in valid:
        for j, ok in enumerate(passes):
            if ok:
                rrc_counts[j] += 1
                if not member:
                    raise AssertionError(
                        "robust pass on a trial outside the exact-recovery set"
                    )
    n_valid = len(valid)
    return MonteCarloSummary(
        config=cfg,
        trials=n_valid,
        erc=wilson_interval(erc_count, n_valid),
        rrc={d: wilson_interval(rrc_counts[j], n_valid) for j, d in enumerate(cfg.d_grid)},
        boundary_fraction=boundary / n_valid,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# The explicit boundary instance in R^3
# ---------------------------------------------------------------------------

@dataclass
class Ce1Entry:
    d: float
    t_star: float
    deficit: float
    epsilon: float
    error_ratio: float
    ratio_guarantee: float
    found: bool


@dataclass
class Ce1Report:
    """Exact recovery with strictly positive margins, robustness broken at
    every radius: the line through (1, 1, 2) under the exponential penalty.

    The strict inequality margin at amplitude t is 2F(t) - F(2t), which
    equals (1 - exp(-t))^2 and is positive for every t > 0; yet for every
    d > 0 some amplitude admits a perturbation of relative size d that
    reverses the inequality (the deficit grows like 2dt for small t).
    """

    t_grid: Array
    margins: Array
    closed_form_error: float
    min_margin: float
    entries: list
    passed: bool


def verify_counterexample1(
    d_list=(0.5, 0.1, 0.01, 0.001),
    t_points: int = 100,
    seed: int = 0,
) -> Ce1Report:
    if not d_list or any(not 0 < d < 1 for d in d_list):
        raise ValueError(f"d values must lie in (0, 1), got {d_list}")
    measure = builtin_measure("exp_ce1")
    cost = CostFunction(measure, 3)
    generator = np.array([1.0, 1.0, 2.0])

    t_grid = np.geomspace(1e-4, 10.0, t_points)
    f = measure.fn
    margins = 2.0 * f(t_grid) - f(2.0 * t_grid)
    closed = np.expm1(-t_grid) ** 2
    closed_err = float(np.max(np.abs(margins - closed) / np.maximum(closed, 1e-300)))

    # measurement matrix with the given null space: rows span the complement
    q, _ = np.linalg.qr(np.column_stack([generator / np.linalg.norm(generator), np.eye(3)[:, :2]]))
    a = MeasurementMatrix(q[:, 1:].T)

    entries = []
    ok = True
    for d in d_list:
        # deficit of the perturbed inequality with the perturbation taking a
        # (1 - d) bite out of the first coordinate at amplitude t
        def deficit(t, _d=d):
            vals = f(np.array([2.0 * t, (1.0 - _d) * t, t]))
            return float(vals[0] - vals[1] - vals[2])

        search = np.geomspace(1e-8, 10.0, 600)
        vals = np.array([deficit(t) for t in search])
        i = int(np.argmax(vals))
        lo, hi = search[max(i - 1, 0)], search[min(i + 1, len(search) - 1)]
        t_star, best = _golden_max_scalar(deficit, math.log(lo), math.log(hi))
        if best < vals[i]:
            t_star, best = float(search[i]), float(vals[i])
        found = best > 0.0
        ok = ok and found

        z = t_star * generator
        n_vec = np.array([-d * t_star, 0.0, 0.0])
        entry = Ce1Entry(d, t_star, best, math.nan, math.nan, math.nan, found)
        if found:
            witness = Violation(z, n_vec, (2,), best)
            pair = adversarial_pair(a, cost, 1, d, witness=witness)
            entry.epsilon = pair.epsilon
            entry.error_ratio = pair.ratio
            entry.ratio_guarantee = pair.ratio_guarantee
        entries.append(entry)

    passed = ok and bool((margins > 0).all())
    return Ce1Report(t_grid, margins, closed_err, float(margins.min()), entries, passed)


def _golden_max_scalar(fun, log_lo, log_hi, iters: int = 60):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = log_lo, log_hi
    c, dd = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = fun(math.exp(c)), fun(math.exp(dd))
    for _ in range(iters):
        if fc >= fd:
            b, dd, fd = dd, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(math.exp(c))
        else:
            a, c, fc = c, dd, fd
            dd = a + inv_phi * (b - a)
            fd = fun(math.exp(dd))
    mid = math.exp(0.5 * (a + b))
    return mid, fun(mid)


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------

def _write_columns(path, kind, seed, meta: dict, header_cols, rows) -> None:
    payload_hash = config_hash({"kind": kind, "seed": seed, **meta})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# nsp-lab {kind}\n")
        fh.write(f"# seed={seed} config={payload_hash}\n")
        fh.write("# " + " ".join(header_cols) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def emit_plot_data(kind: str, out_path, seed: int = 0, **options) -> str:
    """Write gnuplot-ready whitespace-delimited columns for one plot kind.

    ``boundary_map`` needs measure/grid/domain, ``tradeoff_curve`` needs
    beta and a gamma iterable, ``probability_vs_k`` needs n, m, k_max,
    measure and trials.  Returns the path written.
    """
    if kind == "boundary_map":
        measure = options.get("measure", "l1")
        grid = options.get("grid", (10, 10))
        domain = options.get("domain", (2.0, 2.0))
        if grid[0] < 2 or grid[1] < 2:
            raise ValueError(f"grid must be at least 2x2, got {grid}")
        rmap = region_boundary_map(parse_measure(measure), grid=grid, domain=domain)
        rows = [
            (float(a), float(b), int(rmap.region_a[i, j]))
            for i, a in enumerate(rmap.a_values)
            for j, b in enumerate(rmap.b_values)
        ]
        _write_columns(out_path, kind, seed, {"measure": measure, "grid": grid, "domain": domain},
                       ("a", "b", "in_region_a"), rows)
        return str(out_path)

    if kind == "tradeoff_curve":
        beta = float(options["beta"])
        gammas = options["gammas"]
        rows = []
        for g in gammas:
            pt = tradeoff(beta, float(g))
            rows.append((pt.gamma, pt.delta,
                         pt.C if pt.C is not None else math.nan,
                         pt.oracle_constant if pt.oracle_constant is not None else math.nan))
        _write_columns(out_path, kind, seed, {"beta": beta, "gammas": list(map(float, gammas))},
                       ("gamma", "delta", "C", "oracle_C"), rows)
        return str(out_path)

    if kind == "probability_vs_k":
        n, m = int(options["n"]), int(options["m"])
        k_max = int(options.get("k_max", m))
        measure = options.get("measure", "l1")
        trials = int(options.get("trials", 200))
        rows = []
        for k in range(0, k_max + 1):
            cfg = ExperimentConfig(n=n, m=m, k=k, measure=measure, trials=trials,
                                   d_grid=(1e-3,), seed=seed)
            summary = mc_probability(cfg)
            rows.append((k, summary.erc.p_hat, summary.erc.low, summary.erc.high))
        _write_columns(out_path, kind, seed,
                       {"n": n, "m": m, "k_max": k_max, "measure": measure, "trials": trials},
                       ("k", "p_erc", "ci_low", "ci_high"), rows)
        return str(out_path)

    raise ValueError(f"unknown plot kind {kind!r}")
