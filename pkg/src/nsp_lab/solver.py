"""Penalty-minimizing recovery solvers and robustness experiments.

The solvers corroborate the null-space certificates; they never replace
them.  Ground truth for exact recovery is always the certificate, because
the noiseless minimization is non-convex for most penalties and descent can
stall in local minima; every result therefore records that global
optimality is not guaranteed.  ``enumerate`` is the exception within its
scope: it is exact among feasible candidates of sparsity at most k.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .config import TOL
from .measures import CostFunction
from .nsp import Violation, rrc_probe
from .nsp import _attack_candidates, _deficit_raw, _support_of
from .subspaces import MeasurementMatrix, as_rng, null_space

Array = np.ndarray

__all__ = [
    "RecoveryProblem",
    "SolveResult",
    "TrialRecord",
    "AdversarialPair",
    "RobustnessSweep",
    "solve_noiseless",
    "solve_noisy",
    "adversarial_pair",
    "empirical_robustness",
]

ENUMERATE_CAP = 100_000


@dataclass(frozen=True)
class RecoveryProblem:
    """A measurement y = A x + noise with a penalty and a sparsity level."""

    matrix: MeasurementMatrix
    y: Array
    epsilon: float
    cost: CostFunction
    k: int

    def __post_init__(self):
        m, n = self.matrix.shape
        y = np.asarray(self.y, dtype=float)
        if y.shape != (m,):
            raise ValueError(f"y must have shape ({m},), got {y.shape}")
        if self.cost.dimension != n:
            raise ValueError(f"cost dimension {self.cost.dimension} != {n}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.k < n:
            raise ValueError(f"need 0 <= k < n, got k={self.k}")
        object.__setattr__(self, "y", y.copy())


@dataclass
class SolveResult:
    x_hat: Array
    cost_value: float
    residual: float
    method: str
    iterations: int
    optimal_guaranteed: bool = False
    note: str = ""


def _grad_cost(cost: CostFunction, x: Array) -> Array:
    """Numerical subgradient of the separable cost, elementwise on an array;
    0 at coordinates pinned to zero (|x_i| < 1e-12), the kink convention."""
    ax = np.abs(x)
    h = 1e-7 * (1.0 + ax)
    slope = (cost.measure.fn(ax + h) - cost.measure.fn(np.maximum(ax - h, 0.0))) / (2.0 * h)
    g = slope * np.sign(x)
    g[ax < 1e-12] = 0.0
    return g


def _enumerate_candidates(problem: RecoveryProblem, residual_tol: float):
    """Feasible least-squares candidates on every support of size <= k."""
    a = problem.matrix.entries
    y = problem.y
    n = a.shape[1]
    total = sum(math.comb(n, s) for s in range(problem.k + 1))
    if total > ENUMERATE_CAP:
        raise ValueError(f"{total} supports exceed the enumeration cap {ENUMERATE_CAP}")
    out = []
    ynorm = np.linalg.norm(y)
    if ynorm <= residual_tol:
        out.append(np.zeros(n))
    for size in range(1, problem.k + 1):
        for idx in itertools.combinations(range(n), size):
            sub = a[:, list(idx)]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(sub @ coef - y) <= residual_tol:
                x = np.zeros(n)
                x[list(idx)] = coef
                out.append(x)
    return out


def solve_noiseless(
    problem: RecoveryProblem,
    method: str = "descent",
    seed: int = 0,
    starts: int = 32,
) -> SolveResult:
    """Minimize the cost over {x : Ax = y}.

    ``descent`` parametrizes the feasible set as x0 + N w (x0 the min-norm
    solution, N the null-space basis) and runs derivative-free multistart
    minimization over w.  ``irls`` applies reweighted least squares on the
    same affine set and requires a power-law penalty.  ``enumerate`` solves
    least squares on every support of size <= k and returns the feasible
    candidate of least cost: exact among sparse candidates, blind to denser
    minimizers.
    """
    if problem.epsilon != 0:
        raise ValueError("noiseless solver requires epsilon = 0")
    a = problem.matrix
    y = problem.y
    cost = problem.cost
    res_tol = TOL.feasibility * (1.0 + np.linalg.norm(y))

    if method == "enumerate":
        cands = _enumerate_candidates(problem, res_tol)
        if not cands:
            raise ValueError("no feasible candidate of sparsity <= k exists")
        vals = [cost.value(x) for x in cands]
        i = int(np.argmin(vals))
        x = cands[i]
        return SolveResult(
            x, vals[i], float(np.linalg.norm(a.entries @ x - y)), method, len(cands),
            note="exact among candidates of sparsity <= k; denser minimizers not examined",
        )

    x0 = a.min_norm_solution(y)
    if np.linalg.norm(a.entries @ x0 - y) > res_tol:
        raise ValueError("y is not in the range of A")  # pragma: no cover
    nbasis = null_space(a).basis
    l = nbasis.shape[1]

    if method == "irls":
        p = cost.measure.homogeneity_degree
        if p is None or not 0 < p <= 1:
            raise ValueError("irls applies to power-law penalties only")
        x = x0.copy()
        mu, iters = 1.0, 0
        while True:
            iters += 1
            q = (np.abs(x) + mu) ** (2.0 - p)
            aq = a.entries * q[None, :]
            x_new = q * (a.entries.T @ np.linalg.solve(aq @ a.entries.T, y))
            done = np.linalg.norm(x_new - x) <= 1e-12 * (1.0 + np.linalg.norm(x))
            x = x_new
            if iters % 10 == 0:
                if mu <= 1e-10:
                    if done:
                        break
                mu = max(mu / 2.0, 1e-10)
            if iters >= 600:
                break
        return SolveResult(
            x, cost.value(x), float(np.linalg.norm(a.entries @ x - y)), method, iters,
            note="fixed-point iteration; global optimality not guaranteed",
        )

    if method != "descent":
        raise ValueError(f"unknown method {method!r}")

    rng = as_rng(seed)
    scale = max(1.0, float(np.linalg.norm(x0)))
    w_starts = [np.zeros(l)]
    w_starts += [rng.standard_normal(l) * scale * s for s in (0.3, 1.0, 3.0) for _ in range(max(1, starts // 3))]

    def objective(w):
        return cost.value(x0 + nbasis @ w)

    best_w, best_v, iters = np.zeros(l), objective(np.zeros(l)), 0
    for w0 in w_starts[:starts]:
        res = scipy.optimize.minimize(objective, w0, method="Powell",
                                      options={"xtol": 1e-10, "ftol": 1e-12, "maxiter": 400})
        iters += int(res.nfev)
        if res.fun < best_v:
            best_v, best_w = float(res.fun), res.x
    x = x0 + nbasis @ best_w
    return SolveResult(
        x, cost.value(x), float(np.linalg.norm(a.entries @ x - y)), method, iters,
        note="multistart local descent; global optimality not guaranteed",
    )


# ---------------------------------------------------------------------------
# Noisy solver: projected multistart descent
# ---------------------------------------------------------------------------

def _project_columns(a: MeasurementMatrix, x_cols: Array, y: Array, radius: float) -> Array:
    """Project each column onto {x : ||Ax - y|| <= radius} (closest point).

    Works in the SVD coordinates of A: the null-space component is
    untouched; the row-space component solves a diagonal least-distance
    problem whose multiplier is found by vectorized bisection.
    """
    u, s, vrow = a.row_space_factors
    b = u.T @ y
    c = vrow @ x_cols                       # (m, S) row-space coordinates
    r = s[:, None] * c - b[:, None]
    norms = np.linalg.norm(r, axis=0)
    need = norms > radius
    if not need.any():
        return x_cols
    rn = r[:, need]
    s2 = (s * s)[:, None]
    lam = np.full(rn.shape[1], 1.0)
    # grow the multiplier until feasible, then bisect
    for _ in range(70):
        g = np.linalg.norm(rn / (1.0 + lam[None, :] * s2), axis=0)
        too_big = g > radius
        if not too_big.any():
            break
        lam[too_big] *= 8.0
    hi = lam
    lo = np.zeros_like(lam)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        g = np.linalg.norm(rn / (1.0 + mid[None, :] * s2), axis=0)
        over = g > radius
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    lam = hi  # feasible side of the bracket
    cn = c[:, need]
    w = (cn + lam[None, :] * s[:, None] * b[:, None]) / (1.0 + lam[None, :] * s2)
    out = x_cols.copy()
    out[:, need] += vrow.T @ (w - cn)
    return out


def solve_noisy(
    problem: RecoveryProblem,
    method: str = "descent",
    seed: int = 0,
    starts: int = 24,
    iters: int = 250,
    extra_starts: list | None = None,
) -> SolveResult:
    """Minimize the cost over the residual ball ||Ax - y|| <= eps(1 - 1e-9).

    The strict inequality of the problem statement is realized by the
    shrunk closed ball, which projection methods require; every output is
    feasibility-checked.  Multistart projected subgradient descent; starts
    include the min-norm solution, zero, random null-space offsets, sparse
    least-squares candidates and any caller-provided starts.
    """
    if problem.epsilon <= 0:
        raise ValueError("noisy solver requires epsilon > 0")
    if method != "descent":
        raise ValueError(f"unknown method {method!r}")
    a = problem.matrix
    y = problem.y
    cost = problem.cost
    radius = problem.epsilon * (1.0 - TOL.strict_shrink)
    rng = as_rng(seed)
    n = a.shape[1]

    x0 = a.min_norm_solution(y)
    nbasis = null_space(a).basis
    cols = [x0, np.zeros(n)]
    if extra_starts:
        cols += [np.asarray(x, dtype=float) for x in extra_starts]
    try:
        cands = _enumerate_candidates(
            RecoveryProblem(a, y, 0.0, cost, problem.k), residual_tol=problem.epsilon
        )
        cols += cands[:16]
    except ValueError:
        pass
    scale = max(1.0, float(np.linalg.norm(x0)))
    while len(cols) < starts:
        cols.append(x0 + nbasis @ rng.standard_normal(nbasis.shape[1]) * 0.5 * scale)
    x = _project_columns(a, np.column_stack(cols), y, radius)

    best_x = x[:, 0].copy()
    best_v = math.inf
    for t in range(iters):
        vals = cost.measure.fn(np.abs(x)).sum(axis=0)
        i = int(np.argmin(vals))
        if vals[i] < best_v:
            best_v = float(vals[i])
            best_x = x[:, i].copy()
        g = _grad_cost(cost, x)
        gn = np.linalg.norm(g, axis=0) + 1e-12
        xn = np.linalg.norm(x, axis=0)
        step = 0.3 * (xn + radius + 1e-12) / (gn * math.sqrt(1.0 + t))
        x = _project_columns(a, x - step[None, :] * g, y, radius)
    vals = cost.measure.fn(np.abs(x)).sum(axis=0)
    i = int(np.argmin(vals))
    if vals[i] < best_v:
        best_v, best_x = float(vals[i]), x[:, i].copy()

    # zeroing tiny coordinates often lands exactly on the sparse optimum
    polished = best_x.copy()
    polished[np.abs(polished) < 1e-10 * (1.0 + np.linalg.norm(polished))] = 0.0
    if np.linalg.norm(a.entries @ polished - y) <= radius and cost.value(polished) <= best_v:
        best_x, best_v = polished, cost.value(polished)

    residual = float(np.linalg.norm(a.entries @ best_x - y))
    return SolveResult(
        best_x, best_v, residual, method, iters,
        note="projected multistart descent; global optimality not guaranteed",
    )


# ---------------------------------------------------------------------------
# Adversarial construction and robustness sweeps
# ---------------------------------------------------------------------------

@dataclass
class AdversarialPair:
    """A signal/competitor pair realizing a large error-to-noise ratio.

    Built from a perturbed-inequality violation (z, n_vec, T): with
    u = z + n_vec, the signal is u restricted to T, the competitor is the
    negated complement part, and the noise is A(x_hat - x_bar)/2.  The
    competitor is feasible at noise level epsilon, costs no more than the
    signal, and its distance to the signal exceeds
    2 (1 - d) epsilon / (d sigma_max).
    """

    x_bar: Array
    x_hat: Array
    v: Array
    epsilon: float
    error: float
    ratio: float
    ratio_guarantee: float   # 2 (1 - d) / (d sigma_max), which the ratio must exceed
    violation: Violation


def adversarial_pair(
    a: MeasurementMatrix,
    cost: CostFunction,
    k: int,
    d: float,
    witness: Violation | None = None,
    probe_budget: int = 200_000,
    seed: int = 0,
) -> AdversarialPair:
    """Construct the pair from a violation witness, probing for one if needed."""
    if not 0 < d < 1:
        raise ValueError(f"need 0 < d < 1, got {d}")
    if witness is None:
        probe = rrc_probe(null_space(a), cost, k, d, budget=probe_budget, seed=seed)
        if not probe.violated:
            raise ValueError("no perturbed-inequality violation found at this radius")
        witness = probe.violation
    witness = _denullify_witness(a, cost, k, d, witness)
    u = witness.z + witness.n_vec
    n = u.size
    mask = np.zeros(n, dtype=bool)
    mask[list(witness.support)] = True
    x_bar = np.where(mask, u, 0.0)
    x_hat = np.where(mask, 0.0, -u)
    v = a.entries @ (x_hat - x_bar) / 2.0
    eps = float(np.linalg.norm(v))
    if eps <= 1e-14 * max(1.0, float(np.linalg.norm(u))) * a.sigma_max:
        raise ValueError("degenerate witness: the perturbation lies in the null space")
    error = float(np.linalg.norm(x_hat - x_bar))
    guarantee = 2.0 * (1.0 - d) / (d * a.sigma_max)
    return AdversarialPair(x_bar, x_hat, v, eps, error, error / eps, guarantee, witness)


def _denullify_witness(a, cost, k, d, witness: Violation) -> Violation:
    """Replace a violation whose perturbation lies in the null space.

    A zero (or null-space) perturbation makes the constructed noise vanish,
    so the pair degenerates; any violated instance admits a violation with
    a nonzero noise image, found among the closed-form perturbation starts.
    """
    noise_norm = float(np.linalg.norm(a.entries @ witness.n_vec))
    scale = max(1.0, float(np.linalg.norm(witness.z + witness.n_vec))) * a.sigma_max
    if noise_norm > 1e-12 * scale:
        return witness
    z = witness.z
    measure = cost.measure
    radius = d * float(np.linalg.norm(z)) * (1.0 - TOL.strict_shrink)
    best = None
    best_eps = 0.0
    for n0 in _attack_candidates(z, measure, k, radius):
        nrm = np.linalg.norm(n0)
        if nrm > radius:
            n0 = n0 * (radius / nrm)
        if _deficit_raw(z + n0, measure, k) < 0.0:
            continue
        eps = float(np.linalg.norm(a.entries @ n0))
        if eps > best_eps:
            best_eps, best = eps, n0
    if best is None or best_eps <= 1e-12 * scale:
        raise ValueError("degenerate witness: the perturbation lies in the null space")
    return Violation(z, best, _support_of(z + best, measure, k), _deficit_raw(z + best, measure, k))


@dataclass
class TrialRecord:
    x_true: Array
    x_hat: Array
    error: float
    epsilon: float
    cost_gap: float
    residual: float
    converged: bool
    solver_meta: str


@dataclass
class RobustnessSweep:
    records: list = field(default_factory=list)
    max_ratio: dict = field(default_factory=dict)     # eps -> worst error/eps
    excluded: dict = field(default_factory=dict)      # eps -> non-converged count


def write_trial_records_csv(path, records) -> None:
    """One CSV row per trial record (vectors JSON-encoded in their cells)."""
    import csv
    import json

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epsilon", "error", "ratio", "cost_gap", "residual",
                         "converged", "x_true", "x_hat", "solver_meta"])
        for r in records:
            writer.writerow([
                f"{r.epsilon:.17g}", f"{r.error:.17g}",
                f"{r.error / r.epsilon:.17g}" if r.epsilon > 0 else "inf",
                f"{r.cost_gap:.17g}", f"{r.residual:.17g}", int(r.converged),
                json.dumps([float(v) for v in r.x_true]),
                json.dumps([float(v) for v in r.x_hat]),
                r.solver_meta,
            ])


def empirical_robustness(
    a: MeasurementMatrix,
    cost: CostFunction,
    k: int,
    trials: int,
    epsilon_grid,
    seed: int = 0,
    starts: int = 24,
    iters: int = 250,
) -> RobustnessSweep:
    """Worst observed error-to-noise ratio of the noisy solver per noise level.

    Signals are k-sparse with standard normal entries on uniform supports;
    the noise is drawn just inside the tolerance (norm eps(1 - 1e-6)) so
    the true signal itself is admissible under the strict constraint.  The
    projection of the true signal is always among the solver starts, which
    keeps the returned cost at or below the signal cost.  Non-converged
    trials (feasibility violations) are excluded and counted.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m, n = a.shape
    sweep = RobustnessSweep()
    for ei, eps in enumerate(epsilon_grid):
        worst = 0.0
        excluded = 0
        for t in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence([seed, ei, t]))
            x_bar = np.zeros(n)
            if k > 0:
                support = rng.choice(n, size=k, replace=False)
                x_bar[support] = rng.standard_normal(k)
            v = rng.standard_normal(m)
            v *= (1.0 - 1e-6) * eps / np.linalg.norm(v)
            problem = RecoveryProblem(a, a.entries @ x_bar + v, eps, cost, k)
            result = solve_noisy(problem, seed=int(rng.integers(2**32)),
                                 starts=starts, iters=iters, extra_starts=[x_bar])
            err = float(np.linalg.norm(result.x_hat - x_bar))
            converged = result.residual <= eps + TOL.feasibility
            record = TrialRecord(
                x_bar, result.x_hat, err, float(eps),
                result.cost_value - cost.value(x_bar),
                result.residual, converged, result.note,
            )
            sweep.records.append(record)
            if converged:
                worst = max(worst, err / eps)
            else:
                excluded += 1
        sweep.max_ratio[float(eps)] = worst
        sweep.excluded[float(eps)] = excluded
    return sweep
