"""Null-space certificates for sparse recovery by separable penalties.

The central quantity is, for a unit vector z in a candidate null space and a
support T of size at most k, the split of the cost J between T and its
complement.  With q = J(z_T) / J(z), the normalized deficit 2q - 1 is
negative exactly when J(z_T) < J(z_{T^c}).  Exact recovery of all k-sparse
signals holds iff the deficit is negative for every nonzero z in the null
space and every such T; robustness at radius d additionally requires the
strict inequality to survive every perturbation n with ||n|| < d ||z||.

For homogeneous penalties the supremum over z reduces to the unit sphere of
the subspace.  For general penalties the value is scale dependent (which is
precisely what makes robustness fail on the boundary), so the search runs
over a logarithmic amplitude grid with local refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import (
    SCALE_GRID_HI,
    SCALE_GRID_LO,
    SCALE_GRID_POINTS,
    SUPPORT_ENUMERATION_CAP,
    TOL,
)
from .measures import CostFunction, SparsenessMeasure
from .subspaces import Subspace, as_rng

Array = np.ndarray

__all__ = [
    "SearchSettings",
    "NspVerdict",
    "NscReport",
    "ErcVerdict",
    "Violation",
    "RobustnessProbe",
    "RegionMap",
    "Ce1Membership",
    "nsp_check",
    "nsc",
    "erc_member",
    "rrc_probe",
    "robustness_constant",
    "converse_constant",
    "ce1_membership",
    "region_boundary_map",
]


@dataclass(frozen=True)
class SearchSettings:
    """Search resolution knobs shared by the certificate routines."""

    direction_grid: int = 720      # angles for dim 2, random directions beyond
    refine_peaks: int = 5          # distinct landscape peaks refined per scan
    refine_iters: int = 36         # golden-section iterations per refinement
    scale_lo: float = SCALE_GRID_LO
    scale_hi: float = SCALE_GRID_HI
    scale_points: int = SCALE_GRID_POINTS
    probe_candidates: int = 10     # (z, t) candidates attacked by the probe
    attack_steps: int = 60         # ascent steps per perturbation attack
    support_cap: int = SUPPORT_ENUMERATION_CAP


DEFAULT_SETTINGS = SearchSettings()


def _check_support_budget(n: int, k: int, settings: SearchSettings) -> None:
    if math.comb(n, max(k, 0)) > settings.support_cap:
        raise ValueError(
            f"support space C({n},{k}) exceeds the enumeration cap "
            f"{settings.support_cap}; supply a custom support sampler"
        )


def _scale_grid(measure: SparsenessMeasure, settings: SearchSettings) -> Array:
    if measure.is_homogeneous:
        return np.array([1.0])
    return np.geomspace(settings.scale_lo, settings.scale_hi, settings.scale_points)


def _topk_total(fv: Array, k: int) -> tuple[Array, Array]:
    """Sum of the k largest entries along axis 1, and the full sum."""
    tot = fv.sum(axis=1)
    n = fv.shape[1]
    if k <= 0:
        return np.zeros_like(tot), tot
    if k >= n:
        return tot.copy(), tot
    part = np.partition(fv, n - k, axis=1)
    return part[:, n - k:, :].sum(axis=1), tot


def _q_columns(z_cols: Array, measure: SparsenessMeasure, k: int, scales: Array):
    """q = J(z_T)/J(z) maximized over supports, per (scale, column).

    For fixed z the maximizing support of size <= k is the top-k of the
    per-coordinate penalties, because moving any coordinate into T can only
    increase J(z_T) and decrease J(z_{T^c}).
    """
    fv = measure.fn(scales[:, None, None] * np.abs(z_cols)[None, :, :])
    top, tot = _topk_total(fv, k)
    with np.errstate(invalid="ignore"):
        q = np.where(tot > 0, top / tot, 0.0)
    return q, fv.size


def _q_single(z: Array, measure: SparsenessMeasure, k: int, scales: Array):
    """Best q over the scale grid for one direction; returns (q, scale)."""
    q, _ = _q_columns(z.reshape(-1, 1), measure, k, scales)
    i = int(np.argmax(q[:, 0]))
    return float(q[i, 0]), float(scales[i])


def _golden_max(fun, lo: float, hi: float, iters: int):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
    mid = 0.5 * (a + b)
    return mid, fun(mid)


@dataclass
class _Candidate:
    q: float
    direction: Array   # unit vector in R^n lying in the subspace
    scale: float


def _refine_scale(direction, measure, k, settings) -> tuple[float, float]:
    """Maximize q over the amplitude within the allowed scale window."""
    scales = _scale_grid(measure, settings)
    if scales.size == 1:
        q, _ = _q_single(direction, measure, k, scales)
        return q, 1.0
    q0, t0 = _q_single(direction, measure, k, scales)
    lg = math.log10(t0)
    step = math.log10(scales[1] / scales[0])
    lo = max(math.log10(settings.scale_lo), lg - step)
    hi = min(math.log10(settings.scale_hi), lg + step)

    def fun(lt):
        f = measure.fn(10.0**lt * np.abs(direction))
        tot = f.sum()
        n = f.size
        top = tot if k >= n else (0.0 if k <= 0 else np.partition(f, n - k)[n - k:].sum())
        return top / tot if tot > 0 else 0.0

    lt_best, q_best = _golden_max(fun, lo, hi, settings.refine_iters)
    if q_best >= q0:
        return float(q_best), float(10.0**lt_best)
    return q0, t0


def _scan_subspace(sub, measure, k, settings, rng) -> tuple[list, int]:
    """Ranked (q, direction, scale) candidates over the subspace.

    dim 1: the generator itself.  dim 2: a half-circle angle grid with
    golden-section refinement of the best distinct peaks.  dim >= 3: random
    unit directions with hill climbing from the best starts.
    """
    l = sub.dim
    scales = _scale_grid(measure, settings)
    evals = 0

    if l == 1:
        direction = sub.basis[:, 0]
        q, t = _refine_scale(direction, measure, k, settings)
        return [_Candidate(q, direction, t)], direction.size * scales.size

    if l == 2:
        grid = settings.direction_grid
        ang = np.linspace(0.0, math.pi, grid, endpoint=False)
        w = np.vstack([np.cos(ang), np.sin(ang)])
        z_cols = sub.basis @ w
        q, ev = _q_columns(z_cols, measure, k, scales)
        evals += ev
        per_col = q.max(axis=0)
        order = np.argsort(per_col)[::-1]
        peaks: list[int] = []
        min_sep = max(2, grid // 90)
        for idx in order:
            if all(min(abs(idx - p), grid - abs(idx - p)) > min_sep for p in peaks):
                peaks.append(int(idx))
            if len(peaks) >= settings.refine_peaks:
                break

        cands = []
        step = math.pi / grid

        def q_at_angle(theta):
            z = sub.basis @ np.array([math.cos(theta), math.sin(theta)])
            return _q_single(z, measure, k, scales)[0]

        for p in peaks:
            theta, _ = _golden_max(q_at_angle, ang[p] - step, ang[p] + step, settings.refine_iters)
            z = sub.basis @ np.array([math.cos(theta), math.sin(theta)])
            qq, tt = _refine_scale(z, measure, k, settings)
            evals += settings.refine_iters * scales.size
            cands.append(_Candidate(qq, z, tt))
        cands.sort(key=lambda c: c.q, reverse=True)
        return cands, evals

    # dim >= 3: sampled directions plus hill climbing
    w = rng.standard_normal((l, settings.direction_grid))
    w /= np.linalg.norm(w, axis=0)
    z_cols = sub.basis @ w
    q, ev = _q_columns(z_cols, measure, k, scales)
    evals += ev
    per_col = q.max(axis=0)
    order = np.argsort(per_col)[::-1][: settings.refine_peaks]

    cands = []
    for idx in order:
        wv = w[:, idx].copy()
        best_q, _ = _q_single(sub.basis @ wv, measure, k, scales)
        sigma = 0.5
        for _ in range(settings.attack_steps):
            prop = wv + sigma * rng.standard_normal(l)
            prop /= np.linalg.norm(prop)
            qq, _ = _q_single(sub.basis @ prop, measure, k, scales)
            evals += scales.size * sub.ambient_dim
            if qq > best_q:
                best_q, wv = qq, prop
            else:
                sigma *= 0.85
                if sigma < 1e-4:
                    break
        z = sub.basis @ wv
        qq, tt = _refine_scale(z, measure, k, settings)
        cands.append(_Candidate(qq, z, tt))
    cands.sort(key=lambda c: c.q, reverse=True)
    return cands, evals


def _support_of(u: Array, measure: SparsenessMeasure, k: int) -> tuple[int, ...]:
    f = measure.fn(np.abs(u))
    if k <= 0:
        return ()
    if k >= u.size:
        return tuple(range(u.size))
    return tuple(sorted(int(i) for i in np.argpartition(f, u.size - k)[u.size - k:]))


def _deficit_raw(u: Array, measure: SparsenessMeasure, k: int) -> float:
    f = measure.fn(np.abs(u))
    tot = float(f.sum())
    n = u.size
    if k <= 0:
        top = 0.0
    elif k >= n:
        top = tot
    else:
        top = float(np.partition(f, n - k)[n - k:].sum())
    return 2.0 * top - tot


# ---------------------------------------------------------------------------
# Exact-recovery certificates
# ---------------------------------------------------------------------------

@dataclass
class NspVerdict:
    """Outcome of the strict null-space inequality search.

    ``margin`` is the worst normalized slack min (J(z_{T^c}) - J(z_T)) / J(z)
    over the sampled search space: positive when the inequality holds with
    room, negative when a violating pair was found.
    """

    status: str                 # "holds_strict" | "fails" | "boundary"
    margin: float
    witness_z: Array
    witness_T: tuple
    evaluations: int

    @property
    def holds(self) -> bool:
        return self.status == "holds_strict"


def nsp_check(
    sub: Subspace,
    cost: CostFunction,
    k: int,
    settings: SearchSettings = DEFAULT_SETTINGS,
    seed: int = 0,
) -> NspVerdict:
    """Decide J(z_T) < J(z_{T^c}) for all nonzero z in the subspace, |T| <= k.

    Maximizes the normalized deficit over directions, amplitudes and
    supports.  ``fails`` carries a direct witness; ``holds_strict`` is a
    search result at the configured resolution; ``boundary`` flags an
    extremal deficit inside the strictness band, where the float answer is
    not decidable.
    """
    _validate_problem(sub, cost, k, settings)
    cands, evals = _scan_subspace(sub, cost.measure, k, settings, as_rng(seed))
    best = cands[0]
    deficit_norm = 2.0 * best.q - 1.0
    witness = best.scale * best.direction
    support = _support_of(witness, cost.measure, k)
    if deficit_norm >= TOL.boundary_margin:
        status = "fails"
    elif deficit_norm <= -TOL.boundary_margin:
        status = "holds_strict"
    else:
        status = "boundary"
    return NspVerdict(status, -deficit_norm, witness, support, evals)


def _validate_problem(sub, cost, k, settings):
    n = sub.ambient_dim
    if cost.dimension != n:
        raise ValueError(f"cost dimension {cost.dimension} != ambient dimension {n}")
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < n, got k={k}")
    _check_support_budget(n, k, settings)


@dataclass
class NscReport:
    """The supremal support-to-complement cost ratio over a null space."""

    theta: float
    witness_z: Array
    witness_T: tuple
    method: str                # "exact_1d" | "sphere_enum" | "multistart"
    evaluations: int
    is_lower_bound: bool

    @property
    def finite(self) -> bool:
        return math.isfinite(self.theta)


def nsc(
    sub: Subspace,
    cost: CostFunction,
    k: int,
    settings: SearchSettings = DEFAULT_SETTINGS,
    seed: int = 0,
) -> NscReport:
    """Null space constant: sup over z of the maximal J(z_T)/J(z_{T^c}).

    Exact for one-dimensional subspaces with a homogeneous penalty (a single
    direction; the maximizing support is the top-k of the coordinate
    penalties).  Otherwise the reported value is the best found and is
    flagged as a lower bound.  A ratio with vanishing denominator (z
    supported inside T) is reported as +inf.
    """
    _validate_problem(sub, cost, k, settings)
    cands, evals = _scan_subspace(sub, cost.measure, k, settings, as_rng(seed))
    best = cands[0]
    witness = best.scale * best.direction
    support = _support_of(witness, cost.measure, k)
    theta = best.q / (1.0 - best.q) if best.q < 1.0 else math.inf
    l = sub.dim
    method = "exact_1d" if l == 1 else ("sphere_enum" if l == 2 else "multistart")
    lower_bound = not (l == 1 and cost.measure.is_homogeneous)
    return NscReport(theta, witness, support, method, evals, lower_bound)


@dataclass
class ErcVerdict:
    member: bool
    margin: float
    boundary: bool
    theta: float | None
    method: str


def erc_member(
    sub: Subspace,
    cost: CostFunction,
    k: int,
    settings: SearchSettings = DEFAULT_SETTINGS,
    seed: int = 0,
) -> ErcVerdict:
    """Membership of the exact-recovery set, with a margin.

    For homogeneous penalties the test is theta < 1 with margin 1 - theta
    (exact in dimension one).  For general penalties it is the strict
    inequality search of :func:`nsp_check`, whose normalized margin is
    returned.
    """
    if cost.measure.is_homogeneous:
        report = nsc(sub, cost, k, settings=settings, seed=seed)
        margin = -math.inf if not report.finite else 1.0 - report.theta
        return ErcVerdict(
            member=report.theta < 1.0,
            margin=margin,
            boundary=abs(margin) < TOL.mc_boundary_band if report.finite else False,
            theta=report.theta,
            method=report.method,
        )
    verdict = nsp_check(sub, cost, k, settings=settings, seed=seed)
    return ErcVerdict(
        member=verdict.holds,
        margin=verdict.margin,
        boundary=abs(verdict.margin) < TOL.mc_boundary_band,
        theta=None,
        method="deficit_search",
    )


# ---------------------------------------------------------------------------
# Robustness probe
# ---------------------------------------------------------------------------

@dataclass
class Violation:
    """A certified perturbed-inequality failure: J(u_T) >= J(u_{T^c}) at
    u = z + n_vec with z in the subspace and ||n_vec|| < d ||z||."""

    z: Array
    n_vec: Array
    support: tuple
    deficit: float


@dataclass
class RobustnessProbe:
    """Outcome of the radius-d perturbation search.

    ``violated`` is sound (the witness was verified by direct evaluation).
    ``passed_at_resolution`` is one-sided: no violation surfaced within the
    budget.  The set a pass refers to is a convention, surfaced in
    ``set_convention`` rather than silently chosen: the violation-free set
    at radius d contains the d-interior of the exact-recovery set and is
    contained in its d/(1+d)-interior, so a (true) pass certifies interior
    membership only at the smaller radius ``implied_interior_radius``.
    """

    d: float
    outcome: str            # "violated" | "passed_at_resolution"
    violation: Violation | None
    search_budget: int
    evaluations: int
    set_convention: str = "violation_free_at_resolution"

    @property
    def violated(self) -> bool:
        return self.outcome == "violated"

    @property
    def implied_interior_radius(self) -> float:
        return self.d / (1.0 + self.d)


def _attack_candidates(z, measure, k, radius):
    """Perturbation starts: sign-aligned pushes, coordinate erasures."""
    n = z.size
    f = measure.fn(np.abs(z))
    if k <= 0:
        order_t = np.array([], dtype=int)
    else:
        order_t = np.argsort(f)[::-1][:k]
    in_t = np.zeros(n, dtype=bool)
    in_t[order_t] = True
    sgn = np.where(z >= 0, 1.0, -1.0)

    cands = [np.zeros(n)]
    # grow T coordinates, shrink the rest
    s = np.where(in_t, sgn, -sgn)
    cands.append(radius * s / np.linalg.norm(s))
    # marginal-gain weighting by the numerical slope of F
    h = 1e-7 * (1.0 + np.abs(z))
    slope = (measure.fn(np.abs(z) + h) - measure.fn(np.maximum(np.abs(z) - h, 0.0))) / (2 * h)
    w = s * np.abs(slope)
    nw = np.linalg.norm(w)
    if nw > 0:
        cands.append(radius * w / nw)
    # erase complement coordinates, smallest first
    comp = [i for i in np.argsort(np.abs(z)) if not in_t[i]]
    erase = np.zeros(n)
    left = radius * radius
    for i in comp:
        need = z[i] * z[i]
        if need <= left:
            erase[i] = -z[i]
            left -= need
        else:
            erase[i] = -sgn[i] * math.sqrt(left)
            left = 0.0
            break
    cands.append(erase)
    # single-coordinate pushes
    for i in comp[:3]:
        e = np.zeros(n)
        e[i] = -sgn[i] * min(radius, abs(z[i]))
        cands.append(e)
    for i in order_t[:2]:
        e = np.zeros(n)
        e[i] = sgn[i] * radius
        cands.append(e)
    return cands


def _attack_quick(z, measure, k, radius):
    """Evaluate the closed-form perturbation starts only."""
    best_n = np.zeros(z.size)
    best = _deficit_raw(z, measure, k)
    evals = 1
    for n0 in _attack_candidates(z, measure, k, radius):
        cur = n0
        nrm = np.linalg.norm(cur)
        if nrm > radius:
            cur = cur * (radius / nrm)
        val = _deficit_raw(z + cur, measure, k)
        evals += 1
        if val > best:
            best, best_n = val, cur
    return best, best_n, evals


def _attack_ascend(z, measure, k, radius, n0, steps):
    """Projected gradient ascent of the deficit over the perturbation ball."""
    cur = n0.copy()
    val = _deficit_raw(z + cur, measure, k)
    evals = 1
    step = 0.25 * radius
    h = 1e-6 * radius
    for _ in range(steps):
        grad = np.zeros(z.size)
        for i in range(z.size):
            cur[i] += h
            up = _deficit_raw(z + cur, measure, k)
            cur[i] -= 2 * h
            dn = _deficit_raw(z + cur, measure, k)
            cur[i] += h
            grad[i] = (up - dn) / (2 * h)
        evals += 2 * z.size
        gn = np.linalg.norm(grad)
        if gn == 0:
            break
        prop = cur + step * grad / gn
        nrm = np.linalg.norm(prop)
        if nrm > radius:
            prop *= radius / nrm
        pv = _deficit_raw(z + prop, measure, k)
        evals += 1
        if pv > val:
            cur, val = prop, pv
        else:
            step *= 0.5
            if step < 1e-12 * radius:
                break
    return val, cur, evals


def rrc_probe(
    sub: Subspace,
    cost: CostFunction,
    k: int,
    d: float,
    budget: int = 200_000,
    settings: SearchSettings = DEFAULT_SETTINGS,
    seed: int = 0,
) -> RobustnessProbe:
    """Search for a perturbed-inequality violation at radius d.

    Scans the deficit landscape over the subspace, then attacks the best
    candidates with perturbations from the open ball of radius d ||z||.
    A returned violation is re-verified by direct evaluation; a pass only
    certifies that the budgeted search found nothing.
    """
    if d <= 0:
        raise ValueError(f"need d > 0, got {d}")
    if budget < 1:
        raise ValueError(f"need budget >= 1, got {budget}")
    _validate_problem(sub, cost, k, settings)
    measure = cost.measure
    rng = as_rng(seed)
    shrink = 1.0 - TOL.strict_shrink

    cands, evals = _scan_subspace(sub, measure, k, settings, rng)

    def make_violation(z, n_vec):
        deficit = _deficit_raw(z + n_vec, measure, k)
        support = _support_of(z + n_vec, measure, k)
        if deficit < 0.0:
            return None
        if np.linalg.norm(n_vec) >= d * np.linalg.norm(z):
            return None
        if not sub.contains(z):
            return None
        return Violation(z, n_vec, support, deficit)

    # unperturbed failures first: any nonnegative deficit already violates
    for cand in cands[: settings.probe_candidates]:
        z = cand.scale * cand.direction
        if 2.0 * cand.q - 1.0 >= 0.0:
            v = make_violation(z, np.zeros(z.size))
            if v is not None:
                return RobustnessProbe(d, "violated", v, budget, evals)

    # phase 1: cheap closed-form perturbations on every (direction, scale)
    # pair; for scale-sensitive penalties the violating amplitude may differ
    # from the amplitude maximizing the unperturbed deficit
    scale_grid = _scale_grid(measure, settings)
    pairs = []
    for cand in cands[: settings.probe_candidates]:
        if measure.is_homogeneous:
            trial_scales = [cand.scale]
        else:
            trial_scales = sorted(set(scale_grid[:: max(1, scale_grid.size // 24)]) | {cand.scale})
        for t in trial_scales:
            z = t * cand.direction
            radius = d * float(np.linalg.norm(z)) * shrink
            val, n_vec, ev = _attack_quick(z, measure, k, radius)
            evals += ev
            if val >= 0.0:
                v = make_violation(z, n_vec)
                if v is not None:
                    return RobustnessProbe(d, "violated", v, budget, evals)
            pairs.append((val / max(radius, 1e-300), z, radius, n_vec))
            if evals >= budget:
                return RobustnessProbe(d, "passed_at_resolution", None, budget, evals)

    # phase 2: gradient ascent from the most promising pairs only
    pairs.sort(key=lambda p: p[0], reverse=True)
    for _, z, radius, n0 in pairs[:4]:
        val, n_vec, ev = _attack_ascend(z, measure, k, radius, n0, settings.attack_steps)
        evals += ev
        if val >= 0.0:
            v = make_violation(z, n_vec)
            if v is not None:
                return RobustnessProbe(d, "violated", v, budget, evals)
        if evals >= budget:
            break
    return RobustnessProbe(d, "passed_at_resolution", None, budget, evals)


def robustness_constant(d: float, sigma_min: float) -> float:
    """Recovery-error constant guaranteed by radius-d robustness: 2(1+d)/(d sigma_min)."""
    if d <= 0:
        raise ValueError(f"need d > 0, got {d}")
    if sigma_min <= 0:
        raise ValueError(f"need sigma_min > 0, got {sigma_min}")
    return 2.0 * (1.0 + d) / (d * sigma_min)


def converse_constant(d: float, sigma_max: float) -> float:
    """Constant below which robustness forces radius-d membership: 2(1-2d)/(d sigma_max)."""
    if not 0 < d < 0.5:
        raise ValueError(f"need 0 < d < 1/2, got {d}")
    if sigma_max <= 0:
        raise ValueError(f"need sigma_max > 0, got {sigma_max}")
    return 2.0 * (1.0 - 2.0 * d) / (d * sigma_max)


# ---------------------------------------------------------------------------
# Closed-form oracle for the exponential measure on lines in R^3
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ce1Membership:
    """Closed-form recovery-set classification of a line in R^3 under the
    exponential measure at sparsity one: inside iff 2 max|g_i| <= sum|g_i|."""

    verdict: str   # "interior" | "boundary" | "outside"
    margin: float  # sum|g| - 2 max|g| for the unit generator

    @property
    def in_omega(self) -> bool:
        return self.verdict != "outside"


def ce1_membership(sub: Subspace, tol: float = 1e-12) -> Ce1Membership:
    if sub.ambient_dim != 3 or sub.dim != 1:
        raise ValueError("classifier applies to lines in R^3 only")
    g = np.abs(sub.basis[:, 0])
    margin = float(g.sum() - 2.0 * g.max())
    if margin > tol:
        verdict = "interior"
    elif margin < -tol:
        verdict = "outside"
    else:
        verdict = "boundary"
    return Ce1Membership(verdict, margin)


# ---------------------------------------------------------------------------
# Two-parameter region map
# ---------------------------------------------------------------------------

@dataclass
class RegionMap:
    """Grid classification of (a, b) by satisfiability of
    F(x) + F(y) <= F(a x + b y) for some (x, y) >= 0, (x, y) != 0.

    ``region_a[i, j]`` is True when a witness exists at (a_values[i],
    b_values[j]).  ``upward_closed`` records whether the found region is
    closed upward in both parameters, as it must be for a non-decreasing
    penalty.
    """

    a_values: Array
    b_values: Array
    region_a: Array
    upward_closed: bool
    upward_violations: int
    candidates_used: int


def region_boundary_map(
    measure: SparsenessMeasure,
    grid: tuple[int, int] = (200, 200),
    domain: tuple[float, float] = (2.0, 2.0),
    candidate_points: int = 25,
) -> RegionMap:
    """Classify an (a, b) grid by searching witnesses (x, y) on a log grid.

    The witness search uses pure evaluation (axis candidates, the diagonal
    and a log-log product grid), so a point is classified into region A as
    soon as one candidate satisfies the inequality; no tolerance is added,
    which keeps the boundary exact for exactly-representable cases.
    """
    rows, cols = grid
    if rows < 2 or cols < 2:
        raise ValueError(f"grid must be at least 2x2, got {grid}")
    a_max, b_max = domain
    if a_max <= 0 or b_max <= 0:
        raise ValueError(f"domain bounds must be positive, got {domain}")

    a_vals = np.linspace(0.0, a_max, rows)
    b_vals = np.linspace(0.0, b_max, cols)
    a_col = a_vals[:, None]
    b_row = b_vals[None, :]

    xs = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, candidate_points)])
    region = np.zeros((rows, cols), dtype=bool)
    used = 0
    for x in xs:
        for y in xs:
            if x == 0.0 and y == 0.0:
                continue
            fxy = measure.fn(np.array([x, y]))
            lhs = float(fxy[0] + fxy[1])
            rhs = measure.fn(np.abs(a_col * x + b_row * y))
            np.logical_or(region, rhs >= lhs, out=region)
            used += 1

    ok_rows = (region[:-1, :] <= region[1:, :]).all()
    ok_cols = (region[:, :-1] <= region[:, 1:]).all()
    violations = int((region[:-1, :] > region[1:, :]).sum() + (region[:, :-1] > region[:, 1:]).sum())
    return RegionMap(a_vals, b_vals, region, bool(ok_rows and ok_cols), violations, used)
