"""Gaussian widths of the failure cones and the rate-robustness formulas.

The failure set of a separable penalty at sparsity k is a symmetric cone;
its spherical section K collects unit vectors whose top-k cost is at least
half the total.  A Haar-random subspace avoids K with probability governed
by the Gaussian width w(K) = E sup_{x in K} g.x, which this module
estimates by Monte Carlo: per draw, the supremum is solved exactly for the
l1 cost (a convex cone projection per support class) and by a feasible
line-search lower bound otherwise.

Because the failure cone is a union of rays, the d-extended section is the
angular d-neighborhood of K, so its per-draw supremum follows from the
minimal angle to K by a trigonometric identity; the inequality
sup_{K_d} <= d ||g|| + sup_K is checked on every draw.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .config import SUPPORT_ENUMERATION_CAP
from .measures import CostFunction
from .subspaces import as_rng

Array = np.ndarray

__all__ = [
    "WidthEstimate",
    "TradeoffPoint",
    "OmegaHatBound",
    "width_mc",
    "width_extended",
    "zeta",
    "rv_bound",
    "gordon_bound",
    "omega_hat_bound",
    "delta_margin",
    "delta_positivity_threshold",
    "oracle_robustness_constant",
    "tradeoff",
    "chi_mean",
]


@dataclass
class WidthEstimate:
    mean: float
    std_error: float
    samples: int
    inner_search: str        # "whole_sphere" | "support_projection" | "multistart"
    is_lower_bound: bool


def chi_mean(n: int) -> float:
    """E ||g|| for an n-dimensional standard Gaussian vector."""
    return math.sqrt(2.0) * math.exp(math.lgamma((n + 1) / 2) - math.lgamma(n / 2))


def _gaussian_draws(n: int, draws: int, seed) -> Array:
    return as_rng(seed).standard_normal((n, draws))


def _support_masks(n: int, k: int) -> Array:
    count = math.comb(n, k)
    if count > SUPPORT_ENUMERATION_CAP:
        raise ValueError(
            f"C({n},{k}) = {count} supports exceed the enumeration cap; "
            "request the multistart inner search"
        )
    masks = np.zeros((count, n), dtype=bool)
    for i, T in enumerate(itertools.combinations(range(n), k)):
        masks[i, list(T)] = True
    return masks


def _sup_l1(g_abs: Array, k: int, chunk: int = 2048) -> Array:
    """Exact per-draw sup of g.x over the l1 failure section.

    Per support class the problem reduces, after aligning signs with g, to
    maximizing a linear functional over the unit sphere of the convex cone
    {v >= 0, sum_T v >= sum_{T^c} v}; the maximum is the norm of the cone
    projection of |g|, computed by bisecting the mass-balance equation.
    """
    n, total_draws = g_abs.shape
    if k >= n:
        return np.linalg.norm(g_abs, axis=0)
    masks = _support_masks(n, k)
    mf = masks.astype(float)
    out = np.empty(total_draws)
    for start in range(0, total_draws, chunk):
        a = g_abs[:, start:start + chunk]
        norms = np.linalg.norm(a, axis=0)
        st = mf @ a                       # (S, D) mass on T
        tot = a.sum(axis=0)
        slack = 2.0 * st - tot            # >= 0 means g itself is in the class
        lo = np.zeros_like(st)
        hi = np.broadcast_to(a.max(axis=0), st.shape).copy()
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            relu = np.maximum(a[None, :, :] - mid[:, None, :], 0.0)
            comp = np.einsum("sn,snd->sd", 1.0 - mf, relu)
            balance = st + k * mid - comp
            high = balance > 0
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        t = 0.5 * (lo + hi)
        relu = np.maximum(a[None, :, :] - t[:, None, :], 0.0)
        comp_sq = np.einsum("sn,snd->sd", 1.0 - mf, relu**2)
        grown = (a[None, :, :] + t[:, None, :]) ** 2
        top_sq = np.einsum("sn,snd->sd", mf, grown)
        vals = np.sqrt(top_sq + comp_sq)
        vals = np.where(slack >= 0.0, norms[None, :], vals)
        out[start:start + chunk] = vals.max(axis=0)
    return out


def _feasible_in_cone(u: Array, measure, k: int, scales: Array) -> Array:
    """Columns of u whose top-k cost reaches half the total at some scale."""
    fv = measure.fn(scales[:, None, None] * np.abs(u)[None, :, :])
    tot = fv.sum(axis=1)
    n = u.shape[0]
    if k >= n:
        top = tot
    else:
        part = np.partition(fv, n - k, axis=1)
        top = part[:, n - k:, :].sum(axis=1)
    return ((2.0 * top - tot) >= 0.0).any(axis=0)


def _sup_generic(g: Array, measure, k: int, scales: Array, bisect_iters: int = 30,
                 chunk: int = 512) -> Array:
    """Lower bound on the per-draw sup over the failure section of a general
    penalty: start from each support-restricted direction (always inside the
    cone) and line-search toward g along the sphere, keeping feasibility."""
    n, total_draws = g.shape
    masks = _support_masks(n, k)
    out = np.full(total_draws, -np.inf)
    for start in range(0, total_draws, chunk):
        gc = g[:, start:start + chunk]
        gn = np.linalg.norm(gc, axis=0)
        ghat = gc / gn
        best = np.full(gc.shape[1], -np.inf)
        whole = _feasible_in_cone(ghat, measure, k, scales)
        best = np.where(whole, gn, best)
        for m in masks:
            u0 = gc * m[:, None]
            u0n = np.linalg.norm(u0, axis=0)
            degenerate = u0n < 1e-12
            if degenerate.any():
                fallback = np.zeros_like(u0)
                fallback[np.argmax(m)] = 1.0
                u0 = np.where(degenerate[None, :], fallback, u0)
                u0n = np.linalg.norm(u0, axis=0)
            u0 = u0 / u0n
            lo = np.zeros(gc.shape[1])       # feasible fraction toward ghat
            hi = np.ones(gc.shape[1])
            for _ in range(bisect_iters):
                mid = 0.5 * (lo + hi)
                u = (1.0 - mid)[None, :] * u0 + mid[None, :] * ghat
                u /= np.linalg.norm(u, axis=0)
                ok = _feasible_in_cone(u, measure, k, scales)
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid)
            u = (1.0 - lo)[None, :] * u0 + lo[None, :] * ghat
            u /= np.linalg.norm(u, axis=0)
            vals = (gc * u).sum(axis=0)
            best = np.maximum(best, vals)
        out[start:start + chunk] = best
    return out


def _per_draw_sup(cost: CostFunction, k: int, g: Array, scale_points: int = 33):
    """(sup values, inner search label, is_lower_bound) for one batch."""
    n = cost.dimension
    measure = cost.measure
    if not measure.continuous:
        raise ValueError(f"width estimation requires a continuous measure, got {measure.name}")
    if k >= n:
        return np.linalg.norm(g, axis=0), "whole_sphere", False
    if measure.homogeneity_degree == 1.0:
        return _sup_l1(np.abs(g), k), "support_projection", False
    if measure.is_homogeneous:
        scales = np.array([1.0])
    else:
        scales = np.geomspace(1e-6, 1e6, scale_points)
    return _sup_generic(g, measure, k, scales), "multistart", True


def width_mc(cost: CostFunction, k: int, draws: int = 10_000, seed: int = 0) -> WidthEstimate:
    """Monte Carlo Gaussian width of the sparsity-k failure section."""
    if draws < 1:
        raise ValueError("draws must be >= 1")
    if not 1 <= k <= cost.dimension:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={cost.dimension}")
    g = _gaussian_draws(cost.dimension, draws, seed)
    sup, label, lower = _per_draw_sup(cost, k, g)
    se = float(sup.std(ddof=1) / math.sqrt(draws)) if draws > 1 else math.inf
    return WidthEstimate(float(sup.mean()), se, draws, label, lower)


def width_extended(
    cost: CostFunction,
    k: int,
    d: float,
    draws: int = 10_000,
    seed: int = 0,
) -> WidthEstimate:
    """Monte Carlo width of the d-extended failure section.

    Shares the Gaussian draws of :func:`width_mc` at the same seed, so the
    two estimates are paired.  Per draw, since the failure cone is a union
    of rays through the origin, the extended supremum is
    ||g|| cos(max(0, theta - arcsin(min(d, 1)))) where theta is the angle
    between g and the section; the bound sup_{K_d} <= d ||g|| + sup_K is
    asserted for every draw.
    """
    if d < 0:
        raise ValueError(f"need d >= 0, got {d}")
    if draws < 1:
        raise ValueError("draws must be >= 1")
    g = _gaussian_draws(cost.dimension, draws, seed)
    sup, label, lower = _per_draw_sup(cost, k, g)
    norms = np.linalg.norm(g, axis=0)
    theta = np.arccos(np.clip(sup / norms, -1.0, 1.0))
    alpha = math.asin(min(d, 1.0))
    sup_d = norms * np.cos(np.maximum(theta - alpha, 0.0))
    if not (sup_d <= d * norms + sup + 1e-9 * np.maximum(1.0, norms)).all():
        raise AssertionError("per-draw extended-width bound violated")  # pragma: no cover
    se = float(sup_d.std(ddof=1) / math.sqrt(draws)) if draws > 1 else math.inf
    return WidthEstimate(float(sup_d.mean()), se, draws, label, lower)


# ---------------------------------------------------------------------------
# Analytic width bound and escape probability
# ---------------------------------------------------------------------------

def zeta(n: int, k: int) -> float:
    """Correction factor in the analytic l1 width bound (natural logs)."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    ln_enk = 1.0 + math.log(n / k)
    return math.exp(math.log1p(2.0 * ln_enk) / (4.0 * ln_enk) + 1.0 / (24.0 * k * k * ln_enk))


def rv_bound(n: int, k: int) -> float:
    """Analytic upper bound 2 sqrt(k (3 + 2 ln(n/k))) zeta(n, k) on the l1 width."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return 2.0 * math.sqrt(k * (3.0 + 2.0 * math.log(n / k))) * zeta(n, k)


def gordon_bound(w: float, m: int) -> float:
    """Escape probability lower bound 1 - 2.5 exp(-(m/sqrt(m+1) - w)^2 / 18).

    Returns 0 when the width condition w < sqrt(m) fails or when the raw
    expression is negative, so parameter sweeps stay total.
    """
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    if not w < math.sqrt(m):
        return 0.0
    raw = 1.0 - 2.5 * math.exp(-((m / math.sqrt(m + 1.0) - w) ** 2) / 18.0)
    return max(0.0, raw)


@dataclass
class OmegaHatBound:
    bound: float
    width_value: float
    width_source: str
    condition_ok: bool   # w + d sqrt(n) < sqrt(m)


def omega_hat_bound(
    cost: CostFunction,
    m: int,
    k: int,
    d: float,
    width_source: str = "auto",
    draws: int = 10_000,
    seed: int = 0,
) -> OmegaHatBound:
    """Lower bound on the Haar measure of radius-d robust null spaces.

    Uses the analytic l1 width bound or a Monte Carlo width, then applies
    the escape probability at effective width w + d sqrt(n).  When the
    condition w + d sqrt(n) < sqrt(m) fails the bound is 0 and the flag
    records it.
    """
    n = cost.dimension
    if width_source == "auto":
        width_source = "rv" if cost.measure.homogeneity_degree == 1.0 else "mc"
    if width_source == "rv":
        if cost.measure.homogeneity_degree != 1.0:
            raise ValueError("the analytic width bound applies to the l1 cost only")
        w = rv_bound(n, k)
    elif width_source == "mc":
        w = width_mc(cost, k, draws=draws, seed=seed).mean
    else:
        w = float(width_source)
        width_source = "explicit"
    effective = w + d * math.sqrt(n)
    ok = effective < math.sqrt(m)
    bound = gordon_bound(effective, m) if ok else 0.0
    return OmegaHatBound(bound, w, width_source, ok)


# ---------------------------------------------------------------------------
# Linear-growth tradeoff
# ---------------------------------------------------------------------------

def delta_margin(beta: float, gamma: float) -> float:
    """Robustness margin delta(beta, gamma) in the linear-growth regime
    n = floor(beta k), m = ceil(gamma k); natural logs throughout."""
    _validate_growth(beta, gamma)
    lnb = math.log(beta)
    ln_eb = 1.0 + lnb
    bound = 2.0 * math.sqrt(3.0 + 2.0 * lnb) * math.exp(math.log1p(2.0 * ln_eb) / (4.0 * ln_eb))
    return (math.sqrt(gamma) - bound) / math.sqrt(beta)


def delta_positivity_threshold(beta: float) -> float:
    """The gamma above which delta(beta, gamma) is positive."""
    if beta <= 1:
        raise ValueError(f"need beta > 1, got {beta}")
    lnb = math.log(beta)
    ln_eb = 1.0 + lnb
    return 4.0 * (3.0 + 2.0 * lnb) * math.exp(math.log1p(2.0 * ln_eb) / (2.0 * ln_eb))


def oracle_robustness_constant(gamma: float) -> float:
    """Error constant of the support-aware least-squares oracle, 1/(1 - gamma^{-1/2})."""
    if gamma <= 1:
        raise ValueError(f"need gamma > 1, got {gamma}")
    return 1.0 / (1.0 - 1.0 / math.sqrt(gamma))


def _validate_growth(beta: float, gamma: float) -> None:
    if not beta > gamma >= 1:
        raise ValueError(f"need beta > gamma >= 1, got beta={beta}, gamma={gamma}")


@dataclass
class TradeoffPoint:
    beta: float
    gamma: float
    delta: float
    C: float | None              # robustness constant, present iff delta > 0
    gordon_bound: float          # finite-size escape probability at d = d_fraction * delta
    oracle_constant: float | None


def tradeoff(
    beta: float,
    gamma: float,
    use_oracle_comparison: bool = True,
    k_ref: int = 200,
    d_fraction: float = 0.5,
) -> TradeoffPoint:
    """Evaluate the rate-robustness tradeoff at one (beta, gamma) point.

    ``gordon_bound`` reports the finite-size escape probability at the
    reference sparsity ``k_ref`` with the perturbation radius set to
    ``d_fraction * delta`` (0 when delta <= 0): the asymptotic statement is
    probability-one, so any finite plug-in is a convention and this one is
    recorded with the point.
    """
    delta = delta_margin(beta, gamma)
    c_val = None
    if delta > 0:
        c_val = 2.0 * (1.0 + delta) / (delta * (1.0 - math.sqrt(gamma / beta)))
    n = int(math.floor(beta * k_ref))
    m = int(math.ceil(gamma * k_ref))
    d = d_fraction * max(delta, 0.0)
    gb = gordon_bound(rv_bound(n, k_ref) + d * math.sqrt(n), m)
    oracle = None
    if use_oracle_comparison and gamma > 1:
        oracle = oracle_robustness_constant(gamma)
    return TradeoffPoint(beta, gamma, delta, c_val, gb, oracle)
