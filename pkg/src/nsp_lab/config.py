"""Shared numeric tolerances and search defaults.

Every tolerance used by the library lives in this one record so that the
conventions (membership residuals, strict-inequality bands, feasibility
slack) are consistent across modules and visible in one place.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    orthonormality: float = 1e-10   # max |B^T B - I| for a subspace basis
    membership: float = 1e-10      # relative residual for "z lies in the subspace"
    boundary_margin: float = 1e-9  # trichotomy band on the normalized deficit
    property_rel: float = 1e-9     # relative slack in sampled property checks
    witness_ratio: float = 1e-9    # witness must reproduce its reported value this well
    feasibility: float = 1e-9      # solver feasibility slack
    strict_shrink: float = 1e-9    # closed-ball shrink factor for strict constraints
    mc_boundary_band: float = 1e-6  # Monte Carlo boundary-trial counting band


TOL = Tolerances()

# Log-spaced amplitude grid used whenever a penalty is not homogeneous and a
# supremum over all nonzero multiples of a direction has to be searched.
SCALE_GRID_LO = 1e-6
SCALE_GRID_HI = 1e6
SCALE_GRID_POINTS = 61

# Hard cap on explicit support enumeration; larger instances must supply
# their own support sampler rather than silently degrade.
SUPPORT_ENUMERATION_CAP = 100_000
