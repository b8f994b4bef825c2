"""Rate constants for hierarchical sequences.

The contraction factor of the zero-bias coupling is

    phi = sum |alpha_i|^3 / (sum alpha_i^2)^(3/2)

for ``alpha`` the gradient of F at the limiting mean; ``lambda = ||alpha||``
governs the variance decay. For the diamond lattice alpha does not depend
on the mean, so both constants are closed-form in the weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .combiner import Combiner
from .errors import ConvergenceError, DegenerateError, RangeError, WeightError

_EQ_TOL = 1e-12


@dataclass(frozen=True)
class RateReport:
    """Rate constants for a gradient ``alpha``.

    ``lambda_le_phi`` is ``None`` unless ``alpha`` is a convex weight vector
    (nonnegative, summing to 1), the case where ``lambda <= phi`` applies.
    """

    alpha: tuple
    lam: float
    phi: float
    c: Optional[float] = None
    weights: Optional[tuple] = None

    @property
    def k(self) -> int:
        return len(self.alpha)

    @property
    def lower_bound(self) -> float:
        return 1.0 / math.sqrt(self.k)

    @property
    def upper_bound(self) -> float:
        return 1.0

    @property
    def bounds_ok(self) -> bool:
        return self.lower_bound - _EQ_TOL <= self.phi <= self.upper_bound + _EQ_TOL

    @property
    def convex(self) -> bool:
        a = np.asarray(self.alpha)
        return bool(np.all(a >= 0) and abs(math.fsum(a) - 1.0) <= 1e-10)

    @property
    def lambda_le_phi(self) -> Optional[bool]:
        if not self.convex:
            return None
        return self.lam <= self.phi + _EQ_TOL

    @property
    def is_basis_multiple(self) -> bool:
        return int(np.count_nonzero(np.asarray(self.alpha))) == 1

    def as_dict(self) -> dict:
        d = {}
        if self.weights is not None:
            d["weights"] = ",".join(f"{v:.17g}" for v in self.weights)
        if self.c is not None:
            d["c"] = f"{self.c:.17g}"
        d["alpha"] = ",".join(f"{v:.17g}" for v in self.alpha)
        d["lambda"] = f"{self.lam:.17g}"
        d["phi"] = f"{self.phi:.17g}"
        d["phi_lower_bound"] = f"{self.lower_bound:.17g}"
        d["phi_upper_bound"] = "1"
        d["bounds_ok"] = str(self.bounds_ok).lower()
        d["convex"] = str(self.convex).lower()
        if self.lambda_le_phi is not None:
            d["lambda_le_phi"] = str(self.lambda_le_phi).lower()
        return d


def _alpha_array(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if a.size == 0 or not np.all(np.isfinite(a)):
        raise DegenerateError("gradient must be a finite nonempty vector")
    if not np.any(a != 0):
        raise DegenerateError("gradient is the zero vector; phi undefined")
    return a


def lambda_from_alpha(alpha) -> float:
    a = _alpha_array(alpha)
    return math.sqrt(math.fsum(a * a))


def phi_from_alpha(alpha) -> float:
    """``sum |a_i|^3 / (sum a_i^2)^(3/2)``, invariant under scaling of alpha."""
    a = np.abs(_alpha_array(alpha))
    # rescale first so cubes neither overflow nor underflow
    a = a / a.max()
    return math.fsum(a**3) / math.fsum(a * a) ** 1.5


def rate_report(alpha, c=None) -> RateReport:
    a = _alpha_array(alpha)
    return RateReport(tuple(float(v) for v in a), lambda_from_alpha(a), phi_from_alpha(a), c=c)


def diamond_alpha(w) -> np.ndarray:
    """Gradient of the diamond conductance on the diagonal ``c 1_4``."""
    w = _check_weights(w)
    inv = 1.0 / w
    top = inv[0] + inv[1]
    bot = inv[2] + inv[3]
    return np.array([inv[0] / top**2, inv[1] / top**2, inv[2] / bot**2, inv[3] / bot**2])


def _check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape[0] != 4:
        raise WeightError("diamond needs four weights")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise WeightError(f"diamond weights must be positive: {w.tolist()}")
    return w


def diamond_rates(w) -> RateReport:
    """Closed-form ``lambda`` and ``phi`` for the weighted diamond."""
    w = _check_weights(w)
    inv = 1.0 / w
    top = inv[0] + inv[1]
    bot = inv[2] + inv[3]
    lam = math.sqrt(
        (inv[0] ** 2 + inv[1] ** 2) / top**4 + (inv[2] ** 2 + inv[3] ** 2) / bot**4
    )
    cubes = math.fsum(
        [inv[0] ** 3 / top**6, inv[1] ** 3 / top**6, inv[2] ** 3 / bot**6, inv[3] ** 3 / bot**6]
    )
    phi = cubes / lam**3
    alpha = diamond_alpha(w)
    return RateReport(tuple(alpha.tolist()), lam, phi, weights=tuple(w.tolist()))


def side_weighted_family(w: float) -> np.ndarray:
    """Weights ``(w, w, 2 - w, 2 - w)`` for ``1 <= w < 2``."""
    w = float(w)
    if not 1.0 <= w < 2.0:
        raise RangeError(f"side-weighted family needs 1 <= w < 2, got {w}")
    return np.array([w, w, 2.0 - w, 2.0 - w])


def t_family(t: float) -> np.ndarray:
    """Weights ``(1 + 1/t, s, t, 1/t)`` with s chosen so that F(1_4) = 1."""
    t = float(t)
    if not (t > 0 and math.isfinite(t)):
        raise RangeError(f"t-family needs t > 0, got {t}")
    den = 1.0 / (1.0 - 1.0 / (1.0 / t + t)) - 1.0 / (1.0 + 1.0 / t)
    if not (den > 0 and math.isfinite(den)):
        raise DegenerateError(f"t-family weight s is degenerate at t = {t}")
    return np.array([1.0 + 1.0 / t, 1.0 / den, t, 1.0 / t])


def phi_sequence(c: Combiner, mean_path: Sequence[float]) -> list:
    """``phi_n`` from the gradient at ``c_n 1_k`` for each mean on the path."""
    return [phi_from_alpha(c.gradient(np.full(c.arity, float(m)))) for m in mean_path]


def estimate_limit_mean(
    c: Combiner,
    x0,
    tolerance: float = 1e-4,
    *,
    max_levels: int = 40,
    pool_size: int = 100_000,
    seed: int = 0,
):
    """Estimate ``lim c_n`` from a pooled simulation of the recursion.

    Returns ``(c, path)``; stops once ``|c_{n+1} - c_n| < tolerance``.
    """
    from .engine import SimConfig, iterate_pools

    cfg = SimConfig(
        combiner=c, x0=x0, levels=max_levels, pool_size=pool_size, seed=seed,
        mode="pooled",
    )
    path = []
    for pool in iterate_pools(cfg):
        path.append(float(np.mean(pool)))
        if len(path) >= 2 and abs(path[-1] - path[-2]) < tolerance:
            return path[-1], path
    raise ConvergenceError(
        f"mean path did not settle to {tolerance} within {max_levels} levels", path
    )
