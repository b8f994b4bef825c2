"""Exact zero-bias transform of finitely supported laws and its couplings.

For a mean-zero W with variance sigma^2 the zero-bias law W* is the one with

    E[W f(W)] = sigma^2 E[f'(W*)]

for all absolutely continuous f. When W takes finitely many values the
density of W* is ``E[W 1(W > w)] / sigma^2``, constant between consecutive
atoms, so W* is a :class:`~hierlat.dist.PiecewiseUniformDist` and every
quantity below is computed without quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from numpy.polynomial import Polynomial

from .dist import DiscreteDist, PiecewiseUniformDist, distance_to_normal_exact, wasserstein_exact
from .errors import CenteringError, DegenerateError, StandardizationError
from .rates import lambda_from_alpha, phi_from_alpha

CENTERING_TOL = 1e-12
STANDARD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ZeroBiasPair:
    base: DiscreteDist
    star: PiecewiseUniformDist
    sigma2: float

    @property
    def distance(self) -> float:
        """``d(W, W*)``, exact."""
        return wasserstein_exact(self.base, self.star)


def zero_bias_exact(d: DiscreteDist) -> ZeroBiasPair:
    """Zero-bias law of a mean-zero discrete distribution.

    Raises
    ------
    CenteringError
        If ``|E W| > 1e-12 * max|atom|``; center the law first.
    DegenerateError
        If W is constant.
    """
    a, p = d.atoms, d.probs
    scale = float(np.max(np.abs(a)))
    if a.size < 2 or scale == 0.0:
        raise DegenerateError("zero-bias transform needs a nonconstant law")
    if abs(d.mean) > CENTERING_TOL * scale:
        raise CenteringError(f"mean is {d.mean!r}, not 0; center the distribution first")
    sigma2 = math.fsum(p * a * a)
    # E[W 1(W > t)] on [a_j, a_{j+1}); the upper tail and minus the lower
    # tail agree for a centered law, so take whichever has fewer terms.
    pa = p * a
    m = a.size - 1
    tails = np.empty(m)
    for j in range(m):
        if j < m // 2:
            tails[j] = -math.fsum(pa[: j + 1])
        else:
            tails[j] = math.fsum(pa[j + 1 :])
    dens = np.maximum(tails, 0.0) / sigma2
    mass = math.fsum(dens * np.diff(a))
    if abs(mass - 1.0) > 1e-9:
        raise CenteringError(f"zero-bias density has mass {mass!r}; is the law centered?")
    return ZeroBiasPair(d, PiecewiseUniformDist(a, dens / mass), sigma2)


def _as_poly(f) -> Polynomial:
    return f if isinstance(f, Polynomial) else Polynomial(np.asarray(f, dtype=np.float64))


def zero_bias_defect(pair: ZeroBiasPair, f) -> float:
    """``|E W f(W) - sigma^2 E f'(W*)|`` for one polynomial ``f``."""
    f = _as_poly(f)
    lhs = pair.base.expect(lambda x: x * f(x))
    rhs = pair.sigma2 * pair.star.expect_poly_derivative(f.coef)
    return abs(lhs - rhs)


def verify_zero_bias_identity(pair: ZeroBiasPair, test_functions: Optional[Iterable] = None) -> float:
    """Largest defect of the zero-bias identity over polynomial test functions.

    ``test_functions`` holds polynomials (coefficients lowest degree first or
    :class:`numpy.polynomial.Polynomial`); defaults to ``1, w, ..., w**6``.
    """
    if test_functions is None:
        test_functions = [np.eye(7)[j] for j in range(7)]
    return max(zero_bias_defect(pair, f) for f in test_functions)


@dataclass(frozen=True, eq=False)
class CouplingSamples:
    """Paired draws ``(x, x_star)`` from a coupling."""

    x: np.ndarray
    x_star: np.ndarray
    label: str = "comonotone"

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.x, self.x_star])

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def mean_abs_diff(self) -> float:
        return float(np.mean(np.abs(self.x - self.x_star)))

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return math.nan
        return float(np.std(np.abs(self.x - self.x_star), ddof=1) / math.sqrt(self.n))


def couple_comonotone(pair: ZeroBiasPair, n: int, seed: int = 0) -> CouplingSamples:
    """Quantile coupling ``(Q_W(U), Q_{W*}(U))`` for ``n`` uniform ``U``."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    u = np.random.default_rng(seed).random(n)
    return CouplingSamples(pair.base.quantile(u), pair.star.quantile(u))


def y_star_coupling(alpha, pair: ZeroBiasPair, n: int, seed: int = 0) -> CouplingSamples:
    """Draws of ``(Y, Y*)`` for ``Y = sum (alpha_i / lambda) W_i``.

    Each ``(W_i, W_i*)`` is an independent comonotone pair; a random index
    ``I`` with ``P(I = i) = alpha_i^2 / lambda^2`` selects the coordinate
    replaced by its zero-bias partner, ``Y* = Y - (alpha_I/lambda)(W_I - W_I*)``.
    Then ``E|Y - Y*| = phi * d(W, W*)``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    if abs(pair.sigma2 - 1.0) > STANDARD_TOL:
        raise StandardizationError(f"base variance is {pair.sigma2!r}; standardize W first")
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    lam = lambda_from_alpha(alpha)
    k = alpha.size
    rng = np.random.default_rng(seed)
    u = rng.random((n, k))
    w = pair.base.quantile(u)
    ws = pair.star.quantile(u)
    probs = alpha**2 / lam**2
    idx = rng.choice(k, size=n, p=probs / probs.sum())
    y = w @ (alpha / lam)
    rows = np.arange(n)
    y_star = y - (alpha[idx] / lam) * (w[rows, idx] - ws[rows, idx])
    return CouplingSamples(y, y_star, label="single-coordinate replacement")


def expected_y_gap(alpha, pair: ZeroBiasPair) -> float:
    """Exact ``E|Y - Y*| = phi(alpha) * d(W, W*)`` for the construction above."""
    return phi_from_alpha(alpha) * pair.distance


@dataclass(frozen=True)
class NormalBoundCheck:
    d_to_normal: float
    d_to_star: float
    ratio: float
    holds: bool


def check_normal_bound(base: DiscreteDist, tol: float = 1e-12) -> NormalBoundCheck:
    """Compare ``d(W, N)`` with ``2 d(W, W*)`` for a standardized discrete W.

    Both distances are exact: the first from the closed-form integral of
    ``|F_W - Phi|``, the second from the quantile functions.
    """
    if abs(base.mean) > STANDARD_TOL or abs(base.var - 1.0) > STANDARD_TOL:
        raise StandardizationError(
            f"W must have mean 0 and variance 1 (got {base.mean!r}, {base.var!r})"
        )
    pair = zero_bias_exact(DiscreteDist(base.atoms - base.mean, base.probs))
    dn = distance_to_normal_exact(base)
    ds = pair.distance
    return NormalBoundCheck(dn, ds, dn / ds if ds > 0 else math.inf, dn <= 2.0 * ds + tol)
