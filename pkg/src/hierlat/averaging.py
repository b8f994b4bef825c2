"""Randomized falsifier for the averaging axioms.

For a k-ary F on a box ``[a, b]`` the axioms checked are

1. ``min_i x_i <= F(x) <= max_i x_i``;
2. ``x <= y`` coordinatewise implies ``F(x) <= F(y)``;
3. for ``a <= x < y <= b`` and every ordered index pair ``i1 != i2`` some
   assignment of the remaining coordinates to ``{x, y}`` (with ``x`` at
   ``i1`` and ``y`` at ``i2``) gives ``x < F < y``.

Strict averaging replaces the inequalities in 1 and 2 by strict ones for
nonconstant vectors and strictly increased pairs. All strict comparisons use
a margin ``tau = 1e-12 * (b - a)``.

The checks sample inputs, so a pass is evidence, not a proof. Every failure
carries the input on which it was observed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .combiner import Combiner
from .errors import DomainError, NormalizationError, RangeError

DEFAULT_SAMPLES = 10_000
HOMOGENEITY_TOL = 1e-10
MARGIN_REL = 1e-12


@dataclass(frozen=True)
class PropertyResult:
    """Outcome of one axiom check.

    Attributes
    ----------
    passed : bool
    witness : tuple or None
        Input reproducing the failure. Properties 1 and the strict version
        store ``(x,)``; property 2 stores ``(x, y)``; property 3 stores
        ``(x, y, i1, i2)`` with 0-based indices.
    margin : float
        Smallest slack seen over all samples (negative on failure).
    """

    passed: bool
    witness: Optional[tuple] = None
    margin: float = math.nan

    def witness_text(self) -> str:
        if self.witness is None:
            return ""
        parts = []
        for w in self.witness:
            if isinstance(w, np.ndarray):
                parts.append("[" + ",".join(f"{v:.17g}" for v in w) + "]")
            else:
                parts.append(f"{w:.17g}" if isinstance(w, float) else str(w))
        return ";".join(parts)


@dataclass(frozen=True)
class HomogeneityResult:
    passed: bool
    max_rel_deviation: float
    samples_used: int


@dataclass(frozen=True)
class AveragingReport:
    label: str
    box: tuple
    property1: PropertyResult
    property2: PropertyResult
    property3: PropertyResult
    strict1: PropertyResult
    strict2: PropertyResult
    scaled: Optional[PropertyResult]
    homogeneous: Optional[HomogeneityResult]
    samples_used: int
    rng_seed: int

    @property
    def averaging(self) -> bool:
        return self.property1.passed and self.property2.passed and self.property3.passed

    @property
    def strictly_averaging(self) -> bool:
        return self.averaging and self.strict1.passed and self.strict2.passed

    @property
    def all_passed(self) -> bool:
        ok = self.strictly_averaging
        if self.scaled is not None:
            ok = ok and self.scaled.passed
        if self.homogeneous is not None:
            ok = ok and self.homogeneous.passed
        return ok

    def as_dict(self) -> dict:
        d = {
            "combiner": self.label,
            "box": f"{self.box[0]:.17g},{self.box[1]:.17g}",
            "samples_used": str(self.samples_used),
            "rng_seed": str(self.rng_seed),
        }
        named = [
            ("property1", self.property1),
            ("property2", self.property2),
            ("property3", self.property3),
            ("strict1", self.strict1),
            ("strict2", self.strict2),
            ("scaled", self.scaled),
        ]
        for name, res in named:
            if res is None:
                d[name] = "skipped"
                continue
            d[name] = "pass" if res.passed else "FAIL"
            d[f"{name}_margin"] = f"{res.margin:.17g}"
            if not res.passed:
                d[f"{name}_witness"] = res.witness_text()
        if self.homogeneous is None:
            d["homogeneous"] = "skipped"
        else:
            d["homogeneous"] = "pass" if self.homogeneous.passed else "FAIL"
            d["homogeneous_max_rel_deviation"] = f"{self.homogeneous.max_rel_deviation:.17g}"
        d["result"] = "pass" if self.all_passed else "FAIL"
        return d

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.as_dict().items())


# ----------------------------------------------------------------------


def _check_box(c: Combiner, box) -> tuple:
    a, b = (float(v) for v in box)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise RangeError("box bounds must be finite")
    if not b > a:
        raise RangeError(f"box needs b > a, got [{a}, {b}]")
    if c._bad_mask(np.array([a, b])).any():
        raise DomainError(f"box [{a}, {b}] is not inside the domain of {c.label}")
    return a, b


def _first(mask: np.ndarray) -> Optional[int]:
    hits = np.flatnonzero(mask)
    return int(hits[0]) if hits.size else None


def _property1(F, X, tau, strict: bool) -> PropertyResult:
    f = F(X)
    lo, hi = X.min(axis=1), X.max(axis=1)
    if strict:
        rows = hi - lo > 2 * tau
        slack = np.minimum(f - lo, hi - f)[rows] - tau
        X = X[rows]
    else:
        slack = np.minimum(f - lo, hi - f) + tau
    if slack.size == 0:
        return PropertyResult(True, margin=math.inf)
    i = _first(~(slack > 0) if strict else slack < 0)
    if i is not None:
        return PropertyResult(False, (X[i].copy(),), float(slack[i]))
    return PropertyResult(True, margin=float(slack.min()))


def _property2(F, X, Y, tau, strict: bool) -> PropertyResult:
    diff = F(Y) - F(X)
    if strict:
        rows = np.any(Y > X, axis=1)
        slack = (diff - tau)[rows]
        X, Y = X[rows], Y[rows]
        bad = ~(slack > 0)
    else:
        slack = diff + tau
        bad = slack < 0
    if slack.size == 0:
        return PropertyResult(True, margin=math.inf)
    i = _first(bad)
    if i is not None:
        return PropertyResult(False, (X[i].copy(), Y[i].copy()), float(slack[i]))
    return PropertyResult(True, margin=float(slack.min()))


def _property3(F, k: int, lo: np.ndarray, hi: np.ndarray, tau) -> PropertyResult:
    """Exhaustive over assignments for each ordered index pair."""
    if k < 2:
        # with a single coordinate there is no index pair to test
        return PropertyResult(True, margin=math.inf)
    n = lo.shape[0]
    combos = list(itertools.product((0, 1), repeat=k - 2))
    assignments = np.array(combos, dtype=bool).reshape(len(combos), k - 2)
    n_assign = assignments.shape[0]
    worst = math.inf
    for i1, i2 in itertools.permutations(range(k), 2):
        rest = [j for j in range(k) if j not in (i1, i2)]
        X = np.empty((n_assign, n, k))
        X[:, :, i1] = lo
        X[:, :, i2] = hi
        for col, j in enumerate(rest):
            X[:, :, j] = np.where(assignments[:, col][:, None], hi[None, :], lo[None, :])
        f = F(X.reshape(-1, k)).reshape(n_assign, n)
        slack = np.minimum(f - lo, hi - f) - tau
        best = slack.max(axis=0)
        i = _first(~(best > 0))
        if i is not None:
            return PropertyResult(False, (float(lo[i]), float(hi[i]), i1, i2), float(best[i]))
        worst = min(worst, float(best.min()))
    return PropertyResult(True, margin=worst)


def _samples(rng: np.random.Generator, a: float, b: float, n: int, k: int):
    """Random points in ``[a, b]^k``, plus ordered pairs and 1-D pairs."""
    X = a + (b - a) * rng.random((n, k))
    # a few vectors pinned to the box corners catch boundary-only failures
    corners = rng.integers(0, 2, size=(min(n, 64), k)).astype(np.float64)
    X[: corners.shape[0]] = a + (b - a) * corners
    U = a + (b - a) * rng.random((n, k))
    lo, hi = np.minimum(X, U), np.maximum(X, U)
    # half of the pairs differ in exactly one coordinate
    half = n // 2
    j = rng.integers(0, k, size=half)
    hi[:half] = lo[:half]
    hi[np.arange(half), j] = np.maximum(X[np.arange(half), j], U[np.arange(half), j])
    s = a + (b - a) * rng.random((n, 2))
    x3, y3 = s.min(axis=1), s.max(axis=1)
    keep = y3 > x3
    return X, lo, hi, x3[keep], y3[keep]


def check_averaging(
    c: Combiner,
    box=(0.5, 2.0),
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    *,
    homogeneity: bool = True,
) -> AveragingReport:
    """Test averaging, strict averaging and scaled averaging on ``box``.

    Parameters
    ----------
    c : Combiner
    box : (float, float)
        Sampling box ``[a, b]``; must lie inside the domain of ``c``.
    n_samples : int
        Samples per property.
    seed : int
        Seed for a :class:`numpy.random.Generator`; identical inputs give an
        identical report.
    homogeneity : bool
        Also run :func:`check_homogeneity`.

    Returns
    -------
    AveragingReport
    """
    a, b = _check_box(c, box)
    n_samples = int(n_samples)
    if n_samples < 1:
        raise RangeError("n_samples must be at least 1")
    tau = MARGIN_REL * (b - a)
    k = c.arity
    rng = np.random.default_rng(seed)
    X, lo, hi, x3, y3 = _samples(rng, a, b, n_samples, k)

    def run(F):
        return (
            _property1(F, X, tau, strict=False),
            _property2(F, lo, hi, tau, strict=False),
            _property3(F, k, x3, y3, tau),
            _property1(F, X, tau, strict=True),
            _property2(F, lo, hi, tau, strict=True),
        )

    p1, p2, p3, s1, s2 = run(lambda Z: c.eval_batch(Z, check=False))
    # a strict property can only hold when its non-strict form does
    if not p1.passed and s1.passed:
        s1 = PropertyResult(False, p1.witness, p1.margin)
    if not p2.passed and s2.passed:
        s2 = PropertyResult(False, p2.witness, p2.margin)

    scaled = None
    if c.in_domain(np.ones(k)):
        try:
            g = c.normalized()
        except NormalizationError:
            scaled = PropertyResult(False, (np.ones(k),), math.nan)
        else:
            results = run(lambda Z: g.eval_batch(Z, check=False))
            failed = [r for r in results if not r.passed]
            scaled = failed[0] if failed else PropertyResult(
                True, margin=min(r.margin for r in results)
            )

    hom = None
    if homogeneity:
        try:
            hom = check_homogeneity(c, n_samples, seed)
        except DomainError:
            hom = None

    return AveragingReport(
        label=c.label,
        box=(a, b),
        property1=p1,
        property2=p2,
        property3=p3,
        strict1=s1,
        strict2=s2,
        scaled=scaled,
        homogeneous=hom,
        samples_used=n_samples,
        rng_seed=int(seed),
    )


def _scaling_box(c: Combiner) -> tuple:
    """A box ``[l, u]`` with ``t * x`` inside the domain for ``t in [1/2, 2]``."""
    lower, upper = c.lower, c.upper
    l = 0.0 if lower <= 0 else 2.0 * lower
    if math.isfinite(upper):
        if upper <= 0:
            raise DomainError(f"{c.label}: domain has no positive part to scale")
        u = upper / 2.0
    else:
        u = l + 2.0
    if not u > l:
        raise DomainError(f"{c.label}: domain is not closed under scaling by [1/2, 2]")
    return l, u


def check_homogeneity(
    c: Combiner, n_samples: int = DEFAULT_SAMPLES, seed: int = 0, box=None
) -> HomogeneityResult:
    """Compare ``F(t x)`` with ``t F(x)`` for random ``t in [1/2, 2]``.

    ``x`` is drawn from ``box`` (default: a positive box whose image under
    every such ``t`` stays in the domain). Passes when the worst relative
    deviation is at most ``HOMOGENEITY_TOL``.
    """
    n_samples = int(n_samples)
    if n_samples < 1:
        raise RangeError("n_samples must be at least 1")
    l, u = _scaling_box(c) if box is None else (float(box[0]), float(box[1]))
    rng = np.random.default_rng([int(seed), 1])
    # 1 - U lies in (0, 1], which keeps x off an open lower bound at 0
    X = l + (u - l) * (1.0 - rng.random((n_samples, c.arity)))
    t = 0.5 + 1.5 * rng.random(n_samples)
    TX = X * t[:, None]
    bad = c._bad_mask(X).any(axis=1) | c._bad_mask(TX).any(axis=1)
    if bad.any():
        raise DomainError(f"{c.label}: scaling box [{l}, {u}] leaves the domain")
    fx = t * c.eval_batch(X, check=False)
    ftx = c.eval_batch(TX, check=False)
    scale = np.maximum(np.abs(fx), np.finfo(float).tiny)
    dev = float(np.max(np.abs(ftx - fx) / scale))
    return HomogeneityResult(dev <= HOMOGENEITY_TOL, dev, n_samples)
