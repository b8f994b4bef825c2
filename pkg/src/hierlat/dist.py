"""One-dimensional distributions and order-1 Wasserstein distances.

Three containers share a quantile-segment representation: on each segment
``(u0, u1)`` of the unit interval the quantile function is linear from
``q0`` to ``q1``. Discrete and empirical laws give constant segments,
piecewise-uniform laws give linear ones, so ``int_0^1 |Q_1 - Q_2| du`` is
computed exactly by merging breakpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy import special

from .errors import DegenerateError, RangeError, SizeMismatchError, StandardizationError

PROB_TOL = 1e-12


def normal_cdf(x):
    return special.ndtr(x)


def normal_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_quantile(p):
    """Standard normal quantile, scalar or array; ``p`` must lie in (0, 1)."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise RangeError("normal_quantile needs 0 < p < 1")
    out = special.ndtri(arr)
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=16)
def _midpoint_normal_quantiles(n: int) -> np.ndarray:
    q = special.ndtri((np.arange(1, n + 1) - 0.5) / n)
    q.setflags(write=False)
    return q


def _as_float_array(values) -> np.ndarray:
    if isinstance(values, np.ndarray) and values.dtype.kind in "fiu":
        return values.astype(np.float64).ravel()
    out = []
    for v in np.atleast_1d(np.asarray(values, dtype=object)).ravel():
        out.append(float(Fraction(v)) if isinstance(v, str) else float(v))
    return np.asarray(out, dtype=np.float64)


# ----------------------------------------------------------------------
# Containers


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Finitely supported law. Atoms are sorted and merged on construction."""

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        a = _as_float_array(self.atoms)
        p = _as_float_array(self.probs)
        if a.shape != p.shape or a.size == 0:
            raise SizeMismatchError("atoms and probs must be nonempty and of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
            raise RangeError("atoms and probs must be finite")
        if np.any(p <= 0):
            raise RangeError("probabilities must be strictly positive")
        if abs(math.fsum(p) - 1.0) > PROB_TOL:
            raise RangeError(f"probabilities sum to {math.fsum(p)!r}, not 1")
        order = np.argsort(a, kind="stable")
        a, p = a[order], p[order]
        uniq, inv = np.unique(a, return_inverse=True)
        if uniq.size != a.size:
            p = np.bincount(inv, weights=p)
            a = uniq
        a.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, atoms) -> "DiscreteDist":
        a = _as_float_array(atoms)
        return cls(a, np.full(a.size, 1.0 / a.size))

    @cached_property
    def mean(self) -> float:
        return math.fsum(self.atoms * self.probs)

    @cached_property
    def var(self) -> float:
        return math.fsum(self.probs * (self.atoms - self.mean) ** 2)

    @property
    def std(self) -> float:
        return math.sqrt(self.var)

    @property
    def support(self) -> tuple:
        return (float(self.atoms[0]), float(self.atoms[-1]))

    def expect(self, f) -> float:
        return math.fsum(self.probs * np.asarray(f(self.atoms), dtype=np.float64))

    def moment(self, order: int) -> float:
        return math.fsum(self.probs * self.atoms ** order)

    def cdf(self, x):
        cum = np.cumsum(self.probs)
        i = np.searchsorted(self.atoms, x, side="right")
        return np.where(i > 0, cum[np.maximum(i - 1, 0)], 0.0)

    def quantile(self, u):
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        i = np.searchsorted(cum, u, side="left")
        return self.atoms[np.clip(i, 0, self.atoms.size - 1)]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF sampling; deterministic given the generator state."""
        return self.quantile(rng.random(n))

    def affine(self, scale: float, shift: float = 0.0) -> "DiscreteDist":
        if scale == 0:
            raise DegenerateError("zero scale")
        return DiscreteDist(self.atoms * scale + shift, self.probs)

    def centered(self) -> "DiscreteDist":
        return DiscreteDist(self.atoms - self.mean, self.probs)

    def standardized(self) -> "DiscreteDist":
        if not self.var > 0:
            raise StandardizationError("cannot standardize a constant distribution")
        return DiscreteDist((self.atoms - self.mean) / self.std, self.probs)

    def quantile_segments(self):
        u1 = np.cumsum(self.probs)
        u1[-1] = 1.0
        u0 = np.concatenate([[0.0], u1[:-1]])
        return u0, u1, self.atoms, self.atoms

    def to_csv(self) -> str:
        return "".join(f"{a:.17g},{p:.17g}\n" for a, p in zip(self.atoms, self.probs))

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteDist":
        atoms, probs = [], []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            a, p = line.split(",")
            atoms.append(a.strip())
            probs.append(p.strip())
        return cls(atoms, probs)

    def __repr__(self):
        return f"DiscreteDist(atoms={self.atoms.tolist()}, probs={self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class EmpiricalDist:
    """Sorted sample with cached moments (population standard deviation)."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=np.float64).ravel())
        if s.size == 0:
            raise SizeMismatchError("empirical distribution needs at least one sample")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    @cached_property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @cached_property
    def std(self) -> float:
        return float(np.std(self.samples))

    def standardized(self) -> "EmpiricalDist":
        if not self.std > 0:
            raise StandardizationError("cannot standardize a constant sample")
        return EmpiricalDist((self.samples - self.mean) / self.std)

    def quantile_segments(self):
        n = self.samples.size
        u = np.arange(n + 1, dtype=np.float64) / n
        return u[:-1], u[1:], self.samples, self.samples

    def to_text(self) -> str:
        return "".join(f"{v:.17g}\n" for v in self.samples)

    @classmethod
    def from_text(cls, text: str) -> "EmpiricalDist":
        vals = [float(t) for t in (ln.split("#", 1)[0].strip() for ln in text.splitlines()) if t]
        return cls(np.array(vals))

    def __repr__(self):
        return f"EmpiricalDist(n={self.samples.size}, mean={self.mean:.6g}, std={self.std:.6g})"


@dataclass(frozen=True, eq=False)
class PiecewiseUniformDist:
    """Density constant on each ``[knots[j], knots[j+1])``."""

    knots: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=np.float64).ravel()
        d = np.asarray(self.densities, dtype=np.float64).ravel()
        if t.size < 2 or d.size != t.size - 1:
            raise SizeMismatchError("need m + 1 knots for m densities")
        if np.any(np.diff(t) <= 0):
            raise RangeError("knots must be strictly increasing")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise RangeError("densities must be finite and nonnegative")
        mass = math.fsum(d * np.diff(t))
        if abs(mass - 1.0) > PROB_TOL:
            raise RangeError(f"total mass {mass!r}, not 1")
        t.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "knots", t)
        object.__setattr__(self, "densities", d)

    @cached_property
    def _cum(self) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(self.densities * np.diff(self.knots))])
        c[-1] = 1.0
        return c

    @property
    def support(self) -> tuple:
        return (float(self.knots[0]), float(self.knots[-1]))

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        t, c = self.knots, self._cum
        j = np.clip(np.searchsorted(t, x, side="right") - 1, 0, t.size - 2)
        val = c[j] + self.densities[j] * (x - t[j])
        return np.where(x < t[0], 0.0, np.where(x >= t[-1], 1.0, val))

    def quantile(self, u):
        u0, u1, q0, q1 = self.quantile_segments()
        u = np.asarray(u, dtype=np.float64)
        j = np.clip(np.searchsorted(u1, u, side="left"), 0, u1.size - 1)
        frac = np.clip((u - u0[j]) / (u1[j] - u0[j]), 0.0, 1.0)
        return q0[j] + (q1[j] - q0[j]) * frac

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.quantile(rng.random(n))

    def quantile_segments(self):
        keep = self.densities > 0
        c = self._cum
        return c[:-1][keep], c[1:][keep], self.knots[:-1][keep], self.knots[1:][keep]

    def expect_poly(self, poly) -> float:
        """Exact ``E f(V)`` for a polynomial ``f``."""
        P = Polynomial(poly).integ()
        return math.fsum(self.densities * np.diff(P(self.knots)))

    def expect_poly_derivative(self, poly) -> float:
        """Exact ``E f'(V)`` for a polynomial ``f``."""
        f = Polynomial(poly)
        return math.fsum(self.densities * np.diff(f(self.knots)))

    @property
    def mean(self) -> float:
        return self.expect_poly([0.0, 1.0])

    @property
    def var(self) -> float:
        m = self.mean
        return self.expect_poly([m * m, -2.0 * m, 1.0])

    def __repr__(self):
        return (
            f"PiecewiseUniformDist(knots={self.knots.tolist()}, "
            f"densities={self.densities.tolist()})"
        )


AnyDist = Union[DiscreteDist, EmpiricalDist, PiecewiseUniformDist]


# ----------------------------------------------------------------------
# Distances


def wasserstein_paired(a: EmpiricalDist, b: EmpiricalDist) -> float:
    """Mean absolute difference of order statistics (equal sizes)."""
    if len(a) != len(b):
        raise SizeMismatchError(f"sample sizes differ: {len(a)} vs {len(b)}")
    return float(np.mean(np.abs(a.samples - b.samples)))


def wasserstein_to_std_normal(a: EmpiricalDist) -> float:
    """``(1/n) sum |x_(i) - Phi^{-1}((i - 1/2)/n)|``."""
    return float(np.mean(np.abs(a.samples - _midpoint_normal_quantiles(len(a)))))


def _segments_at(segs, grid_left, grid_right):
    u0, u1, q0, q1 = segs
    mid = 0.5 * (grid_left + grid_right)
    j = np.clip(np.searchsorted(u1, mid, side="right"), 0, u1.size - 1)
    width = u1[j] - u0[j]
    slope = np.where(width > 0, (q1[j] - q0[j]) / np.where(width > 0, width, 1.0), 0.0)
    return q0[j] + slope * (grid_left - u0[j]), q0[j] + slope * (grid_right - u0[j])


def _abs_linear_integral(h, dl, dr):
    same = dl * dr >= 0
    adl, adr = np.abs(dl), np.abs(dr)
    tot = adl + adr
    crossing = h * (dl * dl + dr * dr) / (2.0 * np.where(tot > 0, tot, 1.0))
    return np.where(same, 0.5 * h * tot, crossing)


def wasserstein_exact(d1: AnyDist, d2: AnyDist) -> float:
    """``int_0^1 |Q_1(u) - Q_2(u)| du`` by exact segment decomposition."""
    s1, s2 = d1.quantile_segments(), d2.quantile_segments()
    grid = np.unique(np.concatenate([[0.0, 1.0], s1[0], s1[1], s2[0], s2[1]]))
    gl, gr = grid[:-1], grid[1:]
    a_l, a_r = _segments_at(s1, gl, gr)
    b_l, b_r = _segments_at(s2, gl, gr)
    pieces = _abs_linear_integral(gr - gl, a_l - b_l, a_r - b_r)
    return math.fsum(pieces)


def _int_phi(l: float, r: float) -> float:
    """``int_l^r Phi(x) dx`` without cancellation in either tail."""

    def G(x):  # int_{-inf}^x Phi
        return x * special.ndtr(x) + normal_pdf(x)

    def H(x):  # int_x^inf (1 - Phi)
        return normal_pdf(x) - x * special.ndtr(-x)

    if r <= 0:
        return float(G(r) - G(l))
    if l >= 0:
        return float((r - l) - (H(l) - H(r)))
    return float(G(0.0) - G(l) + r - (H(0.0) - H(r)))


def distance_to_normal_exact(d: DiscreteDist) -> float:
    """``d(W, N(0,1)) = int |F_W - Phi|`` for discrete W, in closed form.

    Uses the antiderivative ``x Phi(x) + phi(x)`` between atoms, splitting
    each interval where ``Phi`` crosses the CDF level; no tail truncation.
    """
    a = d.atoms
    cum = np.cumsum(d.probs)
    cum[-1] = 1.0
    left = float(a[0] * special.ndtr(a[0]) + normal_pdf(a[0]))
    right = float(normal_pdf(a[-1]) - a[-1] * special.ndtr(-a[-1]))
    parts = [left, right]
    for j in range(a.size - 1):
        lo, hi, c = float(a[j]), float(a[j + 1]), float(cum[j])
        x = min(max(float(special.ndtri(c)), lo), hi)
        parts.append(c * (x - lo) - _int_phi(lo, x))
        parts.append(_int_phi(x, hi) - c * (hi - x))
    return math.fsum(parts)
