"""k-ary combining functions for hierarchical sequences.

A :class:`Combiner` wraps a map ``F: D^k -> R`` together with its domain and
gradient. Built-ins cover the diamond-lattice conductance, weighted L^p
norms (parallel rule p = 1, series rule p = -1), the arithmetic mean and the
coordinate minimum. :func:`compose` builds ``F_0(s_1 F_1(x_{I_1}), ...)``.

All combiners are immutable; ``eval`` and ``gradient`` are pure and safe to
call from several threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import (
    BoundaryError,
    DomainError,
    NormalizationError,
    SpecError,
    UnsupportedExponentError,
    WeightError,
)

#: Absolute tolerance for F(1) = 1 and F_0(s) = 1.
NORMALIZATION_TOL = 1e-9

_FD_EPS = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class Combiner:
    """A k-ary combining function with domain and gradient access.

    Parameters
    ----------
    arity : int
        Number of arguments k.
    batch_fn : callable
        Maps an ``(m, k)`` array to ``m`` outputs. Must be deterministic.
    grad_fn : callable, optional
        Analytic gradient of a single k-vector. Central finite differences
        are used when omitted.
    lower, upper : float
        Domain bounds applied coordinatewise.
    lower_open : bool
        If true the lower bound is excluded, e.g. ``(0, inf)`` for
        conductances.
    label : str
        Human readable name.
    kernel : tuple, optional
        ``(kind, params)`` understood by :mod:`hierlat.kernels`; enables the
        compiled path in the engine.
    averaging : bool or None
        Declared averaging status (None when unknown).
    homogeneous : bool
        Declared positive homogeneity.
    """

    arity: int
    batch_fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lower: float = -math.inf
    upper: float = math.inf
    lower_open: bool = False
    label: str = "custom"
    kernel: Optional[tuple] = None
    averaging: Optional[bool] = None
    homogeneous: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.arity) < 1:
            raise SpecError("arity must be a positive integer")
        if not self.lower < self.upper:
            raise SpecError("empty domain")

    @property
    def positive_support(self) -> bool:
        return self.lower == 0.0 and self.lower_open

    @property
    def domain(self) -> tuple:
        return (self.lower, self.upper)

    def __repr__(self):
        return f"Combiner({self.label!r}, k={self.arity})"

    # -- domain handling -------------------------------------------------

    def _bad_mask(self, X):
        if self.lower_open:
            bad = ~(X > self.lower)
        else:
            bad = ~(X >= self.lower)
        return bad | ~(X <= self.upper)

    def check_domain(self, X):
        """Raise :class:`DomainError` naming the first offending row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[-1] != self.arity:
            raise DomainError(
                f"{self.label}: expected {self.arity} arguments, got {X.shape[-1]}"
            )
        bad = self._bad_mask(X)
        if bad.any():
            row = int(np.flatnonzero(bad.any(axis=1))[0])
            lo = "(" if self.lower_open else "["
            raise DomainError(
                f"{self.label}: input {X[row].tolist()} outside domain "
                f"{lo}{self.lower}, {self.upper}]^{self.arity}"
            )

    def in_domain(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return x.shape[-1] == self.arity and not self._bad_mask(x).any()

    # -- evaluation ------------------------------------------------------

    def eval_batch(self, X, check: bool = True) -> np.ndarray:
        """Evaluate on every row of an ``(m, k)`` array."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DomainError("eval_batch expects a 2-D array of shape (m, k)")
        if check:
            self.check_domain(X)
        if self.kernel is not None:
            kind, params = self.kernel
            return kernels.eval_rows(kind, params, X)
        return np.asarray(self.batch_fn(X), dtype=np.float64)

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return float(self.eval_batch(x)[0])

    __call__ = eval

    def at_ones(self) -> float:
        """F(1_k)."""
        return self.eval(np.ones(self.arity))

    # -- derivatives -----------------------------------------------------

    def _check_interior(self, x):
        if not self.in_domain(x):
            raise DomainError(f"{self.label}: {x.tolist()} outside domain")
        if np.any(x == self.lower) or np.any(x == self.upper):
            raise BoundaryError(f"{self.label}: {x.tolist()} on the domain boundary")

    def gradient(self, x) -> np.ndarray:
        """Gradient at an interior point; analytic when available."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.arity:
            raise DomainError(f"{self.label}: expected {self.arity} arguments")
        self._check_interior(x)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x), dtype=np.float64)
        return finite_difference_gradient(self, x)

    def normalized(self) -> "Combiner":
        """Return ``F / F(1_k)``, the form the averaging axioms apply to."""
        scale = self.at_ones()
        if not (np.isfinite(scale) and scale != 0.0):
            raise NormalizationError(f"{self.label}: F(1) = {scale} cannot normalize")
        if abs(scale - 1.0) <= 0.0:
            return self
        inv = 1.0 / scale
        base = self
        grad = None
        if base.grad_fn is not None:
            grad = lambda x: base.grad_fn(x) * inv  # noqa: E731
        return Combiner(
            arity=base.arity,
            batch_fn=lambda X: base.eval_batch(X, check=False) * inv,
            grad_fn=grad,
            lower=base.lower,
            upper=base.upper,
            lower_open=base.lower_open,
            label=f"{base.label}/F(1)",
            averaging=True if base.averaging else None,
            homogeneous=base.homogeneous,
        )


def finite_difference_gradient(c: Combiner, x) -> np.ndarray:
    """Central differences with step ``max(|x_i|, 1) * eps**(1/3)``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    k = x.shape[0]
    h = np.maximum(np.abs(x), 1.0) * _FD_EPS
    plus = np.tile(x, (k, 1))
    minus = plus.copy()
    idx = np.arange(k)
    plus[idx, idx] += h
    minus[idx, idx] -= h
    # step is exactly representable difference
    hh = plus[idx, idx] - minus[idx, idx]
    for pts in (plus, minus):
        bad = c._bad_mask(pts)
        if bad.any():
            raise BoundaryError(
                f"{c.label}: finite-difference stencil at {x.tolist()} leaves the domain"
            )
    fp = c.eval_batch(plus, check=False)
    fm = c.eval_batch(minus, check=False)
    return (fp - fm) / hh


# ----------------------------------------------------------------------
# Built-ins


def _weights(w, k=None) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if k is not None and w.shape[0] != k:
        raise WeightError(f"expected {k} weights, got {w.shape[0]}")
    if w.shape[0] == 0 or not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise WeightError(f"weights must be finite and strictly positive: {w.tolist()}")
    return w


def diamond(w=(1.0, 1.0, 1.0, 1.0)) -> Combiner:
    """Diamond-lattice conductance: two series pairs joined in parallel.

    ``F(x) = 1/(1/(w1 x1) + 1/(w2 x2)) + 1/(1/(w3 x3) + 1/(w4 x4))`` on
    ``(0, inf)^4``.
    """
    w = _weights(w, 4)
    w.setflags(write=False)

    def grad(x):
        wx = w * x
        top = 1.0 / wx[0] + 1.0 / wx[1]
        bot = 1.0 / wx[2] + 1.0 / wx[3]
        den = np.array([top, top, bot, bot]) ** 2
        return 1.0 / (w * x * x) / den

    c = Combiner(
        arity=4,
        batch_fn=None,
        grad_fn=grad,
        lower=0.0,
        upper=math.inf,
        lower_open=True,
        label="diamond(" + ",".join(f"{v:.17g}" for v in w) + ")",
        kernel=(kernels.KIND_DIAMOND, w),
        homogeneous=True,
        info={"weights": w},
    )
    return _with_averaging(c)


def lp_combiner(w, p: float) -> Combiner:
    """Weighted L^p combiner ``(sum (w_i x_i)^p)^(1/p)``.

    Domain is ``[0, inf)^k`` for p > 0 and ``(0, inf)^k`` for p < 0.
    """
    p = float(p)
    if p == 0.0 or not math.isfinite(p):
        raise UnsupportedExponentError("L^p combiner needs a finite nonzero exponent p")
    w = _weights(w)
    w.setflags(write=False)
    params = np.concatenate([[p], w])

    def grad(x):
        t = (w * x) ** p
        total = t.sum()
        return total ** (1.0 / p - 1.0) * (w * x) ** (p - 1.0) * w

    c = Combiner(
        arity=w.shape[0],
        batch_fn=None,
        grad_fn=grad,
        lower=0.0,
        upper=math.inf,
        lower_open=p < 0,
        label=f"L{p:g}(" + ",".join(f"{v:.17g}" for v in w) + ")",
        kernel=(kernels.KIND_LP, params),
        homogeneous=True,
        info={"weights": w, "p": p},
    )
    return _with_averaging(c)


def mean_combiner(k: int = 2) -> Combiner:
    """Arithmetic mean of k arguments on the whole real line."""
    k = int(k)
    if k < 1:
        raise SpecError("mean needs k >= 1")
    w = np.full(k, 1.0 / k)
    return Combiner(
        arity=k,
        batch_fn=None,
        grad_fn=lambda x: w.copy(),
        label="mean" if k == 2 else f"mean{k}",
        kernel=(kernels.KIND_LP, np.concatenate([[1.0], w])),
        averaging=True,
        homogeneous=True,
    )


def min_combiner(k: int = 2) -> Combiner:
    """Coordinate minimum. Satisfies averaging properties 1-2 but not 3."""
    k = int(k)
    if k < 1:
        raise SpecError("min needs k >= 1")
    return Combiner(
        arity=k,
        batch_fn=lambda X: X.min(axis=1),
        label="min" if k == 2 else f"min{k}",
        averaging=False,
        homogeneous=True,
    )


def projection_combiner(k: int = 2, index: int = 0) -> Combiner:
    """``F(x) = x_index``; a trivial non-averaging map for tests."""
    k, index = int(k), int(index)
    if not 0 <= index < k:
        raise SpecError("projection index out of range")
    e = np.zeros(k)
    e[index] = 1.0
    return Combiner(
        arity=k,
        batch_fn=lambda X: X[:, index].copy(),
        grad_fn=lambda x: e.copy(),
        label=f"proj{index}",
        averaging=False,
        homogeneous=True,
    )


def identity() -> Combiner:
    return Combiner(
        arity=1,
        batch_fn=lambda X: X[:, 0].copy(),
        grad_fn=lambda x: np.ones(1),
        label="identity",
        averaging=True,
        homogeneous=True,
    )


def from_function(
    fn,
    arity: int,
    *,
    domain=(-math.inf, math.inf),
    lower_open: bool = False,
    vectorized: bool = False,
    grad=None,
    label: str = "custom",
) -> Combiner:
    """Wrap a user function of a k-vector (or of an (m, k) array if
    ``vectorized``) as a combiner. Gradients fall back to finite differences."""
    if vectorized:
        batch = fn
    else:
        def batch(X):
            return np.array([fn(row) for row in X], dtype=np.float64)
    return Combiner(
        arity=arity,
        batch_fn=batch,
        grad_fn=grad,
        lower=float(domain[0]),
        upper=float(domain[1]),
        lower_open=lower_open,
        label=label,
    )


def _with_averaging(c: Combiner) -> Combiner:
    # Scaled strictly averaging built-ins are averaging exactly when F(1) = 1.
    flag = abs(c.at_ones() - 1.0) <= NORMALIZATION_TOL
    return replace(c, averaging=flag)


# ----------------------------------------------------------------------
# Composition


ScaleSpec = Union[None, str, Sequence[float]]


@dataclass(frozen=True)
class CompositionSpec:
    """``F_0(s_1 F_1(x_{I_1}), ..., s_k F_k(x_{I_k}))``.

    ``index_sets`` are 0-based and must cover ``range(input_dim)``. The input
    dimension defaults to one past the largest index, so the outer arity and
    the input dimension may differ (the diamond uses an arity-2 outer map on
    4 inputs).

    ``scale`` is ``None`` (no scaling, s = 1), an explicit positive vector
    with ``F_0(s) = 1``, or ``"auto"`` for the scale-normalized composition.
    """

    outer: Combiner
    inner: tuple
    index_sets: tuple
    scale: ScaleSpec = None
    input_dim: Optional[int] = None

    def __post_init__(self):
        inner = tuple(self.inner)
        sets = tuple(tuple(int(j) for j in s) for s in self.index_sets)
        object.__setattr__(self, "inner", inner)
        object.__setattr__(self, "index_sets", sets)
        k = self.outer.arity
        if len(inner) != k:
            raise SpecError(f"outer arity {k} needs {k} inner combiners, got {len(inner)}")
        if len(sets) != k:
            raise SpecError(f"need {k} index sets, got {len(sets)}")
        for i, (f, s) in enumerate(zip(inner, sets)):
            if not s:
                raise SpecError(f"index set {i} is empty")
            if len(set(s)) != len(s) or min(s) < 0:
                raise SpecError(f"index set {i} has repeated or negative entries")
            if len(s) != f.arity:
                raise SpecError(
                    f"index set {i} has {len(s)} entries but inner combiner has arity {f.arity}"
                )
        m = self.input_dim if self.input_dim is not None else max(max(s) for s in sets) + 1
        covered = set().union(*map(set, sets))
        if covered != set(range(m)):
            raise SpecError(
                f"index sets must cover 0..{m - 1}; missing {sorted(set(range(m)) - covered)}"
            )
        object.__setattr__(self, "input_dim", m)
        sc = self.scale
        if sc is not None and not isinstance(sc, str):
            sc = tuple(float(v) for v in sc)
            if len(sc) != k:
                raise SpecError(f"scale vector needs {k} entries")
            if any(not (v > 0) for v in sc):
                raise NormalizationError("scale entries must be strictly positive")
            object.__setattr__(self, "scale", sc)
        elif isinstance(sc, str) and sc != "auto":
            raise SpecError(f"unknown scale mode {sc!r}")


def compose(spec: CompositionSpec) -> Combiner:
    """Build the composed combiner described by ``spec``.

    With ``scale="auto"`` the result is ``G_0(s_1 G_1, ..., s_k G_k)`` where
    ``G_i = F_i / F_i(1)`` and
    ``s_i = F_i(1) F_0(1) / F_0(F_1(1), ..., F_k(1))``; this equals the
    unscaled composition divided by its value at 1.
    """
    outer, inner, sets = spec.outer, spec.inner, spec.index_sets
    k = outer.arity
    if spec.scale is None:
        a0 = 1.0
        b = np.ones(k)
    elif spec.scale == "auto":
        f1 = np.array([f.at_ones() for f in inner])
        f0_1 = outer.at_ones()
        s = f1 * f0_1 / outer.eval(f1)
        g0_s = outer.eval(s) / f0_1
        if abs(g0_s - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(
                f"auto scale gives G_0(s) = {g0_s!r}; outer combiner is not homogeneous"
            )
        a0 = 1.0 / f0_1
        b = s / f1
    else:
        s = np.asarray(spec.scale, dtype=np.float64)
        f0_s = outer.eval(s)
        if abs(f0_s - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(f"F_0(s) = {f0_s!r}, expected 1")
        a0 = 1.0
        b = s
    cols = [np.asarray(s, dtype=np.intp) for s in sets]
    m = spec.input_dim

    lower = max(f.lower for f in inner)
    upper = min(f.upper for f in inner)
    lower_open = any(f.lower_open and f.lower == lower for f in inner)

    def batch(X):
        Y = np.empty((X.shape[0], k))
        for i, (f, c) in enumerate(zip(inner, cols)):
            Y[:, i] = b[i] * f.eval_batch(X[:, c])
        return a0 * outer.eval_batch(Y)

    def grad(x):
        y = np.array([b[i] * f.eval(x[c]) for i, (f, c) in enumerate(zip(inner, cols))])
        g0 = outer.gradient(y)
        g = np.zeros(m)
        for i, (f, c) in enumerate(zip(inner, cols)):
            g[c] += g0[i] * b[i] * f.gradient(x[c])
        return a0 * g

    label = "compose(" + outer.label + "; " + ", ".join(f.label for f in inner) + ")"
    if spec.scale == "auto":
        label += "[auto]"
    elif spec.scale is not None:
        label += "[s]"
    return Combiner(
        arity=m,
        batch_fn=batch,
        grad_fn=grad,
        lower=lower,
        upper=upper,
        lower_open=lower_open,
        label=label,
        homogeneous=outer.homogeneous and all(f.homogeneous for f in inner),
        info={"spec": spec, "outer_factor": a0, "inner_factors": b},
    )
