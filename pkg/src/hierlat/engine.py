"""Monte Carlo realization of the distributional recursion X_{n+1} = F(X_n).

Two modes:

``pooled``
    Population dynamics. Level n+1 holds N evaluations of F on k-tuples
    drawn uniformly with replacement from the level-n pool.
``exact_tree``
    Every sample of X_n is built bottom-up from k^n fresh X_0 draws, so the
    samples are exactly i.i.d.; cost grows like k^n.

Randomness is split into chunks. Each chunk draws from its own generator
seeded by ``SeedSequence([seed, stream, level, chunk])`` and results are
merged in chunk order, so output does not depend on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from . import kernels
from .combiner import Combiner
from .dist import DiscreteDist, EmpiricalDist, wasserstein_to_std_normal
from .errors import BudgetError, DegenerateError, DomainError, FitError, SpecError
from .rates import phi_from_alpha

#: For a standardized N-point standard normal sample, sqrt(N) times the
#: distance to N(0, 1) has mean about 0.82 and a 95th percentile near 1.2,
#: so distances below NOISE_FLOOR_CONST / sqrt(N) are indistinguishable from
#: sampling noise. See benchmarks/calibrate_noise_floor.py.
NOISE_FLOOR_CONST = 1.2

_STREAM_X0 = 0
_STREAM_TUPLES = 1
_STREAM_PERTURB = 2

_LEAF_CHUNK = 1 << 22


def noise_floor(pool_size: int) -> float:
    return NOISE_FLOOR_CONST / math.sqrt(pool_size)


@dataclass(frozen=True)
class UniformInterval:
    """X_0 uniform on ``[a, b]``, sampled by inverse CDF."""

    a: float
    b: float

    def __post_init__(self):
        if not float(self.a) < float(self.b):
            raise SpecError("uniform interval needs a < b")

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def var(self) -> float:
        return (self.b - self.a) ** 2 / 12.0

    @property
    def support(self) -> tuple:
        return (float(self.a), float(self.b))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.a + (self.b - self.a) * rng.random(n)


InitialLaw = Union[DiscreteDist, UniformInterval]


@dataclass(frozen=True)
class SimConfig:
    combiner: Combiner
    x0: InitialLaw
    levels: int
    pool_size: int = 100_000
    mode: str = "pooled"
    seed: int = 0
    workers: int = 1
    chunk_size: int = 1 << 15
    budget: int = 1 << 24

    def __post_init__(self):
        if self.mode not in ("pooled", "exact_tree"):
            raise SpecError(f"unknown mode {self.mode!r}")
        if int(self.levels) < 0:
            raise SpecError("levels must be nonnegative")
        if int(self.seed) < 0:
            raise SpecError("seed must be a nonnegative integer")
        if int(self.workers) < 1 or int(self.chunk_size) < 1:
            raise SpecError("workers and chunk_size must be positive")
        if self.mode == "pooled" and self.pool_size < 1000:
            raise SpecError("pooled mode needs pool_size >= 1000")
        if self.pool_size < 2:
            raise SpecError("pool_size must be at least 2")
        if self.mode == "exact_tree" and self.combiner.arity ** self.levels > self.budget:
            raise BudgetError(
                f"exact tree needs k^levels = {self.combiner.arity}^{self.levels} "
                f"leaves per sample, above budget {self.budget}"
            )
        lo, hi = self.x0.support
        if self.combiner._bad_mask(np.array([lo, hi])).any():
            raise DomainError(
                f"X_0 support [{lo}, {hi}] is not inside the domain of {self.combiner.label}"
            )


@dataclass(frozen=True, eq=False)
class LevelStats:
    n: int
    c_n: float
    sigma_n: float
    w_samples: EmpiricalDist
    d_n: float
    z_var_ratio: float
    phi_n: float
    pool_size: int

    @property
    def noise_floor(self) -> float:
        return noise_floor(self.pool_size)

    def csv_row(self) -> str:
        vals = (self.c_n, self.sigma_n, self.d_n, self.z_var_ratio, self.phi_n)
        return f"{self.n}," + ",".join(f"{v:.17g}" for v in vals)


@dataclass(frozen=True)
class RateFit:
    gamma_hat: float
    ratios: tuple
    window: tuple
    noise_floor: float
    levels_used: tuple = field(default=())


def _rng(seed: int, stream: int, level: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, level, chunk]))


def _chunks(total: int, size: int):
    return [(s, min(s + size, total)) for s in range(0, total, size)]


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(i, it) for i, it in enumerate(items)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(len(items)), items))


def _eval_gather(c: Combiner, pool: np.ndarray, idx: np.ndarray) -> np.ndarray:
    if c.kernel is not None:
        kind, params = c.kernel
        return kernels.gather_eval(kind, params, pool, idx)
    return c.eval_batch(pool[idx], check=False)


def _eval_rows(c: Combiner, X: np.ndarray) -> np.ndarray:
    return c.eval_batch(X, check=False)


def _check_pool(c: Combiner, pool: np.ndarray, level: int, idx: Optional[np.ndarray] = None):
    bad = c._bad_mask(pool) | ~np.isfinite(pool)
    if not bad.any():
        return
    if idx is not None:
        rows = np.flatnonzero(bad[idx].any(axis=1))
        if rows.size:
            witness = pool[idx[rows[0]]].tolist()
            raise DomainError(f"level {level}: tuple {witness} outside the domain of {c.label}")
    raise DomainError(
        f"level {level}: value {float(pool[np.flatnonzero(bad)[0]])!r} outside the domain of {c.label}"
    )


def initial_pool(cfg: SimConfig) -> np.ndarray:
    parts = _map(
        lambda j, se: cfg.x0.sample(se[1] - se[0], _rng(cfg.seed, _STREAM_X0, 0, j)),
        _chunks(cfg.pool_size, cfg.chunk_size),
        cfg.workers,
    )
    return np.concatenate(parts)


def pooled_step(cfg: SimConfig, pool: np.ndarray, level: int) -> np.ndarray:
    """Draw the level ``level + 1`` pool from the level ``level`` pool."""
    c, k, n = cfg.combiner, cfg.combiner.arity, pool.shape[0]

    chunks = _chunks(cfg.pool_size, cfg.chunk_size)

    def draw(j, se):
        return _rng(cfg.seed, _STREAM_TUPLES, level, j).integers(0, n, size=(se[1] - se[0], k))

    if (c._bad_mask(pool) | ~np.isfinite(pool)).any():
        for j, se in enumerate(chunks):
            _check_pool(c, pool, level, draw(j, se))
        _check_pool(c, pool, level)

    out = np.concatenate(
        _map(lambda j, se: _eval_gather(c, pool, draw(j, se)), chunks, cfg.workers)
    )
    if not np.all(np.isfinite(out)):
        raise DomainError(f"level {level + 1}: {c.label} produced non-finite values")
    return out


def exact_tree_level(cfg: SimConfig, level: int) -> np.ndarray:
    """``pool_size`` i.i.d. samples of X_level, each from k^level X_0 leaves."""
    c, k = cfg.combiner, cfg.combiner.arity
    leaves = k**level
    if leaves > cfg.budget:
        raise BudgetError(f"k^n = {leaves} above budget {cfg.budget}")
    per_chunk = max(1, min(cfg.chunk_size, _LEAF_CHUNK // leaves))

    def work(j, se):
        m = se[1] - se[0]
        vals = cfg.x0.sample(m * leaves, _rng(cfg.seed, _STREAM_X0, level, j))
        width = leaves
        while width > 1:
            vals = _eval_rows(c, vals.reshape(-1, k))
            width //= k
        return vals

    out = np.concatenate(_map(work, _chunks(cfg.pool_size, per_chunk), cfg.workers))
    if not np.all(np.isfinite(out)):
        raise DomainError(f"level {level}: {c.label} produced non-finite values")
    return out


def iterate_pools(cfg: SimConfig) -> Iterator[np.ndarray]:
    """Yield the raw pools for levels 0..cfg.levels."""
    if cfg.mode == "exact_tree":
        for n in range(cfg.levels + 1):
            yield exact_tree_level(cfg, n)
        return
    pool = initial_pool(cfg)
    yield pool
    for n in range(cfg.levels):
        pool = pooled_step(cfg, pool, n)
        yield pool


def standardize(pool: np.ndarray, level: int = 0) -> tuple:
    """Return ``(c_n, sigma_n, (pool - c_n) / sigma_n)`` using pool moments."""
    c_n = float(np.mean(pool))
    sigma_n = float(np.std(pool))
    if not sigma_n > 0:
        raise DegenerateError(f"level {level}: pool is degenerate (zero variance)")
    w = (pool - c_n) / sigma_n
    # second pass removes the rounding left by the first centering
    w -= np.mean(w)
    w /= np.std(w)
    return c_n, sigma_n, w


def perturbation_ratio(
    c: Combiner, pool: np.ndarray, alpha: np.ndarray, rng: np.random.Generator, n_tuples: int
) -> float:
    """``Var(Z) / Var(F(X))`` with ``Z = F(X) - alpha . X`` on fresh tuples."""
    idx = rng.integers(0, pool.shape[0], size=(n_tuples, c.arity))
    fx = _eval_gather(c, pool, idx)
    z = fx - pool[idx] @ np.asarray(alpha, dtype=np.float64)
    vf = float(np.var(fx))
    if not vf > 0:
        return math.nan
    return float(np.var(z)) / vf


def perturbation_stats(c: Combiner, pools: Sequence[np.ndarray], alphas, seed: int = 0) -> list:
    """Perturbation variance ratio for each (pool, alpha_n) pair."""
    return [
        perturbation_ratio(c, p, a, _rng(seed, _STREAM_PERTURB, n, 0), p.shape[0])
        for n, (p, a) in enumerate(zip(pools, alphas))
    ]


def level_stats(cfg: SimConfig, pool: np.ndarray, n: int) -> LevelStats:
    c = cfg.combiner
    c_n, sigma_n, w = standardize(pool, n)
    emp = EmpiricalDist(w)
    alpha = c.gradient(np.full(c.arity, c_n))
    ratio = perturbation_ratio(c, pool, alpha, _rng(cfg.seed, _STREAM_PERTURB, n, 0), pool.shape[0])
    return LevelStats(
        n=n,
        c_n=c_n,
        sigma_n=sigma_n,
        w_samples=emp,
        d_n=wasserstein_to_std_normal(emp),
        z_var_ratio=ratio,
        phi_n=phi_from_alpha(alpha),
        pool_size=pool.shape[0],
    )


def run(cfg: SimConfig) -> list:
    return [level_stats(cfg, pool, n) for n, pool in enumerate(iterate_pools(cfg))]


def run_pooled(cfg: SimConfig) -> list:
    if cfg.mode != "pooled":
        raise SpecError("run_pooled needs mode='pooled'")
    return run(cfg)


def run_exact_tree(cfg: SimConfig) -> list:
    if cfg.mode != "exact_tree":
        raise SpecError("run_exact_tree needs mode='exact_tree'")
    return run(cfg)


def fit_geometric(ns, ds, floor: float = 0.0, window: Optional[tuple] = None) -> RateFit:
    """Least-squares fit of ``log d_n = a + n log(gamma)``.

    Without ``window`` the fit uses the leading run of levels whose
    distance stays above three times ``floor``.
    """
    ns = [int(n) for n in ns]
    ds = [float(d) for d in ds]
    ratios = tuple(ds[i + 1] / ds[i] if ds[i] > 0 else math.nan for i in range(len(ds) - 1))
    if window is not None:
        lo, hi = window
        used = [(n, d) for n, d in zip(ns, ds) if lo <= n <= hi and d > 3 * floor]
    else:
        used = []
        for n, d in zip(ns, ds):
            if not d > 3 * floor:
                break
            used.append((n, d))
    if len(used) < 3:
        raise FitError(
            f"need at least 3 levels above 3x the noise floor ({3 * floor:.3g}); got {len(used)}"
        )
    x = np.array([n for n, _ in used], dtype=np.float64)
    y = np.log([d for _, d in used])
    slope = np.polyfit(x, y, 1)[0]
    return RateFit(
        gamma_hat=float(math.exp(slope)),
        ratios=ratios,
        window=(int(x[0]), int(x[-1])),
        noise_floor=floor,
        levels_used=tuple(int(v) for v in x),
    )


def fit_rate(stats: Sequence[LevelStats], window: Optional[tuple] = None) -> RateFit:
    """Fit the geometric decay of ``d_n`` over levels above the noise floor."""
    if not stats:
        raise FitError("no levels to fit")
    floor = noise_floor(stats[0].pool_size)
    return fit_geometric([s.n for s in stats], [s.d_n for s in stats], floor, window)
