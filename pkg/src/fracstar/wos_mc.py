"""Walk-on-spheres for the symmetric alpha-stable process.

From the centre of a ball of radius r the process leaves by a jump to
|Y - c| = r / sqrt(V), V ~ Beta(alpha/2, 1 - alpha/2), in a uniform direction;
the radial law does not depend on the dimension. Walks therefore only ever
need centred exits. Exits from off-centre starting points are produced by
nesting centred exits inside the ball (strong Markov property), which is exact.

Every chunk of walks draws from its own Philox stream keyed by
(base_seed, point index, chunk index); chunk results are concatenated in chunk
order, so estimates do not depend on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .geometry import EXTERIOR, INNER, INTERIOR, Ball, RingDomain, WholeSpace
from .kernels import FracParams, exit_time_constant
from .solver_grid import Data, as_function, far_field_value


@dataclass(frozen=True)
class WalkConfig:
    step_fraction: float = 0.5
    max_steps: int = 10_000
    n_samples: int = 100_000
    base_seed: int = 0
    chunk_size: int = 8192
    workers: int = 1
    escape_radius: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.step_fraction < 1.0):
            raise ValueError("step_fraction must lie in (0, 1)")
        if int(self.n_samples) < 1:
            raise ValueError("n_samples must be at least 1")
        if int(self.max_steps) < 1 or int(self.chunk_size) < 1 or int(self.workers) < 1:
            raise ValueError("max_steps, chunk_size and workers must be positive")
        if not (0 <= int(self.base_seed) < 2 ** 64):
            raise ValueError("base_seed must be an unsigned 64-bit integer")


@dataclass
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    n_truncated: int = 0
    n_escaped: int = 0
    mean_steps: float = 0.0

    @property
    def truncated_fraction(self) -> float:
        return self.n_truncated / self.n_samples

    def to_dict(self) -> dict:
        from .reports import jsonable
        d = jsonable(self)
        d["truncated_fraction"] = self.truncated_fraction
        return d


def chunk_rng(base_seed: int, point: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(point), int(chunk)))
    return np.random.Generator(np.random.Philox(ss))


# --- ball exits --------------------------------------------------------------

def _directions(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.where(rng.random(n) < 0.5, -1.0, 1.0)[:, None]
    z = rng.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1)[:, None]


def centered_exit(n: int, dim: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Exit displacements from the centre of the unit ball, shape (n, dim)."""
    v = rng.beta(alpha / 2.0, 1.0 - alpha / 2.0, size=n)
    rad = 1.0 / np.sqrt(np.maximum(v, np.finfo(float).tiny))
    return rad[:, None] * _directions(n, dim, rng)


def sample_ball_exit(x, center, r: float, params: FracParams, rng: np.random.Generator,
                     size: Optional[int] = None, max_nest: int = 100_000) -> np.ndarray:
    """Exit point(s) of the process started at x from the ball B(center, r).

    Returns shape (dim,) when ``size`` is None, else (size, dim).
    """
    dim = params.dim
    x = np.atleast_1d(np.asarray(x, float))
    c = np.atleast_1d(np.asarray(center, float))
    if x.shape != (dim,) or c.shape != (dim,):
        raise ValueError("point dimensions do not match the operator")
    if not np.linalg.norm(x - c) < r:
        raise ValueError("starting point must lie strictly inside the ball")
    n = 1 if size is None else int(size)
    z = np.tile(x, (n, 1))
    live = np.arange(n)
    for _ in range(max_nest):
        if live.size == 0:
            break
        rho = r - np.linalg.norm(z[live] - c, axis=1)
        z[live] += rho[:, None] * centered_exit(live.size, dim, params.alpha, rng)
        live = live[np.linalg.norm(z[live] - c, axis=1) < r]
    else:
        raise RuntimeError("nested ball exits did not terminate")
    return z[0] if size is None else z


def ball_exit_density(y, x, center, r: float, params: FracParams) -> np.ndarray:
    """Density of the exit point at y (|y - center| > r) for a start at x."""
    dim, a = params.dim, params.alpha
    y = np.asarray(y, float).reshape(-1, dim)
    x = np.atleast_1d(np.asarray(x, float))
    c = np.atleast_1d(np.asarray(center, float))
    const = math.gamma(dim / 2.0) * math.pi ** (-dim / 2.0 - 1.0) * math.sin(math.pi * a / 2.0)
    s2 = np.sum((y - c) ** 2, axis=1)
    out = np.zeros(len(y))
    m = s2 > r * r
    out[m] = (const * (r * r - np.sum((x - c) ** 2)) ** (a / 2.0)
              * (s2[m] - r * r) ** (-a / 2.0) * np.linalg.norm(y[m] - x, axis=1) ** (-dim))
    return out


def exit_cdf_1d(y: float, x: float, center: float, r: float, params: FracParams) -> float:
    """P(exit point <= y) in 1D, by quadrature of the density."""
    if params.dim != 1:
        raise ValueError("exit_cdf_1d is one-dimensional")
    a = params.alpha
    lo, hi = center - r, center + r
    const = math.gamma(0.5) * math.pi ** -1.5 * math.sin(math.pi * a / 2.0)
    inner = (r * r - (x - center) ** 2) ** (a / 2.0)
    # substitute d = u^k for the distance past the edge; |y-c|^2 - r^2 = d (2r + d)
    k = 2.0 / (2.0 - a)

    def integrand(u, edge, sign):
        d = u ** k
        y = edge + sign * d
        return const * inner * (d * (2.0 * r + d)) ** (-a / 2.0) / abs(y - x) * k * u ** (k - 1.0)

    def mass(edge, sign, start):
        top = start ** (1.0 / k)
        parts = [(top, max(top, 1.0)), (max(top, 1.0), np.inf)]
        return sum(integrate.quad(integrand, p, q, args=(edge, sign), epsabs=1e-13, epsrel=1e-11,
                                  limit=200)[0] for p, q in parts if q > p)

    if y < lo:
        return mass(lo, -1.0, lo - y)
    if y < hi:
        return mass(lo, -1.0, 0.0)
    return 1.0 - mass(hi, 1.0, y - hi)


def centered_radial_cdf(s, alpha: float) -> np.ndarray:
    """P(|Y - c| <= s r) for the exit from the centre, s >= 1."""
    s = np.asarray(s, float)
    return np.where(s <= 1.0, 0.0, special.betaincc(alpha / 2.0, 1.0 - alpha / 2.0,
                                                    1.0 / np.maximum(s, 1.0) ** 2))


# --- walks ---------------------------------------------------------------------

def _project(domain, pts: np.ndarray) -> np.ndarray:
    """Radial projection onto the boundary of a star domain."""
    if isinstance(domain, Ball):
        rel = pts - domain.origin
        n = np.linalg.norm(rel, axis=1)
        n = np.where(n > 0, n, 1.0)
        return domain.origin + domain.r * rel / n[:, None]
    rel = pts - domain.origin
    n = np.linalg.norm(rel, axis=1)
    dirs = np.zeros_like(rel)
    nz = n > 0
    dirs[nz] = rel[nz] / n[nz, None]
    dirs[~nz, 0] = 1.0
    return domain.origin + domain.radius(dirs)[:, None] * dirs


def _nearest_score(ring: RingDomain, pts: np.ndarray, b0: Callable, b1: Callable) -> np.ndarray:
    d_out = ring.outer.boundary_distance(pts)
    if ring.inner is None:
        return b0(_project(ring.outer, pts))
    d_in = ring.inner.boundary_distance(pts)
    out = np.empty(len(pts))
    m = d_in <= d_out
    if np.any(m):
        out[m] = b1(_project(ring.inner, pts[m]))
    if np.any(~m):
        out[~m] = b0(_project(ring.outer, pts[~m]))
    return out


@dataclass
class _ChunkResult:
    scores: np.ndarray
    n_truncated: int
    n_escaped: int
    steps: int


def _run_chunk(x, ring, b0, b1, g, cfg: WalkConfig, params: FracParams, n: int,
               rng: np.random.Generator, far0: float) -> _ChunkResult:
    dim, a = params.dim, params.alpha
    mean_exit = exit_time_constant(params)
    pos = np.tile(x, (n, 1))
    score = np.zeros(n)
    active = np.arange(n)
    whole = isinstance(ring.outer, WholeSpace)
    esc_r = cfg.escape_radius or (ring.outer.bounding_radius if whole else math.inf)
    n_esc, total_steps = 0, 0
    for _ in range(cfg.max_steps):
        if active.size == 0:
            break
        p = pos[active]
        r = cfg.step_fraction * ring.boundary_distance(p)
        if g is not None:
            score[active] += g(p) * mean_exit * r ** a
        new = p + r[:, None] * centered_exit(active.size, dim, a, rng)
        pos[active] = new
        total_steps += active.size
        code = ring.classify(new)
        m = code == INNER
        if np.any(m):
            score[active[m]] += b1(new[m])
        m = code == EXTERIOR
        if np.any(m):
            score[active[m]] += b0(new[m])
        keep = code == INTERIOR
        if whole:
            gone = keep & (np.linalg.norm(new, axis=1) > esc_r)
            if np.any(gone):
                score[active[gone]] += far0
                n_esc += int(np.count_nonzero(gone))
                keep &= ~gone
        active = active[keep]
    n_trunc = int(active.size)
    if n_trunc:
        score[active] += _nearest_score(ring, pos[active], b0, b1)
    return _ChunkResult(score, n_trunc, n_esc, total_steps)


def _summarize(scores: np.ndarray, n_trunc: int, n_esc: int, steps: int) -> MCEstimate:
    n = len(scores)
    ref = scores[0]
    dev = scores - ref
    mean = float(ref + np.mean(dev))
    stderr = float(np.std(dev, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return MCEstimate(mean, stderr, n, n_trunc, n_esc, steps / n)


def estimate_solution(x, ring: RingDomain, b0: Data = 0.0, b1: Data = 1.0,
                      g: Optional[Data] = None, cfg: WalkConfig = WalkConfig(),
                      params: Optional[FracParams] = None, point_index: int = 0) -> MCEstimate:
    """Monte Carlo estimate of u(x) for (-Delta)^{a/2} u = g in the ring,
    u = b1 on the closed inner domain and u = b0 outside the outer domain.

    ``point_index`` selects an independent family of streams, so several
    points can share one base seed.
    """
    params = params or FracParams(1.0, ring.dim)
    dim = ring.dim
    if params.dim != dim:
        raise ValueError("operator and ring dimensions differ")
    if isinstance(ring.outer, WholeSpace) and ring.inner is None:
        raise ValueError("a walk in all of R^N without an inner domain never stops")
    x = np.atleast_1d(np.asarray(x, float))
    if not ring.contains(x[None])[0]:
        raise ValueError(f"starting point {x.tolist()} is not in the ring interior")
    b0f, b1f = as_function(b0, dim), as_function(b1, dim)
    gf = None if g is None else as_function(g, dim)
    far0 = far_field_value(b0f, dim) if isinstance(ring.outer, WholeSpace) else 0.0
    n = int(cfg.n_samples)
    sizes = [min(cfg.chunk_size, n - s) for s in range(0, n, cfg.chunk_size)]

    def work(k):
        return _run_chunk(x, ring, b0f, b1f, gf, cfg, params, sizes[k],
                          chunk_rng(cfg.base_seed, point_index, k), far0)

    if cfg.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(k) for k in range(len(sizes))]
    scores = np.concatenate([p.scores for p in parts])
    return _summarize(scores, sum(p.n_truncated for p in parts), sum(p.n_escaped for p in parts),
                      sum(p.steps for p in parts))


def estimate_points(points, ring: RingDomain, b0: Data = 0.0, b1: Data = 1.0,
                    g: Optional[Data] = None, cfg: WalkConfig = WalkConfig(),
                    params: Optional[FracParams] = None) -> list:
    return [estimate_solution(p, ring, b0, b1, g, cfg, params, point_index=i)
            for i, p in enumerate(np.asarray(points, float).reshape(-1, ring.dim))]
