"""Star-shaped domains, ring domains, lattice fields and ray-monotonicity checks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator
from scipy.spatial import cKDTree

DEFAULT_T_GRID = (1.01, 1.05, 1.1, 1.25, 1.5, 2.0, 4.0)


def _pts(x, dim: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, dim)


# --- domains -----------------------------------------------------------------

class StarDomain:
    """A bounded open set, star-shaped with respect to ``origin``.

    Subclasses provide the radial function about the origin plus boundary
    samples; everything else derives from those.
    """

    dim: int
    origin: np.ndarray

    def radius(self, dirs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, closed: bool = False) -> np.ndarray:
        pts = _pts(x, self.dim) - self.origin
        r = np.linalg.norm(pts, axis=1)
        dirs = np.zeros_like(pts)
        nz = r > 0
        dirs[nz] = pts[nz] / r[nz, None]
        dirs[~nz, 0] = 1.0
        bound = self.radius(dirs)
        return r <= bound if closed else r < bound

    def boundary_points(self, n: int) -> np.ndarray:
        return self.origin + self._unit_dirs(n) * self.radius(self._unit_dirs(n))[:, None]

    def _unit_dirs(self, n: int) -> np.ndarray:
        if self.dim == 1:
            return np.array([[-1.0], [1.0]])
        th = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)])

    @cached_property
    def _boundary_tree(self):
        return cKDTree(self.boundary_points(8192))

    def boundary_distance(self, x) -> np.ndarray:
        """Unsigned distance from each point to the boundary."""
        pts = _pts(x, self.dim)
        if self.dim == 1:
            ends = self.boundary_points(2)[:, 0]
            return np.min(np.abs(pts[:, :1] - ends[None, :]), axis=1)
        d, _ = self._boundary_tree.query(pts)
        return d

    def bounding_box(self):
        b = self.boundary_points(4096)
        return b.min(axis=0), b.max(axis=0)

    def max_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.boundary_points(4096), axis=1)))


@dataclass(frozen=True, eq=False)
class Ball(StarDomain):
    center: Sequence[float]
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.center)

    def radius(self, dirs):
        return np.full(len(dirs), self.r)

    def boundary_distance(self, x):
        pts = _pts(x, self.dim)
        return np.abs(np.linalg.norm(pts - self.origin, axis=1) - self.r)

    def describe(self) -> dict:
        return {"kind": "ball", "center": list(self.center), "radius": self.r}


@dataclass(frozen=True, eq=False)
class RadialGraph(StarDomain):
    """{origin + s e(theta) : 0 <= s < rho(theta)} from sampled radii.

    In 2D the samples are equispaced angles and rho is a periodic cubic spline
    (``interpolation="spline"``) or piecewise linear (``"linear"``, no normals).
    In 1D the two samples are the radii towards -1 and +1.
    """

    center: Sequence[float]
    radii: Sequence[float]
    interpolation: str = "spline"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=float))
        if np.any(self.radii <= 0) or not np.all(np.isfinite(self.radii)):
            raise ValueError("radii must be positive and finite")
        if self.dim == 1 and len(self.radii) != 2:
            raise ValueError("a 1D radial graph has exactly two radii")
        if self.interpolation not in ("spline", "linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    @classmethod
    def from_function(cls, rho: Callable, center=(0.0, 0.0), n: int = 2048, **kw):
        th = 2.0 * np.pi * np.arange(n) / n
        return cls(center, np.asarray(rho(th), dtype=float) * np.ones(n), **kw)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.center)

    @cached_property
    def _spline(self):
        n = len(self.radii)
        th = 2.0 * np.pi * np.arange(n + 1) / n
        return CubicSpline(th, np.append(self.radii, self.radii[0]), bc_type="periodic")

    def rho(self, theta) -> np.ndarray:
        theta = np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi)
        if self.interpolation == "spline":
            return self._spline(theta)
        n = len(self.radii)
        th = 2.0 * np.pi * np.arange(n + 1) / n
        return np.interp(theta, th, np.append(self.radii, self.radii[0]))

    def drho(self, theta) -> np.ndarray:
        if self.interpolation != "spline":
            raise ValueError("piecewise-linear radial graphs have no well-defined normal")
        return self._spline(np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi), 1)

    def radius(self, dirs):
        if self.dim == 1:
            return np.where(dirs[:, 0] < 0, self.radii[0], self.radii[1])
        return self.rho(np.arctan2(dirs[:, 1], dirs[:, 0]))

    def describe(self) -> dict:
        return {"kind": "radial_graph", "center": list(self.center), "n_samples": len(self.radii),
                "interpolation": self.interpolation}


@dataclass(frozen=True)
class WholeSpace:
    """Marker for an outer domain equal to all of R^N; ``bounding_radius`` truncates it numerically."""

    dim: int
    bounding_radius: float = 8.0

    def contains(self, x, closed: bool = False):
        return np.ones(len(_pts(x, self.dim)), dtype=bool)

    def boundary_distance(self, x):
        return np.full(len(_pts(x, self.dim)), np.inf)

    def bounding_box(self):
        r = self.bounding_radius
        return np.full(self.dim, -r), np.full(self.dim, r)

    def max_radius(self) -> float:
        return self.bounding_radius

    def describe(self) -> dict:
        return {"kind": "whole_space", "bounding_radius": self.bounding_radius}


INTERIOR, INNER, EXTERIOR = 0, 1, 2


@dataclass(frozen=True)
class RingDomain:
    """Outer domain minus the closed inner domain. ``inner=None`` gives the outer domain alone."""

    outer: object
    inner: Optional[StarDomain] = None
    margin: float = 0.0

    def __post_init__(self):
        dims = {self.outer.dim} | ({self.inner.dim} if self.inner is not None else set())
        if len(dims) != 1:
            raise ValueError("inner and outer domains have different dimensions")
        if self.inner is None:
            return
        zero = np.zeros((1, self.dim))
        if not self.inner.contains(zero)[0]:
            raise ValueError("the origin must lie inside the inner domain")
        b = self.inner.boundary_points(1024)
        inside = self.outer.contains(b) & (self.outer.boundary_distance(b) > self.margin)
        if not np.all(inside):
            raise ValueError("closure of the inner domain is not contained in the outer domain")

    @property
    def dim(self) -> int:
        return self.outer.dim

    def classify(self, x) -> np.ndarray:
        """0 = ring interior, 1 = closed inner domain, 2 = outside the outer domain."""
        pts = _pts(x, self.dim)
        code = np.full(len(pts), INTERIOR, dtype=np.int8)
        code[~self.outer.contains(pts)] = EXTERIOR
        if self.inner is not None:
            code[self.inner.contains(pts, closed=True)] = INNER
        return code

    def contains(self, x) -> np.ndarray:
        return self.classify(x) == INTERIOR

    def boundary_distance(self, x) -> np.ndarray:
        d = self.outer.boundary_distance(x)
        if self.inner is not None:
            d = np.minimum(d, self.inner.boundary_distance(x))
        return d

    def gap(self) -> float:
        """Smallest distance between the inner boundary and the outer boundary."""
        if self.inner is None:
            return math.inf
        return float(np.min(self.outer.boundary_distance(self.inner.boundary_points(2048))))

    def bounding_box(self):
        return self.outer.bounding_box()

    def describe(self) -> dict:
        return {"outer": self.outer.describe(),
                "inner": None if self.inner is None else self.inner.describe()}


def is_starshaped_set(d: StarDomain, n_dirs: int = 64, n_scales: int = 50, tol: float = 1e-9):
    """Sampled check of s*A inside A for s in [0, 1], star centre the global origin.

    Returns ``(ok, witness)`` with witness ``None`` or a dict naming the
    boundary point and scale whose image left the set.
    """
    x = d.boundary_points(n_dirs) - d.origin
    # pull slightly inside: points of the open set near the boundary
    x = d.origin + x * (1.0 - 1e-9)
    s = np.linspace(0.0, 1.0, n_scales)
    worst, wit = math.inf, None
    for k, xk in enumerate(x):
        pts = s[:, None] * xk[None, :]
        rel = pts - d.origin
        r = np.linalg.norm(rel, axis=1)
        dirs = np.where(r[:, None] > 0, rel / np.maximum(r, 1e-300)[:, None], 0.0)
        if d.dim >= 1:
            dirs[r == 0, 0] = 1.0
        slack = d.radius(dirs) + tol - r
        j = int(np.argmin(slack))
        if slack[j] < worst:
            worst = float(slack[j])
            wit = {"boundary_point": xk.tolist(), "scale": float(s[j]), "slack": worst}
    ok = worst >= 0.0
    return ok, None if ok else wit


def uniform_star_margin(d, n_samples: int = 2048) -> float:
    """min over boundary samples of <x, nu(x)>, x in global coordinates."""
    if isinstance(d, Ball):
        return d.r - float(np.linalg.norm(d.origin))
    if isinstance(d, RadialGraph):
        if d.dim == 1:
            lo = d.origin[0] - d.radii[0]
            hi = d.origin[0] + d.radii[1]
            return float(min(hi, -lo))
        th = 2.0 * np.pi * np.arange(n_samples) / n_samples
        r, dr = d.rho(th), d.drho(th)
        er = np.column_stack([np.cos(th), np.sin(th)])
        et = np.column_stack([-np.sin(th), np.cos(th)])
        nu = (r[:, None] * er - dr[:, None] * et) / np.sqrt(r ** 2 + dr ** 2)[:, None]
        x = d.origin + r[:, None] * er
        return float(np.min(np.sum(x * nu, axis=1)))
    raise ValueError(f"no well-defined normals for {type(d).__name__}")


# --- lattice fields ----------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform lattice with node k at origin + k*spacing, k in [0, shape)."""

    origin: tuple
    spacing: float
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if len(self.origin) != len(self.shape) or len(self.shape) not in (1, 2):
            raise ValueError("lattices are 1D or 2D")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @classmethod
    def covering(cls, lo, hi, h: float) -> "Grid":
        """Smallest sub-lattice of h*Z^N containing the box [lo, hi]."""
        lo = np.floor(np.atleast_1d(lo) / h - 1e-9).astype(int)
        hi = np.ceil(np.atleast_1d(hi) / h + 1e-9).astype(int)
        return cls(tuple(lo * h), h, tuple(hi - lo + 1))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self):
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.shape)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def in_box(self, x) -> np.ndarray:
        pts = _pts(x, self.dim)
        lo = np.asarray(self.origin)
        hi = lo + self.spacing * (np.asarray(self.shape) - 1)
        return np.all((pts >= lo - 1e-12) & (pts <= hi + 1e-12), axis=1)

    def describe(self) -> dict:
        return {"origin": list(self.origin), "spacing": self.spacing, "shape": list(self.shape)}


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values on a lattice with an exact rule everywhere else.

    Points where ``interior`` is true and that lie in the lattice box are
    multilinearly interpolated; every other point is handed to
    ``exterior_rule``. Without ``interior`` the whole box is interpolated.
    """

    grid: Grid
    values: np.ndarray
    exterior_rule: Optional[Callable[[np.ndarray], np.ndarray]] = None
    interior: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @cached_property
    def _interp(self):
        return RegularGridInterpolator(self.grid.axes(), self.values, method="linear",
                                       bounds_error=False, fill_value=None)

    def __call__(self, x) -> np.ndarray:
        pts = _pts(x, self.dim)
        out = np.empty(len(pts))
        mask = self.grid.in_box(pts)
        if self.interior is not None:
            mask &= np.asarray(self.interior(pts), dtype=bool)
        if np.any(mask):
            out[mask] = self._interp(pts[mask])
        rest = ~mask
        if np.any(rest):
            if self.exterior_rule is None:
                raise ValueError("query outside the lattice box and no exterior rule")
            out[rest] = np.asarray(self.exterior_rule(pts[rest]), dtype=float).reshape(-1)
        return out

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values, self.exterior_rule, self.interior)

    # serialisation
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        g = self.grid
        w.writerow(["# dim", g.dim])
        w.writerow(["# origin", *[repr(o) for o in g.origin]])
        w.writerow(["# spacing", repr(g.spacing)])
        w.writerow(["# shape", *g.shape])
        w.writerow(["index", *[f"x{k}" for k in range(g.dim)], "value"])
        for i, (p, v) in enumerate(zip(g.points(), self.values.reshape(-1))):
            w.writerow([i, *[repr(float(c)) for c in p], repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "ScalarField":
        text = source
        if "\n" not in str(source):
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        head = {r[0].lstrip("# ").strip(): r[1:] for r in rows[:4]}
        dim = int(head["dim"][0])
        grid = Grid(tuple(float(o) for o in head["origin"]), float(head["spacing"][0]),
                    tuple(int(s) for s in head["shape"]))
        vals = np.array([float(r[dim + 1]) for r in rows[5:]])
        if len(vals) != grid.size:
            raise ValueError("node count does not match the grid header")
        return cls(grid, vals)


def superlevel_set(f: ScalarField, level: float) -> np.ndarray:
    """Boolean node mask of {u >= level} (closed superlevel set)."""
    return f.values >= level


def ut_field(f: ScalarField, t: float) -> ScalarField:
    """u_t(x) = u(x) - u(tx), node-wise; off-grid queries go through ``f``."""
    if t <= 1.0:
        raise ValueError("t must exceed 1")
    pts = f.grid.points()
    vals = f.values.reshape(-1) - f(t * pts)
    rule = lambda q: f(q) - f(t * _pts(q, f.dim))
    return ScalarField(f.grid, vals, rule, f.interior)


# --- ray monotonicity / star reports --------------------------------------------

@dataclass
class LevelVerdict:
    level: float
    passed: bool
    worst_violation: float
    n_nodes: int
    max_crossings: Optional[int] = None
    witness: Optional[dict] = None


@dataclass
class StarReport:
    passed: bool
    tolerance: float
    worst_violation: float
    witness: Optional[dict] = None
    levels: list = field(default_factory=list)
    strict_margin: Optional[float] = None
    uniform_margin: Optional[float] = None
    ut_minima: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        from .reports import jsonable
        return jsonable(self)


def ray_directions(dim: int, n_rays: int) -> np.ndarray:
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    th = 2.0 * np.pi * (np.arange(n_rays) + 0.5) / n_rays
    return np.column_stack([np.cos(th), np.sin(th)])


def sample_rays(f: ScalarField, center, n_rays: int, n_points: int, r_max: Optional[float] = None,
                r_min: float = 0.0):
    """Ray sample points, shape (n_rays, n_points, N), and the radii used."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if r_max is None:
        g = f.grid
        lo = np.asarray(g.origin)
        hi = lo + g.spacing * (np.asarray(g.shape) - 1)
        corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(f.dim, -1).T
        r_max = float(np.max(np.linalg.norm(corners - center, axis=1)))
    r = np.linspace(r_min, r_max, n_points + 1)[1:]
    dirs = ray_directions(f.dim, n_rays)
    return center + r[None, :, None] * dirs[:, None, :], r, dirs


def ray_monotonicity(f: ScalarField, n_rays: int = 64, t_grid: Sequence[float] = DEFAULT_T_GRID,
                     tol: float = 0.0, n_points: int = 200, center=None,
                     r_max: Optional[float] = None, exclude_radius: float = 0.0) -> StarReport:
    """Worst value of u(x) - u(c + t(x - c)) over rays from the star centre c.

    Passes iff the worst value is >= -tol. Points within ``exclude_radius``
    of the centre are skipped (used for Green-function singularities).
    """
    c = np.zeros(f.dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    pts, r, dirs = sample_rays(f, c, n_rays, n_points, r_max)
    keep = r > exclude_radius
    pts = pts[:, keep]
    flat = pts.reshape(-1, f.dim)
    base = f(flat)
    worst, wit = math.inf, None
    for t in t_grid:
        diff = base - f(c + t * (flat - c))
        k = int(np.argmin(diff))
        if diff[k] < worst:
            worst = float(diff[k])
            ray = k // pts.shape[1]
            wit = {"ray": int(ray), "direction": dirs[ray].tolist(), "x": flat[k].tolist(),
                   "t": float(t), "u_x": float(base[k]), "u_tx": float(base[k] - diff[k])}
    ok = worst >= -tol
    return StarReport(passed=ok, tolerance=tol, worst_violation=worst, witness=None if ok else wit,
                      extras={"n_rays": len(dirs), "n_points": int(pts.shape[1]),
                              "t_grid": list(map(float, t_grid))})


def level_star_check(f: ScalarField, level: float, n_scales: int = 64, tol: float = 0.0,
                     center=None, exclude_radius: float = 0.0) -> LevelVerdict:
    """Containment of the scaled superlevel set {u >= level} in itself, over its lattice nodes."""
    c = np.zeros(f.dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    mask = superlevel_set(f, level).reshape(-1)
    nodes = f.grid.points()[mask]
    if exclude_radius > 0:
        nodes = nodes[np.linalg.norm(nodes - c, axis=1) > exclude_radius]
    if len(nodes) == 0:
        return LevelVerdict(level, True, math.inf, 0)
    worst, wit = math.inf, None
    for s in np.linspace(0.0, 1.0, n_scales + 1)[1:-1]:
        img = c + s * (nodes - c)
        if exclude_radius > 0:
            far = np.linalg.norm(img - c, axis=1) > exclude_radius
            if not np.any(far):
                continue
            img, src = img[far], nodes[far]
        else:
            src = nodes
        slack = f(img) - level
        k = int(np.argmin(slack))
        if slack[k] < worst:
            worst = float(slack[k])
            wit = {"node": src[k].tolist(), "scale": float(s), "u_image": float(slack[k] + level)}
    ok = worst >= -tol
    return LevelVerdict(level, ok, worst, int(len(nodes)), witness=None if ok else wit)


def count_crossings(f: ScalarField, level: float, n_rays: int = 64, n_points: int = 400,
                    tol: float = 0.0, center=None, r_max=None) -> np.ndarray:
    """Per-ray number of passages through the band [level - tol, level + tol].

    A strictly star-shaped superlevel set gives exactly one passage per ray.
    """
    c = np.zeros(f.dim) if center is None else center
    pts, _, _ = sample_rays(f, c, n_rays, n_points, r_max)
    vals = f(pts.reshape(-1, f.dim)).reshape(pts.shape[:2])
    counts = np.zeros(len(vals), dtype=int)
    for i, row in enumerate(vals):
        state = 0
        for v in row:
            s = 1 if v > level + tol else (-1 if v < level - tol else 0)
            if s != 0 and s != state:
                if state != 0:
                    counts[i] += 1
                state = s
    return counts
