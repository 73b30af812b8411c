"""Lattice solver for fractional Dirichlet problems on ring domains.

Discretisation: collocation of the symmetric-difference form on h*Z^N. On the
near square [-h, h]^N the second difference is replaced by the 2N-point
Laplacian stencil times the exact second moment of the kernel; outside it u is
replaced by its (multi)linear interpolant, so the weight of offset j is the
integral of the hat function phi_j against the kernel. All weights are
positive and sum in closed form over the infinite lattice, which gives the
M-matrix sign pattern and exact reproduction of constants.

Lattice values outside the computational box are taken to be the far-field
value of the exterior data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from scipy import fft, integrate, linalg
from scipy.sparse.linalg import LinearOperator, cg

from .conditions import NonlinearitySpec
from .geometry import EXTERIOR, INNER, INTERIOR, Grid, RingDomain, ScalarField, WholeSpace
from .kernels import FracParams, frac_constant

Data = Union[float, Callable[[np.ndarray], np.ndarray]]

DENSE_LIMIT = 3000


class AssemblyError(ValueError):
    pass


class SingularSystemError(RuntimeError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, outcome=None):
        super().__init__(msg)
        self.outcome = outcome


def as_function(data: Data, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    if callable(data):
        return lambda pts: np.asarray(data(np.asarray(pts, float).reshape(-1, dim)), float).reshape(-1)
    c = float(data)
    return lambda pts: np.full(len(np.asarray(pts).reshape(-1, dim)), c)


def far_field_value(fn: Callable, dim: int) -> float:
    far = np.zeros((1, dim))
    far[0, 0] = 1e8
    return float(fn(far)[0])


# --- lattice weights ---------------------------------------------------------

def _square_moments(dim: int, alpha: float):
    """(second moment M on [-1,1]^N, kernel mass T outside it), unit lattice."""
    if dim == 1:
        return 2.0 / (2.0 - alpha), 2.0 / alpha
    c_pow = lambda k: integrate.quad(lambda th: math.cos(th) ** k, 0.0, math.pi / 4,
                                     epsabs=0.0, epsrel=1e-12)[0]
    # int_Q y_1^2 |y|^{-2-a} = (1/2) int_Q |y|^{-a}; polar with r_max(th) = 1/cos(th)
    m = 0.5 * 8.0 * c_pow(alpha - 2.0) / (2.0 - alpha)
    t = 8.0 * c_pow(alpha) / alpha
    return m, t


def _cell_corner_integrals(lo: np.ndarray, dim: int, alpha: float, ng: int) -> np.ndarray:
    """For unit cells with lower corners ``lo`` (k, N), integrals of K times each
    multilinear corner basis function. Returns (k, 2^N)."""
    g, gw = np.polynomial.legendre.leggauss(ng)
    s, sw = 0.5 * (g + 1.0), 0.5 * gw
    if dim == 1:
        y = lo[:, :1] + s[None, :]
        k = np.abs(y) ** (-1.0 - alpha) * sw[None, :]
        return np.stack([np.sum(k * (1 - s), axis=1), np.sum(k * s, axis=1)], axis=1)
    sx, sy = np.meshgrid(s, s, indexing="ij")
    ww = np.outer(sw, sw)
    out = np.empty((len(lo), 4))
    basis = [(1 - sx) * (1 - sy), sx * (1 - sy), (1 - sx) * sy, sx * sy]
    for start in range(0, len(lo), 4096):
        blk = lo[start:start + 4096]
        y0 = blk[:, 0, None, None] + sx[None]
        y1 = blk[:, 1, None, None] + sy[None]
        k = (y0 ** 2 + y1 ** 2) ** (-(2.0 + alpha) / 2.0) * ww[None]
        for b, phi in enumerate(basis):
            out[start:start + len(blk), b] = np.sum(k * phi[None], axis=(1, 2))
    return out


@lru_cache(maxsize=16)
def unit_weights(dim: int, alpha: float, extent: int):
    """Weights on the unit lattice for offsets in [-extent, extent]^N, and S.

    Returns (W, S): W[j + extent] is the (positive) weight of offset j, with
    W at offset 0 equal to 0; S is the sum of all weights over Z^N \\ {0}.
    The factor c_{N,alpha} is not included.
    """
    n = 2 * extent + 1
    m, t = _square_moments(dim, alpha)
    # cells with lower-left corner a in [-extent-1, extent]^N cover all hat supports
    rng = np.arange(-extent - 1, extent + 1)
    lo = np.array(np.meshgrid(*([rng] * dim), indexing="ij")).reshape(dim, -1).T.astype(float)
    in_q = np.all((lo >= -1) & (lo <= 0), axis=1)
    lo = lo[~in_q]
    dist = np.min(np.linalg.norm(lo[:, None, :] + np.array(_corner_offsets(dim))[None], axis=2), axis=1)
    near = dist < 8.0
    ints = np.empty((len(lo), 2 ** dim))
    ints[near] = _cell_corner_integrals(lo[near], dim, alpha, 24)
    ints[~near] = _cell_corner_integrals(lo[~near], dim, alpha, 8)
    W = np.zeros((n,) * dim)
    for b, off in enumerate(_corner_offsets(dim)):
        node = lo.astype(int) + np.array(off, dtype=int) + extent
        ok = np.all((node >= 0) & (node < n), axis=1)
        np.add.at(W, tuple(node[ok].T), ints[ok, b])
    center = (extent,) * dim
    W[center] = 0.0
    for k in range(dim):
        for sgn in (-1, 1):
            idx = list(center)
            idx[k] += sgn
            W[tuple(idx)] += 0.5 * m
    S = t + dim * m
    return W, S


def _corner_offsets(dim: int):
    if dim == 1:
        return [(0,), (1,)]
    return [(0, 0), (1, 0), (0, 1), (1, 1)]


class _Convolver:
    """v -> (W * v) restricted to the box, via a cached real FFT of W."""

    def __init__(self, W: np.ndarray, shape):
        self.shape = tuple(shape)
        self.ext = (W.shape[0] - 1) // 2
        full = tuple(s + 2 * self.ext for s in self.shape)
        self.fshape = tuple(fft.next_fast_len(s, real=True) for s in full)
        self.Wf = fft.rfftn(W, self.fshape)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        out = fft.irfftn(fft.rfftn(v.reshape(self.shape), self.fshape) * self.Wf, self.fshape)
        sl = tuple(slice(self.ext, self.ext + s) for s in self.shape)
        return out[sl]


# --- operator -------------------------------------------------------------

@dataclass(eq=False)
class DiscreteOperator:
    """Discrete fractional Laplacian on the interior nodes of a ring.

    ``matvec`` acts on interior values (zero elsewhere); ``affine`` gives the
    contribution of prescribed values at the other box nodes and of the
    far-field value beyond the box.
    """

    ring: RingDomain
    params: FracParams
    grid: Grid
    codes: np.ndarray
    scale: float
    weights: np.ndarray
    diag: float
    conv: _Convolver = field(repr=False)
    box_rowsum: np.ndarray = field(repr=False)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.codes == INTERIOR)

    @property
    def n_unknowns(self) -> int:
        return int(np.count_nonzero(self.codes == INTERIOR))

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    def points(self) -> np.ndarray:
        return self.grid.points()

    def interior_points(self) -> np.ndarray:
        return self.grid.points()[self.interior]

    def apply_full(self, values: np.ndarray, far_value: float = 0.0) -> np.ndarray:
        """Operator applied to box values (far_value outside the box), at interior nodes."""
        v = np.asarray(values, float).reshape(-1)
        wv = self.conv(v).reshape(-1)
        lv = self.scale * (self.diag * v - wv - far_value * (self.diag - self.box_rowsum))
        return lv[self.interior]

    def matvec(self, u_int: np.ndarray) -> np.ndarray:
        v = np.zeros(self.grid.size)
        v[self.interior] = u_int
        return self.scale * (self.diag * u_int - self.conv(v).reshape(-1)[self.interior])

    def affine(self, known: np.ndarray, far_value: float = 0.0) -> np.ndarray:
        """Right-hand-side contribution of known values (interior entries ignored)."""
        v = np.asarray(known, float).reshape(-1).copy()
        v[self.interior] = 0.0
        wv = self.conv(v).reshape(-1)[self.interior]
        return self.scale * (wv + far_value * (self.diag - self.box_rowsum[self.interior]))

    def dense(self) -> np.ndarray:
        """Dense interior matrix (only for small systems)."""
        idx = self.interior
        coords = np.array(np.unravel_index(idx, self.grid.shape)).T
        ext = (self.weights.shape[0] - 1) // 2
        diff = coords[None, :, :] - coords[:, None, :] + ext
        A = -self.weights[tuple(np.moveaxis(diff, -1, 0))]
        A[np.diag_indices_from(A)] = self.diag
        return self.scale * A


def assemble(ring: RingDomain, params: FracParams, h: float, pad: float = 0.0,
             box=None) -> DiscreteOperator:
    """Assemble the discrete operator on the lattice h*Z^N covering the ring.

    ``box`` overrides the computational box (lo, hi); otherwise it is the
    bounding box of the outer domain grown by ``pad``.
    """
    if ring.dim != params.dim or ring.dim not in (1, 2):
        raise AssemblyError("lattices are 1D or 2D and must match the operator dimension")
    if box is None:
        lo, hi = ring.bounding_box()
        lo, hi = np.asarray(lo) - pad, np.asarray(hi) + pad
    else:
        lo, hi = map(np.atleast_1d, box)
    grid = Grid.covering(lo, hi, h)
    codes = ring.classify(grid.points())
    if not np.any(codes == INTERIOR):
        raise AssemblyError("no lattice node inside the ring")
    if ring.inner is not None:
        if not np.any(codes == INNER):
            raise AssemblyError("the closed inner domain contains no lattice node (ring unresolved)")
        if ring.gap() < 2.0 * h:
            raise AssemblyError("degenerate ring: inner closure is within 2h of the outer boundary")
    extent = max(grid.shape) - 1
    W, S = unit_weights(grid.dim, float(params.alpha), extent)
    box_rowsum = _Convolver(W, grid.shape)(np.ones(grid.shape)).reshape(-1)
    scale = frac_constant(params) * h ** (-params.alpha)
    return DiscreteOperator(ring, params, grid, codes, scale, W, S,
                            _Convolver(W, grid.shape), box_rowsum)


# --- problems and solves ---------------------------------------------------

@dataclass
class LinearData:
    """(-Delta)^{a/2} u - q u = g in the ring, u = h outside it."""

    q: Data = 0.0
    g: Data = 0.0
    h: Data = 0.0
    far_value: Optional[float] = None


@dataclass
class NonlinearData:
    """-(-Delta)^{a/2} u = f(x, u) in the ring, u = b0 outside the outer domain, u = b1 on the closed inner domain."""

    f: NonlinearitySpec
    b0: Data = 0.0
    b1: Data = 1.0
    far_value: Optional[float] = None


@dataclass
class ProblemSpec:
    ring: RingDomain
    params: FracParams
    data: Union[LinearData, NonlinearData]


@dataclass
class SolveOutcome:
    field: ScalarField
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"residual": self.residual, "iterations": self.iterations,
                "converged": self.converged, "history": list(self.history),
                "n_nodes": int(self.field.grid.size)}


def exterior_values(op: DiscreteOperator, b0: Callable, b1: Callable) -> np.ndarray:
    pts = op.points()
    out = np.zeros(op.grid.size)
    inner = op.codes == INNER
    ext = op.codes == EXTERIOR
    if np.any(inner):
        out[inner] = b1(pts[inner])
    if np.any(ext):
        out[ext] = b0(pts[ext])
    return out


def exterior_rule(ring: RingDomain, b0: Callable, b1: Callable) -> Callable:
    def rule(pts):
        pts = np.asarray(pts, float).reshape(-1, ring.dim)
        code = ring.classify(pts)
        out = np.zeros(len(pts))
        m = code == INNER
        if np.any(m):
            out[m] = b1(pts[m])
        m = code != INNER
        if np.any(m):
            out[m] = b0(pts[m])
        return out
    return rule


class _LinearSolver:
    """Solves (A - diag(q)) u = rhs on the interior; dense Cholesky when small."""

    def __init__(self, op: DiscreteOperator, qvals: np.ndarray, rtol: float = 1e-13):
        self.op, self.q, self.rtol = op, qvals, rtol
        self.iterations = 0
        self.factor = None
        if op.n_unknowns <= DENSE_LIMIT:
            A = op.dense() - np.diag(qvals)
            try:
                self.factor = linalg.cho_factor(A)
            except linalg.LinAlgError as exc:
                raise SingularSystemError(f"interior matrix is not positive definite: {exc}")
        else:
            n = op.n_unknowns
            self.lin = LinearOperator((n, n), matvec=lambda u: op.matvec(u) - qvals * u, dtype=float)
            d = op.scale * op.diag - qvals
            self.prec = LinearOperator((n, n), matvec=lambda r: r / d, dtype=float)

    def solve(self, rhs: np.ndarray, x0=None) -> np.ndarray:
        if self.factor is not None:
            self.iterations = 1
            return linalg.cho_solve(self.factor, rhs)
        count = [0]
        def cb(_):
            count[0] += 1
        u, info = cg(self.lin, rhs, x0=x0, rtol=self.rtol, atol=0.0, maxiter=20000,
                     M=self.prec, callback=cb)
        self.iterations = count[0]
        if info != 0:
            raise SingularSystemError(f"conjugate gradients stopped with info={info}")
        return u


def _values(data: Data, pts: np.ndarray, dim: int) -> np.ndarray:
    return as_function(data, dim)(pts)


def solve_linear(op: DiscreteOperator, q: Data = 0.0, g: Data = 0.0, h: Data = 0.0,
                 far_value: Optional[float] = None) -> SolveOutcome:
    """Solve (-Delta)^{a/2} u - q u = g on the ring interior with u = h elsewhere."""
    dim = op.grid.dim
    pts = op.interior_points()
    qv = _values(q, pts, dim)
    if np.any(qv > 0):
        raise ValueError("solve_linear needs q <= 0 on the interior")
    hf = as_function(h, dim)
    far = far_field_value(hf, dim) if far_value is None else far_value
    known = np.zeros(op.grid.size)
    outside = op.codes != INTERIOR
    known[outside] = hf(op.points()[outside])
    rhs = _values(g, pts, dim) + op.affine(known, far)
    solver = _LinearSolver(op, qv)
    u = solver.solve(rhs)
    vals = known.copy()
    vals[op.interior] = u
    fld = ScalarField(op.grid, vals, hf, op.ring.contains)
    res = linear_residual(op, vals, qv, _values(g, pts, dim), far)
    return SolveOutcome(fld, res, solver.iterations, res <= 1e-8 * max(1.0, op.scale))


def linear_residual(op, vals, qv, gv, far) -> float:
    lu = op.apply_full(vals, far)
    return float(np.max(np.abs(lu - qv * vals.reshape(-1)[op.interior] - gv)))


def solve_nonlinear_picard(op: DiscreteOperator, f: NonlinearitySpec, b0: Data = 0.0, b1: Data = 1.0,
                           max_iter: int = 200, tol: float = 1e-10, damping: float = 1.0,
                           far_value: Optional[float] = None, raise_on_failure: bool = False) -> SolveOutcome:
    """Picard iteration u <- h - G[f(., clamp(u))] through repeated linear solves.

    f is extended to u < 0 by f(x, 0) and to u > 1 by f(x, 1). The damping
    factor is halved whenever the step length grows.
    """
    dim = op.grid.dim
    b0f, b1f = as_function(b0, dim), as_function(b1, dim)
    far = far_field_value(b0f, dim) if far_value is None else far_value
    known = exterior_values(op, b0f, b1f)
    pts = op.interior_points()
    base = op.affine(known, far)
    solver = _LinearSolver(op, np.zeros(op.n_unknowns))
    fx = lambda u: np.asarray(f(pts, np.clip(u, 0.0, 1.0)), float)
    u = solver.solve(base)
    history, omega, prev_step = [], damping, math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        step = solver.solve(base - fx(u), x0=u)
        new = (1.0 - omega) * u + omega * step
        dist = float(np.max(np.abs(new - u)))
        history.append(dist)
        u = new
        if dist > prev_step:
            omega *= 0.5
        prev_step = dist
        if dist < tol:
            converged = True
            break
    vals = known.copy()
    vals[op.interior] = u
    fld = ScalarField(op.grid, vals, exterior_rule(op.ring, b0f, b1f), op.ring.contains)
    res = nonlinear_residual(op, vals, f, far)
    converged = converged and res < max(tol, 1e-9) * max(1.0, op.scale)
    out = SolveOutcome(fld, res, it, converged, history)
    if not converged and raise_on_failure:
        last = history[-1] if history else math.nan
        raise NonConvergenceError(f"Picard iteration did not converge in {it} steps "
                                  f"(last step {last:.3e}, residual {res:.3e})", out)
    return out


def nonlinear_residual(op, vals, f: NonlinearitySpec, far) -> float:
    pts = op.interior_points()
    u = vals.reshape(-1)[op.interior]
    lu = op.apply_full(vals, far)
    return float(np.max(np.abs(lu + f(pts, np.clip(u, 0.0, 1.0)))))


def residual(fld: ScalarField, op: DiscreteOperator, problem: ProblemSpec) -> float:
    """Max over interior nodes of the discrete equation defect."""
    d = problem.data
    dim = op.grid.dim
    vals = fld.values.reshape(-1)
    pts = op.interior_points()
    if isinstance(d, LinearData):
        hf = as_function(d.h, dim)
        far = far_field_value(hf, dim) if d.far_value is None else d.far_value
        return linear_residual(op, vals, _values(d.q, pts, dim), _values(d.g, pts, dim), far)
    b0f = as_function(d.b0, dim)
    far = far_field_value(b0f, dim) if d.far_value is None else d.far_value
    return nonlinear_residual(op, vals, d.f, far)


def solve(problem: ProblemSpec, h: float, op: Optional[DiscreteOperator] = None, **kw):
    """Assemble (unless given) and solve a ProblemSpec; returns (op, outcome)."""
    if op is None:
        op = assemble(problem.ring, problem.params, h, **{k: kw.pop(k) for k in ("pad", "box") if k in kw})
    d = problem.data
    if isinstance(d, LinearData):
        return op, solve_linear(op, d.q, d.g, d.h, d.far_value)
    return op, solve_nonlinear_picard(op, d.f, d.b0, d.b1, far_value=d.far_value, **kw)


def maximum_principle_check(fld: ScalarField, op: DiscreteOperator, h: Data = 0.0) -> bool:
    """min interior value >= -1e-12, and > 0 when the exterior data is positive somewhere."""
    vals = fld.values.reshape(-1)
    u = vals[op.interior]
    if np.min(u) < -1e-12:
        return False
    outside = op.codes != INTERIOR
    hf = as_function(h, op.grid.dim)
    positive = np.any(hf(op.points()[outside]) > 0) or far_field_value(hf, op.grid.dim) > 0
    if positive:
        return bool(np.min(u) > 0.0)
    return True


def green_column(op: DiscreteOperator, y) -> ScalarField:
    """Discrete Green function G(., y): solve op G = delta_y / h^N with zero exterior."""
    y = np.atleast_1d(np.asarray(y, float))
    pts = op.interior_points()
    k = int(np.argmin(np.linalg.norm(pts - y, axis=1)))
    rhs = np.zeros(op.n_unknowns)
    rhs[k] = op.spacing ** (-op.grid.dim)
    u = _LinearSolver(op, np.zeros(op.n_unknowns)).solve(rhs)
    vals = np.zeros(op.grid.size)
    vals[op.interior] = u
    return ScalarField(op.grid, vals, lambda q: np.zeros(len(np.asarray(q).reshape(-1, op.grid.dim))),
                       op.ring.contains)
