"""Closed-form constants and kernels for the fractional Laplacian.

Everything here is a pure function of its arguments. These values are the
exact references the quadrature, grid and Monte Carlo code is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.special import gamma


@dataclass(frozen=True)
class FracParams:
    """Order ``alpha`` in (0, 2) of the operator and space dimension ``dim``."""

    alpha: float
    dim: int = 1

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    @property
    def kind(self) -> "KernelKind":
        return KernelKind.of(self)


class KernelKind(Enum):
    RIESZ = "riesz"
    COMPENSATED_SUB = "compensated_sub"
    COMPENSATED_LOG = "compensated_log"

    @classmethod
    def of(cls, p: FracParams) -> "KernelKind":
        if p.dim > p.alpha:
            return cls.RIESZ
        if p.alpha > 1.0:
            return cls.COMPENSATED_SUB
        return cls.COMPENSATED_LOG


def frac_constant(p: FracParams) -> float:
    """Normalisation constant c_{N,alpha} of the singular-integral definition."""
    a, n = p.alpha, p.dim
    return (2.0 ** (a - 2.0) * math.pi ** (-n / 2.0) * a * (2.0 - a)
            * gamma((n + a) / 2.0) / gamma(2.0 - a / 2.0))


def riesz_constant(p: FracParams) -> float:
    """Constant C_{N,alpha} of the Riesz kernel; only defined for N > alpha."""
    if p.dim <= p.alpha:
        raise ValueError("Riesz constant needs dim > alpha (compensated regime otherwise)")
    a, n = p.alpha, p.dim
    return gamma((n - a) / 2.0) / (2.0 ** a * math.pi ** (n / 2.0) * gamma(a / 2.0))


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^{dim-1} (2 for dim=1)."""
    return 2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0)


def kernel(p: FracParams, x) -> float:
    """Riesz or compensated Riesz kernel K_alpha evaluated at the point ``x``."""
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    kind = p.kind
    if kind is KernelKind.COMPENSATED_SUB:
        return r ** (p.alpha - 1.0) / (2.0 * gamma(p.alpha) * math.cos(math.pi * p.alpha / 2.0))
    if r == 0.0:
        raise ZeroDivisionError("kernel is singular at the origin")
    if kind is KernelKind.RIESZ:
        return riesz_constant(p) * r ** (p.alpha - p.dim)
    return math.log(1.0 / r) / math.pi


# --- Green function of the interval (-1, 1) ---------------------------------

def _require_1d(p: FracParams):
    if p.dim != 1:
        raise ValueError("the interval Green function needs dim == 1")


def _check_inside(*pts):
    for v in pts:
        if not (-1.0 < v < 1.0):
            raise ValueError(f"point {v} is not inside (-1, 1)")


def green_prefactor(alpha: float) -> float:
    return 1.0 / (2.0 ** alpha * gamma(alpha / 2.0) ** 2)


def _smooth_quad(f, a: float, b: float) -> float:
    val, _ = integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)
    return val


def green_integral(w: float, alpha: float) -> float:
    """int_0^w r^{alpha/2-1} (1+r)^{-1/2} dr.

    The substitution r = s^{2/alpha} turns the integrand into the bounded
    function (2/alpha)(1 + s^{2/alpha})^{-1/2} on [0, w^{alpha/2}]; the part
    beyond s = 1 is integrated in log variables so large w stays cheap.
    """
    if w <= 0.0:
        return 0.0
    if math.isinf(w):
        if alpha >= 1.0:
            return math.inf
        a = alpha / 2.0
        return gamma(a) * gamma(0.5 - a) / gamma(0.5)
    e = 2.0 / alpha
    top = w ** (alpha / 2.0)
    head = _smooth_quad(lambda s: (1.0 + s ** e) ** -0.5, 0.0, min(top, 1.0))
    tail = 0.0
    if top > 1.0:
        tail = _smooth_quad(lambda v: math.exp(v) * (1.0 + math.exp(e * v)) ** -0.5,
                            0.0, math.log(top))
    return e * (head + tail)


def _cross_ratio(x: float, y: float) -> float:
    return (1.0 - x * x) * (1.0 - y * y) / (x - y) ** 2


def diagonal_green(x: float, alpha: float) -> float:
    if alpha <= 1.0:
        return math.inf
    return (1.0 - x * x) ** (alpha - 1.0) / (
        2.0 ** (alpha - 1.0) * gamma(alpha / 2.0) ** 2 * (alpha - 1.0))


def interval_green(x: float, y: float, p: FracParams) -> float:
    """Green function G_{(-1,1)}(x, y); +inf on the diagonal when alpha <= 1."""
    _require_1d(p)
    _check_inside(x, y)
    if x == y:
        return diagonal_green(x, p.alpha)
    return (green_prefactor(p.alpha) * abs(x - y) ** (p.alpha - 1.0)
            * green_integral(_cross_ratio(x, y), p.alpha))


def interval_green_closed_alpha1(x: float, y: float) -> float:
    """alpha = 1 closed form (1/pi) log(sqrt(w) + sqrt(1 + w))."""
    w = _cross_ratio(x, y)
    return math.log(math.sqrt(w) + math.sqrt(1.0 + w)) / math.pi


def interval_green_dx(x: float, y: float, p: FracParams) -> float:
    """Partial derivative of G_{(-1,1)}(x, y) in the first argument, x != y."""
    _require_1d(p)
    _check_inside(x, y)
    if x == y:
        raise ZeroDivisionError("Green function derivative is singular at x == y")
    a = p.alpha
    c = green_prefactor(a)
    d = x - y
    if a > 1.0:
        return c * _green_dx_substituted(x, y, a)
    w = _cross_ratio(x, y)
    dw = (2.0 * x * y - 2.0) * (1.0 - y * y) / d ** 3
    lead = abs(d) ** (a - 1.0) * w ** (a / 2.0 - 1.0) * (w + 1.0) ** -0.5 * dw
    if a == 1.0:
        return c * lead
    back = (a - 1.0) * math.copysign(abs(d) ** (a - 2.0), d) * green_integral(w, a)
    return c * (lead + back)


def _green_dx_substituted(x: float, y: float, a: float) -> float:
    # after t = r (x - y)^2 the upper limit no longer depends on x - y
    top = (1.0 - x * x) * (1.0 - y * y)
    d2 = (x - y) ** 2
    first = -2.0 * x * (1.0 - y * y) * top ** (a / 2.0 - 1.0) / (top + d2) ** 0.5
    # t = s^{2/a} removes the t^{a/2-1} endpoint singularity
    e = 2.0 / a
    upper = top ** (a / 2.0)
    # the integrand changes scale at s0 = |x - y|^a; integrate the far side in log s
    s0 = min(d2 ** (a / 2.0), upper)
    inner = _smooth_quad(lambda s: (s ** e + d2) ** -1.5, 0.0, s0)
    if upper > s0:
        inner += _smooth_quad(lambda v: math.exp(v) * (math.exp(e * v) + d2) ** -1.5,
                              math.log(s0), math.log(upper))
    return first + (y - x) * e * inner


def ball_green(x, y, p: FracParams, center=0.0, radius: float = 1.0) -> float:
    """Green function of a 1D ball (interval) by rescaling the (-1, 1) case."""
    _require_1d(p)
    xs = (float(x) - float(center)) / radius
    ys = (float(y) - float(center)) / radius
    if not (-1.0 < xs < 1.0) or not (-1.0 < ys < 1.0):
        return 0.0
    return radius ** (p.alpha - 1.0) * interval_green(xs, ys, p)


# --- exit times --------------------------------------------------------------

def exit_time_constant(p: FracParams) -> float:
    """c with mean exit time c (r^2 - |x|^2)^{alpha/2} from B_r for the stable process."""
    a, n = p.alpha, p.dim
    return gamma(n / 2.0) / (2.0 ** a * gamma(1.0 + a / 2.0) * gamma((n + a) / 2.0))


def expected_exit_time_ball(x, center, r: float, p: FracParams) -> float:
    """Mean exit time of the alpha-stable process from B_r(center) started at x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c = np.atleast_1d(np.asarray(center, dtype=float))
    d2 = float(np.sum((x - c) ** 2))
    if d2 > r * r * (1.0 + 1e-14):
        raise ValueError("starting point lies outside the ball")
    return exit_time_constant(p) * max(r * r - d2, 0.0) ** (p.alpha / 2.0)


def interval_green_mass(x: float, p: FracParams) -> float:
    """int_{-1}^{1} G_{(-1,1)}(x, y) dy by adaptive quadrature of interval_green.

    Independent of :func:`exit_time_constant`; used to pin that constant.
    """
    _check_inside(x)
    f = lambda y: interval_green(x, y, p) if y != x else 0.0
    left, _ = integrate.quad(f, -1.0, x, limit=200)
    right, _ = integrate.quad(f, x, 1.0, limit=200)
    return left + right
