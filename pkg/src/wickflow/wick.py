"""Hermite polynomials, counterterms, Wick powers and the Wick action.

Wick ordering of a Gaussian field with pointwise variance c replaces the
n-th power by the variance-scaled (probabilists') Hermite polynomial,

    :u^n:_c = c^{n/2} P_n(c^{-1/2} u)  =  He_n(u; c),

where He_n(x; c) satisfies He_0 = 1, He_1 = x and the recurrence

    He_{n+1}(x; c) = x He_n(x; c) - n c He_{n-1}(x; c).

The recurrence form is numerically stable and degenerates gracefully to
plain powers at c = 0 (the unrenormalized limit).  All pointwise
evaluation happens on the dealiased fine grid; public operations return
fields projected back to the retained window.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import RealField, SpectralField, TorusGrid

HERMITE_MAX_ORDER = 64


@dataclass(frozen=True)
class PolynomialSpec:
    """Coefficients a_0..a_{2N} of the interaction q(phi) = sum a_n phi^n.

    The induced drift polynomial is p(phi) = q'(phi) = sum n a_n phi^{n-1}.
    The leading coefficient a_{2N} must be positive (confining potential).
    """

    N: int
    a: tuple

    def __init__(self, N: int, a):
        a = tuple(float(x) for x in a)
        if N < 1:
            raise ConfigurationError(f"N must be >= 1, got {N}")
        if len(a) != 2 * N + 1:
            raise ConfigurationError(
                f"need 2N+1={2 * N + 1} coefficients a_0..a_{2 * N}, got {len(a)}"
            )
        if a[2 * N] <= 0:
            raise ConfigurationError(f"leading coefficient a_{2 * N} must be > 0")
        object.__setattr__(self, "N", int(N))
        object.__setattr__(self, "a", a)

    @classmethod
    def quartic(cls, a4: float = 0.25, a2: float = 0.0, a1: float = 0.0) -> "PolynomialSpec":
        return cls(2, (0.0, a1, a2, 0.0, a4))

    @classmethod
    def quadratic(cls, a2: float) -> "PolynomialSpec":
        return cls(1, (0.0, 0.0, a2))

    @property
    def degree(self) -> int:
        return 2 * self.N

    def scaled(self, factor: float) -> "PolynomialSpec":
        return PolynomialSpec(self.N, tuple(factor * x for x in self.a))


@dataclass(frozen=True)
class CounterTerm:
    """Pointwise variance constant used for Wick ordering.

    `kind` records provenance: "C" for the stationary covariance of the
    truncated free field, "C_t" for the law of the stochastic convolution
    at time `t` started from zero.
    """

    c: float
    kind: str = "C"
    K: int | None = None
    t: float | None = None

    def __post_init__(self):
        if self.c < 0:
            raise DomainError(f"counterterm must be >= 0, got {self.c}")
        if self.kind not in ("C", "C_t"):
            raise DomainError(f"unknown counterterm kind {self.kind!r}")


def _c_value(c) -> float:
    value = c.c if isinstance(c, CounterTerm) else float(c)
    if value < 0:
        raise DomainError(f"counterterm must be >= 0, got {value}")
    return value


def hermite(n: int, x: float) -> float:
    """Probabilists' Hermite polynomial P_n(x) via the three-term recurrence."""
    return float(hermite_variance(n, x, 1.0))


def hermite_variance(n: int, x, c: float):
    """He_n(x; c) = c^{n/2} P_n(c^{-1/2} x); works on scalars and arrays."""
    if n < 0:
        raise DomainError(f"Hermite order must be >= 0, got {n}")
    if n > HERMITE_MAX_ORDER:
        raise DomainError(f"Hermite order {n} exceeds supported maximum {HERMITE_MAX_ORDER}")
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if n == 0:
        return prev
    cur = x.copy()
    for m in range(1, n):
        prev, cur = cur, x * cur - m * c * prev
    return cur


def hermite_tower_values(x: np.ndarray, c: float, n_orders: int) -> np.ndarray:
    """All orders He_0(x; c) .. He_{n_orders-1}(x; c) in one recurrence pass."""
    if n_orders < 1:
        raise DomainError("need at least one tower order")
    if n_orders - 1 > HERMITE_MAX_ORDER:
        raise DomainError(f"tower order {n_orders - 1} exceeds maximum {HERMITE_MAX_ORDER}")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((n_orders,) + x.shape, dtype=np.float64)
    out[0] = 1.0
    if n_orders > 1:
        out[1] = x
    for m in range(1, n_orders - 1):
        out[m + 1] = x * out[m] - m * c * out[m - 1]
    return out


def binomial_identity_check(n: int, s: float, t: float) -> float:
    """Residual of the Hermite binomial identity

        P_n(s + t) = sum_m C(n, m) P_m(s) t^{n-m}.

    Returns the backward-relative residual |lhs - rhs| normalized by
    (1 + |lhs| + sum_m |terms|).  The term-sum in the denominator matters:
    for opposite-sign s, t of size ~5 the summands reach 1e9 while the sum
    is O(1), so the raw difference carries an irreducible float64
    cancellation error of order 1e-7 even though the identity is exact
    (the tests confirm exactness separately in integer arithmetic).
    Well-conditioned inputs give 0 exactly.
    """
    lhs = hermite(n, s + t)
    terms = [math.comb(n, m) * hermite(m, s) * t ** (n - m) for m in range(n + 1)]
    rhs = math.fsum(terms)
    scale = 1.0 + abs(lhs) + math.fsum(abs(x) for x in terms)
    return abs(lhs - rhs) / scale


def counterterm_C(grid: TorusGrid) -> CounterTerm:
    """Exact pointwise variance of the truncated free field N(0, (1/2)(-Lap+1)^{-1}).

    Each retained mode contributes 1/(2 lambda_k); the basis normalization
    turns the mode sum into a pointwise variance with the (2 pi)^{-2} factor.
    """
    c = float(np.sum(1.0 / (2.0 * grid.lam))) / (2.0 * np.pi) ** 2
    return CounterTerm(c=c, kind="C", K=grid.K)


@dataclass
class WickTower:
    """The family {:zbar^j:}_{j=0..n_orders-1} at one time point.

    `raw` holds exact pointwise values on the fine grid, shape
    (n_orders, M, M); keeping the unprojected samples is what makes the
    recombination identities exact at finite dimension.  `orders` exposes
    the window-projected fields.
    """

    grid: TorusGrid
    t: float
    kind: str
    counterterm: float
    raw: np.ndarray

    @property
    def n_orders(self) -> int:
        return self.raw.shape[0]

    def order_values(self, j: int) -> np.ndarray:
        if not 0 <= j < self.n_orders:
            raise ConfigurationError(f"tower order {j} missing (have 0..{self.n_orders - 1})")
        return self.raw[j]

    def order(self, j: int) -> SpectralField:
        return SpectralField(self.grid, self.grid.values_to_coeffs(self.order_values(j)))

    @property
    def orders(self) -> list:
        return [self.order(j) for j in range(self.n_orders)]


def field_tower(z, c, n_orders: int) -> WickTower:
    """Wick tower of a single field with a fixed counterterm (kind "C")."""
    cval = _c_value(c)
    grid, values = _field_values(z)
    grid.assert_product_degree(max(n_orders - 1, 1))
    raw = hermite_tower_values(values, cval, n_orders)
    return WickTower(grid=grid, t=0.0, kind="C", counterterm=cval, raw=raw)


def _field_values(u):
    if isinstance(u, RealField):
        return u.grid, u.values
    if isinstance(u, SpectralField):
        return u.grid, u.grid.coeffs_to_values(u.coeffs)
    raise ConfigurationError(f"expected a field, got {type(u).__name__}")


def _return_like(u, grid: TorusGrid, values: np.ndarray):
    """Project pointwise results to the window, in the caller's representation."""
    coeffs = grid.values_to_coeffs(values)
    if isinstance(u, RealField):
        return RealField(grid, grid.coeffs_to_values(coeffs))
    return SpectralField(grid, coeffs)


def wick_power(u, n: int, c):
    """:u^n:_c as a field, dealiased and projected to the window."""
    if n < 0:
        raise DomainError(f"Wick power order must be >= 0, got {n}")
    cval = _c_value(c)
    grid, values = _field_values(u)
    if n >= 2:
        grid.assert_product_degree(n)
    return _return_like(u, grid, hermite_variance(n, values, cval))


def wick_nonlinearity(u, P: PolynomialSpec | None, c):
    """:p(u):_c = sum_n n a_n :u^{n-1}:_c  with p = q'.

    P = None stands for the free case (all couplings zero, not expressible
    as a PolynomialSpec since the leading coefficient must be positive).
    """
    cval = _c_value(c)
    grid, values = _field_values(u)
    if P is None:
        return _return_like(u, grid, np.zeros_like(values))
    grid.assert_product_degree(max(P.degree - 1, 1))
    tower = hermite_tower_values(values, cval, P.degree)
    out = np.zeros_like(values)
    for n in range(1, P.degree + 1):
        if P.a[n] != 0.0:
            out += n * P.a[n] * tower[n - 1]
    return _return_like(u, grid, out)


def wick_action(u, P: PolynomialSpec | None, c) -> float:
    """The Wick-ordered action integral(sum_n a_n :u^n:_c) over the torus.

    Quadrature is exact: the integrand is a trigonometric polynomial of
    degree at most 2N*K which the fine grid resolves.  P = None (the free
    case) gives 0.
    """
    if P is None:
        return 0.0
    cval = _c_value(c)
    grid, values = _field_values(u)
    if P.degree * grid.K + 1 > grid.M:
        raise ConfigurationError(
            f"grid M={grid.M} too small for exact degree-{P.degree} quadrature at K={grid.K}"
        )
    tower = hermite_tower_values(values, cval, P.degree + 1)
    total = 0.0
    for n in range(P.degree + 1):
        if P.a[n] != 0.0:
            total += P.a[n] * float(np.sum(tower[n]))
    return total * grid.cell_area


def recombine(y, tower: WickTower, n: int):
    """Reassemble :(y + zbar)^n: from y-powers and the tower of zbar:

        sum_k C(n, k) y^{n-k} :zbar^k:

    Exact at finite dimension because the tower keeps unprojected samples.
    """
    grid, yvals = _field_values(y)
    if tower.grid != grid:
        raise ConfigurationError("tower and field live on different grids")
    if n >= tower.n_orders:
        raise ConfigurationError(
            f"tower holds orders 0..{tower.n_orders - 1}, recombination needs {n}"
        )
    if n >= 2:
        grid.assert_product_degree(n)
    out = tower.order_values(n).copy()
    ypow = np.ones_like(yvals)
    for k in range(n - 1, -1, -1):
        ypow = ypow * yvals
        out += math.comb(n, k) * ypow * tower.order_values(k)
    return _return_like(y, grid, out)
