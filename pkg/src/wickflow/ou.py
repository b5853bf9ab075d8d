"""Stochastic convolution (infinite-dimensional OU process) and Wick towers.

The cylindrical Wiener process is realized as independent standard complex
Gaussians per retained mode pair, constrained by Hermitian symmetry so the
field stays real.  Mode k of Z(t) = int_0^t e^{(t-s)A} dW(s) is a scalar
OU process with rate lambda_k and stationary variance 1/(2 lambda_k); the
update over a step of size delta uses the exact transition law

    z_k <- e^{-lambda_k delta} z_k + xi_k sqrt((1 - e^{-2 lambda_k delta}) / (2 lambda_k)),

so Z carries no time-discretization error and all counterterm identities
hold deterministically per sample.

Counterterms are exact lattice mode sums:

    c_C      = (2 pi)^{-2} sum_k 1/(2 lambda_k)            (stationary law)
    c_t(t)   = -(2 pi)^{-2} sum_k e^{-2 lambda_k t}/(2 lambda_k)
    c_{C_t}  = c_C + c_t(t)                                 (law of Z(t) from 0)

Seed convention: trajectory i of an ensemble uses streams derived from
(master_seed, i); substream 0 samples initial data, substream 1 drives the
noise, so runs that differ only in initialization share the Wiener path.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import SpectralField, TorusGrid, apply_semigroup
from .wick import CounterTerm, WickTower, hermite_tower_values


def substream(master_seed: int, trajectory: int, role: int) -> np.random.Generator:
    """The documented stream-split convention: (master_seed, trajectory, role)."""
    return np.random.default_rng([int(master_seed), int(trajectory), int(role)])


def hermitian_normals(grid: TorusGrid, rng: np.random.Generator) -> np.ndarray:
    """Complex standard normals xi with xi(-k) = conj(xi(k)), E|xi(k)|^2 = 1.

    Built by symmetrizing an i.i.d. complex array; the self-paired k = 0
    entry comes out real with unit variance.
    """
    n = 2 * grid.K + 1
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    raw *= math.sqrt(0.5)
    flipped = np.conj(np.roll(raw[::-1, ::-1], (1, 1), axis=(0, 1)))
    return (raw + flipped) * math.sqrt(0.5)


def sample_stationary(grid: TorusGrid, rng: np.random.Generator) -> SpectralField:
    """Exact sample of the truncated free field: mode k has std sqrt(1/(2 lambda_k))."""
    sigma = np.sqrt(1.0 / (2.0 * grid.lam))
    return SpectralField(grid, sigma * hermitian_normals(grid, rng))


@dataclass
class OUState:
    """State of the stochastic convolution: time, field, and its noise stream."""

    t: float
    z: SpectralField
    rng: np.random.Generator

    @classmethod
    def initial(cls, grid: TorusGrid, rng: np.random.Generator) -> "OUState":
        return cls(t=0.0, z=SpectralField.zero(grid), rng=rng)


def ou_step(state: OUState, delta: float) -> OUState:
    """Advance the stochastic convolution by its exact transition law."""
    if delta <= 0:
        raise DomainError(f"step size must be > 0, got {delta}")
    grid = state.z.grid
    decay = np.exp(-grid.lam * delta)
    sigma = np.sqrt((1.0 - decay**2) / (2.0 * grid.lam))
    xi = hermitian_normals(grid, state.rng)
    coeffs = decay * state.z.coeffs + sigma * xi
    return OUState(t=state.t + delta, z=SpectralField(grid, coeffs), rng=state.rng)


class CounterTable:
    """Counterterms of the truncated dynamics: c_C, c_t(t), c_{C_t}(t).

    All three are exact mode sums; `times` just records the schedule a
    caller asked about (`table` evaluates it).  c_t is nonpositive,
    nondecreasing, c_t(0) = -c_C (so c_{C_t}(0) = 0) and c_t -> 0 at
    large times.
    """

    def __init__(self, grid: TorusGrid, times=()):
        self.grid = grid
        self.times = tuple(float(t) for t in times)
        for t in self.times:
            if t < 0:
                raise DomainError(f"counterterm times must be >= 0, got {t}")
        self._weights = 1.0 / (2.0 * grid.lam)
        self._norm = 1.0 / (2.0 * np.pi) ** 2
        self.c_C = float(np.sum(self._weights)) * self._norm

    def c_t(self, t: float) -> float:
        if t < 0:
            raise DomainError(f"time must be >= 0, got {t}")
        return -float(np.sum(np.exp(-2.0 * self.grid.lam * t) * self._weights)) * self._norm

    def c_Ct(self, t: float) -> float:
        return self.c_C + self.c_t(t)

    @property
    def table(self):
        return [(t, self.c_t(t), self.c_Ct(t)) for t in self.times]

    def counterterm(self, kind: str = "C", t: float | None = None) -> CounterTerm:
        if kind == "C":
            return CounterTerm(c=self.c_C, kind="C", K=self.grid.K)
        if kind == "C_t":
            if t is None:
                raise ConfigurationError("kind C_t needs a time")
            return CounterTerm(c=self.c_Ct(t), kind="C_t", K=self.grid.K, t=t)
        raise ConfigurationError(f"unknown counterterm kind {kind!r}")


def counter_table(grid: TorusGrid, times=()) -> CounterTable:
    return CounterTable(grid, times)


def ct_tower(z: SpectralField, t: float, counters: CounterTable, n_orders: int) -> WickTower:
    """Tower of Z(t) Wick-ordered with respect to its own law C_t."""
    grid = z.grid
    grid.assert_product_degree(max(n_orders - 1, 1))
    values = grid.coeffs_to_values(z.coeffs)
    raw = hermite_tower_values(values, counters.c_Ct(t), n_orders)
    return WickTower(grid=grid, t=t, kind="C_t", counterterm=counters.c_Ct(t), raw=raw)


def convert_tower(tower: WickTower, counters: CounterTable) -> WickTower:
    """Reorder a C_t tower with respect to the stationary covariance C:

        :Z^n:_C = sum_l c_t^l n!/((n-2l)! l! 2^l) :Z^{n-2l}:_{C_t}.

    A finite linear recombination, exact per sample at the lattice level.
    """
    if tower.kind != "C_t":
        raise ConfigurationError(f"convert_tower expects a C_t tower, got kind {tower.kind!r}")
    ct = counters.c_t(tower.t)
    raw = np.empty_like(tower.raw)
    for n in range(tower.n_orders):
        acc = np.zeros_like(tower.raw[0])
        for l in range(n // 2 + 1):
            coeff = ct**l * math.factorial(n) / (
                math.factorial(n - 2 * l) * math.factorial(l) * 2**l
            )
            acc += coeff * tower.raw[n - 2 * l]
        raw[n] = acc
    return WickTower(
        grid=tower.grid, t=tower.t, kind="C", counterterm=counters.c_C, raw=raw
    )


def build_tower(
    z: SpectralField,
    z0: SpectralField | None,
    t: float,
    counters: CounterTable,
    n_orders: int,
) -> WickTower:
    """Tower of zbar(t) = Z(t) + e^{tA} z0, Wick-ordered w.r.t. C.

    Route: order Z against its own law C_t, convert to C, then fold in the
    heat-propagated initial datum binomially,

        :zbar^n: = sum_k C(n, k) V^{n-k} :Z^k:_C,   V = e^{tA} z0.
    """
    grid = z.grid
    base = convert_tower(ct_tower(z, t, counters, n_orders), counters)
    if z0 is None:
        return base
    if z0.grid != grid:
        raise ConfigurationError("initial datum lives on a different grid")
    v = grid.coeffs_to_values(apply_semigroup(z0, t).coeffs)
    raw = np.empty_like(base.raw)
    for n in range(n_orders):
        acc = base.raw[n].copy()
        vpow = np.ones_like(v)
        for k in range(n - 1, -1, -1):
            vpow = vpow * v
            acc += math.comb(n, k) * vpow * base.raw[k]
        raw[n] = acc
    return WickTower(grid=grid, t=t, kind="C", counterterm=counters.c_C, raw=raw)


class OUNoisePath:
    """Pre-generated OU innovations on a fixed fine mesh, exactly coarsenable.

    The exact transition over consecutive steps composes as

        eta_[0,2d] = e^{-lambda d} eta_[0,d] + eta_[d,2d],

    so innovations drawn at the finest resolution determine the innovations
    of any coarser dyadic mesh of the same Wiener path.  This is what makes
    "same noise, different step size" comparisons well defined.
    """

    def __init__(self, grid: TorusGrid, delta: float, n_steps: int,
                 rng: np.random.Generator | None = None, innovations=None):
        if delta <= 0:
            raise DomainError(f"step size must be > 0, got {delta}")
        self.grid = grid
        self.delta = float(delta)
        self.n_steps = int(n_steps)
        if innovations is not None:
            self.innovations = innovations
            return
        if rng is None:
            raise ConfigurationError("OUNoisePath needs an rng or explicit innovations")
        decay = np.exp(-grid.lam * delta)
        sigma = np.sqrt((1.0 - decay**2) / (2.0 * grid.lam))
        n = 2 * grid.K + 1
        self.innovations = np.empty((n_steps, n, n), dtype=np.complex128)
        for i in range(n_steps):
            self.innovations[i] = sigma * hermitian_normals(grid, rng)

    def coarsen(self, factor: int) -> "OUNoisePath":
        if factor == 1:
            return self
        if self.n_steps % factor != 0:
            raise ConfigurationError(
                f"cannot coarsen {self.n_steps} steps by factor {factor}"
            )
        decay = np.exp(-self.grid.lam * self.delta)
        m = self.n_steps // factor
        n = 2 * self.grid.K + 1
        out = np.zeros((m, n, n), dtype=np.complex128)
        for j in range(m):
            acc = self.innovations[j * factor]
            for i in range(1, factor):
                acc = decay * acc + self.innovations[j * factor + i]
            out[j] = acc
        return OUNoisePath(self.grid, self.delta * factor, m, innovations=out)

    def step(self, z: SpectralField, index: int) -> SpectralField:
        decay = np.exp(-self.grid.lam * self.delta)
        return SpectralField(self.grid, decay * z.coeffs + self.innovations[index])
