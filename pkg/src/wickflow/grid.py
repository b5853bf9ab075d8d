"""Torus discretization and spectral primitives.

Fields live on the square torus [0, 2*pi)^2 and are represented two ways:

* ``RealField`` -- samples on an M x M uniform grid, used for pointwise
  (polynomial) operations;
* ``SpectralField`` -- complex coefficients against the orthonormal basis
  e_k(x) = (2*pi)^{-1} exp(i k.x) on the truncated lattice |k|_inf <= K,
  used for everything linear (semigroup, mollifiers, noise).

The real grid is deliberately finer than the spectral cutoff so that
pointwise products of band-limited fields up to a configured polynomial
degree hold exact Fourier coefficients on the retained window (no
aliasing).  A product of d fields with cutoff K has frequencies up to
d*K, and aliased copies on an M-grid stay out of the window |k|_inf <= K
as soon as M >= (d+1)*K + 1.

The linear operator throughout is A = Laplacian - 1, with eigenvalues
-lambda_k, lambda_k = 1 + |k|^2 > 0.
"""

import numpy as np

from .errors import ConfigurationError, DomainError


class TorusGrid:
    """Truncated Fourier lattice plus its dealiased real sampling grid.

    Parameters
    ----------
    K : int
        Maximum retained wavenumber per axis; modes k in {-K..K}^2.
    max_degree : int
        Largest polynomial degree of pointwise products that must be
        dealiased exactly.  Determines the real-grid size M.
    """

    def __init__(self, K: int, max_degree: int = 3):
        if K < 0:
            raise ConfigurationError(f"K must be >= 0, got {K}")
        if max_degree < 1:
            raise ConfigurationError(f"max_degree must be >= 1, got {max_degree}")
        self.K = int(K)
        self.max_degree = int(max_degree)
        n = 2 * self.K + 1
        M = max((self.max_degree + 1) * self.K + 1, 2 * n)
        self.M = M + (M % 2)  # even sizes keep FFTs fast
        self.L = 2.0 * np.pi

        # wavenumbers in FFT (wrap-around) order: [0..K, -K..-1]
        self.wavenumbers = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        self.kx = self.wavenumbers[:, None] * np.ones(n, dtype=np.int64)[None, :]
        self.ky = np.ones(n, dtype=np.int64)[:, None] * self.wavenumbers[None, :]
        self.ksq = self.kx**2 + self.ky**2
        self.lam = 1.0 + self.ksq.astype(np.float64)

        idx = self.wavenumbers % self.M
        self._embed = np.ix_(idx, idx)
        self.n_modes = n * n

        x = self.L * np.arange(self.M) / self.M
        self.x1 = x[:, None] * np.ones(self.M)[None, :]
        self.x2 = np.ones(self.M)[:, None] * x[None, :]
        self.cell_area = (self.L / self.M) ** 2

    def __eq__(self, other):
        return (
            isinstance(other, TorusGrid)
            and self.K == other.K
            and self.M == other.M
        )

    def __hash__(self):
        return hash((self.K, self.M))

    def __repr__(self):
        return f"TorusGrid(K={self.K}, M={self.M}, max_degree={self.max_degree})"

    def assert_product_degree(self, d: int):
        """Raise unless degree-d pointwise products are alias-free on this grid."""
        if d < 1:
            raise ConfigurationError(f"product degree must be >= 1, got {d}")
        if (d + 1) * self.K + 1 > self.M:
            raise ConfigurationError(
                f"grid M={self.M} cannot dealias degree-{d} products at K={self.K}; "
                f"construct the grid with max_degree >= {d}"
            )

    # -- low-level array transforms (hot path, no field wrappers) ----------

    def coeffs_to_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Window coefficients -> real samples on the fine M x M grid."""
        big = np.zeros((self.M, self.M), dtype=np.complex128)
        big[self._embed] = coeffs
        return np.fft.ifft2(big).real * (self.M**2 / self.L)

    def values_to_coeffs(self, values: np.ndarray) -> np.ndarray:
        """Real samples -> coefficients on the retained window.

        Exact as long as the sampled function has no frequency aliasing
        into the window, which `assert_product_degree` guarantees for
        polynomial operations performed on this grid.
        """
        return np.fft.fft2(values)[self._embed] * (self.L / self.M**2)

    def integrate_values(self, values: np.ndarray) -> float:
        """Exact torus integral of a band-limited sampled function."""
        return float(np.sum(values) * self.cell_area)


class RealField:
    """Real samples of a field on the fine grid of a `TorusGrid`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: TorusGrid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.M, grid.M):
            raise ConfigurationError(
                f"values shape {values.shape} does not match grid M={grid.M}"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("field values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "RealField":
        return cls(grid, np.full((grid.M, grid.M), float(c)))

    def integral(self) -> float:
        return self.grid.integrate_values(self.values)


class SpectralField:
    """Coefficients of a real field against e_k = (2*pi)^{-1} exp(i k.x).

    The coefficient array uses FFT wrap-around ordering on both axes,
    i.e. ``coeffs[i, j]`` belongs to ``(wavenumbers[i], wavenumbers[j])``.
    Hermitian symmetry coeffs(-k) = conj(coeffs(k)) encodes realness.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: TorusGrid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        n = 2 * grid.K + 1
        if coeffs.shape != (n, n):
            raise ConfigurationError(
                f"coeffs shape {coeffs.shape} does not match K={grid.K}"
            )
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def zero(cls, grid: TorusGrid) -> "SpectralField":
        n = 2 * grid.K + 1
        return cls(grid, np.zeros((n, n), dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def get_mode(self, k1: int, k2: int) -> complex:
        n = 2 * self.grid.K + 1
        return complex(self.coeffs[k1 % n, k2 % n])

    def set_mode(self, k1: int, k2: int, value: complex):
        n = 2 * self.grid.K + 1
        self.coeffs[k1 % n, k2 % n] = value

    def l2_norm(self) -> float:
        """L^2(T^2) norm, equal to the coefficient l^2 norm (Parseval)."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def hermitian_defect(self) -> float:
        flipped = np.conj(self.coeffs[::-1, ::-1])
        sym = np.roll(flipped, (1, 1), axis=(0, 1))  # maps k -> -k slot
        return float(np.max(np.abs(self.coeffs - sym)))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


def _check_same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ConfigurationError("fields live on different grids")


def to_spectral(f: RealField) -> SpectralField:
    """Forward transform; exact for band-limited samples."""
    return SpectralField(f.grid, f.grid.values_to_coeffs(f.values))


def to_real(u: SpectralField) -> RealField:
    """Inverse transform onto the fine dealiased grid."""
    return RealField(u.grid, u.grid.coeffs_to_values(u.coeffs))


def apply_semigroup(u: SpectralField, t: float) -> SpectralField:
    """Heat semigroup e^{tA}, A = Laplacian - 1: mode k decays by e^{-lambda_k t}."""
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    return SpectralField(u.grid, u.coeffs * np.exp(-u.grid.lam * t))


def mollify(u: SpectralField, eps: float) -> SpectralField:
    """Spectral mollification by a Gaussian approximate identity.

    The mollifier has unit mass, so its symbol is 1 at k = 0; the chosen
    Gaussian profile multiplies mode k by exp(-eps^2 |k|^2 / 2).
    """
    if eps < 0:
        raise DomainError(f"mollification scale must be >= 0, got {eps}")
    sym = np.exp(-0.5 * eps**2 * u.grid.ksq)
    return SpectralField(u.grid, u.coeffs * sym)


def dealiased_product(fields, degree: int | None = None) -> SpectralField:
    """Exact spectral product of band-limited fields, truncated to the window.

    `degree` defaults to the number of factors; pass it explicitly when the
    factors are themselves powers so the padding check stays honest.
    """
    fields = list(fields)
    if not fields:
        raise ConfigurationError("dealiased_product needs at least one field")
    _check_same_grid(*fields)
    grid = fields[0].grid
    d = len(fields) if degree is None else int(degree)
    grid.assert_product_degree(d)
    prod = grid.coeffs_to_values(fields[0].coeffs)
    for f in fields[1:]:
        prod = prod * grid.coeffs_to_values(f.coeffs)
    return SpectralField(grid, grid.values_to_coeffs(prod))


def project(values: np.ndarray, grid: TorusGrid) -> SpectralField:
    """Project fine-grid samples onto the retained window |k|_inf <= K."""
    return SpectralField(grid, grid.values_to_coeffs(values))
