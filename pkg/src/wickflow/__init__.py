"""Spectral Galerkin simulator and verification suite for Wick-renormalized
scalar field dynamics on the 2-torus: renormalized nonlinearities, exact
stochastic convolution, the shifted-equation solver, Gibbs sampling, and
Besov-regularity diagnostics."""

from .errors import BlowUpError, ConfigurationError, DomainError, NonContractionError
from .grid import (
    RealField,
    SpectralField,
    TorusGrid,
    apply_semigroup,
    dealiased_product,
    mollify,
    to_real,
    to_spectral,
)
from .ou import (
    CounterTable,
    OUNoisePath,
    OUState,
    build_tower,
    convert_tower,
    counter_table,
    ct_tower,
    ou_step,
    sample_stationary,
    substream,
)
from .wick import (
    CounterTerm,
    PolynomialSpec,
    WickTower,
    binomial_identity_check,
    counterterm_C,
    field_tower,
    hermite,
    recombine,
    wick_action,
    wick_nonlinearity,
    wick_power,
)

__version__ = "0.1.0"
