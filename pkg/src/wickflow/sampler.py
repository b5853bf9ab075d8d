"""Preconditioned Crank-Nicolson sampling of the renormalized Gibbs measure.

The target is nu ~ exp(-V(phi)) mu restricted to the truncated mode space,
with V(phi) = integral of the Wick-ordered interaction and mu the exact
Gaussian free field of the lattice.  The pCN proposal

    phi' = sqrt(1 - rho^2) phi + rho xi,     xi ~ mu,

preserves mu exactly, so the Metropolis ratio only sees the change of V:
accept with probability min(1, exp(V(phi) - V(phi'))).  The kernel is
reversible with respect to nu for every rho in (0, 1], and in the free
case (V = 0) the chain is exactly an AR(1) in every mode.
"""

import math
from dataclasses import dataclass

import numpy as np

from .besov import BesovSpec, besov_norm, build_partition
from .errors import ConfigurationError, DomainError
from .grid import SpectralField, TorusGrid
from .ou import sample_stationary
from .solver import MODE_OBSERVABLES
from .wick import CounterTerm, PolynomialSpec, hermite_tower_values, wick_action

_partitions: dict = {}


def _partition_for(grid: TorusGrid):
    if grid not in _partitions:
        _partitions[grid] = build_partition(grid)
    return _partitions[grid]


def _action(phi: SpectralField, P, c) -> float:
    return 0.0 if P is None else wick_action(phi, P, c)


@dataclass
class ChainState:
    phi: SpectralField
    action: float
    rng: np.random.Generator
    accepted: int = 0
    proposed: int = 0

    @classmethod
    def initial(cls, phi: SpectralField, P, c, rng) -> "ChainState":
        return cls(phi=phi, action=_action(phi, P, c), rng=rng)


def pcn_step(state: ChainState, rho: float, P, c,
             action_offset: float = 0.0) -> tuple[ChainState, bool]:
    """One pCN proposal/accept step; returns (new state, accepted?).

    `action_offset` adds a constant to V; acceptance decisions are exactly
    invariant under it (only differences of V enter), which tests assert.
    """
    if not 0.0 < rho <= 1.0:
        raise DomainError(f"step parameter must lie in (0, 1], got {rho}")
    grid = state.phi.grid
    xi = sample_stationary(grid, state.rng)
    prop = SpectralField(grid, math.sqrt(1.0 - rho * rho) * state.phi.coeffs + rho * xi.coeffs)
    v_new = _action(prop, P, c) + action_offset
    v_old = state.action + action_offset
    log_u = math.log(state.rng.uniform())
    accept = log_u < (v_old - v_new)
    if accept:
        return ChainState(prop, v_new - action_offset, state.rng,
                          state.accepted + 1, state.proposed + 1), True
    return ChainState(state.phi, state.action, state.rng,
                      state.accepted, state.proposed + 1), False


@dataclass
class ChainResult:
    samples: list
    observables: dict
    acceptance_rate: float
    iat_wick2: float
    accept_history: np.ndarray


def observables(phi: SpectralField, P, c) -> dict:
    """Registered scalar observables of one field configuration."""
    grid = phi.grid
    cval = c.c if isinstance(c, CounterTerm) else float(c)
    xv = grid.coeffs_to_values(phi.coeffs)
    h = hermite_tower_values(xv, cval, 5)
    out = {
        "wick2": float(np.sum(h[2])) * grid.cell_area,
        "wick4": float(np.sum(h[4])) * grid.cell_area,
        "besov": besov_norm(phi, BesovSpec(-0.1), _partition_for(grid)),
    }
    for k in MODE_OBSERVABLES:
        if max(abs(k[0]), abs(k[1])) <= grid.K:
            out[f"mode2_{k[0]}_{k[1]}"] = abs(phi.get_mode(*k)) ** 2
    return out


def integrated_autocorrelation(series: np.ndarray, window_factor: float = 5.0) -> float:
    """Sokal-windowed IAT estimate: 1 + 2 sum rho_k up to the adaptive cutoff."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 16 or np.var(x) == 0.0:
        return 1.0
    x = x - x.mean()
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    tau = 1.0
    for k in range(1, n // 2):
        tau += 2.0 * rho[k]
        if k >= window_factor * tau:
            break
    return float(max(tau, 1.0))


def run_chain(init: ChainState, n_steps: int, burn_in: int, thinning: int,
              rho: float, P, c, action_offset: float = 0.0,
              keep_samples: bool = True, track=("wick2",)) -> ChainResult:
    """Drive the chain, discard burn-in, thin, and report diagnostics.

    Emits a warning flag through the result when acceptance drops below 1%
    (step parameter too large for the target).
    """
    if n_steps <= burn_in:
        raise ConfigurationError(f"n_steps={n_steps} must exceed burn_in={burn_in}")
    if thinning < 1:
        raise ConfigurationError("thinning must be >= 1")
    state = init
    grid = init.phi.grid
    cval = c.c if isinstance(c, CounterTerm) else float(c)
    samples = []
    tracked = {name: [] for name in track}
    accepts = np.zeros(n_steps, dtype=bool)
    for i in range(n_steps):
        state, acc = pcn_step(state, rho, P, c, action_offset)
        accepts[i] = acc
        if i >= burn_in:
            xv = grid.coeffs_to_values(state.phi.coeffs)
            h2 = float(np.sum(xv * xv)) * grid.cell_area - grid.L**2 * cval
            for name in track:
                if name == "wick2":
                    tracked[name].append(h2)
                else:
                    tracked[name].append(observables(state.phi, P, c)[name])
            if (i - burn_in) % thinning == 0 and keep_samples:
                samples.append(state.phi.copy())
    rate = state.accepted / max(state.proposed, 1)
    if rate < 0.01:
        import warnings

        warnings.warn(f"pCN acceptance rate {rate:.2%} < 1%: step parameter too large")
    wick2 = np.asarray(tracked.get("wick2", []), dtype=np.float64)
    return ChainResult(
        samples=samples,
        observables={k: np.asarray(v) for k, v in tracked.items()},
        acceptance_rate=rate,
        iat_wick2=integrated_autocorrelation(wick2) if wick2.size else float("nan"),
        accept_history=accepts,
    )


def gibbs_samples(grid: TorusGrid, P, c, n_samples: int, rho: float,
                  burn_in: int, thinning: int, rng: np.random.Generator):
    """Convenience: equilibrated, thinned draws from the truncated Gibbs measure."""
    state = ChainState.initial(sample_stationary(grid, rng), P, c, rng)
    n_steps = burn_in + n_samples * thinning
    result = run_chain(state, n_steps, burn_in, thinning, rho, P, c,
                       keep_samples=True, track=("wick2",))
    if len(result.samples) < n_samples:
        raise ConfigurationError("chain produced fewer samples than requested")
    return result.samples[:n_samples], result
