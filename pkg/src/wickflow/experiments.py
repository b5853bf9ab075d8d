"""The six experiment suites behind the command-line front end.

Every suite is a pure function of an `ExperimentConfig`: deterministic
given (config, master_seed) in sequential mode, returning a JSON-ready
report that embeds the resolved config and a version string.  Statistical
pass/fail rules are fixed here (3 combined standard errors, pre-registered
observable lists); nothing is tuned per run.
"""

import math
import os
import subprocess
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .besov import BesovSpec, besov_norm, build_partition, regularity_estimate
from .errors import ConfigurationError
from .grid import SpectralField, TorusGrid, apply_semigroup
from .ou import CounterTable, OUNoisePath, OUState, counter_table, ou_step, sample_stationary, substream
from .sampler import ChainState, gibbs_samples, observables, run_chain
from .snapshots import write_snapshots
from .solver import SolverConfig, Trajectory, solve, solve_alternative_splitting, stationary_solve
from .wick import (
    CounterTerm,
    PolynomialSpec,
    binomial_identity_check,
    counterterm_C,
    field_tower,
    hermite_variance,
    recombine,
    wick_power,
)


def version_string() -> str:
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        tag = desc.stdout.strip() if desc.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        tag = ""
    return f"wickflow {__version__}" + (f" ({tag})" if tag else "")


@dataclass
class ExperimentConfig:
    """Resolved run configuration; sections mirror the config-file schema."""

    K: int = 8
    dealiasing_degree: int = 4
    N: int = 2
    a: tuple = (0.0, 0.0, 0.0, 0.0, 0.25)
    delta: float = 1e-3
    T: float = 0.25
    record_every: int = 50
    rho: float = 0.3
    n_steps: int = 20000
    burn_in: int = 3000
    thinning: int = 120
    n_traj: int = 4
    master_seed: int = 0
    out_dir: str = "wickflow-out"
    formats: tuple = ("csv", "json")
    threads: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        kw = {}
        sections = {
            "grid": {"K": "K", "dealiasing_degree": "dealiasing_degree"},
            "polynomial": {"N": "N", "a": "a"},
            "solver": {"delta": "delta", "T": "T", "record_every": "record_every"},
            "sampler": {"rho": "rho", "n_steps": "n_steps",
                        "burn_in": "burn_in", "thinning": "thinning"},
            "ensemble": {"n_traj": "n_traj", "master_seed": "master_seed"},
            "output": {"dir": "out_dir", "formats": "formats"},
        }
        for section, keys in sections.items():
            for key, attr in keys.items():
                if section in data and key in data[section]:
                    kw[attr] = data[section][key]
        for key in ("threads",):
            if key in data:
                kw[key] = data[key]
        unknown = set(data) - set(sections) - {"threads"}
        if unknown:
            raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        self.a = tuple(float(x) for x in self.a)
        self.formats = tuple(self.formats)
        PolynomialSpec(self.N, self.a)  # enforces a_{2N} > 0 and coefficient count
        if self.K < 0:
            raise ConfigurationError("K must be >= 0")
        if not (0 < self.delta <= self.T):
            raise ConfigurationError("need 0 < delta <= T")
        if self.n_steps <= self.burn_in:
            raise ConfigurationError("sampler n_steps must exceed burn_in")
        if not (0 < self.rho <= 1):
            raise ConfigurationError("rho must lie in (0, 1]")
        if self.n_traj < 1:
            raise ConfigurationError("n_traj must be >= 1")
        bad = set(self.formats) - {"csv", "json", "wck1"}
        if bad:
            raise ConfigurationError(f"unknown output formats: {sorted(bad)}")

    def polynomial(self) -> PolynomialSpec:
        return PolynomialSpec(self.N, self.a)

    def grid(self) -> TorusGrid:
        return TorusGrid(self.K, max_degree=max(self.dealiasing_degree, 2 * self.N))

    def solver_config(self, **over) -> SolverConfig:
        kw = dict(delta=self.delta, T=self.T, record_every=self.record_every)
        kw.update(over)
        return SolverConfig(**kw)

    def resolved(self) -> dict:
        return asdict(self)


class ScaledCounterTable(CounterTable):
    """Counterterms multiplied by a constant: the negative-control knob."""

    def __init__(self, grid: TorusGrid, factor: float):
        super().__init__(grid)
        self._factor = float(factor)
        self.c_C = self._factor * self.c_C

    def c_t(self, t: float) -> float:
        return self._factor * super().c_t(t)


def _report(name: str, cfg: ExperimentConfig, results: dict, passed) -> dict:
    return {
        "experiment": name,
        "version": version_string(),
        "config": cfg.resolved(),
        "results": results,
        "pass": bool(passed) if passed is not None else None,
    }


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")


def _trajectory_rows(traj: Trajectory):
    names = sorted(k for k in traj.observables if k != "tower_top")
    header = ["t"] + names
    rows = []
    for i, t in enumerate(traj.times):
        rows.append([float(t)] + [float(traj.observables[k][i]) for k in names])
    return header, rows


# ----------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------

def run_simulate(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Integrate `n_traj` trajectories of the shifted equation and dump observables."""
    grid = cfg.grid()
    P = cfg.polynomial()
    counters = counter_table(grid)
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    sups = []
    defect = 0.0
    for i in range(cfg.n_traj):
        rng = substream(cfg.master_seed, i, 1)
        traj = solve(None, None, rng, cfg.solver_config(), P, counters=counters, grid=grid)
        sups.append(float(traj.observable("sup_Y")[-1]))
        defect = max(defect, float(traj.reconstruction_defect))
        if "csv" in cfg.formats:
            header, rows = _trajectory_rows(traj)
            _write_csv(os.path.join(out, f"trajectory_{i:03d}.csv"), header, rows)
        if "wck1" in cfg.formats:
            write_snapshots(os.path.join(out, f"trajectory_{i:03d}.wck1"), traj.X)
    results = {"n_traj": cfg.n_traj, "final_sup_Y": sups,
               "max_reconstruction_defect": defect}
    return _report("simulate", cfg, results, passed=all(np.isfinite(sups)))


# ----------------------------------------------------------------------
# gibbs
# ----------------------------------------------------------------------

def run_gibbs(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Run the pCN chain, dump thinned samples and diagnostics."""
    grid = cfg.grid()
    P = cfg.polynomial()
    c = counterterm_C(grid)
    rng = substream(cfg.master_seed, 0, 0)
    state = ChainState.initial(sample_stationary(grid, rng), P, c, rng)
    result = run_chain(state, cfg.n_steps, cfg.burn_in, cfg.thinning, cfg.rho, P, c)
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    if "csv" in cfg.formats:
        rows = [[i, float(v)] for i, v in enumerate(result.observables["wick2"])]
        _write_csv(os.path.join(out, "chain_wick2.csv"), ["index", "wick2"], rows)
    if "wck1" in cfg.formats and result.samples:
        write_snapshots(os.path.join(out, "chain_samples.wck1"), result.samples)
    results = {
        "acceptance_rate": result.acceptance_rate,
        "iat_wick2": result.iat_wick2,
        "n_samples": len(result.samples),
    }
    return _report("gibbs", cfg, results, passed=result.acceptance_rate >= 0.01)


# ----------------------------------------------------------------------
# identities
# ----------------------------------------------------------------------

def run_identities(cfg: ExperimentConfig) -> dict:
    """Deterministic identity suites; PASS iff every residual < 1e-10.

    Residuals are relative: |lhs - rhs| / (1 + |lhs|), elementwise max.
    """
    seed = cfg.master_seed
    out = {}

    rng = np.random.default_rng([seed, 101])
    worst = 0.0
    for n in range(11):
        for _ in range(100):
            s, t = rng.uniform(-5, 5, 2)
            from .wick import hermite
            worst = max(worst, binomial_identity_check(n, s, t) / (1 + abs(hermite(n, s + t))))
    out["hermite_binomial"] = worst

    # covariance conversion, n <= 5, K = 8, OU samples at several times
    g = TorusGrid(8, max_degree=6)
    counters = counter_table(g)
    cC = counters.counterterm("C")
    from .ou import convert_tower, ct_tower
    worst = 0.0
    rng = substream(seed, 0, 1)
    for t in (0.01, 0.1, 1.0):
        for _ in range(20):
            st = ou_step(OUState.initial(g, rng), t)
            tower = convert_tower(ct_tower(st.z, t, counters, 6), counters)
            for n in range(6):
                lhs = tower.order(n).coeffs
                rhs = wick_power(st.z, n, cC).coeffs
                worst = max(worst, float(np.max(np.abs(lhs - rhs)) / (1 + np.max(np.abs(lhs)))))
    out["covariance_conversion"] = worst

    # recombination, n <= 5, random band-limited fields
    worst = 0.0
    for i in range(20):
        r = np.random.default_rng([seed, 103, i])
        u, z = sample_stationary(g, r), sample_stationary(g, r)
        tower = field_tower(z, cC, 6)
        for n in range(6):
            lhs = recombine(u - z, tower, n).coeffs
            rhs = wick_power(u, n, cC).coeffs
            worst = max(worst, float(np.max(np.abs(lhs - rhs)) / (1 + np.max(np.abs(rhs)))))
    out["recombination"] = worst

    # initial-datum tower vs direct Wick power of zbar
    from .ou import build_tower
    worst = 0.0
    rng = substream(seed, 0, 2)
    for t in (0.05, 0.5):
        st = ou_step(OUState.initial(g, rng), t)
        z0 = sample_stationary(g, rng)
        tower = build_tower(st.z, z0, t, counters, 6)
        zbar = st.z + apply_semigroup(z0, t)
        for n in range(6):
            lhs = tower.order(n).coeffs
            rhs = wick_power(zbar, n, cC).coeffs
            worst = max(worst, float(np.max(np.abs(lhs - rhs)) / (1 + np.max(np.abs(rhs)))))
    out["initial_datum_tower"] = worst

    # reconstruction X = Y + zbar along a short quartic run
    P = PolynomialSpec.quartic(0.25)
    traj = solve(None, sample_stationary(g, substream(seed, 1, 0)), substream(seed, 1, 1),
                 SolverConfig(delta=1e-3, T=0.02, record_every=5), P, counters=counters)
    out["reconstruction"] = float(traj.reconstruction_defect)

    passed = all(v < 1e-10 for v in out.values())
    return _report("identities", cfg, {"max_residuals": out}, passed)


# ----------------------------------------------------------------------
# invariance
# ----------------------------------------------------------------------

REGISTERED_OBSERVABLES = [
    "wick2", "wick4", "besov",
    "mode2_0_0", "mode2_1_0", "mode2_0_1", "mode2_1_1", "mode2_1_-1",
    "mode2_2_0", "mode2_0_2", "mode2_2_1", "mode2_1_2", "mode2_2_-1",
    "mode2_-1_2", "mode2_2_2", "mode2_2_-2",
]


def _pmap(fn, payloads, threads):
    if threads <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    from concurrent.futures import ProcessPoolExecutor

    chunk = max(1, len(payloads) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, payloads, chunksize=chunk))


def _drift_worker(payload):
    (K, degree, N, a, factor, delta, T, seed, i, eta_bytes, n) = payload
    grid = TorusGrid(K, max_degree=degree)
    P = PolynomialSpec(N, a)
    counters = counter_table(grid) if factor == 1.0 else ScaledCounterTable(grid, factor)
    c_obs = counterterm_C(grid)
    eta = SpectralField(grid, np.frombuffer(eta_bytes, dtype=np.complex128).reshape(n, n).copy())
    scfg = SolverConfig(delta=delta, T=T, record_every=10**9)
    traj = stationary_solve(eta, substream(seed, i, 1), scfg, P,
                            counters=counters, record_fields=False)
    return observables(eta, P, c_obs), observables(traj.X[-1], P, c_obs)


def _drift_zscores(samples, cfg, P, counters, c_obs, delta, T, seed):
    factor = getattr(counters, "_factor", 1.0)
    degree = max(cfg.dealiasing_degree, 2 * cfg.N)
    n = 2 * cfg.K + 1
    payloads = [
        (cfg.K, degree, cfg.N, cfg.a, factor, delta, T, seed, i,
         eta.coeffs.tobytes(), n)
        for i, eta in enumerate(samples)
    ]
    pairs = _pmap(_drift_worker, payloads, cfg.threads)
    start = {name: [o0[name] for o0, _ in pairs] for name in REGISTERED_OBSERVABLES}
    end = {name: [oT[name] for _, oT in pairs] for name in REGISTERED_OBSERVABLES}
    stats = {}
    for name in REGISTERED_OBSERVABLES:
        d = np.asarray(end[name]) - np.asarray(start[name])
        se = d.std(ddof=1) / math.sqrt(len(d))  # combined SE of the paired drift
        stats[name] = {
            "mean0": float(np.mean(start[name])),
            "meanT": float(np.mean(end[name])),
            "se": float(se),
            "z": float(d.mean() / se) if se > 0 else 0.0,
        }
    return stats


def run_invariance(cfg: ExperimentConfig, negative_control: bool = True) -> dict:
    """Drift test of the Gibbs measure under the measure-preserving dynamics.

    Pre-registered rule: evolve `n_traj` Gibbs samples to T at step delta
    and delta/2, compute the paired drift z-score of every registered
    observable.  PASS iff all |z| <= 3 at delta/2 AND (all |z| <= 3 at
    delta OR the worst |z| shrinks when the step is halved) - an O(delta)
    scheme bias must shrink with the step, genuine non-invariance does not.
    The negative control reruns the coarse test with all counterterms
    doubled inside the dynamics (observables and initial chain keep the
    true counterterm) and must FAIL, i.e. some registered |z| > 3.
    """
    grid = cfg.grid()
    P = cfg.polynomial()
    c_obs = counterterm_C(grid)
    counters = counter_table(grid)
    rng = substream(cfg.master_seed, 0, 0)
    samples, chain = gibbs_samples(grid, P, c_obs, cfg.n_traj, cfg.rho,
                                   cfg.burn_in, cfg.thinning, rng)
    if chain.acceptance_rate < 0.01:
        raise ConfigurationError("chain warm-up failure: acceptance below 1%")

    stats_d = _drift_zscores(samples, cfg, P, counters, c_obs, cfg.delta, cfg.T,
                             seed=cfg.master_seed + 1)
    stats_h = _drift_zscores(samples, cfg, P, counters, c_obs, cfg.delta / 2, cfg.T,
                             seed=cfg.master_seed + 2)
    zmax_d = max(abs(s["z"]) for s in stats_d.values())
    zmax_h = max(abs(s["z"]) for s in stats_h.values())
    passed = (zmax_h <= 3.0) and (zmax_d <= 3.0 or zmax_h < zmax_d)

    results = {
        "chain_acceptance": chain.acceptance_rate,
        "chain_iat_wick2": chain.iat_wick2,
        "drift_at_delta": stats_d,
        "drift_at_half_delta": stats_h,
        "max_abs_z_delta": zmax_d,
        "max_abs_z_half_delta": zmax_h,
    }

    if negative_control:
        broken = ScaledCounterTable(grid, 2.0)
        stats_b = _drift_zscores(samples, cfg, P, broken, c_obs, cfg.delta, cfg.T,
                                 seed=cfg.master_seed + 3)
        zmax_b = max(abs(s["z"]) for s in stats_b.values())
        results["negative_control"] = stats_b
        results["negative_control_max_abs_z"] = zmax_b
        results["negative_control_fails"] = zmax_b > 3.0
        passed = passed and (zmax_b > 3.0)

    return _report("invariance", cfg, results, passed)


# ----------------------------------------------------------------------
# gaussian submodel exactness (used by the acceptance suite)
# ----------------------------------------------------------------------

def run_gaussian_exactness(K: int = 4, a2: float = 0.5, seed: int = 0,
                           n_chain: int = 200_000, n_traj: int = 1024,
                           T: float = 6.0, delta: float = 0.01) -> dict:
    """Mode variances of the quadratic model against 1/(2(lambda_k + a2)).

    Checks the pCN equilibrium and the long-time marginal of the
    measure-preserving dynamics (ensemble from zero initial data).
    """
    grid = TorusGrid(K, max_degree=2)
    P = PolynomialSpec.quadratic(a2)
    c = counterterm_C(grid)
    modes = [(k1, k2) for k1 in range(-2, 3) for k2 in range(-2, 3)]
    target = {k: 1.0 / (2.0 * (1 + k[0]**2 + k[1]**2 + a2)) for k in modes}

    rng = substream(seed, 0, 0)
    state = ChainState.initial(sample_stationary(grid, rng), P, c, rng)
    burn = n_chain // 10
    chain_vals = {k: [] for k in modes}
    from .sampler import pcn_step
    for i in range(n_chain):
        state, _ = pcn_step(state, 0.5, P, c)
        if i >= burn and i % 10 == 0:
            for k in modes:
                chain_vals[k].append(abs(state.phi.get_mode(*k)) ** 2)

    counters = counter_table(grid)
    sde_vals = {k: [] for k in modes}
    scfg = SolverConfig(delta=delta, T=T, record_every=10**9)
    for i in range(n_traj):
        traj = stationary_solve(SpectralField.zero(grid), substream(seed, i, 1),
                                scfg, P, counters=counters, record_fields=False)
        for k in modes:
            sde_vals[k].append(abs(traj.X[-1].get_mode(*k)) ** 2)

    def zscores(values):
        out = {}
        for k in modes:
            v = np.asarray(values[k])
            se = v.std(ddof=1) / math.sqrt(v.size)
            # chain samples are thinned but still correlated: inflate by IAT
            out[f"{k[0]}_{k[1]}"] = {
                "mean": float(v.mean()), "target": target[k],
                "z": float((v.mean() - target[k]) / se), "se": float(se),
            }
        return out

    chain_stats = zscores(chain_vals)
    sde_stats = zscores(sde_vals)
    # correct the chain z for autocorrelation of the thinned series
    from .sampler import integrated_autocorrelation
    for k in modes:
        series = np.asarray(chain_vals[k])
        tau = integrated_autocorrelation(series)
        entry = chain_stats[f"{k[0]}_{k[1]}"]
        entry["z"] = entry["z"] / math.sqrt(tau)
        entry["iat"] = float(tau)
    cz = max(abs(v["z"]) for v in chain_stats.values())
    sz = max(abs(v["z"]) for v in sde_stats.values())
    return {
        "chain": chain_stats, "sde": sde_stats,
        "max_abs_z_chain": cz, "max_abs_z_sde": sz,
        "pass": bool(cz <= 3.0 and sz <= 3.0),
    }


# ----------------------------------------------------------------------
# regularity
# ----------------------------------------------------------------------

def run_regularity(cfg: ExperimentConfig, n_runs: int = 100) -> dict:
    """Regularity-exponent bands for the rough part, its Wick square, and Y.

    Quartic runs at K = 16 to T = 0.1; pre-registered bands:
    alpha(Z) in [-0.3, 0.05], alpha(Y) >= 0.5, each in >= 95% of runs.
    """
    grid = TorusGrid(16, max_degree=max(cfg.dealiasing_degree, 4))
    part = build_partition(grid)
    P = PolynomialSpec(cfg.N, cfg.a)
    counters = counter_table(grid)
    T, delta = 0.1, 1e-3
    scfg = SolverConfig(delta=delta, T=T, record_every=10**9)
    a_z, a_z2, a_y = [], [], []
    rows = []
    for i in range(n_runs):
        traj = solve(None, None, substream(cfg.master_seed, i, 1), scfg, P,
                     counters=counters, grid=grid, record_fields=True)
        Z = traj.zbar[-1]
        Y = traj.Y[-1]
        z2 = wick_power(Z, 2, CounterTerm(counters.c_Ct(T), "C_t", grid.K, T))
        az, rz = regularity_estimate(Z, part)
        az2, _ = regularity_estimate(z2, part)
        ay, ry = regularity_estimate(Y, part)
        a_z.append(az), a_z2.append(az2), a_y.append(ay)
        rows.append((i, az, az2, ay))
    a_z, a_z2, a_y = map(np.asarray, (a_z, a_z2, a_y))
    frac_z = float(np.mean((a_z >= -0.3) & (a_z <= 0.05)))
    frac_y = float(np.mean(a_y >= 0.5))
    results = {
        "n_runs": n_runs,
        "alpha_Z": {"mean": float(a_z.mean()), "min": float(a_z.min()),
                    "max": float(a_z.max()), "frac_in_band": frac_z},
        "alpha_wick2_Z": {"mean": float(a_z2.mean()), "min": float(a_z2.min()),
                          "max": float(a_z2.max())},
        "alpha_Y": {"mean": float(a_y.mean()), "min": float(a_y.min()),
                    "frac_above_0.5": frac_y},
        "rows": rows,
    }
    return _report("regularity", cfg, results, passed=(frac_z >= 0.95 and frac_y >= 0.95))


# ----------------------------------------------------------------------
# equivalence of the two splittings
# ----------------------------------------------------------------------

def run_equivalence(cfg: ExperimentConfig) -> dict:
    """Agreement of the two reconstructions of X on a fixed Wiener path.

    Both splittings are driven by the same innovations (the exact OU
    transition composes across dyadic refinements, so one fine path defines
    every coarser run).  Two diagnostics:

    * coupled gap: the two reconstructions at the same step size; for this
      integrator the recombination identity collapses both recursions into
      the same update, so the gap sits at roundoff (reported, must be tiny);
    * convergence order: the coarse-step runs of one splitting against a
      fine-step reference computed with the other; the discrepancy is then
      the genuine scheme error and must decay at fitted order >= 0.9 over
      delta in {4e-3, 2e-3, 1e-3}.
    """
    grid = TorusGrid(8, max_degree=max(cfg.dealiasing_degree, 4))
    P = cfg.polynomial()
    counters = counter_table(grid)
    T = 0.2
    deltas = (4e-3, 2e-3, 1e-3)
    fine = deltas[-1] / 8.0
    n_fine = round(T / fine)
    path = OUNoisePath(grid, fine, n_fine, substream(cfg.master_seed, 0, 1))
    z0 = sample_stationary(grid, substream(cfg.master_seed, 0, 0))
    z1_init = sample_stationary(grid, substream(cfg.master_seed, 0, 2))

    ref = solve_alternative_splitting(
        z0, path, SolverConfig(delta=fine, T=T, record_every=10**9), P,
        counters=counters, stationary_init=z1_init, record_fields=True)

    gaps, coupled = [], []
    relation_defect = 0.0
    for delta in deltas:
        cpath = path.coarsen(round(delta / fine))
        scfg = SolverConfig(delta=delta, T=T, record_every=10**9)
        ta = solve(None, z0, cpath, scfg, P, counters=counters)
        tb = solve_alternative_splitting(z0, cpath, scfg, P, counters=counters,
                                         stationary_init=z1_init)
        gaps.append(float(np.sqrt(np.sum(np.abs(ta.X[-1].coeffs - ref.X[-1].coeffs) ** 2))))
        coupled.append(float(np.max(np.abs(ta.X[-1].coeffs - tb.X[-1].coeffs))))
        # the defining relation between the two remainders, checked directly
        rel = ta.Y[-1] - (tb.Y[-1] + apply_semigroup(z1_init, T) - apply_semigroup(z0, T))
        relation_defect = max(relation_defect, float(np.max(np.abs(rel.coeffs))))

    order = float(np.polyfit(np.log(deltas), np.log(gaps), 1)[0])
    results = {
        "deltas": list(deltas),
        "gap_to_fine_reference": gaps,
        "fitted_order": order,
        "coupled_same_delta_gap": coupled,
        "remainder_relation_defect": relation_defect,
    }
    passed = order >= 0.9 and max(coupled) < 1e-10 and relation_defect < 1e-10
    return _report("equivalence", cfg, results, passed)


# ----------------------------------------------------------------------
# wick convergence across cutoffs
# ----------------------------------------------------------------------

def run_wick_convergence(cfg: ExperimentConfig, n_pairs: int = 200) -> dict:
    """Cutoff stability of the Wick square in a negative-regularity norm.

    One stationary sample on the K = 32 grid is projected to nested
    cutoffs; each Wick square uses its own cutoff's counterterm.  The
    squares converge as distributions, i.e. pairings with any fixed test
    function stabilize, so the differences are compared on the frequency
    window every member of the family resolves (|k|_inf <= 4) before
    taking the B^{-0.2}_{inf,inf} norm on one fixed analysis partition:

        d_K = || (:phi_K^2: - :phi_{2K}^2:) restricted to the window ||.

    Unrestricted norms stall at these cutoffs: the un-cancelled top-octave
    chaos of the finer square decays only like K^{-0.2} polylog(K), which
    is invisible below K of order 10^3.  The windowed distances must
    decrease over K in {4, 8, 16} for >= 90% of paired samples.
    """
    Ks = (4, 8, 16)
    big = TorusGrid(32, max_degree=2)
    part = build_partition(big)
    spec = BesovSpec(-0.2)
    masks = {K: (np.abs(big.kx) <= K) & (np.abs(big.ky) <= K) for K in (*Ks, 32)}
    cterm = {K: float(np.sum((1.0 / (2.0 * big.lam))[masks[K]])) / (2 * np.pi) ** 2
             for K in (*Ks, 32)}
    window = masks[min(Ks)]

    monotone = 0
    dists = []
    for i in range(n_pairs):
        phi = sample_stationary(big, np.random.default_rng([cfg.master_seed, 77, i]))
        wick_sq = {}
        for K in (*Ks, 32):
            vals = big.coeffs_to_values(np.where(masks[K], phi.coeffs, 0.0))
            wick_sq[K] = big.values_to_coeffs(hermite_variance(2, vals, cterm[K]))
        d = [besov_norm(SpectralField(big, np.where(window, wick_sq[K] - wick_sq[2 * K], 0.0)),
                        spec, part)
             for K in Ks]
        dists.append(d)
        if d[0] > d[1] > d[2]:
            monotone += 1
    frac = monotone / n_pairs
    dists = np.asarray(dists)
    results = {
        "cutoffs": list(Ks),
        "fraction_monotone": frac,
        "mean_distances": [float(x) for x in dists.mean(axis=0)],
    }
    return _report("wick_convergence", cfg, results, passed=frac >= 0.9)
