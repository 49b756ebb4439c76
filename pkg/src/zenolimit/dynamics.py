"""Brute-force propagation in truncated Fock space and the Zeno reference.

Initial states are always products ``rho_S ⊗ omega_R``. The ultrastrong
limit cannot be reached literally in a truncated Fock space (the field
displacement grows like ``lam``), so ``lambda_sweep`` raises the per-mode
cutoff until the top Fock level is nearly empty, and flags points where the
total dimension cap stops it first.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analysis import fidelity, trace_distance
from .linalg import (
    DimensionMismatchError,
    as_matrix,
    conjugate,
    expm_i_hermitian,
    hermitian_eig,
    hermitize,
    partial_trace,
    propagator,
)
from .model import (
    ReservoirSpec,
    SpectralDecomposition,
    SystemSpec,
    assemble_hamiltonian,
    field_operator,
    measure,
    reservoir_hamiltonian,
    spectral_decompose,
    zeno_hamiltonian,
)

TRUNCATION_TARGET = 1e-4
DIMENSION_CAP = 4096


def initial_reservoir_state(r: ReservoirSpec, beta: float) -> np.ndarray:
    """Gibbs state of the truncated modes (vacuum projector for ``beta = inf``)."""
    if not beta > 0:
        raise ValueError("beta must be positive or inf")
    rho = np.ones((1,))
    for w, n in zip(r.frequencies, r.n_max):
        if np.isinf(beta):
            p = np.zeros(n + 1)
            p[0] = 1.0
        else:
            p = np.exp(-beta * w * np.arange(n + 1))
            p /= p.sum()
        rho = np.kron(rho, p)
    return np.diag(rho).astype(complex)


def evolve_exact(h, rho0, t: float, eig=None) -> np.ndarray:
    """``U rho0 U^H`` with ``U = exp(-i t H)``; pass ``eig`` to reuse a decomposition."""
    rho0 = as_matrix(rho0)
    if eig is None:
        h = as_matrix(h)
        if h.shape != rho0.shape:
            raise DimensionMismatchError(f"H is {h.shape}, rho is {rho0.shape}")
        u = expm_i_hermitian(h, t)
    else:
        u = propagator(eig, t)
    return conjugate(u, rho0)


def reduced_state(rho, dims: Sequence[int], keep=0) -> np.ndarray:
    return partial_trace(rho, dims, keep)


def zeno_reference(rho_s, h_s, dec: SpectralDecomposition, t: float) -> np.ndarray:
    """Measure with ``dec`` then evolve under the Zeno Hamiltonian for time ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    hz = zeno_hamiltonian(h_s, dec)
    return conjugate(expm_i_hermitian(hz, t), measure(rho_s, dec))


def mode_occupations(rho, d: int, r: ReservoirSpec) -> list[np.ndarray]:
    """Marginal Fock-level distribution of each mode."""
    p = np.real(np.diag(rho)).reshape((d,) + r.mode_dims)
    out = []
    for j in range(r.modes):
        axes = tuple(k for k in range(p.ndim) if k != j + 1)
        out.append(p.sum(axis=axes))
    return out


def mode_top_populations(rho, d: int, r: ReservoirSpec) -> np.ndarray:
    """Population of the highest kept Fock level of each mode."""
    return np.array([occ[-1] for occ in mode_occupations(rho, d, r)])


def _extra_levels(occ: np.ndarray, target: float) -> int:
    # extrapolate the geometric tail p[n]/p[n-1] to estimate how many levels
    # push the top population under target
    top = occ[-1]
    if top < target:
        return 0
    q = occ[-1] / occ[-2] if len(occ) > 1 and occ[-2] > 0 else 1.0
    if not 0 < q < 1:
        return 1
    return int(min(4, max(1, np.ceil(np.log(target / top) / np.log(q)))))


@dataclass(frozen=True)
class SweepRecord:
    lam: float
    t: float
    rho_reduced: np.ndarray
    rho_zeno: np.ndarray
    trace_distance: float
    fidelity: float
    top_fock_population: float
    n_max_used: tuple[int, ...]
    truncation_ok: bool
    wall_time_ms: float


@dataclass(frozen=True)
class ExactRun:
    rho_reduced: np.ndarray
    occupations: list[np.ndarray]
    reservoir: ReservoirSpec

    @property
    def top_populations(self) -> np.ndarray:
        return np.array([occ[-1] for occ in self.occupations])


def simulate(sys: SystemSpec, r: ReservoirSpec, rho_s, beta: float, lam: float, times: Sequence[float]) -> list[ExactRun]:
    """Exact reduced states at each time for one truncation (one eigendecomposition)."""
    d = sys.dim
    h = assemble_hamiltonian(sys, r, lam)
    eig = hermitian_eig(h)
    rho0 = np.kron(as_matrix(rho_s), initial_reservoir_state(r, beta))
    runs = []
    for t in times:
        rho = evolve_exact(None, rho0, t, eig=eig)
        runs.append(ExactRun(partial_trace(rho, (d, r.dim), 0), mode_occupations(rho, d, r), r))
    return runs


def adapt_truncation(
    sys: SystemSpec,
    r: ReservoirSpec,
    rho_s,
    beta: float,
    lam: float,
    times: Sequence[float],
    target: float = TRUNCATION_TARGET,
    dim_cap: int = DIMENSION_CAP,
) -> tuple[list[ExactRun], bool]:
    """Raise per-mode cutoffs until every top-level population is below ``target``.

    Only modes over target are enlarged, by a number of levels estimated from
    the decay of their occupation tail. Returns the last runs and whether the
    target was met before ``d * dim(R)`` would exceed ``dim_cap``.
    """
    d = sys.dim
    if d * r.dim > dim_cap:
        raise ValueError(f"starting truncation already exceeds the dimension cap ({d * r.dim} > {dim_cap})")
    while True:
        runs = simulate(sys, r, rho_s, beta, lam, times)
        top = np.max([run.top_populations for run in runs], axis=0)
        if np.all(top < target):
            return runs, True
        # the run with the fattest tail drives the estimate for each mode
        extra = [
            max(_extra_levels(run.occupations[j], target) for run in runs) for j in range(r.modes)
        ]
        candidate = r.with_n_max(tuple(n + k for n, k in zip(r.n_max, extra)))
        while d * candidate.dim > dim_cap and any(extra):
            # shrink the most generous bump first
            j = int(np.argmax(extra))
            extra[j] -= 1
            candidate = r.with_n_max(tuple(n + k for n, k in zip(r.n_max, extra)))
        if not any(extra):
            return runs, False
        r = candidate


def lambda_sweep(
    sys: SystemSpec,
    r: ReservoirSpec,
    rho_s,
    beta: float,
    t: float,
    lam_grid: Sequence[float],
    adapt_truncation_flag: bool = True,
    target: float = TRUNCATION_TARGET,
    dim_cap: int = DIMENSION_CAP,
    threads: int = 1,
) -> list[SweepRecord]:
    """Distance between exact reduced dynamics and the Zeno reference, per ``lam``.

    Each point starts from the truncation in ``r`` so results do not depend
    on evaluation order or thread count.
    """
    lam_grid = [float(x) for x in lam_grid]
    if not lam_grid:
        raise ValueError("lambda grid is empty")
    if any(b < a for a, b in zip(lam_grid, lam_grid[1:])) or min(lam_grid) < 0:
        raise ValueError("lambda grid must be ascending and non-negative")
    if not t > 0:
        raise ValueError("t must be positive")
    dec = spectral_decompose(sys.coupling)
    rho_zeno = zeno_reference(rho_s, sys.hamiltonian, dec, t)

    def point(lam: float) -> SweepRecord:
        start = time.perf_counter()
        if adapt_truncation_flag:
            runs, ok = adapt_truncation(sys, r, rho_s, beta, lam, [t], target, dim_cap)
        else:
            runs = simulate(sys, r, rho_s, beta, lam, [t])
            ok = bool(np.all(runs[0].top_populations < target))
        run = runs[0]
        return SweepRecord(
            lam=lam,
            t=t,
            rho_reduced=run.rho_reduced,
            rho_zeno=rho_zeno,
            trace_distance=trace_distance(run.rho_reduced, rho_zeno),
            fidelity=fidelity(run.rho_reduced, rho_zeno),
            top_fock_population=float(np.max(run.top_populations)),
            n_max_used=run.reservoir.n_max,
            truncation_ok=ok,
            wall_time_ms=1e3 * (time.perf_counter() - start),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(point, lam_grid))
    return [point(lam) for lam in lam_grid]


# ---------------------------------------------------------------------------
# two reservoirs: ultrastrong coupling to R2, finite coupling to R1
# ---------------------------------------------------------------------------


def two_reservoir_hamiltonian(sys: SystemSpec, r1: ReservoirSpec, lam1: float) -> np.ndarray:
    """``H_S + H_R1 + lam1 G1 ⊗ phi1(g1)`` on ``S ⊗ R1`` (``G1`` is ``sys.coupling``)."""
    d = sys.dim
    return (
        np.kron(sys.hamiltonian, np.eye(r1.dim))
        + np.kron(np.eye(d), reservoir_hamiltonian(r1))
        + lam1 * np.kron(sys.coupling, field_operator(r1))
    )


def two_reservoir_zeno_evolve(
    sys: SystemSpec,
    r1: ReservoirSpec,
    dec2: SpectralDecomposition,
    lam1: float,
    rho,
    t,
):
    """Limit dynamics on ``S ⊗ R1`` when the coupling to R2 is ultrastrong.

    ``rho`` is the initial state on ``S ⊗ R1``. It is measured with
    ``P_l ⊗ 1`` (projections of ``G2``) and then evolved by the Zeno
    Hamiltonian ``sum_l (P_l ⊗ 1)(H_S + H_R1 + lam1 G1 ⊗ phi1)(P_l ⊗ 1)``.
    ``t`` may be a scalar or a sequence; a list of states is returned for a
    sequence.
    """
    d = sys.dim
    rho = as_matrix(rho)
    if rho.shape != (d * r1.dim,) * 2:
        raise DimensionMismatchError(f"state shape {rho.shape} does not match S ⊗ R1 = {d}x{r1.dim}")
    if dec2.dim != d:
        raise DimensionMismatchError("decomposition does not act on the system")
    lifted = dec2.lift(r1.dim)
    hz = hermitize(zeno_hamiltonian(two_reservoir_hamiltonian(sys, r1, lam1), lifted))
    eig = hermitian_eig(hz)
    measured = measure(rho, lifted)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("t must be non-negative")
    out = [conjugate(propagator(eig, s), measured) for s in times]
    return out if np.ndim(t) else out[0]
