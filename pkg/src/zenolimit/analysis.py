"""State metrics, entanglement diagnostics and sequential measurements."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import DimensionMismatchError, as_matrix, hermitize, partial_transpose
from .model import (
    CompositeCoupling,
    SpectralDecomposition,
    composite_coupling,
    measure,
    min_gap,
    spectral_decompose,
    CLUSTER_TOL,
)

NEGATIVITY_TOL = 1e-12


def trace_distance(a, b) -> float:
    """``||a - b||_1 / 2`` from the eigenvalues of the Hermitian difference."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(hermitize(a - b)))))


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(a) b sqrt(a)))^2``."""
    a, b = hermitize(as_matrix(a)), hermitize(as_matrix(b))
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    e, v = np.linalg.eigh(a)
    # roundoff-level eigenvalues of rank-deficient states would otherwise
    # contribute their square roots (~1e-8); same below
    e = np.where(e > 1e-14 * max(e[-1], 0.0), e, 0.0)
    sa = (v * np.sqrt(e)) @ v.conj().T
    m = np.linalg.eigvalsh(hermitize(sa @ b @ sa))
    m = np.where(m > 1e-14 * max(m[-1], 0.0), m, 0.0)
    return float(min(1.0, np.sum(np.sqrt(m)) ** 2))


def negativity(rho, dims: Sequence[int], transpose_factor: int = 1) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose."""
    if len(dims) != 2:
        raise DimensionMismatchError("negativity needs a bipartition (two factor dims)")
    pt = partial_transpose(rho, dims, transpose_factor)
    e = np.linalg.eigvalsh(hermitize(pt))
    return float(max(0.0, -np.sum(e[e < 0])))


@dataclass(frozen=True)
class EntanglementReport:
    negativity: float
    ppt: bool
    partition: tuple[int, ...]
    applicable: bool = True
    time_independence: float = 0.0
    caveat: str = ""


def _ppt_caveat(dims: Sequence[int]) -> str:
    if int(np.prod(dims)) <= 6:
        return ""
    return "PPT is only necessary for separability beyond 2x2 and 2x3"


def zeno_limit_separability_check(
    rho_s,
    coupling: CompositeCoupling,
    h_s,
    t: float,
    cluster_tol: float = CLUSTER_TOL,
) -> EntanglementReport:
    """Entanglement of the ultrastrong-coupling limit state for a product-form coupling.

    With a nondegenerate coupling the limit state is diagonal in a product
    basis, hence constant for ``t > 0`` and separable. A degenerate coupling
    is reported as inapplicable rather than checked.
    """
    from .dynamics import zeno_reference

    dims = coupling.dims
    if len(dims) != 2:
        raise DimensionMismatchError("separability check supports bipartite systems")
    if t <= 0:
        raise ValueError("the Zeno limit state is defined for t > 0")
    g = composite_coupling(coupling)
    dec = spectral_decompose(g, cluster_tol)
    if not dec.nondegenerate or min_gap(dec.eigenvalues) <= cluster_tol:
        return EntanglementReport(np.nan, False, tuple(dims), applicable=False, caveat="degenerate coupling")
    rho_t = zeno_reference(rho_s, h_s, dec, t)
    rho_2t = zeno_reference(rho_s, h_s, dec, 2 * t)
    drift = trace_distance(rho_t, rho_2t)
    neg = negativity(rho_t, dims, 1)
    return EntanglementReport(neg, neg < NEGATIVITY_TOL, tuple(dims), True, drift, _ppt_caveat(dims))


def collision_sequence(rho_s, decs: Sequence[SpectralDecomposition]) -> np.ndarray:
    """Apply the nonselective measurements of ``decs`` in order."""
    rho = as_matrix(rho_s)
    for dec in decs:
        rho = measure(rho, dec)
    return rho


# ---------------------------------------------------------------------------
# random states for tests and experiments
# ---------------------------------------------------------------------------


def haar_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_mixed_state(dim: int, rng: np.random.Generator, purity: float | None = None) -> np.ndarray:
    """Haar-random pure state mixed with the maximally mixed state.

    ``purity`` is the weight ``p`` of the pure part (drawn uniformly from
    ``[0.5, 1]`` if not given).
    """
    p = rng.uniform(0.5, 1.0) if purity is None else purity
    v = haar_pure_state(dim, rng)
    return p * np.outer(v, v.conj()) + (1 - p) * np.eye(dim) / dim


def random_entangled_states(count: int, seed: int, dims=(2, 2)) -> list[np.ndarray]:
    """``count`` seed-deterministic states with strictly positive negativity."""
    rng = np.random.default_rng(seed)
    d = int(np.prod(dims))
    out = []
    while len(out) < count:
        rho = random_mixed_state(d, rng, purity=rng.uniform(0.8, 1.0))
        if negativity(rho, dims) > 1e-3:
            out.append(rho)
    return out


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (a + a.conj().T)
