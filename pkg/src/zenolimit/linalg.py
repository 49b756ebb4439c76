"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Tensor factors
are always ordered system, reservoir 1, reservoir 2 (``S ⊗ R1 ⊗ R2``); every
``kron`` and ``partial_trace`` call in the package follows that order.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
POSITIVITY_TOL = 1e-10
TRACE_TOL = 1e-10


class NotHermitianError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class EigensolverError(RuntimeError):
    pass


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(m)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(
        np.max(np.abs(a - a.conj().T), initial=0.0) <= tol
    )


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``m`` as Hermitian and return it as a complex array."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"matrix is not square: {a.shape}")
    # tolerance scales with magnitude so that large Hamiltonians built from
    # sums of rounded terms still pass
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    err = float(np.max(np.abs(a - a.conj().T), initial=0.0))
    if err > tol * scale:
        raise NotHermitianError(f"matrix is not Hermitian (max |m - m^H| = {err:.3e})")
    return a


def check_density_matrix(rho, tol: float = TRACE_TOL) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, positive semidefinite."""
    r = as_hermitian(rho, tol=max(HERMITIAN_TOL, tol))
    tr = np.trace(r).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace is {tr!r}, expected 1")
    emin = np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0]
    if emin < -POSITIVITY_TOL:
        raise ValueError(f"density matrix has negative eigenvalue {emin:.3e}")
    return r


def hermitian_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ascending real eigenvalues ``e`` and a unitary ``V`` with
    ``m = V @ diag(e) @ V^H``.
    """
    a = as_hermitian(m)
    try:
        if not np.any(a.imag):
            # real symmetric input: the real solver is several times faster
            e, v = np.linalg.eigh(0.5 * (a.real + a.real.T))
            return e, v.astype(complex)
        e, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(str(exc)) from exc
    return e, v


def expm_i_hermitian(m, t: float) -> np.ndarray:
    """Return ``exp(-i t m)`` for Hermitian ``m`` via its eigendecomposition."""
    e, v = hermitian_eig(m)
    return (v * np.exp(-1j * t * e)) @ v.conj().T


def propagator(eig: tuple[np.ndarray, np.ndarray], t: float) -> np.ndarray:
    """``exp(-i t m)`` from a precomputed ``hermitian_eig(m)``."""
    e, v = eig
    return (v * np.exp(-1j * t * e)) @ v.conj().T


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def kron(*mats) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor outermost."""
    if not mats:
        raise ValueError("kron needs at least one factor")
    return reduce(np.kron, (np.asarray(m, dtype=complex) for m in mats))


def partial_trace(rho, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every factor of ``rho`` not listed in ``keep``.

    ``dims`` are the factor dimensions in tensor order; ``keep`` is an index
    or collection of indices. The kept factors retain their original order.
    """
    r = as_matrix(rho)
    dims = [int(d) for d in dims]
    n = len(dims)
    total = int(np.prod(dims))
    if r.shape != (total, total):
        raise DimensionMismatchError(f"dims {dims} do not match matrix shape {r.shape}")
    keep = sorted({int(keep)} if np.isscalar(keep) else {int(k) for k in keep})
    if any(k < 0 or k >= n for k in keep):
        raise DimensionMismatchError(f"keep indices {keep} out of range for {n} factors")

    t = r.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum subscripts: row index i, column index n + i; traced factors share a label
    row = list(range(n))
    col = [n + i for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    reduced = np.einsum(t, row + col, out)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return reduced.reshape(dk, dk)


def partial_transpose(rho, dims: Sequence[int], factor: int) -> np.ndarray:
    r = as_matrix(rho)
    dims = [int(d) for d in dims]
    n = len(dims)
    if r.shape != (int(np.prod(dims)),) * 2:
        raise DimensionMismatchError(f"dims {dims} do not match matrix shape {r.shape}")
    if not 0 <= factor < n:
        raise DimensionMismatchError(f"factor {factor} out of range")
    t = r.reshape(dims + dims)
    axes = list(range(2 * n))
    axes[factor], axes[n + factor] = axes[n + factor], axes[factor]
    return t.transpose(axes).reshape(r.shape)


def embed(op, dims: Sequence[int], factor: int) -> np.ndarray:
    """Place ``op`` on tensor factor ``factor`` with identities elsewhere."""
    mats = [np.eye(d) for d in dims]
    mats[factor] = op
    return kron(*mats)


def conjugate(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``u @ rho @ u^H``."""
    return u @ rho @ u.conj().T


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)
