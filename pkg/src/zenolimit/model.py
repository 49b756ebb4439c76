"""System, reservoir and coupling construction.

The reservoir is a finite set of bosonic modes obtained by Gauss-Legendre
discretization of a continuum spectral density ``J(omega)``, where
``J(omega) d omega`` is the ``|g|^2``-weighted measure of mode energies. Mode
``j`` gets frequency ``omega_j`` (a quadrature node) and coupling
``g_j = sqrt(J(omega_j) w_j)`` so that ``sum_j |g_j|^2 f(omega_j)``
approximates ``int J(omega) f(omega) d omega``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .linalg import (
    DimensionMismatchError,
    as_hermitian,
    as_matrix,
    embed,
    hermitian_eig,
    kron,
)

CLUSTER_TOL = 1e-9
OHMIC_SPAN = 30.0  # default discretization window, in units of the cutoff

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# |0> is the +1 eigenvector of sigma_z, so the raising operator maps |1> to |0>
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
IDENTITY2 = np.eye(2, dtype=complex)


def ket(*bits: int) -> np.ndarray:
    """Computational-basis product vector, e.g. ``ket(0, 1)`` is |01>."""
    v = np.array([1.0 + 0j])
    for b in bits:
        e = np.zeros(2, dtype=complex)
        e[b] = 1.0
        v = np.kron(v, e)
    return v


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def bell_state(name: str) -> np.ndarray:
    """Bell vectors with the naming used for the two-qubit flip-flop coupling.

    ``phi+/-`` = (|01> +/- |10>)/sqrt2, ``psi+/-`` = (|00> +/- |11>)/sqrt2.
    """
    s = 1 / np.sqrt(2)
    table = {
        "phi+": s * (ket(0, 1) + ket(1, 0)),
        "phi-": s * (ket(0, 1) - ket(1, 0)),
        "psi+": s * (ket(0, 0) + ket(1, 1)),
        "psi-": s * (ket(0, 0) - ket(1, 1)),
    }
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown Bell state {name!r}") from None


def flip_flop_coupling() -> np.ndarray:
    """``sigma_+ ⊗ sigma_- + sigma_- ⊗ sigma_+`` on two qubits."""
    return kron(SIGMA_PLUS, SIGMA_MINUS) + kron(SIGMA_MINUS, SIGMA_PLUS)


# ---------------------------------------------------------------------------
# system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemSpec:
    """Finite system: Hamiltonian plus one coupling operator per reservoir."""

    hamiltonian: np.ndarray
    coupling: np.ndarray
    coupling2: np.ndarray | None = None

    def __post_init__(self):
        h = as_hermitian(self.hamiltonian)
        g = as_hermitian(self.coupling)
        if g.shape != h.shape:
            raise DimensionMismatchError(f"H_S is {h.shape} but G is {g.shape}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "coupling", g)
        if self.coupling2 is not None:
            g2 = as_hermitian(self.coupling2)
            if g2.shape != h.shape:
                raise DimensionMismatchError(f"H_S is {h.shape} but G2 is {g2.shape}")
            object.__setattr__(self, "coupling2", g2)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues of a Hermitian operator and their eigenprojections."""

    eigenvalues: np.ndarray
    projections: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def dim(self) -> int:
        return self.projections[0].shape[0]

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(int(round(np.trace(p).real)) for p in self.projections)

    @property
    def nondegenerate(self) -> bool:
        return all(r == 1 for r in self.ranks)

    def operator(self) -> np.ndarray:
        return sum(g * p for g, p in zip(self.eigenvalues, self.projections))

    def lift(self, extra_dim: int) -> "SpectralDecomposition":
        """The same decomposition acting as ``P_l ⊗ 1`` on a larger space."""
        eye = np.eye(extra_dim)
        return SpectralDecomposition(
            self.eigenvalues, tuple(np.kron(p, eye) for p in self.projections)
        )


def spectral_decompose(g, cluster_tol: float = CLUSTER_TOL) -> SpectralDecomposition:
    """Group the eigenvalues of ``g`` into distinct values with summed projections.

    Consecutive (sorted) eigenvalues closer than ``cluster_tol`` are treated
    as one degenerate eigenvalue; the reported value is the cluster mean.
    """
    e, v = hermitian_eig(g)
    groups: list[list[int]] = [[0]]
    for k in range(1, len(e)):
        if e[k] - e[k - 1] <= cluster_tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    eigenvalues = np.array([e[idx].mean() for idx in groups])
    projections = tuple(v[:, idx] @ v[:, idx].conj().T for idx in groups)
    return SpectralDecomposition(eigenvalues, projections)


def _check_dims(a: np.ndarray, dec: SpectralDecomposition) -> None:
    if a.shape != (dec.dim, dec.dim):
        raise DimensionMismatchError(
            f"operator shape {a.shape} incompatible with decomposition of dim {dec.dim}"
        )


def zeno_hamiltonian(h_s, dec: SpectralDecomposition) -> np.ndarray:
    """``sum_l P_l H_S P_l``: the block-diagonal part of ``H_S``."""
    h = as_hermitian(h_s)
    _check_dims(h, dec)
    return sum(p @ h @ p for p in dec.projections)


def measure(rho, dec: SpectralDecomposition) -> np.ndarray:
    """Nonselective measurement ``rho -> sum_l P_l rho P_l``."""
    r = as_matrix(rho)
    _check_dims(r, dec)
    return sum(p @ r @ p for p in dec.projections)


def project_coupling(g1, dec: SpectralDecomposition) -> np.ndarray:
    """Coupling left after an ultrastrong measurement by ``dec``: ``sum_l P_l G1 P_l``.

    The result commutes with every ``P_l`` and hence with the measured observable.
    """
    return zeno_hamiltonian(g1, dec)


# ---------------------------------------------------------------------------
# reservoir
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralDensity:
    """Continuum spectral density ``J(omega)``.

    Families
    --------
    ``ohmic``: ``amplitude * omega**exponent * exp(-omega / cutoff)`` on
    ``[0, inf)``; ``exponent`` 1 is ohmic, < 1 sub-ohmic, > 1 super-ohmic.
    ``flat``: ``amplitude`` on ``[0, cutoff]``.

    ``omega_max`` bounds the window used for discretization; it defaults to
    ``cutoff`` for ``flat`` and ``30 * cutoff`` for ``ohmic``.
    """

    family: str = "ohmic"
    amplitude: float = 1.0
    cutoff: float = 1.0
    exponent: float = 1.0
    omega_max: float | None = None

    def __post_init__(self):
        if self.family not in ("ohmic", "flat"):
            raise ValueError(f"unknown spectral density family {self.family!r}")
        if not np.isfinite(self.cutoff) or self.cutoff <= 0:
            raise ValueError("cutoff must be positive and finite")
        if not np.isfinite(self.amplitude) or self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.family == "ohmic" and not self.exponent > -1:
            raise ValueError("ohmic exponent must exceed -1 for J to be integrable")
        if self.omega_max is not None and not self.omega_max > 0:
            raise ValueError("omega_max must be positive")

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        if self.family == "flat":
            return np.where((w >= 0) & (w <= self.cutoff), self.amplitude, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.amplitude * np.power(w, self.exponent) * np.exp(-w / self.cutoff)
        return np.where(w >= 0, out, 0.0)

    @property
    def window(self) -> tuple[float, float]:
        if self.omega_max is not None:
            return 0.0, float(self.omega_max)
        if self.family == "flat":
            return 0.0, float(self.cutoff)
        return 0.0, OHMIC_SPAN * self.cutoff

    @property
    def upper(self) -> float:
        """Upper end of the continuum support (``inf`` for ohmic)."""
        if self.family == "flat":
            return float(self.cutoff if self.omega_max is None else min(self.cutoff, self.omega_max))
        return np.inf if self.omega_max is None else float(self.omega_max)

    def describe(self) -> dict:
        return {
            "family": self.family,
            "amplitude": self.amplitude,
            "cutoff": self.cutoff,
            "exponent": self.exponent,
            "omega_max": self.omega_max,
        }


@dataclass(frozen=True)
class ReservoirSpec:
    """Finite set of bosonic modes with a Fock cutoff per mode.

    ``n_max[j]`` is the highest occupation kept for mode ``j`` (so the mode
    has ``n_max[j] + 1`` levels).
    """

    frequencies: np.ndarray
    couplings: np.ndarray
    n_max: tuple[int, ...]
    density: SpectralDensity | None = field(default=None, compare=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        g = np.atleast_1d(np.asarray(self.couplings, dtype=complex))
        if w.ndim != 1 or len(w) < 1:
            raise ValueError("need at least one mode")
        if g.shape != w.shape:
            raise DimensionMismatchError("one coupling per mode required")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("frequencies must be finite and non-negative")
        n = self.n_max
        n = (int(n),) * len(w) if np.isscalar(n) else tuple(int(k) for k in n)
        if len(n) != len(w) or min(n) < 1:
            raise ValueError("n_max must be >= 1 for every mode")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "couplings", g)
        object.__setattr__(self, "n_max", n)

    @property
    def modes(self) -> int:
        return len(self.frequencies)

    @property
    def mode_dims(self) -> tuple[int, ...]:
        return tuple(k + 1 for k in self.n_max)

    @property
    def dim(self) -> int:
        return int(np.prod(self.mode_dims))

    def with_n_max(self, n_max) -> "ReservoirSpec":
        return replace(self, n_max=n_max)


def gauss_legendre(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def discretize_reservoir(density: SpectralDensity, modes: int, n_max) -> ReservoirSpec:
    """Gauss-Legendre discretization of ``density`` into ``modes`` bosonic modes."""
    if modes < 1:
        raise ValueError("need at least one mode")
    lo, hi = density.window
    nodes, weights = gauss_legendre(modes, lo, hi)
    couplings = np.sqrt(density(nodes) * weights)
    return ReservoirSpec(nodes, couplings.astype(complex), n_max, density)


def annihilation(n_max: int) -> np.ndarray:
    """Truncated annihilation operator on levels ``0..n_max``."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def mode_operator(r: ReservoirSpec, j: int, op: np.ndarray) -> np.ndarray:
    """Single-mode operator ``op`` placed on mode ``j`` of the reservoir space."""
    return embed(op, r.mode_dims, j)


def field_operator(r: ReservoirSpec, coeffs=None) -> np.ndarray:
    """``(1/sqrt2) sum_j (c_j a_j^+ + conj(c_j) a_j)`` on the truncated Fock space.

    ``coeffs`` defaults to the reservoir couplings.
    """
    c = r.couplings if coeffs is None else np.asarray(coeffs, dtype=complex)
    if c.shape != (r.modes,):
        raise DimensionMismatchError(f"need {r.modes} coefficients, got shape {c.shape}")
    phi = np.zeros((r.dim, r.dim), dtype=complex)
    for j, cj in enumerate(c):
        if cj == 0:
            continue
        a = annihilation(r.n_max[j])
        local = cj * a.conj().T + np.conj(cj) * a
        phi += mode_operator(r, j, local)
    return phi / np.sqrt(2.0)


def number_operators(r: ReservoirSpec) -> list[np.ndarray]:
    return [mode_operator(r, j, np.diag(np.arange(n + 1, dtype=complex))) for j, n in enumerate(r.n_max)]


def reservoir_hamiltonian(r: ReservoirSpec) -> np.ndarray:
    """``sum_j omega_j a_j^+ a_j`` (diagonal in the Fock basis)."""
    occupations = np.indices(r.mode_dims).reshape(r.modes, -1)
    return np.diag(r.frequencies @ occupations).astype(complex)


def assemble_hamiltonian(sys: SystemSpec, r: ReservoirSpec, lam: float) -> np.ndarray:
    """``H_S ⊗ 1 + 1 ⊗ H_R + lam G ⊗ phi(g)`` with factor order (S, R)."""
    d = sys.dim
    h = np.kron(sys.hamiltonian, np.eye(r.dim)) + np.kron(np.eye(d), reservoir_hamiltonian(r))
    if lam != 0:
        h = h + lam * np.kron(sys.coupling, field_operator(r))
    return h


# ---------------------------------------------------------------------------
# many-body couplings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompositeCoupling:
    """``G = F(G_1, ..., G_N)`` with ``G_n`` acting on subsystem ``n``.

    ``combine`` is ``"sum"`` or ``"product"``. With ``mu > 0`` each local
    operator becomes ``G_n + mu * xi_n`` where ``xi_n`` is a real symmetric
    matrix whose upper-triangle entries are i.i.d. standard normal, drawn from
    ``numpy.random.default_rng(seed)`` in site order.
    """

    operators: tuple[np.ndarray, ...]
    combine: str = "sum"
    mu: float = 0.0
    seed: int = 0

    def __post_init__(self):
        ops = tuple(as_hermitian(g) for g in self.operators)
        if not ops:
            raise ValueError("need at least one local operator")
        object.__setattr__(self, "operators", ops)
        if self.mu < 0:
            raise ValueError("mu must be non-negative")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(g.shape[0] for g in self.operators)

    def local_operators(self) -> tuple[np.ndarray, ...]:
        if self.mu == 0:
            return self.operators
        rng = np.random.default_rng(self.seed)
        out = []
        for g in self.operators:
            d = g.shape[0]
            a = rng.standard_normal((d, d))
            xi = np.triu(a) + np.triu(a, 1).T
            out.append(g + self.mu * xi)
        return tuple(out)


def composite_coupling(c: CompositeCoupling) -> np.ndarray:
    """Build ``F(G_1, ..., G_N)`` on the full tensor-product space."""
    dims = c.dims
    local = [embed(g, dims, n) for n, g in enumerate(c.local_operators())]
    if c.combine == "sum":
        return sum(local)
    if c.combine == "product":
        out = local[0]
        for g in local[1:]:
            out = out @ g
        return out
    raise ValueError(f"unsupported combining function {c.combine!r}")


def min_gap(values: Sequence[float]) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    return float(np.min(np.diff(v))) if len(v) > 1 else np.inf
