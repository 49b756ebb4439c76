"""Gaussian reservoir states and Weyl-operator calculus.

Conventions
-----------
* ``<f, h> = sum_j conj(f_j) h_j`` (``np.vdot``).
* ``phi(f) = (1/sqrt2) sum_j (f_j a_j^+ + conj(f_j) a_j)``, ``W(f) = exp(i phi(f))``.
* A Gaussian state has ``omega(W(f)) = exp(-<f, C f>/4 + i Im<alpha, f>)`` with
  covariance ``C >= 1``; thermal equilibrium is ``C = coth(beta omega / 2)``.
* Two-point function: ``omega(phi(f) phi(h)) = Re<f, C h>/2 + i Im<f, h>/2``.
  This is the mixed second derivative of the characteristic function; the
  real part must be taken because ``C`` enters only through the symmetric
  combination ``<f, C h> + <h, C f>``.

Mode functions are complex arrays with one entry per discrete mode. The
continuum routines (``decoherence_function`` and the ``SpectralDensity``
branches of the dephasing engine) integrate over ``J(omega)`` instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma, log
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .linalg import DimensionMismatchError, as_hermitian, expm_i_hermitian
from .model import (
    ReservoirSpec,
    SpectralDecomposition,
    SpectralDensity,
    SystemSpec,
    field_operator,
    spectral_decompose,
)

ZERO_FREQ = 1e-13
SERIES_CUTOFF = 1e-4
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-12
IR_MARGIN = 0.05


class InfraredDivergenceError(ValueError):
    pass


class NonCommutingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


def coth_weight(beta: float, omega) -> np.ndarray:
    """``coth(beta omega / 2)``; identically 1 at zero temperature."""
    w = np.asarray(omega, dtype=float)
    if np.isinf(beta):
        return np.ones_like(w)
    with np.errstate(divide="ignore"):
        return 1.0 / np.tanh(0.5 * beta * w)


def planck_occupation(beta: float, omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if np.isinf(beta):
        return np.zeros_like(w)
    with np.errstate(divide="ignore"):
        return 1.0 / np.expm1(beta * w)


@dataclass(frozen=True)
class GaussianState:
    """Gaussian reservoir state.

    ``covariance`` is either an ``(M,)`` array (a multiplication operator on
    discrete modes), an ``(M, M)`` Hermitian matrix, or a function of
    frequency (stationary continuum state). ``displacement`` is the coherent
    amplitude ``alpha``; ``None`` means centered.
    """

    covariance: np.ndarray | Callable[[np.ndarray], np.ndarray]
    displacement: np.ndarray | None = None
    beta: float = np.inf

    def __post_init__(self):
        c = self.covariance
        if callable(c):
            pass
        else:
            c = np.asarray(c)
            if c.ndim == 1:
                c = c.astype(float)
                if np.any(c < 1 - 1e-10):
                    raise ValueError("covariance must satisfy C >= 1")
            elif c.ndim == 2:
                c = as_hermitian(c)
                if np.linalg.eigvalsh(c)[0] < 1 - 1e-10:
                    raise ValueError("covariance must satisfy C >= 1")
            else:
                raise ValueError("covariance must be 1-d, 2-d or callable")
            object.__setattr__(self, "covariance", c)
        if self.displacement is not None:
            a = np.asarray(self.displacement, dtype=complex)
            object.__setattr__(self, "displacement", a)
        if not self.beta > 0:
            raise ValueError("beta must be positive (use inf for the vacuum)")

    @property
    def centered(self) -> bool:
        return self.displacement is None or not np.any(self.displacement)

    @property
    def stationary(self) -> bool:
        return callable(self.covariance) or np.ndim(self.covariance) == 1

    def on_modes(self, frequencies) -> "GaussianState":
        """Materialize a functional covariance on discrete mode frequencies."""
        if not callable(self.covariance):
            return self
        w = np.asarray(frequencies, dtype=float)
        return GaussianState(np.asarray(self.covariance(w), dtype=float), self.displacement, self.beta)

    def quadratic_form(self, f, h=None) -> complex:
        """``<f, C h>`` (``h`` defaults to ``f``)."""
        c = self.covariance
        if callable(c):
            raise TypeError("functional covariance: call on_modes(frequencies) first")
        f = np.asarray(f, dtype=complex)
        h = f if h is None else np.asarray(h, dtype=complex)
        if f.shape[0] != c.shape[0] or h.shape[0] != c.shape[0]:
            raise DimensionMismatchError("mode function length does not match covariance")
        if c.ndim == 1:
            return complex(np.sum(np.conj(f) * c * h))
        return complex(np.vdot(f, c @ h))


def vacuum_state(modes: int | None = None) -> GaussianState:
    if modes is None:
        return GaussianState(lambda w: np.ones_like(np.asarray(w, dtype=float)))
    return GaussianState(np.ones(modes))


def thermal_covariance(beta: float, frequencies) -> GaussianState:
    """Thermal state on discrete modes: ``C_j = coth(beta omega_j / 2)``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    w = np.atleast_1d(np.asarray(frequencies, dtype=float))
    if np.isfinite(beta) and np.any(w <= 0):
        raise ValueError("thermal state undefined for zero-frequency modes at finite beta")
    return GaussianState(coth_weight(beta, w), None, beta)


def thermal_state(beta: float) -> GaussianState:
    """Stationary thermal state with functional covariance (continuum use)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return GaussianState(lambda w: coth_weight(beta, w), None, beta)


def coherent_state(alpha) -> GaussianState:
    """The vector state ``W(alpha)|0>`` (so ``<a_j> = i alpha_j / sqrt2``)."""
    a = np.atleast_1d(np.asarray(alpha, dtype=complex))
    return GaussianState(np.ones(len(a)), a)


# ---------------------------------------------------------------------------
# Weyl algebra
# ---------------------------------------------------------------------------


def weyl_expectation(state: GaussianState, f) -> complex:
    """``omega(W(f)) = exp(-<f, C f>/4 + i Im<alpha, f>)``."""
    f = np.atleast_1d(np.asarray(f, dtype=complex))
    exponent = -0.25 * state.quadratic_form(f).real
    if not state.centered:
        exponent = exponent + 1j * np.vdot(state.displacement, f).imag
    return complex(np.exp(exponent))


def weyl_product_phase(f, h) -> complex:
    """Phase in ``W(f) W(h) = phase * W(f + h)``."""
    return complex(np.exp(-0.5j * np.vdot(np.asarray(f, complex), np.asarray(h, complex)).imag))


def weyl_operator(r: ReservoirSpec, f) -> np.ndarray:
    """Truncated-Fock matrix of ``W(f) = exp(i phi(f))``."""
    return expm_i_hermitian(field_operator(r, f), -1.0)


def two_point(state: GaussianState, f, h) -> complex:
    """``omega(phi(f) phi(h))`` for a centered Gaussian state."""
    f = np.asarray(f, dtype=complex)
    h = np.asarray(h, dtype=complex)
    return 0.5 * state.quadratic_form(f, h).real + 0.5j * np.vdot(f, h).imag


def pairings(n: int):
    """All perfect matchings of ``range(n)`` as tuples of ordered pairs."""
    if n % 2:
        return
    if n == 0:
        yield ()
        return

    def rec(items):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for k in range(len(rest)):
            partner = rest[k]
            remaining = rest[:k] + rest[k + 1:]
            for tail in rec(remaining):
                yield ((first, partner),) + tail

    yield from rec(tuple(range(n)))


def pairing_count(n: int) -> int:
    """``(2m)! / (2^m m!)`` for ``n = 2m`` factors, 0 for odd ``n``."""
    if n % 2:
        return 0
    m = n // 2
    return int(round(np.exp(lgamma(2 * m + 1) - m * log(2) - lgamma(m + 1))))


def wick_moments(state: GaussianState, fs: Sequence) -> complex:
    """``omega(phi(f_1) ... phi(f_n))`` by Wick's theorem (sum over pairings)."""
    if not state.centered:
        raise ValueError("Wick's theorem here requires a centered state")
    fs = [np.atleast_1d(np.asarray(f, dtype=complex)) for f in fs]
    n = len(fs)
    if n % 2:
        return 0j
    tp = {}
    for i in range(n):
        for j in range(i + 1, n):
            tp[i, j] = two_point(state, fs[i], fs[j])
    total = 0j
    for p in pairings(n):
        term = 1 + 0j
        for i, j in p:
            term *= tp[i, j]
        total += term
    return complex(total)


# ---------------------------------------------------------------------------
# Heisenberg evolution of A ⊗ W(h) under H_R + lam G ⊗ phi(g)
# ---------------------------------------------------------------------------


def sinc_factor(omega, t: float) -> np.ndarray:
    """``(exp(i omega t) - 1) / (i omega)``, equal to ``t`` at ``omega = 0``."""
    w = np.asarray(omega, dtype=float)
    x = w * t
    out = np.empty(w.shape, dtype=complex)
    small = np.abs(x) < SERIES_CUTOFF
    big = ~small
    out[big] = np.expm1(1j * x[big]) / (1j * w[big])
    xs = x[small]
    # t * sum_k (i x)^k / (k+1)!, enough terms for |x| < 1e-4
    out[small] = t * (1 + 1j * xs / 2 - xs**2 / 6 - 1j * xs**3 / 24)
    return out


def polaron_kernel(omega, t: float) -> np.ndarray:
    """``(omega t - sin(omega t)) / omega^2``, tending to 0 at ``omega = 0``."""
    w = np.asarray(omega, dtype=float)
    x = w * t
    out = np.empty(w.shape, dtype=float)
    small = np.abs(x) < 1e-2
    big = ~small
    out[big] = (x[big] - np.sin(x[big])) / w[big] ** 2
    xs = x[small]
    ws = w[small]
    # t^2 * (x/6 - x^3/120 + x^5/5040) / x * ... written to stay finite at w = 0
    out[small] = t**3 * ws * (1 / 6 - xs**2 / 120 + xs**4 / 5040)
    return out


@dataclass(frozen=True)
class Lemma1Term:
    """One ``(l, r)`` block of the exact Heisenberg-evolved operator.

    The operator equals ``sum block ⊗ phase * W(argument)`` over all terms.
    """

    l: int
    r: int
    block: np.ndarray
    phase: complex
    argument: np.ndarray


def lemma1_evolve(
    dec: SpectralDecomposition,
    a,
    h,
    t: float,
    lam: float,
    r: ReservoirSpec,
) -> list[Lemma1Term]:
    """Exact form of ``e^{itK} (A ⊗ W(h)) e^{-itK}`` for ``K = H_R + lam G ⊗ phi(g)``.

    ``dec`` is the spectral decomposition of ``G``. Each ``(l, r)`` term has
    system block ``P_l A P_r``, Weyl argument
    ``lam (gamma_l - gamma_r) s g + e^{i omega t} h`` with
    ``s = (e^{i omega t} - 1)/(i omega)``, and the two scalar phases
    generated by the polaron shift and by the CCR product law. Zero-frequency
    modes use ``s = t``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    a = np.asarray(a, dtype=complex)
    h = np.zeros(r.modes, dtype=complex) if h is None else np.asarray(h, dtype=complex)
    if h.shape != (r.modes,):
        raise DimensionMismatchError("h must have one entry per mode")
    w, g = r.frequencies, r.couplings
    s = sinc_factor(w, t)
    rot = np.exp(1j * w * t)
    shift = float(np.sum(np.abs(g) ** 2 * polaron_kernel(w, t)))
    cross = complex(np.sum(np.conj(g) * h * s))

    terms = []
    for l, (gl, pl) in enumerate(zip(dec.eigenvalues, dec.projections)):
        for k, (gr, pr) in enumerate(zip(dec.eigenvalues, dec.projections)):
            block = pl @ a @ pr
            if not np.any(np.abs(block) > 0):
                continue
            phase = np.exp(-0.5j * lam**2 * (gl**2 - gr**2) * shift) * np.exp(
                -0.5j * (lam * (gl + gr) * cross).imag
            )
            arg = lam * (gl - gr) * s * g + rot * h
            terms.append(Lemma1Term(l, k, block, complex(phase), arg))
    return _merge_identical(terms)


def _merge_identical(terms: list[Lemma1Term]) -> list[Lemma1Term]:
    # blocks sharing phase and Weyl argument (always the case at lam = 0 or
    # t = 0) are summed into one term
    merged: dict[tuple, Lemma1Term] = {}
    for term in terms:
        key = (term.phase, term.argument.tobytes())
        if key in merged:
            prev = merged[key]
            merged[key] = Lemma1Term(prev.l, prev.r, prev.block + term.block, prev.phase, prev.argument)
        else:
            merged[key] = term
    return list(merged.values())


def reassemble(terms: Sequence[Lemma1Term], r: ReservoirSpec) -> np.ndarray:
    """Truncated-Fock matrix of ``sum block ⊗ phase W(argument)``."""
    d = terms[0].block.shape[0]
    out = np.zeros((d * r.dim, d * r.dim), dtype=complex)
    for term in terms:
        out += np.kron(term.block, term.phase * weyl_operator(r, term.argument))
    return out


def expectation(terms: Sequence[Lemma1Term], rho_s, state: GaussianState) -> complex:
    """``tr(rho_S ⊗ omega_R)`` of a Lemma-1 decomposition."""
    rho_s = np.asarray(rho_s, dtype=complex)
    return complex(
        sum(np.trace(rho_s @ term.block) * term.phase * weyl_expectation(state, term.argument) for term in terms)
    )


def decay_argument(gamma_l: float, gamma_r: float, t: float, lam: float, r: ReservoirSpec, h=None) -> np.ndarray:
    arg = lam * (gamma_l - gamma_r) * sinc_factor(r.frequencies, t) * r.couplings
    if h is not None:
        arg = arg + np.exp(1j * r.frequencies * t) * np.asarray(h, dtype=complex)
    return arg


def lemma2_decay_magnitude(
    dec: SpectralDecomposition,
    l: int,
    r: int,
    t: float,
    lam: float,
    r_spec: ReservoirSpec,
    state: GaussianState,
    h=None,
) -> float:
    """``|omega(W(argument))|`` for the ``(l, r)`` block: ``exp(-<F, C F>/4)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    st = state.on_modes(r_spec.frequencies)
    f = decay_argument(dec.eigenvalues[l], dec.eigenvalues[r], t, lam, r_spec, h)
    return float(np.exp(-0.25 * st.quadratic_form(f).real))


# ---------------------------------------------------------------------------
# continuum integrals
# ---------------------------------------------------------------------------


def _thermal_density(density: SpectralDensity, beta: float) -> Callable[[np.ndarray], np.ndarray]:
    """``omega -> J(omega) coth(beta omega / 2)`` with the finite limit at 0."""

    def f(w):
        w = np.maximum(np.asarray(w, dtype=float), 1e-300)
        return density(w) * coth_weight(beta, w)

    return f


def infrared_check(density: SpectralDensity, beta: float) -> float:
    """Local power-law exponent of ``J(omega) coth(beta omega/2)`` near zero.

    Raises ``InfraredDivergenceError`` when it is not safely above -1, in
    which case the decoherence exponent diverges.
    """
    f = _thermal_density(density, beta)
    w1, w2 = 1e-6 * density.cutoff, 1e-8 * density.cutoff
    f1, f2 = float(f(w1)), float(f(w2))
    if f1 == 0 and f2 == 0:
        return np.inf
    if f1 <= 0 or f2 <= 0:
        return np.inf
    p = log(f1 / f2) / log(w1 / w2)
    if p < -1 + IR_MARGIN:
        raise InfraredDivergenceError(
            f"J(w) coth(beta w/2) ~ w^{p:.3f} near 0; decoherence integral diverges"
        )
    return p


def _quad(fun, upper: float) -> float:
    val, _ = integrate.quad(fun, 0.0, upper, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=1000)
    return float(val)


def decoherence_exponent(beta: float, density: SpectralDensity, t: float) -> float:
    """``int J(w) coth(beta w/2) sin^2(w t/2) / w^2 dw`` by adaptive quadrature."""
    if t == 0:
        return 0.0
    infrared_check(density, beta)
    jc = _thermal_density(density, beta)

    def integrand(w):
        # sin^2(wt/2)/w^2 = (t/2)^2 sinc^2(wt/2pi)
        return float(jc(w)) * (0.5 * t) ** 2 * np.sinc(w * t / (2 * np.pi)) ** 2

    upper = density.upper
    if np.isinf(upper):
        # split at a few cutoffs so the oscillatory head is resolved before
        # handing the exponential tail to the infinite-range rule
        knee = 40.0 * density.cutoff
        head = _quad(integrand, knee)
        tail, _ = integrate.quad(integrand, knee, np.inf, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=1000)
        return head + float(tail)
    return _quad(integrand, upper)


def decoherence_function(beta: float, strength: float, density: SpectralDensity, t: float) -> complex:
    """Pure-dephasing decoherence function of a stationary thermal reservoir.

    ``D(t) = exp(-strength^2 int J coth(beta w/2) sin^2(wt/2)/w^2 dw)`` where
    ``strength`` is the coupling times the eigenvalue gap entering the Weyl
    argument. Real and in ``(0, 1]`` for thermal states.
    """
    if not beta > 0:
        raise ValueError("beta must be positive or inf")
    if t < 0:
        raise ValueError("t must be non-negative")
    return complex(np.exp(-strength**2 * decoherence_exponent(beta, density, t)))


def decoherence_discrete(state: GaussianState, strength: float, r: ReservoirSpec, t: float) -> complex:
    """``omega(W(strength * s * g))`` on the discrete modes of ``r``."""
    st = state.on_modes(r.frequencies)
    return weyl_expectation(st, strength * sinc_factor(r.frequencies, t) * r.couplings)


def polaron_shift(density: SpectralDensity, t: float) -> float:
    """``int J(w) (w t - sin w t) / w^2 dw``."""
    if t == 0:
        return 0.0

    def integrand(w):
        return float(density(w) * polaron_kernel(np.array([w]), t)[0])

    upper = density.upper
    if np.isinf(upper):
        knee = 40.0 * density.cutoff
        tail, _ = integrate.quad(integrand, knee, np.inf, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=1000)
        return _quad(integrand, knee) + float(tail)
    return _quad(integrand, upper)


# ---------------------------------------------------------------------------
# pure dephasing: [H_S, G] = 0
# ---------------------------------------------------------------------------


def joint_eigenbasis(h_s, dec: SpectralDecomposition):
    """Orthonormal basis diagonalizing both ``H_S`` and ``G``.

    Returns ``(vectors, energies, sector)``: columns of ``vectors`` are the
    basis, ``energies[a]`` the ``H_S`` eigenvalue and ``sector[a]`` the index
    ``l`` of the ``G`` eigenvalue of basis vector ``a``.
    """
    cols, energies, sector = [], [], []
    for l, p in enumerate(dec.projections):
        pe, pv = np.linalg.eigh(p)
        v = pv[:, pe > 0.5]
        he, hv = np.linalg.eigh(v.conj().T @ h_s @ v)
        cols.append(v @ hv)
        energies.extend(he)
        sector.extend([l] * len(he))
    return np.hstack(cols), np.array(energies), np.array(sector)


def coherence_factors(dec: SpectralDecomposition, t: float, lam: float, reservoir, state: GaussianState) -> np.ndarray:
    """Multiplier of the ``(row sector, column sector)`` block of ``rho_S``.

    For a matrix element between sectors ``l`` (row) and ``r`` (column) it is
    ``omega_R(e^{itK_r} e^{-itK_l})`` with ``K_l = H_R + lam gamma_l phi(g)``:
    the Lemma-1 coefficient of the block ``(r, l)`` at ``A = |b><a|``.
    ``reservoir`` is a ``ReservoirSpec`` (discrete modes) or a
    ``SpectralDensity`` (continuum; requires a stationary centered state).
    """
    gam = dec.eigenvalues
    nu = len(gam)
    out = np.ones((nu, nu), dtype=complex)
    if isinstance(reservoir, SpectralDensity):
        if not state.centered:
            raise ValueError("continuum dephasing supports centered states only")
        shift = polaron_shift(reservoir, t)
        expo = decoherence_exponent(state.beta, reservoir, t)
        for l in range(nu):
            for k in range(nu):
                col, row = gam[k], gam[l]
                phase = np.exp(-0.5j * lam**2 * (col**2 - row**2) * shift)
                out[l, k] = phase * np.exp(-(lam * (col - row)) ** 2 * expo)
        return out

    st = state.on_modes(reservoir.frequencies)
    w, g = reservoir.frequencies, reservoir.couplings
    shift = float(np.sum(np.abs(g) ** 2 * polaron_kernel(w, t)))
    s = sinc_factor(w, t)
    for l in range(nu):
        for k in range(nu):
            col, row = gam[k], gam[l]
            phase = np.exp(-0.5j * lam**2 * (col**2 - row**2) * shift)
            out[l, k] = phase * weyl_expectation(st, lam * (col - row) * s * g)
    return out


def dephasing_reduced_state(
    sys: SystemSpec,
    reservoir,
    lam: float,
    t: float,
    state: GaussianState,
    rho_s,
    commute_tol: float = 1e-12,
) -> np.ndarray:
    """Exact reduced system state when ``[H_S, G] = 0``.

    Populations in the joint eigenbasis are constant; each coherence picks up
    the free phase ``exp(-it(E_a - E_b))`` and the reservoir factor from
    ``coherence_factors``.
    """
    h, g = sys.hamiltonian, sys.coupling
    if np.max(np.abs(h @ g - g @ h)) > commute_tol:
        raise NonCommutingError("H_S and G do not commute")
    if t < 0:
        raise ValueError("t must be non-negative")
    rho_s = np.asarray(rho_s, dtype=complex)
    dec = spectral_decompose(g)
    v, e, sector = joint_eigenbasis(h, dec)
    factors = coherence_factors(dec, t, lam, reservoir, state)
    rho = v.conj().T @ rho_s @ v
    free = np.exp(-1j * t * (e[:, None] - e[None, :]))
    rho_t = rho * free * factors[np.ix_(sector, sector)]
    return v @ rho_t @ v.conj().T


# ---------------------------------------------------------------------------
# regularity of quasifree states
# ---------------------------------------------------------------------------


def two_point_bound(state: GaussianState, g, frequencies, t: float, samples: int = 201) -> float:
    """``C_p``: bound on ``|omega(phi(e^{iws1} g) phi(e^{iws2} g))|`` for ``s1, s2 in [0, t]``.

    Uses Cauchy-Schwarz, ``|omega(phi(f)phi(h))|^2 <= omega(phi(f)^2) omega(phi(h)^2)``
    with ``omega(phi(f)^2) = <f, C f>/2``, maximized over a time grid (exact
    for stationary states, where it does not depend on time).
    """
    st = state.on_modes(frequencies)
    w = np.asarray(frequencies, dtype=float)
    g = np.asarray(g, dtype=complex)
    if st.stationary:
        return 0.5 * st.quadratic_form(g).real
    return max(0.5 * st.quadratic_form(np.exp(1j * w * s) * g).real for s in np.linspace(0, t, samples))


def _log_wick_bound(m: int, cp: float) -> float:
    return lgamma(2 * m + 1) - m * log(2) - lgamma(m + 1) + m * log(cp)


def _log_regularity_bound(n: int, cp: float) -> float:
    if n == 0:
        return 0.0
    if n == 1 or cp == 0:
        return -np.inf
    return max(_log_wick_bound(m, cp) for m in range(1, n // 2 + 1))


def regularity_bound(state: GaussianState, g, frequencies, t: float, n: int) -> float:
    """``B_n``: bound on products of ``j = 1..n`` time-translated fields ``phi(e^{iws} g)``.

    Odd moments vanish and a ``2m``-point moment is at most the number of
    pairings times ``C_p^m``, so ``B_n`` is the largest such bound over
    ``2 <= 2m <= n``. ``B_0 = 1`` (the empty product) and ``B_1 = 0``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    cp = two_point_bound(state, g, frequencies, t)
    return float(np.exp(_log_regularity_bound(n, cp)))


@dataclass(frozen=True)
class SeriesCheck:
    converges: bool
    partial_sum: float
    final_ratio: float
    terms: int


def regularity_series(
    state: GaussianState, g, frequencies, t: float, alpha: float, terms: int = 400
) -> SeriesCheck:
    """Ratio test for ``sum_n alpha^n B_n / n!``.

    Works with even-index terms (``B_n`` is constant on ``{2m, 2m+1}`` for
    ``m >= 1``); the series converges when the ratios ``a_{2m+2}/a_{2m}``
    end below 1 and decreasing.
    """
    cp = two_point_bound(state, g, frequencies, t)
    logs = np.array(
        [n * log(alpha) + _log_regularity_bound(n, cp) - lgamma(n + 1) for n in range(terms)]
    )
    if cp == 0:
        return SeriesCheck(True, 1.0, 0.0, terms)
    even = logs[2::2]
    log_ratios = np.diff(even)
    tail = log_ratios[-10:]
    converges = bool(np.all(tail < 0) and np.all(np.diff(tail) <= 1e-12))
    peak = logs.max()
    partial = float(np.exp(peak) * np.sum(np.exp(logs - peak)))
    return SeriesCheck(converges, partial, float(np.exp(log_ratios[-1])), terms)
