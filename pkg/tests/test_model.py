import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from zenolimit.linalg import DimensionMismatchError, expm_i_hermitian, kron
from zenolimit.model import (
    CLUSTER_TOL,
    SIGMA_X,
    SIGMA_Z,
    CompositeCoupling,
    ReservoirSpec,
    SpectralDensity,
    SystemSpec,
    annihilation,
    assemble_hamiltonian,
    bell_state,
    composite_coupling,
    discretize_reservoir,
    field_operator,
    flip_flop_coupling,
    ket,
    measure,
    min_gap,
    mode_operator,
    project_coupling,
    projector,
    reservoir_hamiltonian,
    spectral_decompose,
    zeno_hamiltonian,
)

from conftest import random_density, random_hermitian


# --- discretization ---------------------------------------------------------


def test_flat_single_mode_is_midpoint():
    r = discretize_reservoir(SpectralDensity("flat", 1.0, 1.0), 1, 1)
    assert np.allclose(r.frequencies, [0.5])
    assert np.allclose(np.abs(r.couplings) ** 2, [1.0])


@pytest.mark.parametrize("m", [16, 32])
def test_total_coupling_converges_to_integral(m):
    dens = SpectralDensity("ohmic", 1.0, 1.0, 1.0)
    lo, hi = dens.window
    oracle, _ = integrate.quad(dens, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=500)
    r = discretize_reservoir(dens, m, 1)
    assert abs(np.sum(np.abs(r.couplings) ** 2) - oracle) < 1e-8


@pytest.mark.parametrize("beta", [np.inf, 1.0])
def test_discrete_decoherence_exponent_matches_trapezoid(beta):
    dens = SpectralDensity("ohmic", 1.0, 1.0, 1.0)
    t = 2.0
    r = discretize_reservoir(dens, 64, 1)
    w, g2 = r.frequencies, np.abs(r.couplings) ** 2
    weight = np.ones_like(w) if np.isinf(beta) else 1 / np.tanh(beta * w / 2)
    discrete = np.sum(g2 * weight * np.sin(w * t / 2) ** 2 / w**2)

    grid = np.linspace(0, dens.window[1], 400_001)[1:]
    wt = np.ones_like(grid) if np.isinf(beta) else 1 / np.tanh(beta * grid / 2)
    vals = grid * np.exp(-grid) * wt * np.sin(grid * t / 2) ** 2 / grid**2
    # integrand limit at w = 0: (t/2)^2 * lim w coth(beta w/2) = (t/2)^2 * 2/beta
    f0 = 0.0 if np.isinf(beta) else (t / 2) ** 2 * 2 / beta
    h = grid[1] - grid[0]
    trap = h * (0.5 * f0 + np.sum(vals[:-1]) + 0.5 * vals[-1])
    assert abs(discrete - trap) / trap < 1e-6


def test_spectral_density_validation():
    with pytest.raises(ValueError):
        SpectralDensity("ohmic", 1.0, -1.0)
    with pytest.raises(ValueError):
        SpectralDensity("lorentz", 1.0, 1.0)
    with pytest.raises(ValueError):
        SpectralDensity("ohmic", 1.0, 1.0, exponent=-2.0)


def test_discretization_is_deterministic():
    dens = SpectralDensity("ohmic", 0.3, 2.0, 0.5)
    a, b = discretize_reservoir(dens, 7, 2), discretize_reservoir(dens, 7, 2)
    assert np.array_equal(a.frequencies, b.frequencies)
    assert np.array_equal(a.couplings, b.couplings)


# --- field operator and Hamiltonian -----------------------------------------


def test_field_operator_zero_coeffs():
    r = ReservoirSpec([1.0, 2.0], [0.0, 0.0], 2)
    assert not np.any(field_operator(r))


def test_field_operator_two_level():
    r = ReservoirSpec([1.0], [1.0], 1)
    assert np.allclose(field_operator(r), SIGMA_X / np.sqrt(2))


def test_ladder_commutator_below_top_level():
    r = ReservoirSpec([1.0, 0.5], [1.0, 1.0], (5, 4))
    for j, n in enumerate(r.n_max):
        a = annihilation(n)
        comm = a @ a.conj().T - a.conj().T @ a
        assert np.max(np.abs(comm[:n, :n] - np.eye(n))) < 1e-14
        # embedded version: identity on every basis state whose mode-j level is below the top
        big = mode_operator(r, j, a)
        c = big @ big.conj().T - big.conj().T @ big
        levels = np.indices(r.mode_dims).reshape(r.modes, -1)[j]
        keep = levels < n
        assert np.max(np.abs(c[np.ix_(keep, keep)] - np.eye(keep.sum()))) < 1e-14


def test_reservoir_hamiltonian_diagonal():
    r = ReservoirSpec([1.0, 0.25], [0.0, 0.0], (1, 2))
    # basis order |n1 n2>: (0,0),(0,1),(0,2),(1,0),(1,1),(1,2)
    assert np.allclose(np.diag(reservoir_hamiltonian(r)).real, [0, 0.25, 0.5, 1, 1.25, 1.5])


def test_hamiltonian_lambda_zero():
    hs = np.array([[0.3, 0.1], [0.1, -0.2]])
    r = ReservoirSpec([0.7, 1.1], [0.4, 0.2], 2)
    h = assemble_hamiltonian(SystemSpec(hs, SIGMA_Z), r, 0.0)
    assert np.array_equal(h, np.kron(hs, np.eye(r.dim)) + np.kron(np.eye(2), reservoir_hamiltonian(r)))


def test_hamiltonian_commutes_with_coupling_in_dephasing_case():
    r = ReservoirSpec([0.7, 1.1], [0.4, 0.2 + 0.1j], 3)
    h = assemble_hamiltonian(SystemSpec(0.5 * SIGMA_Z, SIGMA_Z), r, 1.3)
    gz = np.kron(SIGMA_Z, np.eye(r.dim))
    assert np.max(np.abs(h @ gz - gz @ h)) < 1e-12


def test_hamiltonian_hand_assembled():
    hs = np.array([[0.3, 0.1 - 0.05j], [0.1 + 0.05j, -0.2]])
    gop = np.array([[1.0, 0.0], [0.0, -0.5]])
    w, g, lam = 0.7, 0.4 - 0.3j, 1.0
    h = assemble_hamiltonian(SystemSpec(hs, gop), ReservoirSpec([w], [g], 2), lam)
    oracle = np.zeros((6, 6), dtype=complex)
    for s in range(2):
        for n in range(3):
            for s2 in range(2):
                for n2 in range(3):
                    v = 0j
                    if n == n2:
                        v += hs[s, s2]
                        if s == s2:
                            v += w * n
                    # <n| g a^+ + conj(g) a |n2>
                    amp = 0j
                    if n == n2 + 1:
                        amp += g * np.sqrt(n2 + 1)
                    if n == n2 - 1:
                        amp += np.conj(g) * np.sqrt(n2)
                    v += lam * gop[s, s2] * amp / np.sqrt(2)
                    oracle[3 * s + n, 3 * s2 + n2] = v
    assert np.max(np.abs(h - oracle)) < 1e-15


# --- spectral decomposition --------------------------------------------------


def check_decomposition(dec, dim):
    total = sum(dec.projections)
    assert np.max(np.abs(total - np.eye(dim))) < 1e-10
    for i, p in enumerate(dec.projections):
        for j, q in enumerate(dec.projections):
            target = p if i == j else np.zeros_like(p)
            assert np.max(np.abs(p @ q - target)) < 1e-10
    assert np.all(np.diff(dec.eigenvalues) > CLUSTER_TOL)


def test_decompose_sigma_z():
    dec = spectral_decompose(SIGMA_Z)
    assert np.allclose(dec.eigenvalues, [-1, 1])
    assert dec.ranks == (1, 1)
    check_decomposition(dec, 2)


def test_decompose_flip_flop_coupling():
    dec = spectral_decompose(flip_flop_coupling())
    assert np.allclose(dec.eigenvalues, [-1, 0, 1], atol=1e-12)
    assert dec.ranks == (1, 2, 1)
    p0 = projector(bell_state("psi+")) + projector(bell_state("psi-"))
    assert np.allclose(dec.projections[1], p0, atol=1e-12)
    assert np.allclose(dec.projections[2], projector(bell_state("phi+")), atol=1e-12)
    assert np.allclose(dec.projections[0], projector(bell_state("phi-")), atol=1e-12)
    check_decomposition(dec, 4)


def test_decompose_clusters_near_degeneracy():
    eps = 1e-11
    dec = spectral_decompose(np.diag([1.0, 1.0 + eps, 2.0]))
    assert dec.ranks == (2, 1)
    assert np.allclose(dec.eigenvalues, [1.0 + eps / 2, 2.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_decomposition_complete_and_orthogonal(seed, n):
    rng = np.random.default_rng(seed)
    g = random_hermitian(rng, n)
    dec = spectral_decompose(g)
    check_decomposition(dec, n)
    assert np.max(np.abs(dec.operator() - g)) < 1e-10


# --- Zeno Hamiltonian and measurement ---------------------------------------


def test_zeno_single_projection_is_identity_map(rng):
    hs = random_hermitian(rng, 3)
    dec = spectral_decompose(np.eye(3))
    assert np.allclose(zeno_hamiltonian(hs, dec), hs)


def test_zeno_rank_one_standard_basis_is_diagonal(rng):
    hs = random_hermitian(rng, 4)
    dec = spectral_decompose(np.diag([0.0, 1.0, 2.0, 3.0]))
    assert np.allclose(zeno_hamiltonian(hs, dec), np.diag(np.diag(hs)), atol=1e-14)


def test_zeno_sigma_z_off_diagonal_vanishes(rng):
    hs = random_hermitian(rng, 2)
    hz = zeno_hamiltonian(hs, spectral_decompose(SIGMA_Z))
    assert abs(hz[0, 1]) < 1e-14 and abs(hz[1, 0]) < 1e-14
    assert np.allclose(np.diag(hz), np.diag(hs), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_zeno_commutes_with_projections(seed):
    rng = np.random.default_rng(seed)
    # degenerate coupling: two random projections of rank 2 and 1
    u = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
    g = u @ np.diag([1.0, 1.0, -2.0]) @ u.conj().T
    dec = spectral_decompose(g)
    hz = zeno_hamiltonian(random_hermitian(rng, 3), dec)
    for p in dec.projections:
        assert np.max(np.abs(hz @ p - p @ hz)) < 1e-12


def test_zeno_equals_hs_when_commuting(rng):
    hs = np.diag([0.3, -1.2, 0.8])
    dec = spectral_decompose(np.diag([1.0, 1.0, 2.0]))
    assert np.max(np.abs(zeno_hamiltonian(hs, dec) - hs)) < 1e-14


def test_measure_idempotent(rng):
    dec = spectral_decompose(random_hermitian(rng, 4))
    rho = random_density(rng, 4)
    once = measure(rho, dec)
    assert np.max(np.abs(measure(once, dec) - once)) < 1e-13


def test_measure_leaves_bell_state_invariant():
    rho = projector(bell_state("phi+"))
    assert np.allclose(measure(rho, spectral_decompose(flip_flop_coupling())), rho, atol=1e-13)


def test_measure_product_basis_sandwich(rng):
    rho = random_density(rng, 4)
    g = kron(np.diag([1.0, -1.0]), np.eye(2)) + kron(np.eye(2), np.diag([0.3, -0.3]))
    out = measure(rho, spectral_decompose(g))
    # oracle: explicit rank-one product projections |ab><ab|
    oracle = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for b in range(2):
            p = projector(ket(a, b))
            oracle += p @ rho @ p
    assert np.max(np.abs(out - oracle)) < 1e-13
    assert np.allclose(out, np.diag(np.diag(rho)), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 5.0))
def test_measure_commutes_with_zeno_unitary(seed, t):
    rng = np.random.default_rng(seed)
    u = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
    dec = spectral_decompose(u @ np.diag([0.0, 0.0, 1.0, 2.0]) @ u.conj().T)
    rho = random_density(rng, 4)
    uz = expm_i_hermitian(zeno_hamiltonian(random_hermitian(rng, 4), dec), t)
    lhs = uz @ measure(rho, dec) @ uz.conj().T
    rhs = measure(uz @ rho @ uz.conj().T, dec)
    assert np.max(np.abs(lhs - rhs)) < 1e-11
    m = measure(rho, dec)
    assert abs(np.trace(m) - 1) < 1e-12
    assert np.linalg.eigvalsh(m)[0] > -1e-12


def test_measure_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatchError):
        measure(random_density(rng, 3), spectral_decompose(SIGMA_Z))


# --- composite couplings -----------------------------------------------------


def test_sum_of_sigma_z():
    g = composite_coupling(CompositeCoupling((SIGMA_Z, SIGMA_Z), "sum"))
    assert np.allclose(np.sort(np.linalg.eigvalsh(g)), [-2, 0, 0, 2])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_product_of_sigma_x_degeneracy(n):
    dec = spectral_decompose(composite_coupling(CompositeCoupling((SIGMA_X,) * n, "product")))
    assert np.allclose(dec.eigenvalues, [-1, 1])
    assert dec.ranks == (2 ** (n - 1),) * 2


def test_perturbed_sum_is_nondegenerate():
    c = CompositeCoupling((SIGMA_X, SIGMA_X), "sum", mu=0.1, seed=7)
    ev = np.linalg.eigvalsh(composite_coupling(c))
    assert min_gap(ev) > CLUSTER_TOL
    assert spectral_decompose(composite_coupling(c)).nondegenerate


def test_composite_spectrum_is_function_of_local_spectra():
    c = CompositeCoupling((SIGMA_X, SIGMA_X, SIGMA_X), "sum", mu=0.2, seed=3)
    local = [np.linalg.eigvalsh(g) for g in c.local_operators()]
    expected = sorted(a + b + d for a in local[0] for b in local[1] for d in local[2])
    assert np.allclose(np.linalg.eigvalsh(composite_coupling(c)), expected)
    p = CompositeCoupling((SIGMA_X, SIGMA_Z), "product", mu=0.3, seed=3)
    local = [np.linalg.eigvalsh(g) for g in p.local_operators()]
    assert np.allclose(np.linalg.eigvalsh(composite_coupling(p)), sorted(a * b for a in local[0] for b in local[1]))


def test_perturbation_is_seed_deterministic():
    a = CompositeCoupling((SIGMA_X, SIGMA_X), "sum", mu=0.1, seed=11)
    b = CompositeCoupling((SIGMA_X, SIGMA_X), "sum", mu=0.1, seed=11)
    assert np.array_equal(composite_coupling(a), composite_coupling(b))


def test_unsupported_combiner():
    with pytest.raises(ValueError):
        composite_coupling(CompositeCoupling((SIGMA_X, SIGMA_X), "max"))


def test_projected_coupling_commutes(rng):
    g2 = kron(SIGMA_Z, np.eye(2)) + kron(np.eye(2), SIGMA_Z)
    dec = spectral_decompose(g2)
    for _ in range(20):
        g1p = project_coupling(random_hermitian(rng, 4), dec)
        assert np.max(np.abs(g1p @ g2 - g2 @ g1p)) < 1e-12


def test_system_spec_validation():
    with pytest.raises(DimensionMismatchError):
        SystemSpec(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        SystemSpec(np.array([[0, 1], [0, 0]]), np.eye(2))
