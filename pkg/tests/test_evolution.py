import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vanhove.evolution import (
    EvolutionContext,
    PreconditionError,
    amplitude_bound_check,
    closed_form_amplitude,
    dressed_amplitude,
    evolve_state,
    heisenberg_amplitude,
    initial_amplitude,
)
from vanhove.fock import basis_state, build_basis, build_grid, mode_creator, random_state, single_mode_grid, vacuum
from vanhove.model import (
    Dispersion,
    build_hamiltonian,
    coherent_amplitudes,
    dressing_operator,
    gaussian_source,
    tabulated_source,
)

TIMES = (0.0, 0.7, 1.4)


def single_mode(lam, N, A=1.0):
    grid = single_mode_grid()
    src = tabulated_source(np.array([[0.0]]), np.array([A]), lam=lam)
    return build_hamiltonian(grid, build_basis(1, N), Dispersion.massive(1.0), src)


def three_mode(lam, N, A=1.0):
    grid = build_grid(1, 3, 1.5, keep_origin=True)
    return build_hamiltonian(grid, build_basis(3, N), Dispersion.massive(1.0), gaussian_source(A, 1.0, lam, 1))


def plus_state(basis, j=0):
    v = vacuum(basis)
    return (v + mode_creator(basis, j) @ v) * (1 / math.sqrt(2))


# --------------------------------------------------------------------------
# state evolution
# --------------------------------------------------------------------------


def test_zero_time_is_identity():
    ctx = EvolutionContext(three_mode(0.3, 3))
    psi = random_state(ctx.basis, np.random.default_rng(0))
    assert evolve_state(ctx, psi, 0.0) is psi


def test_free_one_particle_phase():
    ham = three_mode(0.0, 3)
    ctx = EvolutionContext(ham)
    for j in range(3):
        psi = basis_state(ctx.basis, tuple(int(i == j) for i in range(3)))
        out = ctx.evolve(psi, 1.1)
        assert np.allclose(out.amplitudes, np.exp(-1.1j * ham.omega[j]) * psi.amplitudes, atol=1e-14)


def test_energy_conservation_and_unitarity():
    ham = three_mode(0.5, 4)
    ctx = EvolutionContext(ham)
    psi = random_state(ctx.basis, np.random.default_rng(1))
    e0 = psi.inner(ham.H @ psi).real
    for t in (0.3, 1.0, 5.0):
        psi_t = ctx.evolve(psi, t)
        assert abs(psi_t.inner(ham.H @ psi_t).real - e0) < 1e-10
        assert abs(psi_t.norm() - 1.0) < 1e-12


@settings(max_examples=15, deadline=None)
@given(s=st.floats(-3, 3), t=st.floats(-3, 3))
def test_group_law(s, t):
    ctx = EvolutionContext(three_mode(0.4, 3))
    psi = random_state(ctx.basis, np.random.default_rng(2))
    two = ctx.evolve(ctx.evolve(psi, s), t)
    one = ctx.evolve(psi, s + t)
    assert np.linalg.norm(two.amplitudes - one.amplitudes) < 1e-10


def test_krylov_evolution_matches_dense():
    ham = three_mode(0.4, 4)
    dense, lazy = EvolutionContext(ham), EvolutionContext(ham, dense_threshold=5)
    assert dense.dense and not lazy.dense
    assert dense.reconstruction_error() < 1e-13
    psi = random_state(ham.basis, np.random.default_rng(3))
    for t in (0.5, 2.0):
        assert np.linalg.norm(dense.evolve(psi, t).amplitudes - lazy.evolve(psi, t).amplitudes) < 1e-10


# --------------------------------------------------------------------------
# amplitudes
# --------------------------------------------------------------------------


def test_free_vacuum_amplitude_vanishes():
    ctx = EvolutionContext(three_mode(0.0, 3))
    v = vacuum(ctx.basis)
    assert np.all(heisenberg_amplitude(ctx, v, v, 0.9).values == 0)


def test_initial_amplitude_examples():
    grid = build_grid(1, 4, 2.0)
    b = build_basis(4, 2)
    v = vacuum(b)
    assert np.all(initial_amplitude(grid, v, v).values == 0)
    one = mode_creator(b, 2) @ v
    F0 = initial_amplitude(grid, v, one).values
    expected = np.zeros(4)
    expected[2] = 1 / math.sqrt(grid.weights[2])
    assert np.allclose(F0, expected, atol=1e-15)


def test_coherent_initial_amplitude():
    ham = three_mode(0.1, 12, A=10.0)
    U = dressing_operator(ham)
    s = U @ vacuum(ham.basis)
    F0 = initial_amplitude(ham.grid, s, s).values
    alpha = coherent_amplitudes(ham)
    assert np.max(np.abs(F0 - alpha / np.sqrt(ham.grid.weights))) < 1e-8


def test_free_heisenberg_covariance():
    ham = three_mode(0.0, 3)
    ctx = EvolutionContext(ham)
    s = plus_state(ctx.basis, 1)
    F0 = heisenberg_amplitude(ctx, s, s, 0.0).values
    for t in (0.4, 1.7):
        Ft = heisenberg_amplitude(ctx, s, s, t).values
        assert np.max(np.abs(Ft - np.exp(-1j * t * ham.omega) * F0)) < 1e-14


def test_swapped_conjugate_consistency():
    ham = three_mode(0.3, 4)
    ctx = EvolutionContext(ham)
    rng = np.random.default_rng(4)
    phi, psi = random_state(ctx.basis, rng), random_state(ctx.basis, rng)
    t = 0.8
    swapped = heisenberg_amplitude(ctx, psi, phi, t, second_derivative=False).values
    phi_t, psi_t = ctx.evolve(phi, t), ctx.evolve(psi, t)
    direct = np.array([phi_t.inner(mode_creator(ctx.basis, j) @ psi_t) for j in range(3)])
    assert np.max(np.abs(np.conj(swapped) - direct / np.sqrt(ham.grid.weights))) < 1e-15


def test_closed_form_free_is_rotation():
    ham = three_mode(0.0, 3)
    s = plus_state(ham.basis, 0)
    F0 = initial_amplitude(ham.grid, s, s)
    for t in TIMES:
        cf = closed_form_amplitude(ham.grid, ham.dispersion, ham.profile, F0, t)
        assert np.array_equal(cf.values, np.exp(-1j * t * ham.omega) * F0.values)


def test_closed_form_dressed_vacuum_is_static():
    ham = three_mode(0.2, 2)
    v = vacuum(ham.basis)
    F0 = initial_amplitude(ham.grid, v, v)
    expected = ham.profile.rho_hat_at(ham.grid.nodes) / (math.sqrt(2) * ham.omega**1.5)
    for t in (0.0, 0.5, 1.0):
        cf = closed_form_amplitude(ham.grid, ham.dispersion, ham.profile, F0, t)
        assert np.allclose(cf.values, expected, rtol=1e-15, atol=0)
        assert np.all(cf.d2t == 0)


def test_closed_form_needs_unit_overlap():
    ham = three_mode(0.2, 2)
    b = ham.basis
    F0 = initial_amplitude(ham.grid, vacuum(b), basis_state(b, (1, 0, 0)))
    with pytest.raises(PreconditionError):
        closed_form_amplitude(ham.grid, ham.dispersion, ham.profile, F0, 0.3)


def max_closed_form_error(ham, pair):
    ctx = EvolutionContext(ham)
    U = dressing_operator(ham)
    phi, psi = pair(ham.basis)
    F0 = initial_amplitude(ham.grid, phi, psi)
    return max(
        dressed_amplitude(ctx, U, phi, psi, t, second_derivative=False).max_distance(
            closed_form_amplitude(ham.grid, ham.dispersion, ham.profile, F0, t))
        for t in TIMES
    )


def test_single_mode_dressed_vacuum_matches_closed_form():
    err = max_closed_form_error(single_mode(0.1, 12), lambda b: (vacuum(b), vacuum(b)))
    assert err < 1e-8


def test_second_derivative_matches_closed_form():
    ham = single_mode(0.1, 14)
    ctx = EvolutionContext(ham)
    U = dressing_operator(ham)
    s = plus_state(ham.basis)
    F0 = initial_amplitude(ham.grid, s, s)
    for t in TIMES:
        num = dressed_amplitude(ctx, U, s, s, t)
        cf = closed_form_amplitude(ham.grid, ham.dispersion, ham.profile, F0, t)
        assert np.max(np.abs(num.d2t - cf.d2t)) < 1e-8


@pytest.mark.parametrize("fixture", [single_mode, three_mode])
def test_closed_form_error_decreases_with_cutoff(fixture):
    # a strong source keeps the truncation error above round-off across the ladder
    errs = [max_closed_form_error(fixture(0.1, N, A=10.0), lambda b: (plus_state(b), plus_state(b)))
            for N in (6, 8, 10, 12)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-6


def test_closed_form_error_grows_with_coupling():
    errs = [max_closed_form_error(single_mode(lam, 8), lambda b: (vacuum(b), vacuum(b))) for lam in (0.1, 0.3, 0.9)]
    assert all(b > a for a, b in zip(errs, errs[1:]))


# --------------------------------------------------------------------------
# amplitude bound
# --------------------------------------------------------------------------


def test_bound_free_vacuum():
    ctx = EvolutionContext(three_mode(0.0, 3))
    v = vacuum(ctx.basis)
    rep = amplitude_bound_check(ctx, heisenberg_amplitude(ctx, v, v, 0.5), v, v, 0.5)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.holds


def test_bound_random_trials():
    ham = build_hamiltonian(build_grid(3, 2, 1.0), build_basis(8, 3), Dispersion.massless(),
                            gaussian_source(1.0, 1.0, 0.5, 3))
    ctx = EvolutionContext(ham)
    rng = np.random.default_rng(5)
    for _ in range(50):
        phi, psi = random_state(ctx.basis, rng), random_state(ctx.basis, rng)
        for t in TIMES:
            amp = heisenberg_amplitude(ctx, phi, psi, t, second_derivative=False)
            assert amplitude_bound_check(ctx, amp, phi, psi, t).holds


def test_bound_homogeneous_in_phi():
    ctx = EvolutionContext(three_mode(0.3, 3))
    rng = np.random.default_rng(6)
    phi, psi = random_state(ctx.basis, rng), random_state(ctx.basis, rng)
    r1 = amplitude_bound_check(ctx, heisenberg_amplitude(ctx, phi, psi, 0.7), phi, psi, 0.7)
    r2 = amplitude_bound_check(ctx, heisenberg_amplitude(ctx, 2 * phi, psi, 0.7), 2 * phi, psi, 0.7)
    assert r2.lhs == pytest.approx(2 * r1.lhs, rel=1e-13)
    assert r2.rhs == pytest.approx(2 * r1.rhs, rel=1e-13)


def test_bound_rejects_mismatched_time():
    ctx = EvolutionContext(three_mode(0.3, 2))
    v = vacuum(ctx.basis)
    with pytest.raises(PreconditionError):
        amplitude_bound_check(ctx, heisenberg_amplitude(ctx, v, v, 0.5), v, v, 0.6)
