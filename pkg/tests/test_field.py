import math

import numpy as np
import pytest

from vanhove.evolution import (
    AmplitudeField,
    EvolutionContext,
    closed_form_amplitude,
    dressed_amplitude,
    initial_amplitude,
)
from vanhove.field import (
    bandlimited_source,
    classical_field,
    closed_form_sampler,
    default_points,
    fd_convergence,
    finite_difference_residual,
    grid_c_d,
    integrability_diagnostics,
    modewise_residual,
    numeric_sampler,
)
from vanhove.fock import (
    BasisMismatchError,
    build_basis,
    build_grid,
    mode_creator,
    random_state,
    vacuum,
)
from vanhove.model import (
    Dispersion,
    build_hamiltonian,
    dressing_operator,
    gaussian_source,
    neutral_gaussian_source,
    tabulated_source,
)

SQRT2PI = math.sqrt(2 * math.pi)


def plus_state(basis, j):
    v = vacuum(basis)
    return (v + mode_creator(basis, j) @ v) * (1 / math.sqrt(2))


def amplitudes(grid, disp, profile, phi, psi, t):
    a = closed_form_amplitude(grid, disp, profile, initial_amplitude(grid, phi, psi), t)
    b = closed_form_amplitude(grid, disp, profile, initial_amplitude(grid, psi, phi), t)
    return a, b


@pytest.fixture
def two_node():
    """Nodes at k = +-1/2 with unit weights, massless, rho_hat = c on both."""
    grid = build_grid(1, 2, 1.0)
    c = 0.3
    src = tabulated_source(np.array([-0.5, 0.5]), np.array([c, c]))
    return grid, Dispersion.massless(), src, c


def cube_fixture(profile=None):
    grid = build_grid(3, 3, 1.5)
    profile = profile or gaussian_source(1.0, 1.0, 0.05, 3)
    return grid, Dispersion.massless(), profile


# --------------------------------------------------------------------------
# synthesis
# --------------------------------------------------------------------------


def test_zero_amplitude_zero_field():
    grid = build_grid(2, 2, 1.0)
    F = AmplitudeField(0.0, grid, np.zeros(grid.size, dtype=complex))
    fs = classical_field(F, F, Dispersion.massless(), default_points(2))
    assert np.all(fs.values == 0)


def test_default_points():
    pts = default_points(3, sigma=2.0)
    assert pts.shape == (41, 3)
    assert pts[0, 0] == -4.0 and pts[-1, 0] == 4.0 and pts[20, 0] == 0.0
    assert np.all(pts[:, 1:] == 0)


def test_two_node_static_cosine(two_node):
    grid, disp, src, c = two_node
    b = build_basis(2, 1)
    v = vacuum(b)
    x = np.linspace(-3, 3, 13)
    for t in (0.0, 1.3):
        fs = classical_field(*amplitudes(grid, disp, src, v, v, t), disp, x)
        # each of the two nodes contributes c cos(x / 2) / omega^2
        assert np.allclose(fs.values, 2 * c * np.cos(x / 2) / 0.25 / SQRT2PI, rtol=1e-14, atol=1e-16)


def test_two_node_travelling_cosine(two_node):
    grid, disp, src, c = two_node
    b = build_basis(2, 1)
    up = int(np.flatnonzero(grid.nodes[:, 0] > 0)[0])
    s = plus_state(b, up)
    x = np.linspace(-3, 3, 13)
    for t in (0.0, 0.4, 2.2):
        fs = classical_field(*amplitudes(grid, disp, src, s, s, t), disp, x)
        static = 8 * c * np.cos(x / 2) / SQRT2PI
        # F_0 = 1/2 on the upper node and (2 omega)^{-1/2} = 1
        wave = np.cos(x / 2 - t / 2) / SQRT2PI
        assert np.allclose(fs.values, static + wave, rtol=1e-14, atol=1e-15)


def test_dressed_vacuum_coulomb_form():
    grid, disp, src = cube_fixture()
    v = vacuum(build_basis(grid.size, 1))
    pts = default_points(3)
    omega = disp(grid.nodes)
    expected = (np.exp(1j * pts @ grid.nodes.T) @ (grid.weights * src.rho_hat_at(grid.nodes) / omega**2)) / (
        (2 * math.pi) ** 1.5)
    fields = [classical_field(*amplitudes(grid, disp, src, v, v, t), disp, pts).values for t in (0.0, 0.5, 1.0)]
    scale = np.max(np.abs(fields[0]))
    assert np.max(np.abs(fields[0] - expected)) < 1e-14 * scale
    for f in fields[1:]:
        assert np.max(np.abs(f - fields[0])) <= 1e-12 * scale


def test_real_field_for_equal_pair():
    grid, disp, src = cube_fixture()
    b = build_basis(grid.size, 1)
    s = plus_state(b, 5)
    fs = classical_field(*amplitudes(grid, disp, src, s, s, 0.9), disp, default_points(3))
    assert np.max(np.abs(fs.values.imag)) <= 1e-10 * np.max(np.abs(fs.values))


def test_distinct_pair_gives_complex_field():
    grid, disp, src = cube_fixture()
    b = build_basis(grid.size, 1)
    v = vacuum(b)
    # unit overlap, different one-particle parts
    phi = v + mode_creator(b, 1) @ v
    psi = v + (mode_creator(b, 2) @ v) * 1j
    assert phi.inner(psi) == pytest.approx(1.0)
    pts = default_points(3)
    for t in (0.0, 0.7, 1.4):
        a, c = amplitudes(grid, disp, src, phi, psi, t)
        assert np.max(np.abs(classical_field(a, c, disp, pts).values.imag)) > 1e-3
        assert modewise_residual(a, c, disp, src, pts).relative < 1e-10


def test_mismatched_grids_rejected():
    g1, g2 = build_grid(1, 2, 1.0), build_grid(1, 2, 1.0)
    F1 = AmplitudeField(0.0, g1, np.zeros(2, dtype=complex))
    F2 = AmplitudeField(0.0, g2, np.zeros(2, dtype=complex))
    with pytest.raises(BasisMismatchError):
        classical_field(F1, F2, Dispersion.massless(), [0.0])


# --------------------------------------------------------------------------
# band-limited source
# --------------------------------------------------------------------------


def test_bandlimited_free():
    grid = build_grid(1, 8, 4.0)
    assert np.all(bandlimited_source(gaussian_source(1.0, 1.0, 0.0, 1), grid, [0.0, 1.0]) == 0)


def test_bandlimited_converges_to_gaussian():
    src = gaussian_source(1.0, 1.0, 1.0, d=1)
    rho0 = src.rho_at(np.zeros((1, 1)))[0]
    errs = []
    for K, n in [(1, 4), (2, 8), (4, 16), (8, 64)]:
        errs.append(abs(bandlimited_source(src, build_grid(1, n, float(K)), [0.0])[0] - rho0) / rho0)
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_bandlimited_even_source_is_even():
    grid = build_grid(2, 6, 3.0)
    src = gaussian_source(1.0, 0.8, 1.0, d=2)
    x = np.random.default_rng(0).uniform(-2, 2, size=(10, 2))
    assert np.allclose(bandlimited_source(src, grid, x), bandlimited_source(src, grid, -x), rtol=1e-13, atol=1e-16)


# --------------------------------------------------------------------------
# mode-wise residual
# --------------------------------------------------------------------------


@pytest.mark.parametrize("profile", [gaussian_source(1.0, 1.0, 0.05, 3), neutral_gaussian_source(1.0, 1.0, 0.05, 3)])
def test_modewise_residual_massless_cube(profile):
    grid, disp, src = cube_fixture(profile)
    b = build_basis(grid.size, 1)
    pts = default_points(3)
    for pair in [(vacuum(b), vacuum(b)), (plus_state(b, 4), plus_state(b, 4))]:
        for t in (0.0, 0.7, 1.4):
            rep = modewise_residual(*amplitudes(grid, disp, src, *pair, t), disp, src, pts)
            assert rep.relative < 1e-10
            assert rep.tag == "closed-form"


def test_modewise_residual_massive_d1():
    grid = build_grid(1, 16, 6.0, keep_origin=True)
    disp = Dispersion.massive(1.0)
    src = gaussian_source(1.0, 1.0, 0.1, 1)
    b = build_basis(grid.size, 1)
    s = plus_state(b, 3)
    for t in (0.0, 0.7, 1.4):
        rep = modewise_residual(*amplitudes(grid, disp, src, s, s, t), disp, src, default_points(1))
        assert rep.relative < 1e-10


def test_free_field_solves_homogeneous_equation():
    grid = build_grid(1, 6, 3.0)
    disp = Dispersion.massive(2.0)
    src = gaussian_source(1.0, 1.0, 0.0, 1)
    b = build_basis(grid.size, 2)
    rng = np.random.default_rng(1)
    phi = random_state(b, rng)
    psi = phi
    rep = modewise_residual(*amplitudes(grid, disp, src, phi, psi, 0.6), disp, src, default_points(1))
    assert rep.relative < 1e-14


def test_modewise_residual_numeric_amplitudes():
    grid = build_grid(1, 3, 1.5, keep_origin=True)
    disp = Dispersion.massive(1.0)
    src = gaussian_source(1.0, 1.0, 0.1, 1)
    ham = build_hamiltonian(grid, build_basis(3, 10), disp, src)
    ctx = EvolutionContext(ham)
    U = dressing_operator(ham)
    v = vacuum(ham.basis)
    a = dressed_amplitude(ctx, U, v, v, 0.7)
    rep = modewise_residual(a, a, disp, src, default_points(1))
    assert rep.tag == "numeric-source"
    assert rep.relative < 1e-6


def test_modewise_needs_derivatives():
    grid = build_grid(1, 2, 1.0)
    F = AmplitudeField(0.0, grid, np.zeros(2, dtype=complex))
    with pytest.raises(ValueError):
        modewise_residual(F, F, Dispersion.massless(), gaussian_source(1.0, 1.0, 1.0, 1), [0.0])


# --------------------------------------------------------------------------
# finite differences
# --------------------------------------------------------------------------


def test_two_node_fd_error_matches_taylor_oracle(two_node):
    grid, disp, src, c = two_node
    b = build_basis(2, 1)
    up = int(np.flatnonzero(grid.nodes[:, 0] > 0)[0])
    s = plus_state(b, up)
    F0 = initial_amplitude(grid, s, s)
    sampler = closed_form_sampler(grid, disp, src, F0, F0)
    x = np.linspace(-3, 3, 7)
    S = 8 * c / SQRT2PI
    for h in (0.2, 0.1, 0.05):
        rep = finite_difference_residual(sampler, src, grid, x, 0.8, h, h)
        # the travelling part is annihilated exactly when h_t = h_x and omega = |k|;
        # the static part leaves (4/h^2) sin^2(h/4) - 1/4 times S cos(x/2)
        expected = S * np.cos(x / 2) * (4 / h**2 * math.sin(h / 4) ** 2 - 0.25)
        assert np.allclose(rep.residual, expected, rtol=1e-6, atol=1e-12)


def test_fd_static_dressed_vacuum_order():
    grid, disp, src = cube_fixture()
    v = vacuum(build_basis(grid.size, 1))
    F0 = initial_amplitude(grid, v, v)
    lad = fd_convergence(closed_form_sampler(grid, disp, src, F0, F0), src, grid, default_points(3), 0.7,
                         [0.1, 0.05, 0.025])
    assert all(1.8 <= p <= 2.2 for p in lad.orders)
    assert lad.monotone


def test_fd_halving_quarters_residual():
    grid, disp, src = cube_fixture()
    b = build_basis(grid.size, 1)
    s = plus_state(b, 7)
    F0 = initial_amplitude(grid, s, s)
    lad = fd_convergence(closed_form_sampler(grid, disp, src, F0, F0), src, grid, default_points(3), 1.4,
                         [0.1, 0.05, 0.025])
    ratios = [a / b for a, b in zip(lad.norms, lad.norms[1:])]
    assert all(r == pytest.approx(4.0, rel=0.05) for r in ratios)


def test_richardson_extrapolation_approaches_modewise():
    grid, disp, src = cube_fixture()
    b = build_basis(grid.size, 1)
    s = plus_state(b, 7)
    F0 = initial_amplitude(grid, s, s)
    pts = default_points(3)
    t = 1.4
    lad = fd_convergence(closed_form_sampler(grid, disp, src, F0, F0), src, grid, pts, t, [0.1, 0.05, 0.025])
    exact = modewise_residual(*amplitudes(grid, disp, src, s, s, t), disp, src, pts)
    assert np.max(np.abs(lad.extrapolated)) <= lad.norms[-1] / 10
    assert np.max(np.abs(lad.extrapolated - exact.residual)) <= lad.norms[-1] / 10


def test_fd_numeric_sampler_agrees():
    grid = build_grid(1, 3, 1.5, keep_origin=True)
    disp = Dispersion.massive(1.0)
    src = gaussian_source(1.0, 1.0, 0.1, 1)
    ham = build_hamiltonian(grid, build_basis(3, 10), disp, src)
    ctx = EvolutionContext(ham)
    U = dressing_operator(ham)
    s = plus_state(ham.basis, 1)
    F0 = initial_amplitude(grid, s, s)
    x = default_points(1, count=5)
    num = numeric_sampler(ctx, U, s, s)(0.7, x)
    ref = closed_form_sampler(grid, disp, src, F0, F0)(0.7, x)
    assert np.max(np.abs(num - ref)) < 1e-6


def test_fd_rejects_bad_steps(two_node):
    grid, disp, src, _ = two_node
    with pytest.raises(ValueError):
        finite_difference_residual(lambda t, x: np.zeros(len(x)), src, grid, [0.0], 0.0, 0.0, 0.1)


# --------------------------------------------------------------------------
# integrability bound
# --------------------------------------------------------------------------


def test_integrability_zero_amplitude():
    grid = build_grid(3, 2, 1.0)
    b = build_basis(grid.size, 1)
    v = vacuum(b)
    F0 = initial_amplitude(grid, v, v)
    rep = integrability_diagnostics(F0, grid, Dispersion.massless(), 0, v, v)
    assert rep.lhs == 0.0 and rep.holds


def test_integrability_random_states():
    grid = build_grid(3, 2, 1.0)
    b = build_basis(grid.size, 3)
    disp = Dispersion.massless()
    rng = np.random.default_rng(2)
    for _ in range(50):
        phi, psi = random_state(b, rng), random_state(b, rng)
        F0 = initial_amplitude(grid, phi, psi)
        for l in (0, 1, 2):
            assert integrability_diagnostics(F0, grid, disp, l, phi, psi).holds
            for axis in range(3):
                assert integrability_diagnostics(F0, grid, disp, l, phi, psi, axis=axis).holds


def test_integrability_high_power_dominates():
    grid = build_grid(1, 8, 4.0)
    b = build_basis(grid.size, 1)
    disp = Dispersion.massless()
    v = vacuum(b)
    vals = np.where(grid.norms > 1, 1.0, 0.0).astype(complex)
    F0 = AmplitudeField(0.0, grid, vals, None, "initial")
    r0 = integrability_diagnostics(F0, grid, disp, 0, v, v)
    r2 = integrability_diagnostics(F0, grid, disp, 2, v, v)
    assert r2.lhs > r0.lhs


def test_c_d_split_at_unit_momentum():
    grid = build_grid(1, 4, 2.0)
    # nodes +-0.5 inside the unit ball, +-1.5 outside; d = 1 uses omega^-1 outside
    expected = math.sqrt(2 * 1 / 0.25) + math.sqrt(2 * 1 / 1.5**2)
    assert grid_c_d(grid, Dispersion.massless()) == pytest.approx(expected, rel=1e-14)


def test_integrability_rejects_bad_power():
    grid = build_grid(1, 2, 1.0)
    v = vacuum(build_basis(2, 1))
    with pytest.raises(ValueError):
        integrability_diagnostics(initial_amplitude(grid, v, v), grid, Dispersion.massless(), 3, v, v)
