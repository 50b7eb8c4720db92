from kvnlab.em import (
    X_HAT,
    Y_HAT,
    Z_HAT,
    EmState,
    LongitudinalModeError,
    beta_matrices,
    commutator,
    diagnostics,
    em_evolve,
    em_grid,
    em_step,
    levi_civita,
    maxwell_fd_oracle,
    mode_kvn_state,
    mode_to_oscillator,
    plane_wave,
    poynting_continuity_residual,
    project_mode,
    random_transverse_field,
    spin_generators,
    standing_mode,
    structure_sign,
)
from kvnlab.errors import GridError
from kvnlab.grid import expectation, make_grid
from kvnlab.propagator import StepperConfig, evolve
import numpy as np, pytest, scipy.linalg

# ---------------------------------------------------------------------------- #
#                                  Beta algebra                                #
# ---------------------------------------------------------------------------- #


def test_beta_matrices_are_real_symmetric_integers():
    betas = beta_matrices()
    for beta in betas:
        assert beta.shape == (6, 6)
        assert np.array_equal(beta, beta.T)
        assert np.array_equal(beta, np.round(beta))
    # (2,6) = -1 and (3,5) = +1 in one-based indexing
    assert betas.x[1, 5] == -1
    assert betas.x[2, 4] == 1


def test_beta_commutators_close_on_spin_generators():
    betas, sigmas, eps = beta_matrices(), spin_generators(), levi_civita()
    sign = structure_sign()
    assert sign == -1
    for i in range(3):
        for j in range(3):
            bracket = commutator(betas[i], betas[j])
            expected = sign * sum(eps[i, j, k] * sigmas[k] for k in range(3))
            assert np.array_equal(bracket, expected)
            for beta in betas:
                if i != j:
                    assert not np.array_equal(bracket, beta)
                    assert not np.array_equal(bracket, -beta)


def test_beta_z_spectrum():
    eigenvalues = scipy.linalg.eigh(beta_matrices().z, eigvals_only=True)
    assert np.allclose(eigenvalues, [-1, -1, 0, 0, 1, 1], atol=1e-14)


# ---------------------------------------------------------------------------- #
#                                Grid and state                                #
# ---------------------------------------------------------------------------- #


def test_grid_and_state_validation():
    with pytest.raises(GridError):
        em_grid(31, 2 * np.pi)
    with pytest.raises(GridError):
        em_grid(32, 0.0)
    grid = em_grid(32, 2 * np.pi)
    with pytest.raises(GridError):
        grid.wavenumber(16)
    with pytest.raises(GridError):
        EmState(grid, np.zeros((3, 32)))


def test_uniform_fields_energy_and_flux():
    grid = em_grid(16, 2 * np.pi)
    state = EmState.from_fields(grid, X_HAT, Y_HAT)
    assert np.allclose(state.E[0], 1.0) and np.allclose(state.B[1], 1.0)
    result = diagnostics(state)
    assert np.allclose(result.energy_density, 2.0)
    assert np.allclose(result.poynting[2], 2.0)
    assert np.allclose(result.poynting[:2], 0.0)
    assert result.energy == pytest.approx(4 * np.pi)


# ---------------------------------------------------------------------------- #
#                                  Propagation                                 #
# ---------------------------------------------------------------------------- #


def test_plane_wave_moves_at_unit_speed():
    grid = em_grid(64, 2 * np.pi)
    state = plane_wave(grid, 3)
    # a quarter of the box in 50 steps
    trajectory = em_evolve(state, grid.length / 4 / 50, 50, 50)
    expected = np.roll(state.field, grid.n_z // 4, axis=1)
    assert np.max(np.abs(trajectory.final.field - expected)) < 1e-10


def test_em_step_matches_rk4_with_fourth_order_convergence():
    grid = em_grid(64, 2 * np.pi)
    state = random_transverse_field(grid, n_modes=4, seed=1)
    exact = em_step(state, 1.0).field
    coarse = np.max(np.abs(maxwell_fd_oracle(state, 0.02, 50).field - exact))
    fine = np.max(np.abs(maxwell_fd_oracle(state, 0.01, 100).field - exact))
    assert fine < 1e-6
    assert 12 <= coarse / fine <= 20


def test_energy_and_divergence_drift():
    grid = em_grid(32, 2 * np.pi)
    state = random_transverse_field(grid, n_modes=3, seed=2)
    trajectory = em_evolve(state, 0.01, 10_000, 1000)
    start = diagnostics(state)
    for snapshot in trajectory.states:
        result = diagnostics(snapshot)
        assert abs(result.energy - start.energy) <= 1e-12 * start.energy
        assert abs(result.div_E - start.div_E) <= 1e-12
        assert abs(result.div_B - start.div_B) <= 1e-12


def test_repeated_steps_conserve_energy():
    grid = em_grid(32, 2 * np.pi)
    state = random_transverse_field(grid, n_modes=3, seed=2)
    start = diagnostics(state)
    for n in range(1, 10_001):
        state = em_step(state, 0.01)
        if n % 2500 == 0:
            result = diagnostics(state)
            assert abs(result.energy - start.energy) <= 1e-12 * start.energy
            assert abs(result.div_E - start.div_E) <= 1e-12
            assert abs(result.div_B - start.div_B) <= 1e-12
    # the composed steps still land on the directly propagated field
    direct = em_step(random_transverse_field(grid, n_modes=3, seed=2), 100.0)
    assert np.max(np.abs(state.field - direct.field)) < 1e-10


def test_poynting_continuity_is_second_order():
    grid = em_grid(64, 4 * np.pi)
    state = random_transverse_field(grid, n_modes=4, seed=3)
    coarse = poynting_continuity_residual(em_evolve(state, 0.02, 20))
    fine = poynting_continuity_residual(em_evolve(state, 0.01, 40))
    assert 3.5 <= coarse.max_residual / fine.max_residual <= 4.5


# ---------------------------------------------------------------------------- #
#                          Single modes and oscillators                        #
# ---------------------------------------------------------------------------- #


def test_mode_mapping():
    mode = mode_to_oscillator(0.7, 0.3, k=1.0)
    assert (mode.q, mode.p) == pytest.approx((0.3, 0.7))
    assert mode.potential.omega == 1.0
    assert mode.energy == pytest.approx(0.5 * (0.7**2 + 0.3**2))
    flipped = mode_to_oscillator(0.7, 0.3, k=2.0, b_pol=(0.0, -1.0, 0.0))
    assert (flipped.q, flipped.p) == pytest.approx((-0.3, 1.4))


def test_mode_mapping_rejects_bad_polarizations():
    with pytest.raises(LongitudinalModeError):
        mode_to_oscillator(1.0, 1.0, e_pol=Z_HAT)
    with pytest.raises(LongitudinalModeError):
        mode_to_oscillator(1.0, 1.0, e_pol=X_HAT, b_pol=(1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        mode_to_oscillator(1.0, 1.0, k=0.0)


def test_standing_mode_follows_its_oscillator():
    grid = em_grid(64, 2 * np.pi)
    state = standing_mode(grid, 2, 0.7, 0.3)
    assert project_mode(state, 2) == pytest.approx((0.7, 0.3))
    mode = mode_to_oscillator(0.7, 0.3, k=grid.wavenumber(2))
    trajectory = em_evolve(state, 0.013, 100, 100)
    e, b = project_mode(trajectory.final, 2)
    assert (e.real, b.real) == pytest.approx(mode.field_amplitudes(1.3), abs=1e-10)


def test_mode_round_trip_through_kvn():
    grid = em_grid(64, 2 * np.pi)
    mode = mode_to_oscillator(*project_mode(standing_mode(grid, 1, 1.2, -0.4), 1), k=grid.wavenumber(1))
    phase_grid = make_grid(64, 64, (-8, 8), (-8, 8))
    state = mode_kvn_state(phase_grid, mode)
    trajectory = evolve(state, mode.potential, StepperConfig(0.01, 100, 100))
    q, p = mode.at(1.0)
    assert expectation(trajectory.final, lambda x, y: x) == pytest.approx(q, abs=1e-4)
    assert expectation(trajectory.final, lambda x, y: y) == pytest.approx(p, abs=1e-4)
    e, b = mode.field_amplitudes(1.0)
    evolved = project_mode(em_evolve(standing_mode(grid, 1, 1.2, -0.4), 0.01, 100, 100).final, 1)
    assert (evolved[0].real, evolved[1].real) == pytest.approx((e, b), abs=1e-10)
