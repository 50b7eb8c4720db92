from kvnlab.errors import GridError, UnsupportedPotentialError
from kvnlab.grid import KvnState, Rep, gaussian_state, make_grid, norm, to_representation
from kvnlab.hybrid import (
    DensityMatrix,
    HybridParams,
    cat_wavefunction,
    cat_wigner,
    commutator_witness,
    ehrenfest_residual,
    evolve_hybrid,
    gaussian_wavefunction,
    hqc_step,
    hybrid_wigner,
    negativity,
    positivity_preservation_report,
    schrodinger_oracle,
    wigner_from_density,
    wigner_from_state,
    wigner_gaussian_state,
    wigner_grid,
    wigner_state,
)
from kvnlab.potentials import PotentialSpec
from kvnlab.propagator import StepperConfig, liouville_step
from loguru import logger
from scipy.integrate import quad
import numpy as np, pytest


@pytest.fixture
def grid():
    return make_grid(64, 64, (-6, 6), (-6, 6))


@pytest.fixture
def wgrid():
    return wigner_grid(128, -8, 8, 1.0)


def unit(psi, dx):
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * dx)


@pytest.mark.parametrize("kwargs", [{"hbar": 0.0}, {"kappa": -0.1}, {"kappa": 1.5}])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        HybridParams(**kwargs)
    assert HybridParams(hbar=2.0, kappa=0.25).hk == pytest.approx(0.5)


# ---------------------------------------------------------------------------- #
#                                Wigner functions                              #
# ---------------------------------------------------------------------------- #


def test_wigner_grid_axes(wgrid):
    assert wgrid.dq == pytest.approx(0.125)
    assert wgrid.dlp == pytest.approx(2 * wgrid.dq)
    with pytest.raises(ValueError):
        wigner_grid(128, -8, 8, 0.0)


def test_ground_state_wigner(wgrid):
    psi = unit(gaussian_wavefunction(wgrid.q), wgrid.dq)
    w = wigner_from_state(psi, HybridParams(1.0, 1.0), wgrid)
    q, p = wgrid.mesh(Rep.QP)
    assert np.max(np.abs(w.values - np.exp(-(q**2) - p**2) / np.pi)) < 1e-6
    assert w.integral == pytest.approx(1.0, abs=1e-8)


def test_cat_wigner_matches_its_closed_form(wgrid):
    psi = unit(cat_wavefunction(wgrid.q, 2.0), wgrid.dq)
    w = wigner_from_state(psi, HybridParams(1.0, 1.0), wgrid)
    expected = cat_wigner(wgrid, 2.0)
    assert np.max(np.abs(w.values - expected)) < 1e-6
    minimum, volume = negativity(w)
    assert minimum < -0.1
    assert volume > 0


@pytest.mark.parametrize("q, p", [(0.0, 0.0), (0.0, 0.8), (2.0, 0.3), (-1.0, -1.2)])
def test_cat_closed_form_against_quadrature(q, p):
    # W(q, p) = (1/2 pi) int psi(q - y/2) psi(q + y/2) cos(p y) dy for a real wave function
    def integrand(y):
        return (cat_wavefunction(q - y / 2, 2.0) * cat_wavefunction(q + y / 2, 2.0)).real * np.cos(p * y)

    value, _ = quad(integrand, -30, 30, limit=200)
    # index 4 of this grid sits exactly on (q, p)
    shifted = make_grid(8, 8, (q - 1, q + 1), (p - 1, p + 1))
    closed = cat_wigner(shifted, 2.0)[4, 4]
    assert closed == pytest.approx(value / (2 * np.pi), abs=1e-8)


def test_wigner_needs_kappa_and_a_matching_grid(wgrid):
    psi = unit(gaussian_wavefunction(wgrid.q), wgrid.dq)
    with pytest.raises(ValueError):
        wigner_from_state(psi, HybridParams(1.0, 0.0), wgrid)
    with pytest.raises(GridError):
        wigner_from_state(psi, HybridParams(1.0, 1.0), make_grid(128, 128, (-8, 8), (-8, 8)))
    with pytest.raises(GridError):
        wigner_from_state(psi, HybridParams(1.0, 0.5), wgrid)


def test_density_matrix(wgrid):
    x = wgrid.q
    left = unit(gaussian_wavefunction(x, -3.0), wgrid.dq)
    right = unit(gaussian_wavefunction(x, 3.0), wgrid.dq)
    pure = DensityMatrix.from_wavefunction(x, left)
    assert pure.trace == pytest.approx(1.0, abs=1e-12)
    assert pure.purity == pytest.approx(1.0, abs=1e-12)
    mixed = DensityMatrix(x, 0.5 * (np.outer(left, left.conj()) + np.outer(right, right.conj())))
    assert mixed.trace == pytest.approx(1.0, abs=1e-12)
    assert mixed.purity == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(GridError):
        DensityMatrix(x, np.eye(4))
    with pytest.raises(ValueError):
        DensityMatrix(x, np.triu(np.ones((len(x), len(x)))))


def test_mixture_wigner_is_the_average_and_stays_positive(wgrid):
    x, params = wgrid.q, HybridParams(1.0, 1.0)
    # lobes at +-2 leave |psi| near 1e-8 at the box edge, so no truncation ringing
    left = unit(gaussian_wavefunction(x, -2.0), wgrid.dq)
    right = unit(gaussian_wavefunction(x, 2.0), wgrid.dq)
    mixed = DensityMatrix(x, 0.5 * (np.outer(left, left.conj()) + np.outer(right, right.conj())))
    w = wigner_from_density(mixed, params, wgrid).values
    pure = [wigner_from_state(psi, params, wgrid).values for psi in (left, right)]
    average = 0.5 * (pure[0] + pure[1])
    assert np.max(np.abs(w - average)) < 1e-12
    assert np.sum(w) * wgrid.dq * wgrid.dp == pytest.approx(1.0, abs=1e-8)
    assert w.min() > -1e-8


def test_density_at_the_box_edge_is_reported(wgrid):
    messages = []
    handler = logger.add(messages.append, level="WARNING", format="{message}")
    try:
        wigner_from_state(unit(gaussian_wavefunction(wgrid.q, 2.0), wgrid.dq), HybridParams(1.0, 1.0), wgrid)
        assert not messages
        wigner_from_state(unit(gaussian_wavefunction(wgrid.q, -3.0), wgrid.dq), HybridParams(1.0, 1.0), wgrid)
    finally:
        logger.remove(handler)
    assert any("box edge" in message for message in messages)


def test_wigner_state_round_trip(grid):
    state = wigner_gaussian_state(grid, 1.0, -0.5)
    w = hybrid_wigner(state)
    assert w.integral == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(wigner_state(grid, 3 * w.values).amp, state.amp)


# ---------------------------------------------------------------------------- #
#                                   Propagation                                #
# ---------------------------------------------------------------------------- #


def test_kappa_zero_is_the_liouville_step(grid):
    state = gaussian_state(grid, 1.0, 0.5, 0.8, 0.8)
    potential = PotentialSpec.quartic(1.0, 0.5)
    hybrid = hqc_step(state, potential, HybridParams(1.0, 0.0), 1e-3)
    assert np.array_equal(hybrid.amp, liouville_step(state, potential, 1e-3).amp)


@pytest.mark.parametrize("kappa", [0.0, 0.25, 0.5, 1.0])
def test_hqc_step_conserves_the_norm(grid, kappa):
    state = wigner_gaussian_state(grid, 1.0, 0.0)
    potential, params = PotentialSpec.quartic(1.0, 0.5), HybridParams(1.0, kappa)
    start = norm(state)
    for _ in range(1000):
        state = hqc_step(state, potential, params, 5e-4)
    assert abs(norm(state) / start - 1) < 1e-10


def test_phase_space_integral_is_conserved(grid):
    state = wigner_gaussian_state(grid, 1.0, 0.0)
    potential = PotentialSpec.quartic(1.0, 0.1)
    trajectory = evolve_hybrid(state, potential, HybridParams(1.0, 1.0), StepperConfig(0.002, 200, 50))
    cell = grid.dq * grid.dp
    for snapshot in trajectory.states:
        integral = np.sum(to_representation(snapshot, Rep.QP).amp) * cell
        assert abs(integral - 1.0) < 1e-10


def test_quadratic_potentials_ignore_kappa(grid):
    state = wigner_gaussian_state(grid, 1.5, 0.0)
    potential = PotentialSpec.harmonic(1.0)
    cfg = StepperConfig(0.01, 50)
    classical = evolve_hybrid(state, potential, HybridParams(1.0, 0.0), cfg).final
    quantum = evolve_hybrid(state, potential, HybridParams(1.0, 1.0), cfg).final
    assert np.max(np.abs(classical.amp - quantum.amp)) < 1e-12


def test_small_kappa_approaches_liouville(grid):
    state = wigner_gaussian_state(grid, 1.0, 0.0)
    potential = PotentialSpec.quartic(1.0, 0.1)
    cfg = StepperConfig(0.002, 100)
    classical = evolve_hybrid(state, potential, HybridParams(1.0, 0.0), cfg).final
    nearly = evolve_hybrid(state, potential, HybridParams(1.0, 1e-6), cfg).final
    assert np.max(np.abs(classical.amp - nearly.amp)) < 1e-6


def test_tabulated_potential_needs_kappa_zero(grid):
    potential = PotentialSpec.tabulated(0.5 * grid.q**2, grid.q)
    state = wigner_gaussian_state(grid)
    with pytest.raises(UnsupportedPotentialError):
        hqc_step(state, potential, HybridParams(1.0, 1.0), 0.01)
    assert hqc_step(state, potential, HybridParams(1.0, 0.0), 0.01).rep == Rep.QP


@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_ehrenfest_theorem_holds(grid, kappa):
    state = wigner_gaussian_state(grid, 1.0, 0.0)
    potential = PotentialSpec.quartic(1.0, 0.1)
    params = HybridParams(1.0, kappa)
    trajectory = evolve_hybrid(state, potential, params, StepperConfig(0.005, 40))
    report = ehrenfest_residual(trajectory, potential, params)
    assert np.isnan(report.per_snapshot[0]) and np.isnan(report.per_snapshot[-1])
    assert report.max_residual < 1e-3


@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_ehrenfest_residual_is_second_order(grid, kappa):
    state = wigner_gaussian_state(grid, 1.0, 0.0)
    potential = PotentialSpec.quartic(1.0, 0.1)
    params = HybridParams(1.0, kappa)

    def residual(dt, steps):
        trajectory = evolve_hybrid(state, potential, params, StepperConfig(dt, steps))
        return ehrenfest_residual(trajectory, potential, params).max_residual

    assert 3.0 <= residual(0.005, 40) / residual(0.0025, 80) <= 5.0


@pytest.mark.parametrize("kappa", [1.0, 0.5])
def test_commutator_witness(kappa):
    grid = make_grid(128, 128, (-10, 10), (-10, 10))
    rng = np.random.default_rng(3)
    amp = sum(
        rng.normal() * gaussian_state(grid, *rng.uniform(-2, 2, size=2), 1.0, 1.0, normalize=False).amp
        for _ in range(3)
    )
    witness = commutator_witness(KvnState(grid, Rep.QP, amp), HybridParams(1.0, kappa))
    assert abs(witness - 1j * kappa) < 1e-10


def test_schrodinger_oracle_needs_a_normalized_state(wgrid):
    psi = gaussian_wavefunction(wgrid.q)
    with pytest.raises(ValueError):
        schrodinger_oracle(2 * psi, wgrid.q, PotentialSpec.harmonic(), 1.0, 0.01, 10)
    trajectory = schrodinger_oracle(unit(psi, wgrid.dq), wgrid.q, PotentialSpec.harmonic(), 1.0, 0.01, 10, 5)
    assert trajectory.times == pytest.approx([0.0, 0.05, 0.1])
    # the harmonic ground state is stationary
    assert trajectory[-1].purity == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(np.abs(trajectory.wavefunctions[-1]) - np.abs(trajectory.wavefunctions[0]))) < 1e-3


def test_schrodinger_oracle_returns_a_coherent_state_after_one_period(wgrid):
    psi = unit(gaussian_wavefunction(wgrid.q, 2.0), wgrid.dq)
    trajectory = schrodinger_oracle(psi, wgrid.q, PotentialSpec.harmonic(1.0), 1.0, 2 * np.pi / 1000, 1000, 1000)
    overlap = np.sum(psi.conj() * trajectory.wavefunctions[-1]) * wgrid.dq
    assert abs(overlap) ** 2 >= 1 - 1e-6


def test_schrodinger_oracle_spreads_a_free_packet():
    x = np.arange(-256, 256) * 0.0625
    psi = unit(gaussian_wavefunction(x), 0.0625)
    trajectory = schrodinger_oracle(psi, x, PotentialSpec.free(), 1.0, 0.01, 200, 50)
    for t, wavefunction in zip(trajectory.times, trajectory.wavefunctions):
        # <x^2>(t) = <x^2>(0) + <p^2>(0) t^2 with both initial moments 1/2
        spread = np.sum(x**2 * np.abs(wavefunction) ** 2) * 0.0625
        assert spread == pytest.approx(0.5 + 0.5 * t**2, abs=1e-8)


def test_schrodinger_oracle_runs_backwards(wgrid):
    potential = PotentialSpec.quartic(1.0, 0.5)
    psi = unit(gaussian_wavefunction(wgrid.q, 1.0, 0.5), wgrid.dq)
    forward = schrodinger_oracle(psi, wgrid.q, potential, 1.0, 0.01, 100, 100).wavefunctions[-1]
    backward = schrodinger_oracle(forward, wgrid.q, potential, 1.0, -0.01, 100, 100).wavefunctions[-1]
    assert np.max(np.abs(backward - psi)) < 1e-10


# ---------------------------------------------------------------------------- #
#                                   Long runs                                  #
# ---------------------------------------------------------------------------- #


@pytest.mark.slow
def test_positivity_report_harmonic():
    grid = make_grid(128, 128, (-6, 6), (-6, 6))
    initial = wigner_gaussian_state(grid, 1.5, 0.0)
    params_set = [HybridParams(1.0, 0.0), HybridParams(1.0, 1.0)]
    report = positivity_preservation_report(
        PotentialSpec.harmonic(1.0), params_set, initial, horizon=10, dt=0.01, record_every=10
    )
    assert all(run.preserved and not run.became_negative for run in report.runs)
    assert report.warnings == ()


@pytest.mark.slow
def test_positivity_report_quartic():
    # the classical flow winds the Gaussian into filaments near wavenumber 100 by t = 10
    grid = make_grid(384, 768, (-5, 5), (-12, 12))
    initial = wigner_gaussian_state(grid, 1.0, 0.0)
    params_set = [HybridParams(1.0, 0.0), HybridParams(1.0, 1.0)]
    report = positivity_preservation_report(
        PotentialSpec.quartic(1.0, 0.5), params_set, initial, horizon=10, dt=4e-4, record_every=250
    )

    classical = report.run(0.0)
    assert classical.warnings == ()
    assert classical.preserved and not classical.became_negative
    assert classical.overall_min >= -1e-6

    quantum = report.run(1.0)
    assert quantum.became_negative
    assert quantum.overall_min < -1e-3
    assert quantum.times[0] == 0.0 and len(quantum.times) == len(quantum.min_wigner) == 101


@pytest.mark.slow
@pytest.mark.parametrize(
    "potential, steps",
    [
        (PotentialSpec.quartic(1.0, 0.1), 2000),
        (PotentialSpec.harmonic(1.0), 5000),
        (PotentialSpec.quartic(1.0, 0.5), 5000),
    ],
)
def test_hybrid_at_kappa_one_matches_schrodinger(wgrid, potential, steps):
    params = HybridParams(1.0, 1.0)
    psi = unit(gaussian_wavefunction(wgrid.q, 1.0), wgrid.dq)
    state = wigner_state(wgrid, wigner_from_state(psi, params, wgrid).values)
    trajectory = evolve_hybrid(state, potential, params, StepperConfig(1e-3, steps, 500))
    reference = schrodinger_oracle(psi, wgrid.q, potential, 1.0, 1e-3, steps, 500)
    assert trajectory.times == pytest.approx(reference.times)
    for snapshot, wavefunction in zip(trajectory.states, reference.wavefunctions):
        expected = wigner_from_state(wavefunction, params, wgrid).values
        assert np.max(np.abs(hybrid_wigner(snapshot).values - expected)) < 1e-5
