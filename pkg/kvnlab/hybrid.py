from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from kvnlab.diagnostics import uniform_interval
from kvnlab.errors import GridError, NonFiniteError, NormalizationError, UnsupportedPotentialError
from kvnlab.grid import SQRT_2PI, KvnState, PhaseGrid, Rep, gaussian_amp, to_representation, transform_amp
from kvnlab.helpers import logger
from kvnlab.propagator import SplitOperatorStepper, StepperConfig, aliasing_flags, kinetic_phase, liouville_step
import numpy as np, scipy.fft

POSITIVITY_TOLERANCE = 1e-6
NEGATIVITY_THRESHOLD = 1e-3
REALNESS_TOLERANCE = 1e-10
EDGE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class HybridParams:
    """hbar and the quantum-classical interpolation kappa: 1 is Moyal dynamics, 0 is Liouville."""

    hbar: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not 0 <= self.kappa <= 1:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")

    @property
    def hk(self):
        return self.hbar * self.kappa


# ---------------------------------------------------------------------------- #
#                               Hybrid propagation                             #
# ---------------------------------------------------------------------------- #


def hybrid_stepper(grid, potential, params, dt):
    """Strang stepper for H_QC; kappa = 0 is the Liouville stepper itself."""
    if params.kappa == 0:
        return SplitOperatorStepper.liouville(grid, potential, dt)
    if not potential.is_analytic:
        raise UnsupportedPotentialError("tabulated potentials are not supported in hybrid mode with kappa > 0")
    hk = params.hk
    eps = 0.5 * hk * grid.lp[None, :]
    generator = potential.split_difference(grid.q[:, None], eps) / hk
    half_potential = np.exp(-0.5j * dt * generator)
    flags = aliasing_flags(grid, dt, np.max(np.abs(generator)))
    return SplitOperatorStepper(grid, dt, half_potential, kinetic_phase(grid, dt), flags)


def hqc_step(s, potential, params, dt):
    if params.kappa == 0 or dt == 0:
        return liouville_step(s, potential, dt)
    return hybrid_stepper(s.grid, potential, params, dt).step(s)


def evolve_hybrid(s, potential, params, cfg):
    return hybrid_stepper(s.grid, potential, params, cfg.dt).run(s, cfg.steps, cfg.record_every)


# ---------------------------------------------------------------------------- #
#                             Wigner and density matrices                      #
# ---------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class WignerField:
    grid: PhaseGrid
    values: np.ndarray

    @property
    def integral(self):
        return float(np.sum(self.values) * self.grid.dq * self.grid.dp)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """rho(x, x') on a uniform position grid; trace and purity use the cell width dx."""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        n = len(self.x)
        if values.shape != (n, n):
            raise GridError(f"density matrix must be {n}x{n}, got {values.shape}")
        scale = max(1.0, float(np.max(np.abs(values))))
        if np.max(np.abs(values - values.conj().T)) > 1e-10 * scale:
            raise ValueError("density matrix is not hermitian")
        object.__setattr__(self, "values", values)

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def trace(self):
        return float(np.real(np.trace(self.values)) * self.dx)

    @property
    def purity(self):
        return float(np.real(np.sum(self.values * self.values.T)) * self.dx**2)

    @classmethod
    def from_wavefunction(cls, x, psi):
        psi = np.asarray(psi, dtype=np.complex128)
        return cls(np.asarray(x, dtype=float), np.outer(psi, np.conj(psi)))


def wigner_grid(n, x_min, x_max, hbar_kappa):
    """The PhaseGrid whose p-axis is dual to a density-matrix position grid: dlambda_p = 2 dx / (hbar kappa)."""
    if not hbar_kappa > 0:
        raise ValueError("the Wigner transform needs hbar * kappa > 0")
    dx = (x_max - x_min) / n
    dp = np.pi * hbar_kappa / (n * dx)
    return PhaseGrid(int(n), int(n), float(x_min), float(x_max), -n * dp / 2, n * dp / 2)


def _check_wigner_grid(grid, x, hk):
    dx = x[1] - x[0]
    if grid.n_q != len(x) or grid.n_p != len(x):
        raise GridError(f"grid is {grid.n_q}x{grid.n_p} but the density matrix has {len(x)} points")
    if not (np.isclose(grid.q_min, x[0], rtol=0, atol=1e-9 * dx) and np.isclose(grid.dq, dx, rtol=1e-9)):
        raise GridError("grid q-axis does not coincide with the density-matrix position grid")
    if not np.isclose(grid.dlp, 2 * dx / hk, rtol=1e-9):
        raise GridError("grid p-axis is not the Fourier dual of the position grid; build it with wigner_grid")


def wigner_from_density(rho, params, grid):
    """W(q, p) = (1/2 pi) int dlambda rho(q - hk lambda/2, q + hk lambda/2) exp(i p lambda).

    With dlambda_p = 2 dx / hk the shifted arguments land on grid points, so the (q, lambda_p) table is
    read straight out of rho and a single transform along p gives W.
    """
    if params.kappa == 0:
        raise ValueError("the Wigner transform is undefined at kappa = 0")
    _check_wigner_grid(grid, rho.x, params.hk)
    magnitude = np.abs(rho.values)
    edge = max(float(np.max(magnitude[[0, -1], :])), float(np.max(magnitude[:, [0, -1]])))
    if edge > EDGE_TOLERANCE * float(np.max(magnitude)):
        # rho is cut off at the box, so W rings at the level of the edge value
        logger.warning(f"Density matrix reaches {edge:.3g} at the box edge; widen the x range")
    n = grid.n_q
    rows = np.arange(n)[:, None]
    shifts = np.arange(n)[None, :] - n // 2
    left, right = rows - shifts, rows + shifts
    valid = (left >= 0) & (left < n) & (right >= 0) & (right < n)
    table = np.where(valid, rho.values[np.clip(left, 0, n - 1), np.clip(right, 0, n - 1)], 0) / SQRT_2PI
    values = transform_amp(table, grid, Rep.QLp, Rep.QP)
    residue = float(np.max(np.abs(values.imag)))
    if residue > REALNESS_TOLERANCE * max(1.0, float(np.max(np.abs(values.real)))):
        logger.warning(f"Wigner function has an imaginary residue of {residue:.3g}")
    return WignerField(grid, values.real)


def wigner_from_state(psi, params, grid):
    return wigner_from_density(DensityMatrix.from_wavefunction(grid.q, psi), params, grid)


def hybrid_wigner(s):
    """The Wigner function carried by a hybrid state: Re of its (q, p) amplitude at unit integral."""
    amp = to_representation(s, Rep.QP).amp
    residue = float(np.max(np.abs(amp.imag)))
    if residue > REALNESS_TOLERANCE * max(1.0, float(np.max(np.abs(amp.real)))):
        logger.warning(f"Hybrid amplitude has an imaginary residue of {residue:.3g}")
    integral = np.sum(amp.real) * s.grid.dq * s.grid.dp
    if integral == 0:
        raise NormalizationError("hybrid state has zero integral, no Wigner normalization exists")
    return WignerField(s.grid, amp.real / integral)


def wigner_state(grid, values):
    """A hybrid state whose (q, p) amplitude is the given Wigner function, scaled to unit integral."""
    values = np.asarray(values, dtype=float)
    integral = np.sum(values) * grid.dq * grid.dp
    return KvnState(grid, Rep.QP, values / integral)


def wigner_gaussian_state(grid, q0=0.0, p0=0.0, width_q=np.sqrt(0.5), width_p=np.sqrt(0.5)):
    """Gaussian Wigner function; the default widths are the hbar = 1 coherent state."""
    return wigner_state(grid, gaussian_amp(grid, q0, p0, width_q, width_p))


def cat_wigner(grid, separation, hbar=1.0):
    """Closed-form Wigner function of the even cat state phi0(x - a) + phi0(x + a)."""
    a = separation
    q, p = grid.mesh(Rep.QP)
    norm_sq = 1 / (2 + 2 * np.exp(-(a**2) / hbar))
    lobes = np.exp(-((q - a) ** 2 + p**2) / hbar) + np.exp(-((q + a) ** 2 + p**2) / hbar)
    fringe = 2 * np.exp(-(q**2 + p**2) / hbar) * np.cos(2 * a * p / hbar)
    return norm_sq * (lobes + fringe) / (np.pi * hbar)


def gaussian_wavefunction(x, x0=0.0, p0=0.0, hbar=1.0, width=None):
    """(pi w^2)^(-1/4) exp(-(x - x0)^2 / (2 w^2) + i p0 x / hbar) with w^2 = hbar unless given."""
    width_sq = hbar if width is None else width**2
    x = np.asarray(x, dtype=float)
    return (np.pi * width_sq) ** -0.25 * np.exp(-((x - x0) ** 2) / (2 * width_sq) + 1j * p0 * x / hbar)


def cat_wavefunction(x, separation, hbar=1.0):
    norm = 1 / np.sqrt(2 + 2 * np.exp(-(separation**2) / hbar))
    lobes = gaussian_wavefunction(x, separation, hbar=hbar) + gaussian_wavefunction(x, -separation, hbar=hbar)
    return norm * lobes


def negativity(w):
    """(min W, -sum min(W, 0) dq dp)."""
    values = w.values
    return float(values.min()), float(-np.sum(np.minimum(values, 0)) * w.grid.dq * w.grid.dp)


# ---------------------------------------------------------------------------- #
#                              Schrodinger reference                           #
# ---------------------------------------------------------------------------- #


@dataclass
class DensityTrajectory:
    """Recorded wave functions; density matrices are built on access."""

    x: np.ndarray
    times: list = field(default_factory=list)
    wavefunctions: list = field(default_factory=list)

    def __len__(self):
        return len(self.wavefunctions)

    def __getitem__(self, index):
        return DensityMatrix.from_wavefunction(self.x, self.wavefunctions[index])

    def __iter__(self):
        return (self[n] for n in range(len(self)))


def schrodinger_oracle(psi0, x, potential, hbar, dt, steps, record_every=1):
    """Split-operator propagation of i hbar psi' = (-hbar^2/2 d^2/dx^2 + V) psi on a periodic grid."""
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi0, dtype=np.complex128)
    dx = x[1] - x[0]
    norm_sq = float(np.sum(np.abs(psi) ** 2) * dx)
    if abs(norm_sq - 1) > 1e-8:
        raise NormalizationError(f"initial wave function must be normalized, norm^2 = {norm_sq:.12g}")
    k = 2 * np.pi * scipy.fft.fftfreq(len(x), d=dx)
    half_potential = np.exp(-0.5j * dt * potential.value_on(x) / hbar)
    kinetic = np.exp(-0.5j * hbar * dt * k**2)

    trajectory = DensityTrajectory(x=x)
    trajectory.times.append(0.0)
    trajectory.wavefunctions.append(psi)
    for n in range(1, steps + 1):
        psi = half_potential * scipy.fft.ifft(kinetic * scipy.fft.fft(half_potential * psi))
        if not np.all(np.isfinite(psi)):
            raise NonFiniteError("non-finite wave function during Schrodinger propagation")
        if n % record_every == 0:
            trajectory.times.append(n * dt)
            trajectory.wavefunctions.append(psi)
    return trajectory


# ---------------------------------------------------------------------------- #
#                          Ehrenfest and commutator checks                     #
# ---------------------------------------------------------------------------- #


@dataclass(frozen=True)
class QuantumExpectations:
    q: float
    p: float
    force: float


def _quantum_position(grid, hk):
    return grid.q[:, None] - 0.5 * hk * grid.lp[None, :]


def _quantum_momentum(grid, hk):
    return grid.p[None, :] + 0.5 * hk * grid.lq[:, None]


def quantum_expectations(s, potential, params):
    """<q_Q>, <p_Q> and <U'(q_Q)> with q_Q = q - (hk/2) lambda_p and p_Q = p + (hk/2) lambda_q."""
    grid, hk = s.grid, params.hk
    norm_sq = np.sum(np.abs(s.amp) ** 2) * s.cell
    qlp = to_representation(s, Rep.QLp)
    weight = np.abs(qlp.amp) ** 2 * qlp.cell / norm_sq
    position = _quantum_position(grid, hk)
    if hk == 0:
        force = np.broadcast_to(potential.derivative_on(grid.q)[:, None], grid.shape)
    else:
        force = potential.derivative(position)
    lqp = to_representation(s, Rep.LqP)
    momentum_weight = np.abs(lqp.amp) ** 2 * lqp.cell / norm_sq
    return QuantumExpectations(
        q=float(np.sum(position * weight)),
        p=float(np.sum(_quantum_momentum(grid, hk) * momentum_weight)),
        force=float(np.sum(force * weight)),
    )


@dataclass(frozen=True)
class EhrenfestReport:
    times: tuple
    position: tuple
    momentum: tuple
    max_residual: float

    @property
    def per_snapshot(self):
        return tuple(max(a, b) for a, b in zip(self.position, self.momentum))


def ehrenfest_residual(trajectory, potential, params):
    """Central-difference residuals of d<q_Q>/dt = <p_Q> and d<p_Q>/dt = -<U'(q_Q)>."""
    interval = uniform_interval(trajectory.times)
    values = [quantum_expectations(s, potential, params) for s in trajectory.states]
    position, momentum = [float("nan")], [float("nan")]
    for n in range(1, len(values) - 1):
        dq = (values[n + 1].q - values[n - 1].q) / (2 * interval)
        dp = (values[n + 1].p - values[n - 1].p) / (2 * interval)
        position.append(abs(dq - values[n].p))
        momentum.append(abs(dp + values[n].force))
    position.append(float("nan"))
    momentum.append(float("nan"))
    return EhrenfestReport(
        times=tuple(trajectory.times),
        position=tuple(position),
        momentum=tuple(momentum),
        max_residual=max(max(position[1:-1]), max(momentum[1:-1])),
    )


def commutator_witness(s, params):
    """<Psi|[q_Q, p_Q]|Psi> / <Psi|Psi>, which should equal i hbar kappa."""
    grid, hk = s.grid, params.hk
    qlp = to_representation(s, Rep.QLp)
    q_psi = transform_amp(qlp.amp * _quantum_position(grid, hk), grid, Rep.QLp, Rep.QP)
    lqp = to_representation(s, Rep.LqP)
    p_psi = transform_amp(lqp.amp * _quantum_momentum(grid, hk), grid, Rep.LqP, Rep.QP)
    cell = grid.cell(Rep.QP)
    norm_sq = np.sum(np.abs(s.amp) ** 2) * s.cell
    return complex(2j * np.imag(np.vdot(q_psi, p_psi)) * cell / norm_sq)


# ---------------------------------------------------------------------------- #
#                           Positivity preservation report                     #
# ---------------------------------------------------------------------------- #


@dataclass(frozen=True)
class PositivityRun:
    kappa: float
    times: tuple
    min_wigner: tuple
    preserved: bool
    became_negative: bool
    warnings: tuple = ()

    @property
    def overall_min(self):
        return min(self.min_wigner)


@dataclass(frozen=True)
class PositivityReport:
    potential: str
    runs: tuple
    warnings: tuple = ()

    def run(self, kappa):
        return next(run for run in self.runs if run.kappa == kappa)


def _positivity_run(initial, potential, params, dt, steps, record_every, threshold):
    cfg = StepperConfig(dt=dt, steps=steps, record_every=record_every)
    trajectory = evolve_hybrid(initial, potential, params, cfg)
    minima = tuple(float(hybrid_wigner(state).values.min()) for state in trajectory.states)
    return PositivityRun(
        kappa=params.kappa,
        times=tuple(trajectory.times),
        min_wigner=minima,
        preserved=min(minima) >= -POSITIVITY_TOLERANCE,
        became_negative=min(minima) < -threshold,
        warnings=tuple(trajectory.warnings),
    )


def positivity_preservation_report(
    potential, params_set, initial, horizon, dt=1e-3, record_every=100, max_workers=2
):
    """Track min W over time for each kappa; the runs are independent and execute concurrently."""
    w0 = hybrid_wigner(initial).values
    if w0.min() < -POSITIVITY_TOLERANCE:
        raise ValueError("positivity report needs a non-negative initial Wigner function")
    threshold = NEGATIVITY_THRESHOLD * float(w0.max())
    steps = max(1, int(round(horizon / dt)))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [
            pool.submit(_positivity_run, initial, potential, params, dt, steps, record_every, threshold)
            for params in params_set
        ]
        runs = tuple(future.result() for future in futures)
    for run in runs:
        logger.debug(f"kappa={run.kappa:g}: min W over time {run.overall_min:.3g}")
    warnings = tuple(dict.fromkeys(w for run in runs for w in run.warnings))
    return PositivityReport(potential=potential.describe(), runs=runs, warnings=warnings)
