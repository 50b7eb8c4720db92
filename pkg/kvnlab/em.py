from dataclasses import dataclass
from functools import cached_property
from kvnlab.diagnostics import ContinuityReport, uniform_interval
from kvnlab.errors import GridError, NonFiniteError
from kvnlab.grid import gaussian_state
from kvnlab.helpers import logger
from kvnlab.potentials import PotentialSpec
from kvnlab.propagator import Trajectory
import numpy as np, scipy.fft

# Field layout per grid point: (E_x, E_y, E_z, -B_x, -B_y, -B_z)
N_COMPONENTS = 6
POLARIZATION_TOLERANCE = 1e-12

# ---------------------------------------------------------------------------- #
#                                  Beta matrices                               #
# ---------------------------------------------------------------------------- #

_BETA_X = np.array(
    [
        [0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, -1],
        [0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0],
        [0, -1, 0, 0, 0, 0],
    ],
    dtype=float,
)
_BETA_Y = np.array(
    [
        [0, 0, 0, 0, 0, 1],
        [0, 0, 0, 0, 0, 0],
        [0, 0, 0, -1, 0, 0],
        [0, 0, -1, 0, 0, 0],
        [0, 0, 0, 0, 0, 0],
        [1, 0, 0, 0, 0, 0],
    ],
    dtype=float,
)
_BETA_Z = np.array(
    [
        [0, 0, 0, 0, -1, 0],
        [0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, 0],
        [-1, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0],
    ],
    dtype=float,
)


@dataclass(frozen=True, eq=False)
class BetaMatrices:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __iter__(self):
        return iter((self.x, self.y, self.z))

    def __getitem__(self, index):
        return (self.x, self.y, self.z)[index]


def beta_matrices():
    """The three real 6x6 matrices with d psi/dt = -sum_i beta_i d_i psi for psi = (E, -B)."""
    return BetaMatrices(_BETA_X.copy(), _BETA_Y.copy(), _BETA_Z.copy())


def levi_civita():
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1
        eps[i, k, j] = -1
    return eps


def spin_generators():
    """Sigma_k = diag(L_k, L_k) with (L_k)_ij = -epsilon_kij, the algebra the beta commutators close on."""
    eps = levi_civita()
    return [np.kron(np.eye(2), -eps[k]) for k in range(3)]


def commutator(a, b):
    return a @ b - b @ a


def structure_sign():
    """The sign s in [beta_i, beta_j] = s epsilon_ijk Sigma_k, found by brute force on (x, y)."""
    betas, sigmas = beta_matrices(), spin_generators()
    bracket = commutator(betas.x, betas.y)
    for sign in (1, -1):
        if np.array_equal(bracket, sign * sigmas[2]):
            return sign
    raise ArithmeticError("[beta_x, beta_y] is not proportional to Sigma_z")


# ---------------------------------------------------------------------------- #
#                               Grid and field state                           #
# ---------------------------------------------------------------------------- #


@dataclass(frozen=True)
class EmGrid:
    """Periodic 1-D grid on [0, length) along the propagation axis z."""

    n_z: int
    length: float

    def __post_init__(self):
        if int(self.n_z) != self.n_z or self.n_z < 8 or self.n_z % 2:
            raise GridError(f"n_z must be an even integer >= 8, got {self.n_z}")
        if not self.length > 0:
            raise GridError(f"length must be positive, got {self.length}")

    @property
    def dz(self):
        return self.length / self.n_z

    @cached_property
    def z(self):
        return self.dz * np.arange(self.n_z)

    @cached_property
    def k(self):
        return 2 * np.pi * scipy.fft.fftfreq(self.n_z, d=self.dz)

    def wavenumber(self, k_index):
        if not 0 <= k_index < self.n_z // 2:
            raise GridError(f"mode index {k_index} is outside [0, {self.n_z // 2})")
        return 2 * np.pi * k_index / self.length

    def as_dict(self):
        return {"n_z": self.n_z, "length": self.length}


def em_grid(n_z, length):
    return EmGrid(int(n_z), float(length))


@dataclass(frozen=True, eq=False)
class EmState:
    grid: EmGrid
    field: np.ndarray

    def __post_init__(self):
        field = np.asarray(self.field, dtype=np.complex128)
        if field.shape != (N_COMPONENTS, self.grid.n_z):
            raise GridError(
                f"EM field must have shape (6, {self.grid.n_z}) for 1-D propagation along z, got {field.shape}"
            )
        if not np.all(np.isfinite(field)):
            raise NonFiniteError("EM field contains NaN or Inf")
        object.__setattr__(self, "field", field)

    @property
    def E(self):
        return self.field[:3]

    @property
    def B(self):
        return -self.field[3:]

    @classmethod
    def from_fields(cls, grid, E, B):
        """Build from E and B; a plain 3-vector means a uniform field."""

        def spread(values):
            values = np.asarray(values, dtype=np.complex128)
            if values.ndim == 1:
                values = values[:, None]
            return np.broadcast_to(values, (3, grid.n_z))

        return cls(grid, np.concatenate([spread(E), -spread(B)]))


# ---------------------------------------------------------------------------- #
#                                   Time stepping                              #
# ---------------------------------------------------------------------------- #


class EmStepper:
    """Exact per-mode propagator exp(-i k t beta_z) = I - i sin(kt) beta_z + (cos(kt) - 1) beta_z^2.

    beta_z has eigenvalues 0 and +-1, so beta_z^3 = beta_z and the series closes. Every row of beta_z holds
    a single +-1, so applying it to a spectrum is exact.
    """

    def __init__(self, grid, dt):
        if not np.isfinite(dt):
            raise NonFiniteError(f"time step must be finite, got {dt}")
        self.grid = grid
        self.dt = dt

    def spectrum(self, field):
        return scipy.fft.fft(field, axis=1)

    def rotate(self, spectrum, t):
        angle = t * self.grid.k[None, :]
        mixed = _BETA_Z @ spectrum
        return spectrum - 1j * np.sin(angle) * mixed + (np.cos(angle) - 1) * (_BETA_Z @ mixed)

    def field_at(self, spectrum, t):
        return scipy.fft.ifft(self.rotate(spectrum, t), axis=1)

    def step_field(self, field):
        spectrum = self.spectrum(field)
        rotated = self.rotate(spectrum, self.dt)
        # the norm of every Fourier mode is invariant; restore it after the rotation
        before = np.sum(np.abs(spectrum) ** 2, axis=0)
        after = np.sum(np.abs(rotated) ** 2, axis=0)
        scale = np.sqrt(np.divide(before, after, out=np.ones_like(before), where=after > 0))
        return scipy.fft.ifft(rotated * scale[None, :], axis=1)

    def step(self, s):
        return EmState(s.grid, self.step_field(s.field))

    def run(self, s, steps, record_every=1):
        """Record every `record_every` steps, each propagated directly from t = 0 so rounding never accumulates."""
        logger.debug(f"EM propagation over {steps} steps of dt={self.dt:g}")
        trajectory = Trajectory(dt_record=self.dt * record_every)
        spectrum = self.spectrum(s.field)
        trajectory.times.append(0.0)
        trajectory.states.append(s)
        for n in range(record_every, steps + 1, record_every):
            trajectory.times.append(n * self.dt)
            trajectory.states.append(EmState(s.grid, self.field_at(spectrum, n * self.dt)))
        if steps % record_every == 0:
            trajectory.final = trajectory.states[-1]
        else:
            trajectory.final = EmState(s.grid, self.field_at(spectrum, steps * self.dt))
        return trajectory


def em_step(s, dt):
    return EmStepper(s.grid, dt).step(s)


def em_evolve(s, dt, steps, record_every=1):
    return EmStepper(s.grid, dt).run(s, steps, record_every)


def _curl_rhs(field, k):
    """-beta_z d/dz psi with a spectral derivative."""
    derivative = scipy.fft.ifft(1j * k[None, :] * scipy.fft.fft(field, axis=1), axis=1)
    return -_BETA_Z @ derivative


def maxwell_fd_oracle(s, dt, steps):
    """Classical RK4 on E' = curl B, B' = -curl E with spectral curls; a test oracle for em_step."""
    field, k = s.field, s.grid.k
    for _ in range(steps):
        k1 = _curl_rhs(field, k)
        k2 = _curl_rhs(field + 0.5 * dt * k1, k)
        k3 = _curl_rhs(field + 0.5 * dt * k2, k)
        k4 = _curl_rhs(field + dt * k3, k)
        field = field + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return EmState(s.grid, field)


# ---------------------------------------------------------------------------- #
#                                   Diagnostics                                #
# ---------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class EmDiagnostics:
    """Energy, flux psi^dagger beta_i psi (= 2 Re(E* x B)) and divergence residual norms."""

    energy: float
    energy_density: np.ndarray
    poynting: np.ndarray
    div_E: float
    div_B: float


def energy_density(s):
    return np.sum(np.abs(s.field) ** 2, axis=0)


def poynting(s):
    betas = beta_matrices()
    conj = np.conj(s.field)
    return np.array([np.einsum("az,ab,bz->z", conj, beta, s.field).real for beta in betas])


def _divergence_norm(component, grid):
    derivative = scipy.fft.ifft(1j * grid.k * scipy.fft.fft(component))
    return float(np.sqrt(np.sum(np.abs(derivative) ** 2) * grid.dz))


def diagnostics(s):
    rho = energy_density(s)
    return EmDiagnostics(
        energy=float(np.sum(rho) * s.grid.dz),
        energy_density=rho,
        poynting=poynting(s),
        div_E=_divergence_norm(s.E[2], s.grid),
        div_B=_divergence_norm(s.B[2], s.grid),
    )


def _dz(values, grid):
    return scipy.fft.ifft(1j * grid.k * scipy.fft.fft(values)).real


def poynting_continuity_residual(trajectory):
    """Per-snapshot L-infinity of d rho/dt + d S_z/dz, with central differences in time."""
    states = list(trajectory.states)
    interval = uniform_interval(trajectory.times)
    densities = [energy_density(s) for s in states]
    per_snapshot = [float("nan")]
    for n in range(1, len(states) - 1):
        d_rho = (densities[n + 1] - densities[n - 1]) / (2 * interval)
        flux = poynting(states[n])[2]
        per_snapshot.append(float(np.max(np.abs(d_rho + _dz(flux, states[n].grid)))))
    per_snapshot.append(float("nan"))
    return ContinuityReport(
        times=tuple(trajectory.times), per_snapshot=tuple(per_snapshot), max_residual=max(per_snapshot[1:-1])
    )


# ---------------------------------------------------------------------------- #
#                        Single modes and the KvN oscillator                   #
# ---------------------------------------------------------------------------- #

X_HAT = (1.0, 0.0, 0.0)
Y_HAT = (0.0, 1.0, 0.0)
Z_HAT = (0.0, 0.0, 1.0)


class LongitudinalModeError(ValueError):
    pass


@dataclass(frozen=True)
class OscillatorMode:
    """A standing transverse mode seen as a harmonic oscillator with q = B amplitude, p = k * E amplitude."""

    q: float
    p: float
    k: float
    potential: PotentialSpec

    @property
    def energy(self):
        return 0.5 * self.p**2 + 0.5 * (self.k * self.q) ** 2

    def at(self, t):
        c, s = np.cos(self.k * t), np.sin(self.k * t)
        return self.q * c + self.p / self.k * s, self.p * c - self.k * self.q * s

    def field_amplitudes(self, t=0.0):
        """(E, B) amplitudes of the standing mode at time t."""
        q, p = self.at(t)
        return p / self.k, q


def _unit(vector, name):
    vector = np.asarray(vector, dtype=float)
    size = np.linalg.norm(vector)
    if vector.shape != (3,) or size == 0:
        raise LongitudinalModeError(f"{name} must be a non-zero 3-vector")
    return vector / size


def _orientation(e_pol, b_pol, k_dir):
    e_pol, b_pol, k_dir = _unit(e_pol, "e_pol"), _unit(b_pol, "b_pol"), _unit(k_dir, "k_dir")
    if abs(e_pol @ k_dir) > POLARIZATION_TOLERANCE or abs(b_pol @ k_dir) > POLARIZATION_TOLERANCE:
        raise LongitudinalModeError("mode has a longitudinal field component")
    if abs(e_pol @ b_pol) > POLARIZATION_TOLERANCE:
        raise LongitudinalModeError("E and B polarizations must be orthogonal (E . B = 0)")
    return float(np.sign(np.cross(k_dir, e_pol) @ b_pol))


def mode_to_oscillator(e_amp, b_amp, k=1.0, e_pol=X_HAT, b_pol=Y_HAT, k_dir=Z_HAT):
    """Map the standing mode E = e_pol e cos kz, B = b_pol b sin kz to (q, p) = (b, k e) with omega = k."""
    if not k > 0:
        raise ValueError(f"mode wavenumber must be positive, got {k}")
    orientation = _orientation(e_pol, b_pol, k_dir)
    q = orientation * float(np.real(b_amp))
    p = k * float(np.real(e_amp))
    return OscillatorMode(q=q, p=p, k=float(k), potential=PotentialSpec.harmonic(k))


def mode_kvn_state(phase_grid, mode, width=0.5):
    """Gaussian KvN wave function sitting at the oscillator point of a mode."""
    return gaussian_state(phase_grid, mode.q, mode.p, width, width)


def plane_wave(grid, k_index=1, amplitude=1.0, e_pol=X_HAT):
    """Real travelling wave E = e_pol A cos(kz), B = (z x e_pol) A cos(kz), moving towards +z."""
    e_pol = _unit(e_pol, "e_pol")
    _orientation(e_pol, np.cross(Z_HAT, e_pol), Z_HAT)
    profile = amplitude * np.cos(grid.wavenumber(k_index) * grid.z)
    return EmState.from_fields(grid, e_pol[:, None] * profile, np.cross(Z_HAT, e_pol)[:, None] * profile)


def standing_mode(grid, k_index, e_amp, b_amp, e_pol=X_HAT):
    e_pol = _unit(e_pol, "e_pol")
    _orientation(e_pol, np.cross(Z_HAT, e_pol), Z_HAT)
    k = grid.wavenumber(k_index)
    E = e_pol[:, None] * (e_amp * np.cos(k * grid.z))
    B = np.cross(Z_HAT, e_pol)[:, None] * (b_amp * np.sin(k * grid.z))
    return EmState.from_fields(grid, E, B)


def project_mode(s, k_index, e_pol=X_HAT):
    """(e, b) amplitudes of the standing mode with the given index and E polarization."""
    if k_index < 1:
        raise GridError("standing-mode projection needs k_index >= 1")
    e_pol = _unit(e_pol, "e_pol")
    b_pol = np.cross(Z_HAT, e_pol)
    k = s.grid.wavenumber(k_index)
    weight = 2 * s.grid.dz / s.grid.length
    e = np.sum((e_pol @ s.E) * np.cos(k * s.grid.z)) * weight
    b = np.sum((b_pol @ s.B) * np.sin(k * s.grid.z)) * weight
    return complex(e), complex(b)


def random_transverse_field(grid, n_modes=4, seed=0):
    """Real band-limited field with E_z = B_z = 0, so both divergences vanish."""
    rng = np.random.default_rng(seed)
    E = np.zeros((3, grid.n_z))
    B = np.zeros((3, grid.n_z))
    for k_index in range(1, n_modes + 1):
        k = grid.wavenumber(k_index)
        for target in (E, B):
            for component in (0, 1):
                a, b = rng.normal(size=2)
                target[component] += a * np.cos(k * grid.z) + b * np.sin(k * grid.z)
    return EmState.from_fields(grid, E, B)
