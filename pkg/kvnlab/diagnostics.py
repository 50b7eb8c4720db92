from dataclasses import dataclass
from kvnlab.errors import RepresentationError, TrajectoryError
from kvnlab.grid import Rep, to_representation, transform_amp
from kvnlab.helpers import logger
import numpy as np

DEFAULT_PHASE_FLOOR = 1e-6
# relative tolerance on the spacing of recorded times
UNIFORM_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class PolarDecomposition:
    rho: np.ndarray
    S: np.ndarray
    mask: np.ndarray

    @property
    def empty(self):
        return not bool(np.any(self.mask))


def density(s):
    return np.abs(s.amp) ** 2


def polar(s, phase_floor=DEFAULT_PHASE_FLOOR):
    """rho and an unwrapped phase S with amp = sqrt(rho) exp(i S) wherever rho > phase_floor * max(rho).

    Phases are unwrapped along the first axis, then every column is offset by a multiple of 2 pi so that
    it agrees with the row of maximum density. S is NaN outside the mask.
    """
    if not phase_floor > 0:
        raise ValueError(f"phase_floor must be positive, got {phase_floor}")
    rho = density(s)
    peak = rho.max()
    if peak == 0:
        raise ValueError("polar decomposition of an all-zero state")
    mask = rho > phase_floor * peak
    S = np.unwrap(np.angle(s.amp), axis=0)
    reference_row = int(np.argmax(rho.max(axis=1)))
    reference = np.unwrap(S[reference_row])
    S = S + 2 * np.pi * np.round((reference - S[reference_row]) / (2 * np.pi))[None, :]
    if not np.any(mask):
        logger.warning(f"Phase mask is empty at phase_floor={phase_floor:g}")
    return PolarDecomposition(rho=rho, S=np.where(mask, S, np.nan), mask=mask)


def current_qlp(s):
    """J = i (psi* D psi - (D psi)* psi) with D = d/dq d/dlambda_p, for a state in (q, lambda_p).

    D is the multiplication by lambda_q * p in (lambda_q, p).
    """
    if s.rep != Rep.QLp:
        raise RepresentationError(f"current_qlp needs a QLp state, got {s.rep.value}")
    grid = s.grid
    moved = transform_amp(s.amp, grid, Rep.QLp, Rep.LqP) * (grid.lq[:, None] * grid.p[None, :])
    d_psi = transform_amp(moved, grid, Rep.LqP, Rep.QLp)
    cross = np.conj(s.amp) * d_psi
    current = 1j * (cross - np.conj(cross))
    residue = np.max(np.abs(current.imag)) if current.size else 0.0
    if residue > 1e-12 * max(1.0, np.max(np.abs(current.real))):
        logger.warning(f"Current has an imaginary residue of {residue:.3g}")
    return current.real


@dataclass(frozen=True)
class ContinuityReport:
    """Per-snapshot |d rho/dt + J| maxima; the first and last snapshots have no central difference."""

    times: tuple
    per_snapshot: tuple
    max_residual: float


def uniform_interval(times):
    if len(times) < 3:
        raise TrajectoryError(f"need at least 3 snapshots, got {len(times)}")
    steps = np.diff(np.asarray(times, dtype=float))
    interval = steps[0]
    if interval <= 0 or np.max(np.abs(steps - interval)) > UNIFORM_TOLERANCE * abs(interval):
        raise TrajectoryError("snapshots must be recorded at a uniform, increasing interval")
    return float(interval)


def continuity_residual(trajectory, potential=None):
    """L-infinity residual of d rho/dt + J = 0 in the (q, lambda_p) representation.

    Time derivatives are central differences between neighbouring snapshots. The potential sub-flow is
    a pure phase in (q, lambda_p), so `potential` does not enter the residual; it is accepted so every
    trajectory diagnostic has the same call shape.
    """
    states = list(trajectory.states)
    interval = uniform_interval(trajectory.times)
    densities = [density(to_representation(s, Rep.QLp)) for s in states]
    per_snapshot = [float("nan")]
    for n in range(1, len(states) - 1):
        d_rho = (densities[n + 1] - densities[n - 1]) / (2 * interval)
        current = current_qlp(to_representation(states[n], Rep.QLp))
        per_snapshot.append(float(np.max(np.abs(d_rho + current))))
    per_snapshot.append(float("nan"))
    return ContinuityReport(
        times=tuple(trajectory.times), per_snapshot=tuple(per_snapshot), max_residual=max(per_snapshot[1:-1])
    )


def superselect(s):
    """Keep only the positive square root of the density: amp -> |amp|."""
    return s.with_amp(np.abs(s.amp).astype(np.complex128))
