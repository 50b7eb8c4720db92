from dataclasses import dataclass, field
from kvnlab.errors import NonFiniteError, UnsupportedPotentialError
from kvnlab.grid import Rep, to_representation, transform_amp
from kvnlab.helpers import logger
from kvnlab.potentials import PotentialKind
import math, numpy as np

ALIASING_FLAG = "aliasing"


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    steps: int
    record_every: int = 1
    splitting: str = "strang"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError(f"record_every must be a positive integer, got {self.record_every}")
        if self.splitting != "strang":
            raise ValueError(f"unknown splitting '{self.splitting}', only 'strang' is implemented")


@dataclass
class Trajectory:
    """Recorded snapshots at a uniform interval, plus the state after the last step."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    final: object = None
    dt_record: float = 0.0
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.states)


# ---------------------------------------------------------------------------- #
#                          Split-operator Strang stepper                        #
# ---------------------------------------------------------------------------- #


class SplitOperatorStepper:
    """Strang step whose two sub-flows are pure phases.

    The potential half-step is diagonal in (q, lambda_p) and the kinetic step in (lambda_q, p), so the
    stepper keeps the amplitude in QLp between steps and only changes representation at the edges.
    """

    def __init__(self, grid, dt, half_potential, kinetic, flags=()):
        self.grid = grid
        self.dt = dt
        self.half_potential = half_potential
        self.kinetic = kinetic
        self.flags = tuple(flags)

    @classmethod
    def liouville(cls, grid, potential, dt):
        force = potential.derivative_on(grid.q)
        half_potential = np.exp(0.5j * dt * force[:, None] * grid.lp[None, :])
        kinetic = kinetic_phase(grid, dt)
        flags = aliasing_flags(grid, dt, np.max(np.abs(force)) * np.max(np.abs(grid.lp)))
        return cls(grid, dt, half_potential, kinetic, flags)

    def step_amp(self, amp):
        """One Strang step of a QLp amplitude."""
        amp = amp * self.half_potential
        amp = transform_amp(amp, self.grid, Rep.QLp, Rep.LqP) * self.kinetic
        amp = transform_amp(amp, self.grid, Rep.LqP, Rep.QLp) * self.half_potential
        if not np.all(np.isfinite(amp)):
            raise NonFiniteError("non-finite amplitude produced during stepping")
        return amp

    def step(self, s):
        amp = self.step_amp(to_representation(s, Rep.QLp).amp)
        out = s.with_amp(transform_amp(amp, s.grid, Rep.QLp, s.rep))
        return out.flagged(*self.flags) if self.flags else out

    def run(self, s, steps, record_every):
        logger.debug(f"Stepping {steps} steps of dt={self.dt:g}, recording every {record_every}")
        trajectory = Trajectory(dt_record=self.dt * record_every)
        amp = to_representation(s, Rep.QLp).amp

        def snapshot(amp):
            out = s.with_amp(transform_amp(amp, s.grid, Rep.QLp, s.rep))
            return out.flagged(*self.flags) if self.flags else out

        trajectory.times.append(0.0)
        trajectory.states.append(s.flagged(*self.flags) if self.flags else s)
        for n in range(1, steps + 1):
            amp = self.step_amp(amp)
            if n % record_every == 0:
                trajectory.times.append(n * self.dt)
                trajectory.states.append(snapshot(amp))
        trajectory.final = trajectory.states[-1] if steps % record_every == 0 else snapshot(amp)
        if ALIASING_FLAG in self.flags:
            trajectory.warnings.append(
                f"per-step phase increments exceed pi for dt={self.dt:g}; reduce dt or refine the grid"
            )
        return trajectory


def kinetic_phase(grid, dt):
    """exp(-i dt p lambda_q) laid out in LqP."""
    return np.exp(-1j * dt * grid.lq[:, None] * grid.p[None, :])


def aliasing_flags(grid, dt, potential_increment):
    kinetic_increment = abs(dt) * np.max(np.abs(grid.p)) * np.max(np.abs(grid.lq))
    potential_increment = abs(dt) * potential_increment
    if max(kinetic_increment, potential_increment) > np.pi:
        logger.warning(
            f"Anti-aliasing guard: per-step phase increments (kinetic {kinetic_increment:.3g}, "
            f"potential {potential_increment:.3g}) exceed pi"
        )
        return (ALIASING_FLAG,)
    return ()


def liouville_step(s, potential, dt):
    """One Strang step of the classical Liouvillian for H = p^2/2 + V(q)."""
    if dt == 0:
        return s
    return SplitOperatorStepper.liouville(s.grid, potential, dt).step(s)


def evolve(s, potential, cfg):
    stepper = SplitOperatorStepper.liouville(s.grid, potential, cfg.dt)
    return stepper.run(s, cfg.steps, cfg.record_every)


# ---------------------------------------------------------------------------- #
#                           Method-of-characteristics oracle                   #
# ---------------------------------------------------------------------------- #


def _shift_q_by_momentum(amp, grid, factor):
    """f(q, p) -> f(q - factor * p, p), exact per p-column."""
    amp = transform_amp(amp, grid, Rep.QP, Rep.LqP)
    amp = amp * np.exp(-1j * factor * grid.lq[:, None] * grid.p[None, :])
    return transform_amp(amp, grid, Rep.LqP, Rep.QP)


def _shift_p_by_position(amp, grid, factor):
    """f(q, p) -> f(q, p - factor * q), exact per q-row."""
    amp = transform_amp(amp, grid, Rep.QP, Rep.QLp)
    amp = amp * np.exp(-1j * factor * grid.q[:, None] * grid.lp[None, :])
    return transform_amp(amp, grid, Rep.QLp, Rep.QP)


def characteristics_oracle(s0, potential, t):
    """psi(q, p, t) = psi0(Phi_{-t}(q, p)) for the closed-form flows of Free and Harmonic potentials.

    The harmonic rotation is applied as three shears, each an exact band-limited shift, with the angle
    split into pieces no larger than a quarter turn.
    """
    grid = s0.grid
    amp = to_representation(s0, Rep.QP).amp
    if potential.kind == PotentialKind.FREE:
        amp = _shift_q_by_momentum(amp, grid, t)
    elif potential.kind == PotentialKind.HARMONIC:
        omega = potential.omega
        theta = omega * t
        pieces = max(1, math.ceil(abs(theta) / (np.pi / 2)))
        piece = theta / pieces
        a, b = -math.tan(piece / 2), math.sin(piece)
        for _ in range(pieces):
            amp = _shift_q_by_momentum(amp, grid, -a / omega)
            amp = _shift_p_by_position(amp, grid, -omega * b)
            amp = _shift_q_by_momentum(amp, grid, -a / omega)
    else:
        raise UnsupportedPotentialError(f"no closed-form flow for {potential.describe()}")
    return s0.with_amp(transform_amp(amp, grid, Rep.QP, s0.rep))
