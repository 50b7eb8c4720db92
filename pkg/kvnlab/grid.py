from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from kvnlab.errors import GridError, NonFiniteError, NormalizationError, RepresentationError
import numpy as np, scipy.fft

SQRT_2PI = np.sqrt(2 * np.pi)
MIN_POINTS = 8


class Rep(str, Enum):
    """The four commuting-pair representations of one phase-space degree of freedom."""

    QP = "QP"
    QLp = "QLp"
    LqP = "LqP"
    LqLp = "LqLp"

    @property
    def q_dual(self):
        return self in (Rep.LqP, Rep.LqLp)

    @property
    def p_dual(self):
        return self in (Rep.QLp, Rep.LqLp)

    @property
    def axis_labels(self):
        return ("lambda_q" if self.q_dual else "q", "lambda_p" if self.p_dual else "p")

    @classmethod
    def from_duals(cls, q_dual, p_dual):
        return {(False, False): cls.QP, (False, True): cls.QLp, (True, False): cls.LqP, (True, True): cls.LqLp}[
            (bool(q_dual), bool(p_dual))
        ]


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform periodic grid over (q, p) and the induced (lambda_q, lambda_p) dual grids.

    Coordinates are x_k = x_min + k*dx for k in [0, n), and the dual points are
    lambda_j = (j - n/2)*dlambda with dlambda = 2*pi/(n*dx).
    """

    n_q: int
    n_p: int
    q_min: float
    q_max: float
    p_min: float
    p_max: float

    def __post_init__(self):
        for name in ("n_q", "n_p"):
            n = getattr(self, name)
            if int(n) != n or n < MIN_POINTS or n % 2:
                raise GridError(f"{name} must be an even integer >= {MIN_POINTS}, got {n}")
        if not self.q_max > self.q_min:
            raise GridError(f"q range is inverted or empty: ({self.q_min}, {self.q_max})")
        if not self.p_max > self.p_min:
            raise GridError(f"p range is inverted or empty: ({self.p_min}, {self.p_max})")

    @property
    def shape(self):
        return (self.n_q, self.n_p)

    @property
    def dq(self):
        return (self.q_max - self.q_min) / self.n_q

    @property
    def dp(self):
        return (self.p_max - self.p_min) / self.n_p

    @property
    def dlq(self):
        return 2 * np.pi / (self.n_q * self.dq)

    @property
    def dlp(self):
        return 2 * np.pi / (self.n_p * self.dp)

    @cached_property
    def q(self):
        return self.q_min + self.dq * np.arange(self.n_q)

    @cached_property
    def p(self):
        return self.p_min + self.dp * np.arange(self.n_p)

    @cached_property
    def lq(self):
        return self.dlq * (np.arange(self.n_q) - self.n_q // 2)

    @cached_property
    def lp(self):
        return self.dlp * (np.arange(self.n_p) - self.n_p // 2)

    def axes(self, rep):
        return (self.lq if rep.q_dual else self.q, self.lp if rep.p_dual else self.p)

    def mesh(self, rep):
        """Broadcastable column/row coordinate arrays for the given representation."""
        first, second = self.axes(rep)
        return first[:, None], second[None, :]

    def cell(self, rep):
        return (self.dlq if rep.q_dual else self.dq) * (self.dlp if rep.p_dual else self.dp)

    def as_dict(self):
        return {
            "n_q": self.n_q,
            "n_p": self.n_p,
            "q_min": self.q_min,
            "q_max": self.q_max,
            "p_min": self.p_min,
            "p_max": self.p_max,
        }

    # ------------------------ Per-axis transform factors ------------------------ #

    @cached_property
    def _q_factors(self):
        return _axis_factors(self.n_q, self.q_min, self.dq, self.lq)

    @cached_property
    def _p_factors(self):
        return _axis_factors(self.n_p, self.p_min, self.dp, self.lp)

    def factors(self, axis):
        return self._q_factors if axis == 0 else self._p_factors


def _axis_factors(n, x_min, dx, lam):
    parity = np.where(np.arange(n) % 2, -1.0, 1.0)
    dlam = 2 * np.pi / (n * dx)
    forward = (dx / SQRT_2PI) * np.exp(-1j * x_min * lam)
    inverse = np.exp(1j * x_min * lam)
    return parity, forward, inverse, dlam / SQRT_2PI


def make_grid(n_q, n_p, q_range, p_range):
    (q_min, q_max), (p_min, p_max) = q_range, p_range
    return PhaseGrid(int(n_q), int(n_p), float(q_min), float(q_max), float(p_min), float(p_max))


# ---------------------------------------------------------------------------- #
#                                   KvN states                                 #
# ---------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class KvnState:
    """Complex amplitude on a PhaseGrid, tagged with its active representation.

    The first axis is the q-like coordinate of the representation, the second the p-like one.
    """

    grid: PhaseGrid
    rep: Rep
    amp: np.ndarray
    flags: tuple = ()

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=np.complex128)
        if amp.shape != self.grid.shape:
            raise GridError(f"amplitude shape {amp.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(amp)):
            raise NonFiniteError("state amplitude contains NaN or Inf")
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "rep", Rep(self.rep))

    def with_amp(self, amp, rep=None, flags=None):
        rep = self.rep if rep is None else rep
        return replace(self, amp=amp, rep=rep, flags=self.flags if flags is None else flags)

    def flagged(self, *flags):
        return replace(self, flags=tuple(dict.fromkeys(self.flags + flags)))

    @property
    def cell(self):
        return self.grid.cell(self.rep)


def _check_compatible(a, b):
    if a.grid != b.grid:
        raise RepresentationError("states live on different grids")
    if a.rep != b.rep:
        raise RepresentationError(f"representation mismatch: {a.rep.value} vs {b.rep.value}")


def inner_product(a, b):
    _check_compatible(a, b)
    return complex(np.vdot(a.amp, b.amp) * a.cell)


def norm(s):
    return float(np.sqrt(np.sum(np.abs(s.amp) ** 2) * s.cell))


def normalized(s):
    n = norm(s)
    if n == 0:
        raise NormalizationError("cannot normalize a zero state")
    return s.with_amp(s.amp / n)


def fidelity(a, b):
    return abs(inner_product(a, b)) ** 2 / (norm(a) ** 2 * norm(b) ** 2)


# ---------------------------------------------------------------------------- #
#                            Representation changes                            #
# ---------------------------------------------------------------------------- #


def _expand(vector, axis):
    return vector[:, None] if axis == 0 else vector[None, :]


def to_dual(amp, grid, axis):
    """x -> lambda along one axis: (dx/sqrt(2 pi)) * sum_k exp(-i x_k lambda_j) a_k."""
    parity, forward, _, _ = grid.factors(axis)
    out = scipy.fft.fft(amp * _expand(parity, axis), axis=axis)
    return out * _expand(forward, axis)


def from_dual(amp, grid, axis):
    """lambda -> x along one axis, the exact inverse of to_dual."""
    parity, _, inverse, scale = grid.factors(axis)
    out = scipy.fft.ifft(amp * _expand(inverse, axis), axis=axis, norm="forward")
    return out * _expand(scale * parity, axis)


def transform_amp(amp, grid, source, target):
    if source.q_dual != target.q_dual:
        amp = to_dual(amp, grid, 0) if target.q_dual else from_dual(amp, grid, 0)
    if source.p_dual != target.p_dual:
        amp = to_dual(amp, grid, 1) if target.p_dual else from_dual(amp, grid, 1)
    return amp


def to_representation(s, target):
    target = Rep(target)
    if target == s.rep:
        return s
    return s.with_amp(transform_amp(s.amp, s.grid, s.rep, target), rep=target)


# ---------------------------------------------------------------------------- #
#                         Multiplication-operator tools                        #
# ---------------------------------------------------------------------------- #


def expectation(s, f, tolerance=1e-8):
    """<f> against rho = |amp|^2 for a multiplication operator f of the active coordinates.

    `f` is an array broadcastable to the grid shape or a callable of the two mesh arrays.
    """
    norm_sq = norm(s) ** 2
    if abs(norm_sq - 1) > tolerance:
        raise NormalizationError(f"expectation needs a normalized state, norm^2 = {norm_sq:.12g}")
    values = f(*s.grid.mesh(s.rep)) if callable(f) else f
    return float(np.sum(np.real(values) * np.abs(s.amp) ** 2) * s.cell)


def spectral_derivative(s, axis):
    """d/dx along `axis` of the active coordinate, evaluated spectrally; same representation out."""
    grid = s.grid
    dual = s.rep.q_dual if axis == 0 else s.rep.p_dual
    other = Rep.from_duals(s.rep.q_dual ^ (axis == 0), s.rep.p_dual ^ (axis == 1))
    moved = transform_amp(s.amp, grid, s.rep, other)
    if dual:
        # d/dlambda is -i x in the conjugate coordinate
        coordinate = grid.q if axis == 0 else grid.p
        moved = moved * _expand(-1j * coordinate, axis)
    else:
        lam = grid.lq if axis == 0 else grid.lp
        moved = moved * _expand(1j * lam, axis)
    return s.with_amp(transform_amp(moved, grid, other, s.rep))


def spectral_shift(s, shift_q=0.0, shift_p=0.0):
    """Band-limited translation: returns psi(q - shift_q, p - shift_p) in the caller's representation."""
    dual = to_representation(s, Rep.LqLp)
    grid = s.grid
    phase = np.exp(-1j * (grid.lq[:, None] * shift_q + grid.lp[None, :] * shift_p))
    return to_representation(dual.with_amp(dual.amp * phase), s.rep)


def gaussian_amp(grid, q0=0.0, p0=0.0, width_q=1.0, width_p=1.0):
    q, p = grid.mesh(Rep.QP)
    return np.exp(-((q - q0) ** 2) / (2 * width_q**2) - (p - p0) ** 2 / (2 * width_p**2))


def gaussian_state(grid, q0=0.0, p0=0.0, width_q=1.0, width_p=1.0, phase=None, normalize=True):
    """Gaussian amplitude exp(-(q-q0)^2/(2 wq^2) - (p-p0)^2/(2 wp^2)) in QP, times exp(i S) if given.

    `phase` is an array or a callable S(q, p).
    """
    amp = gaussian_amp(grid, q0, p0, width_q, width_p).astype(np.complex128)
    if phase is not None:
        values = phase(*grid.mesh(Rep.QP)) if callable(phase) else phase
        amp = amp * np.exp(1j * values)
    state = KvnState(grid, Rep.QP, amp)
    return normalized(state) if normalize else state
