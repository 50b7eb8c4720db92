from dataclasses import dataclass
from enum import Enum
from kvnlab.errors import UnsupportedPotentialError
import numpy as np


class PotentialKind(str, Enum):
    FREE = "free"
    HARMONIC = "harmonic"
    QUARTIC = "quartic"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """V(q) for H = p^2/2 + V(q), with its derivative.

    Harmonic is V = omega^2 q^2 / 2 and Quartic is V = a q^2/2 + b q^4/4. Tabulated potentials carry
    V and V' sampled on the q-axis of one grid and cannot be evaluated anywhere else.
    """

    kind: PotentialKind
    omega: float = 1.0
    a: float = 0.0
    b: float = 0.0
    values: np.ndarray = None
    derivatives: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if self.kind == PotentialKind.HARMONIC and not self.omega > 0:
            raise ValueError(f"harmonic omega must be positive, got {self.omega}")
        if self.kind == PotentialKind.QUARTIC and not self.b > 0:
            raise ValueError(f"quartic b must be positive, got {self.b}")
        if self.kind == PotentialKind.TABULATED:
            if self.values is None or self.derivatives is None:
                raise ValueError("tabulated potentials need both V and V' arrays")
            values = np.asarray(self.values, dtype=float)
            derivatives = np.asarray(self.derivatives, dtype=float)
            if values.ndim != 1 or values.shape != derivatives.shape:
                raise ValueError("tabulated V and V' must be 1-D arrays of equal length")
            if not (np.all(np.isfinite(values)) and np.all(np.isfinite(derivatives))):
                raise ValueError("tabulated V and V' must be finite")
            object.__setattr__(self, "values", values)
            object.__setattr__(self, "derivatives", derivatives)

    # ------------------------------- Constructors ------------------------------- #

    @classmethod
    def free(cls):
        return cls(PotentialKind.FREE)

    @classmethod
    def harmonic(cls, omega=1.0):
        return cls(PotentialKind.HARMONIC, omega=float(omega))

    @classmethod
    def quartic(cls, a, b):
        return cls(PotentialKind.QUARTIC, a=float(a), b=float(b))

    @classmethod
    def tabulated(cls, values, derivatives):
        return cls(PotentialKind.TABULATED, values=values, derivatives=derivatives)

    # -------------------------------- Evaluation -------------------------------- #

    @property
    def is_analytic(self):
        return self.kind != PotentialKind.TABULATED

    @property
    def is_quadratic(self):
        return self.kind in (PotentialKind.FREE, PotentialKind.HARMONIC)

    def value(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == PotentialKind.FREE:
            return np.zeros_like(q)
        if self.kind == PotentialKind.HARMONIC:
            return 0.5 * self.omega**2 * q**2
        if self.kind == PotentialKind.QUARTIC:
            return 0.5 * self.a * q**2 + 0.25 * self.b * q**4
        raise UnsupportedPotentialError("tabulated potentials can only be evaluated on their own grid")

    def derivative(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == PotentialKind.FREE:
            return np.zeros_like(q)
        if self.kind == PotentialKind.HARMONIC:
            return self.omega**2 * q
        if self.kind == PotentialKind.QUARTIC:
            return self.a * q + self.b * q**3
        raise UnsupportedPotentialError("tabulated potentials can only be evaluated on their own grid")

    def split_difference(self, q, eps):
        """U(q - eps) - U(q + eps), expanded so that it stays accurate for tiny eps."""
        q, eps = np.asarray(q, dtype=float), np.asarray(eps, dtype=float)
        if self.kind == PotentialKind.FREE:
            return np.zeros(np.broadcast(q, eps).shape)
        if self.kind == PotentialKind.HARMONIC:
            return -2 * self.omega**2 * q * eps
        if self.kind == PotentialKind.QUARTIC:
            return -2 * q * eps * (self.a + self.b * q**2 + self.b * eps**2)
        raise UnsupportedPotentialError("tabulated potentials cannot be evaluated at shifted arguments")

    def _check_table(self, n):
        if self.values.shape[0] != n:
            raise ValueError(f"tabulated potential has {self.values.shape[0]} points, the q-axis has {n}")

    def value_on(self, q_axis):
        """V sampled on a q-axis; tabulated potentials return their table."""
        if self.kind == PotentialKind.TABULATED:
            self._check_table(len(q_axis))
            return self.values
        return self.value(q_axis)

    def derivative_on(self, q_axis):
        if self.kind == PotentialKind.TABULATED:
            self._check_table(len(q_axis))
            return self.derivatives
        return self.derivative(q_axis)

    def describe(self):
        if self.kind == PotentialKind.HARMONIC:
            return f"harmonic(omega={self.omega:g})"
        if self.kind == PotentialKind.QUARTIC:
            return f"quartic(a={self.a:g}, b={self.b:g})"
        return self.kind.value
