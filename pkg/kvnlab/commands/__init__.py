from .plot import plot
from .run import run
from .selftest import selftest
from .validate import validate

__all__ = ["plot", "run", "selftest", "validate"]
