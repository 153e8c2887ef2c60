import logging
import sys

logger = logging.getLogger(__name__)

class NavqtError(Exception):
  """Base class for every error raised by navqt."""

class InvalidParameterError(NavqtError, ValueError):
  """An argument is outside its documented range."""

class DimensionError(NavqtError, ValueError):
  """Operators or states of mismatched size were combined."""

class NonHermitianError(NavqtError, ValueError):
  """A matrix expected to be Hermitian is not, beyond tolerance."""

class NonPhysicalStateError(NavqtError, ValueError):
  """A state has eigenvalues too negative to be roundoff."""

class ConfigError(NavqtError, ValueError):
  """An experiment configuration is invalid or unknown."""

class GuardError(NavqtError, MemoryError):
  """A dense operation was requested beyond its size guard."""

class NonFiniteGradientError(NavqtError, ArithmeticError):
  """Non Finite Gradient

  Raised when a training step produces a NaN or infinite value. The
  diagnostic is kept on the exception so the caller can log or persist it.

  Args:
    message: Human readable summary.
    diagnostic: Iteration, parameters and gradient values at failure.
  """
  def __init__(self, message: str, diagnostic: dict = None) -> None:
    super().__init__(message)
    self.diagnostic = diagnostic or {}

def fail(message):
  """Log an error and exit the process with status 1."""
  logger.error("%s", message)
  sys.exit(1)
