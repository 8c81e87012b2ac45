"""Exception types shared across the package."""


class DelayChainError(Exception):
    """Base class for all package errors."""


class DataError(DelayChainError):
    """Malformed or out-of-contract input data (CSV parse, label range)."""


class CapacityError(DelayChainError):
    """A class or pool has too few members for the requested operation."""


class CalibrationError(DelayChainError):
    """A neuron failed the calibration protocol (no usable response)."""


class PoolExhaustedError(CalibrationError):
    """Not enough usable neurons survived calibration."""


class BuildError(DelayChainError):
    """Network wiring violates a hardware-style capacity constraint."""
