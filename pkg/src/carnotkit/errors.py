"""Exception hierarchy shared by the toolkit."""


class CarnotError(Exception):
    """Base class for toolkit errors."""


class StructureError(CarnotError, ValueError):
    """Inconsistent group structure, dimensions or block layout."""


class DomainError(CarnotError, ValueError):
    """Argument outside the domain of an operation."""


class CalibrationError(CarnotError, RuntimeError):
    pass


class SamplingError(CarnotError, RuntimeError):
    pass


class RangeError(CarnotError, ValueError):
    """A numeric supremum or integral escaped the tabulated range."""


class UnsupportedError(CarnotError, NotImplementedError):
    pass
