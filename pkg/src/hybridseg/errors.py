"""Exception hierarchy shared by every module."""


class HybridSegError(Exception):
    """Base class for all library errors."""


class ShapeError(HybridSegError, ValueError):
    pass


class NumericsError(HybridSegError, ArithmeticError):
    """A NaN or Inf appeared where finite values are required."""


class GraphError(HybridSegError, RuntimeError):
    pass


class ConfigError(HybridSegError, ValueError):
    pass
