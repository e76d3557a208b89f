"""Exception types shared across picnet."""


class ConfigurationError(ValueError):
    """Inputs are inconsistent (shapes, context window, token count...)."""


class CapacityError(RuntimeError):
    """A construction would exceed its enumeration budget."""
