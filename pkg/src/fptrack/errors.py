class ParameterError(ValueError):
    """A parameter set outside the domain where a quantity is defined."""
