class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class DataError(ValueError):
    """Input data is malformed or cannot support the requested analysis."""
