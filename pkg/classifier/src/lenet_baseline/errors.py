"""Exception taxonomy."""


class ConfigurationError(ValueError):
    """A parameter or requested combination is invalid."""


class DataError(Exception):
    """A dataset file is missing, malformed, or inconsistent."""
