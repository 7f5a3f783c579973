"""Exception types raised across the package."""


class FairnessError(ValueError):
    """Base class for every input or analysis error the package raises."""


class UndefinedRateError(FairnessError):
    """A rate was requested for a confusion table missing one class."""


class PartitionError(FairnessError):
    """A group partition is malformed or has too few groups."""


class InsufficientGroupsError(FairnessError):
    """Fewer than two groups survived the validity policy."""


class InputFormatError(FairnessError):
    """A data file failed to parse or validate."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ConfigError(FairnessError):
    """A run configuration is inconsistent or incomplete."""
