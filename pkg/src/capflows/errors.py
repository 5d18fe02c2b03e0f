"""Exception hierarchy. Every error raised by the package derives from CapflowsError."""


class CapflowsError(Exception):
    """Base class for all package errors."""

    code = "error"

    def to_dict(self):
        return {"error": self.code, "type": type(self).__name__, "message": str(self)}


class OrderingError(CapflowsError, ValueError):
    code = "ordering"


class InputError(CapflowsError, ValueError):
    code = "input"


class ConfigError(CapflowsError, ValueError):
    code = "config"


class DegenerateSegmentError(CapflowsError, ValueError):
    code = "degenerate_segment"


class DegeneracyError(CapflowsError, ValueError):
    """Too few distinct values, tied centroids and similar ill-posed clustering input."""

    code = "degeneracy"


class SizeGuardError(CapflowsError, ValueError):
    code = "size_guard"


class ParameterError(CapflowsError, ValueError):
    code = "parameter"


class FitError(CapflowsError, RuntimeError):
    code = "fit_failure"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def to_dict(self):
        out = super().to_dict()
        out["diagnostics"] = self.diagnostics
        return out


class ParseError(CapflowsError, ValueError):
    code = "parse"

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc += ": "
        elif line is not None:
            loc = f"line {line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class FixtureIntegrityError(CapflowsError, ValueError):
    code = "fixture_integrity"
