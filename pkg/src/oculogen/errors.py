"""Exception types raised across the package."""


class OculogenError(Exception):
    pass


class DegenerateFrame(OculogenError):
    """Camera/look-at frame cannot be built (up vector parallel to view)."""


class DegenerateMesh(OculogenError):
    pass


class InvalidParams(OculogenError, ValueError):
    pass


class OutOfRange(OculogenError, ValueError):
    pass


class SnapFailed(OculogenError):
    pass


class EmptyEnumeration(OculogenError):
    pass


class MalformedHdr(OculogenError):
    pass


class NonPositiveScale(OculogenError, ValueError):
    pass


class BlackEnvironment(OculogenError):
    pass


class EmptyScene(OculogenError):
    pass


class InconsistentPose(OculogenError):
    pass


class TooFewImages(OculogenError):
    pass


class ConfigError(OculogenError):
    """Base for dataset-config problems (CLI exit code 1)."""


class ParseError(ConfigError):
    def __init__(self, msg, line=None, col=None):
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(f"{msg}{where}")


class UnknownKey(ConfigError):
    pass


class RangeError(ConfigError):
    pass
