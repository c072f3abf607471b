"""Exception hierarchy. Each category carries the CLI exit code it maps to."""


class GlyphCamError(Exception):
    exit_code = 1


class ParseError(GlyphCamError, ValueError):
    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(GlyphCamError, ValueError):
    exit_code = 3


class ConfigurationError(ValidationError):
    pass


class BoundsError(ValidationError, IndexError):
    pass


class UnsupportedCharacterError(ValidationError):
    def __init__(self, char):
        super().__init__(f"character U+{ord(char):04X} ({char!r}) is not covered by the bundled font")
        self.codepoint = ord(char)


class EmptyRegionError(ValidationError):
    pass


class DegenerateInputError(ValidationError):
    pass


class UndefinedMetricError(ValidationError):
    pass


class NumericError(GlyphCamError, ArithmeticError):
    exit_code = 4


class BundleIOError(GlyphCamError, OSError):
    exit_code = 5


class IntegrityError(BundleIOError):
    pass
