"""Exception classes.  Each carries the CLI exit code it maps to."""


class CSCError(Exception):
    exit_code = 1


class ParseError(CSCError, ValueError):
    exit_code = 5


class DuplicateError(ParseError):
    pass


class CoverageError(CSCError, ValueError):
    exit_code = 5


class VocabError(CSCError, KeyError):
    exit_code = 5

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ShapeError(CSCError, ValueError):
    exit_code = 5


class LengthError(ShapeError):
    pass


class UncoverableError(CSCError, ValueError):
    """Gold character lies in neither confusion set of the source character."""

    exit_code = 5

    def __init__(self, message, positions=()):
        super().__init__(message)
        self.positions = tuple(positions)


class HashMismatchError(CSCError):
    exit_code = 4


class CompatibilityError(HashMismatchError):
    pass


class TrainingDiverged(CSCError, FloatingPointError):
    exit_code = 6
