"""Exception hierarchy shared across the toolkit.

The CLI maps these onto distinct exit codes: input problems (bad files,
unsupported captures, empty traces) are recoverable by fixing the input,
configuration and degenerate-trace problems need different parameters,
and I/O failures are environmental.
"""


class TraceTypesError(Exception):
    """Base class for all toolkit errors."""


class TraceFormatError(TraceTypesError):
    """The input file does not conform to the expected format."""


class UnsupportedInputError(TraceTypesError):
    """The input is well-formed but uses a feature we do not handle."""


class EmptyTraceError(TraceTypesError):
    """No usable messages remain after reading or preprocessing."""


class MissingGroundTruthError(TraceTypesError):
    """Evaluation was requested but a clustered message has no type label."""


class ConfigurationError(TraceTypesError):
    """Analysis parameters are invalid or cannot be derived from the trace."""


class DegenerateTraceError(TraceTypesError):
    """The trace has no usable structure (e.g. all messages identical)."""


class StageDependencyError(TraceTypesError):
    """A staged run is missing the artifacts of an earlier stage."""
