"""Exception types shared across the engine.

Each maps to a machine-parsable error class emitted by the CLI
(`error: <class>: <message>` on stderr, nonzero exit).
"""


class BlocknasError(Exception):
    """Base class; `error_class` is the CLI-facing identifier."""

    error_class = "internal-error"


class ConfigError(BlocknasError):
    error_class = "config-error"


class CodecError(BlocknasError):
    error_class = "codec-error"


class SchemaError(BlocknasError):
    error_class = "schema-error"


class ShapeError(BlocknasError):
    error_class = "shape-error"


class EvaluatorError(BlocknasError):
    error_class = "evaluator-error"
