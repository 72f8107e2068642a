"""Error types shared across the pipeline, mapped to CLI exit codes."""

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INVARIANT_VIOLATION = 3
EXIT_DEGENERATE_FALLBACK = 4


class InputError(Exception):
    """Bad user input: missing files, malformed names, empty corpora."""

    exit_code = EXIT_INPUT_ERROR


class InvariantViolation(Exception):
    """An internal contract was broken; indicates a bug, not bad input."""

    exit_code = EXIT_INVARIANT_VIOLATION
