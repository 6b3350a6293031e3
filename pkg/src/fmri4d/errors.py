"""Exception types shared across the package.

Argument and file-format problems raise plain ``ValueError`` (or OS errors);
``NumericError`` marks failures of a numerical routine on inputs that were
structurally valid, so callers (notably the CLI) can distinguish the two.
"""


class NumericError(RuntimeError):
    """A numerical routine failed: SVD breakdown, non-finite intermediates."""
