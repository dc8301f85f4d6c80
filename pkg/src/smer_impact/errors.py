"""Exception hierarchy shared by the library and the CLI.

The CLI maps :class:`DataError` to exit code 2 and :class:`NumericError`
to exit code 3.
"""


class DataError(ValueError):
    """Input data is malformed, missing, or inconsistent with an operation."""


class OOVError(DataError, KeyError):
    """A word has no embedding vector."""

    def __init__(self, word, message=None):
        self.word = word
        super().__init__(message or f"word not in embedding vocabulary: {word!r}")

    def __str__(self):
        return self.args[0]


class EmptyDocumentError(DataError):
    """A document has no token that can be embedded."""

    def __init__(self, doi, message=None):
        self.doi = doi
        super().__init__(message or f"document {doi!r} has no in-vocabulary tokens")


class UndefinedValueError(DataError):
    """A statistic is undefined for the given input (zero variance, empty support...)."""


class NumericError(ArithmeticError):
    """A non-finite value or a violated numerical identity was encountered."""


class FidelityError(NumericError):
    """Document logit differs from the mean of its word logits."""
