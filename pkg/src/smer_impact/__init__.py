"""Impact prediction with embedding classifiers, explained by SMER word scores."""

from .errors import DataError, EmptyDocumentError, FidelityError, NumericError, OOVError, UndefinedValueError

__version__ = "0.1.0"

__all__ = ["DataError", "EmptyDocumentError", "FidelityError", "NumericError", "OOVError",
           "UndefinedValueError", "__version__"]
