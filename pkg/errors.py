"""
Exception hierarchy for channel construction, certification and capacity work.

Every error raised on purpose by this project derives from QcapError so the
command-line front end can map it to an exit code in one place.
"""

from typing import Optional


class QcapError(Exception):
    """Base class for all errors raised by this project"""


class DimensionMismatch(QcapError, ValueError):
    """Operand shapes do not fit together"""


class NonHermitian(QcapError, ValueError):
    """Matrix expected to be Hermitian is not, within tolerance"""


class NotAState(QcapError, ValueError):
    """Matrix fails the density-matrix checks (trace or positivity)"""


class DomainError(QcapError, ValueError):
    """Scalar parameter outside its admissible range"""


class RateOverflow(DomainError):
    """Total decay rate out of some level exceeds one"""


class NotTracePreserving(QcapError, ValueError):
    """Kraus normalization deviates from the identity"""


class NotPCDS(QcapError, ValueError):
    """Channel is not block-diagonal with respect to the supplied partition"""


class IndexOutOfRange(QcapError, IndexError):
    """Block index outside the partition"""


class NonUnique(QcapError):
    """Fixed-point space has dimension larger than one"""

    def __init__(self, message: str, dimension: int):
        super().__init__(message)
        self.dimension = dimension


class NumericalFailure(QcapError, ArithmeticError):
    """A numerical routine produced a result outside its own tolerance"""


class UndeterminedDegradability(QcapError):
    """Neither a degradability certificate nor closing bounds are available"""


class ChannelDocumentError(QcapError, ValueError):
    """JSON channel document could not be parsed or validated"""

    def __init__(self, message: str, location: Optional[str] = None):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class ConsistencyError(QcapError):
    """Two independent evaluations of the same quantity disagree"""
