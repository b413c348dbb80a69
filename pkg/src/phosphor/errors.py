"""Exception types shared across the toolkit."""


class PhosphorError(Exception):
    """Base class for all toolkit errors (maps to CLI exit code 1)."""


class SomaInsideDisc(PhosphorError):
    """Soma position falls within the optic disc, where no ganglion cells live."""


class OutOfExtent(PhosphorError):
    """Position outside the modeled retinal extent (or bundle model coverage)."""


class IndexOutOfRange(PhosphorError, IndexError):
    pass


class BadExtent(PhosphorError):
    pass


class ShapeMismatch(PhosphorError):
    pass


class TableMismatch(PhosphorError):
    """Sensitivity table was built for different percept/params than requested."""


class MissingAuxMap(PhosphorError):
    pass


class ManifestParse(PhosphorError):
    pass


class CategoryImbalance(PhosphorError):
    pass


class MissingFrames(PhosphorError):
    pass


class UnbalancedCatalog(PhosphorError):
    pass


class DomainError(PhosphorError, ValueError):
    pass


class UndefinedRate(PhosphorError):
    pass


class EmptyGroup(PhosphorError):
    pass


class LengthMismatch(PhosphorError):
    pass
