"""Exception hierarchy shared by every pipeline stage."""


class ChainlineError(Exception):
    """Base class for all errors raised by chainline."""


class AmountParseError(ChainlineError, ValueError):
    pass


class StructuralDataError(ChainlineError):
    """A block or transaction does not have the expected shape."""


class SequencingError(ChainlineError):
    """Input arrived out of the required order."""


class IntegrityError(ChainlineError):
    """Hash chain or index data is inconsistent."""


class ChainIntegrityError(IntegrityError):
    """A transaction input references an unknown or already spent output."""


class AlignmentError(IntegrityError):
    """Annotation pairs do not line up with the chain traversal."""


class InvariantViolation(ChainlineError):
    """An internal algorithm invariant was broken by the input files."""


class RecordError(ChainlineError, ValueError):
    """A delimited record cannot be parsed under the given key."""


class SpillError(ChainlineError, OSError):
    """Writing or reading a spill file failed.

    ``manifest`` lists the spill files that may still exist on disk.
    """

    def __init__(self, message, spill_dir=None, manifest=()):
        super().__init__(message)
        self.spill_dir = spill_dir
        self.manifest = list(manifest)


class RpcError(ChainlineError):
    pass


class CollectionAborted(ChainlineError):
    """RPC collection gave up; ``checkpoint`` says where to resume."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class SpecError(ChainlineError, ValueError):
    """A configuration or generator specification is invalid."""
