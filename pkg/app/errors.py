"""
Error kinds raised across the batch search stack.

Every failure a caller can act on has its own class so tests, the CLI and the
HTTP service can tell them apart without parsing messages.
"""

from typing import Optional


class BatchSearchError(Exception):
    """Root of every error raised by this package."""

    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message)
        self.offset = offset

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "offset": self.offset,
        }


# ---------------------------------------------------------------------------
# tree model
# ---------------------------------------------------------------------------

class InvalidOrderError(BatchSearchError, ValueError):
    pass


class CapacityOverflowError(BatchSearchError, OverflowError):
    pass


class InvalidKeyError(BatchSearchError, ValueError):
    pass


# ---------------------------------------------------------------------------
# builder
# ---------------------------------------------------------------------------

class EmptyEntrySetError(BatchSearchError, ValueError):
    pass


class UnsortedEntriesError(BatchSearchError, ValueError):
    pass


class SentinelValueError(BatchSearchError, ValueError):
    pass


# ---------------------------------------------------------------------------
# tree file format (.bpt) and structural validation
# ---------------------------------------------------------------------------

class TreeFormatError(BatchSearchError):
    """A serialized tree that cannot be trusted."""


class BadMagicError(TreeFormatError):
    pass


class UnsupportedVersionError(TreeFormatError):
    pass


class TruncatedTreeError(TreeFormatError):
    pass


class NodeCountMismatchError(TreeFormatError):
    pass


class EntryCountMismatchError(TreeFormatError):
    pass


class ChildOutOfBoundsError(TreeFormatError):
    pass


class MisalignedChildError(TreeFormatError):
    pass


class DepthMismatchError(TreeFormatError):
    pass


class SlotUseError(TreeFormatError):
    pass


class KeyOrderError(TreeFormatError):
    pass


class SentinelPayloadError(TreeFormatError):
    pass


class UnderfullNodeError(TreeFormatError):
    pass


class SeparatorError(TreeFormatError):
    pass


class OrphanNodeError(TreeFormatError):
    pass


# ---------------------------------------------------------------------------
# search engines
# ---------------------------------------------------------------------------

class EmptyBatchError(BatchSearchError, ValueError):
    pass


class BatchTooLargeError(BatchSearchError, ValueError):
    pass


class UnsortedBatchError(BatchSearchError, ValueError):
    pass


class InvalidPartitionError(BatchSearchError, ValueError):
    pass


class CorruptTreeError(BatchSearchError):
    """Raised mid-traversal when a node cannot be fetched or disagrees with its level."""


class RoutingInvariantError(BatchSearchError, AssertionError):
    """Key contiguity or FIFO conservation broke during a level pass."""


# ---------------------------------------------------------------------------
# benchmarking and artifacts
# ---------------------------------------------------------------------------

class InsufficientSamplesError(BatchSearchError, ValueError):
    pass


class KeyFileError(BatchSearchError):
    pass


class ResultFileError(BatchSearchError):
    pass
