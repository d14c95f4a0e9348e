"""Exception hierarchy shared by the engine, the file formats, and the service.

Every error carries a stable machine-readable ``code`` (the class name) so the
HTTP layer and the CLI can surface it without string matching.
"""

from __future__ import annotations


class TaxaError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# -- core model -------------------------------------------------------------

class EmptyCoderId(TaxaError):
    pass


class InvalidName(TaxaError):
    """Taxon names must be non-empty and must not contain '/'."""


class NoSuchTaxon(TaxaError):
    pass


class DuplicateSibling(TaxaError):
    pass


class DuplicateImage(TaxaError):
    pass


class NoSuchImage(TaxaError):
    pass


class NoSuchAssignment(TaxaError):
    pass


class InvalidPartition(TaxaError):
    pass


class NothingToFlatten(TaxaError):
    pass


class NonLeafMerge(TaxaError):
    pass


class SelfMerge(TaxaError):
    pass


class CyclicMove(TaxaError):
    pass


class CannotRemoveRoot(TaxaError):
    pass


class CannotRemoveUngrouped(TaxaError):
    """The root-level 'ungrouped' taxon cannot be removed while it holds images."""


class RootOperand(TaxaError):
    """Raised when an operator other than remove is pointed at the root."""


class NonLeafLabel(TaxaError):
    pass


class CorruptLog(TaxaError):
    pass


# -- comparison and metrics ---------------------------------------------------

class ImageSetMismatch(TaxaError):
    pass


class NotEnoughData(TaxaError):
    pass


# -- machine assistance -------------------------------------------------------

class DimMismatch(TaxaError):
    pass


class TooManyClusters(TaxaError):
    pass


class MissingEmbedding(TaxaError):
    def __init__(self, uuid: str):
        super().__init__(f"no embedding for image {uuid!r}")
        self.uuid = uuid


class EmptyLabeledSet(TaxaError):
    pass


class EmptyProbabilityRow(TaxaError):
    pass


class DecodeError(TaxaError):
    pass


# -- persistence ----------------------------------------------------------------

class FormatError(TaxaError):
    pass


class NotEnoughImages(TaxaError):
    pass


# -- service ---------------------------------------------------------------------

class NoSuchSession(TaxaError):
    pass


class VersionConflict(TaxaError):
    def __init__(self, expected: int, current: int):
        super().__init__(f"expected version {expected}, session is at {current}")
        self.expected = expected
        self.current = current
