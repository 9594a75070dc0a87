"""Exception types shared across the package."""

from __future__ import annotations


class MnidError(Exception):
    """Base class for all package errors."""


# -- annotation / budget ------------------------------------------------------

class BudgetExhausted(MnidError):
    """An annotation batch would overrun the remaining gold budget."""


class UnknownPoint(MnidError):
    """A point id is not present in the corpus / embedding matrix."""


class AlreadyLabeled(MnidError):
    """A point already holds a label in the labeled pool."""


class MissingGold(MnidError):
    """An operation requiring gold labels ran on a corpus without them."""


# -- ingest -------------------------------------------------------------------

class ParseError(MnidError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateId(MnidError):
    def __init__(self, line: int, point_id: str):
        super().__init__(f"line {line}: duplicate id {point_id!r}")
        self.line = line
        self.point_id = point_id


class InvalidSplit(MnidError):
    def __init__(self, line: int, split: str):
        super().__init__(f"line {line}: invalid split {split!r}")
        self.line = line
        self.split = split


class BadMagic(MnidError):
    """Embedding file does not start with the expected magic bytes."""


class CountMismatch(MnidError):
    """Embedding row count disagrees with the corpus record count."""


class NonFiniteValue(MnidError):
    def __init__(self, row: int, col: int):
        super().__init__(f"non-finite embedding value at row {row}, col {col}")
        self.row = row
        self.col = col


class ZeroNormRow(MnidError):
    def __init__(self, row: int):
        super().__init__(f"row {row} has zero norm and cannot be normalized")
        self.row = row


class InvalidSpec(MnidError):
    """Synthetic-corpus spec violates its invariants."""


# -- classifier / ood ---------------------------------------------------------

class DegenerateLabels(MnidError):
    """Training data covers fewer than two classes."""


class NonFiniteLoss(MnidError):
    """Training loss diverged to a non-finite value."""


class UnknownMethod(MnidError):
    """Unrecognized detector / clusterer name."""


# -- clustering ---------------------------------------------------------------

class KTooLarge(MnidError):
    """Requested more clusters than there are points."""


class EmptyInput(MnidError):
    """Clustering called with no points."""


# -- discovery ----------------------------------------------------------------

class EmptyOodSet(MnidError):
    """Novel-class detection requires a non-empty out-of-domain sample set."""


class SampleTooLarge(MnidError):
    """Requested sample exceeds the available pool."""


# -- eval ---------------------------------------------------------------------

class LengthMismatch(MnidError):
    """Prediction / gold vectors differ in length."""


# -- annotation service -------------------------------------------------------

class SessionBusy(MnidError):
    """A session is already active on this service."""


class NoSession(MnidError):
    """No active session."""


class UnknownRequest(MnidError):
    """No open annotation request with that id."""


class DuplicateSubmission(MnidError):
    """A request was answered twice with conflicting labels."""
