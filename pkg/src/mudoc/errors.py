"""Exception taxonomy shared across the package.

Every error a caller is expected to handle derives from MudocError; CLI
exit codes are derived from these classes (input errors -> 1, provider
errors -> 2, corrupt index -> 3).
"""

from __future__ import annotations


class MudocError(Exception):
    """Base class for all package errors."""


class ProviderUnavailable(MudocError):
    """External model backend is down, timing out, or exhausted retries."""


class ProviderRefusal(MudocError):
    """Chat provider returned neither a text response nor a tool call."""


class BudgetExceeded(MudocError):
    """Provider rejected the input as too large."""


class DecodeError(MudocError):
    """An image or payload could not be decoded."""


class ModalityMismatch(MudocError):
    """Embedding input modality does not match the requested family."""


class MalformedPdf(MudocError):
    """Input is not a usable PDF (bad header, no pages, broken xref)."""


class DimMismatch(MudocError):
    """Vector dimensionality conflicts with the family's established dim."""


class ZeroVector(MudocError):
    """Cosine similarity is undefined for a zero vector."""


class CorruptIndex(MudocError):
    """Index directory failed hash or structural validation."""


class VersionMismatch(MudocError):
    """On-disk format version is newer than this reader supports."""


class UnknownId(MudocError):
    """Record id does not resolve to a snippet, chunk, or figure."""


class IoError(MudocError):
    """Index directory could not be written or read."""


class SessionBusy(MudocError):
    """A turn is already running for this session."""
