"""Exception hierarchy shared across the toolkit.

Two error families matter operationally: ``DataError`` covers anything wrong
with inputs or records (bad files, invariant violations, misuse of an API),
``ProviderError`` covers failures of external services (transport, backend
payloads, exhausted retries). The CLI maps them to exit codes 1 and 2.
"""


class ClsdError(Exception):
    """Base class for all toolkit errors."""


class DataError(ClsdError, ValueError):
    """Invalid data, violated invariant, or precondition failure."""


class ProviderError(ClsdError, RuntimeError):
    """External service failure: transport, backend payload, retries spent."""
