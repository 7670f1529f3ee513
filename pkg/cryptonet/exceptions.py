import json
import os
import tempfile
from typing import Any, List, Optional

EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERIC_ERROR = 4


class CryptonetException(Exception):
    exit_code = 1


class ConfigError(CryptonetException):
    exit_code = EXIT_CONFIG_ERROR


class DataError(CryptonetException):
    exit_code = EXIT_DATA_ERROR


class NumericError(CryptonetException):
    exit_code = EXIT_NUMERIC_ERROR


class InvalidRange(ConfigError, ValueError):
    def __init__(self, ts_start: int, ts_end: int):
        self.ts_start = ts_start
        self.ts_end = ts_end
        super().__init__(
            f"The requested range [{ts_start}, {ts_end}) is empty. "
            f"The start timestamp must be strictly lower than the end timestamp."
        )


class InvalidConfig(ConfigError):
    def __init__(self, source: str, problems: List[str]):
        self.source = source
        self.problems = problems
        super().__init__(
            f"The configuration from {source} is invalid:\n"
            + "\n".join(f"  - {p}" for p in problems)
        )


class NetworkError(DataError):
    def __init__(self, url: str, attempts: int, reason: str):
        self.url = url
        self.attempts = attempts
        super().__init__(
            f"The request to `{url}` failed after {attempts} attempt(s).\n"
            f"The last error was: {reason}"
        )


class SymbolUnknown(DataError):
    def __init__(self, symbol: str, details: str = ""):
        self.symbol = symbol
        message = f"The source does not know the symbol `{symbol}`."
        if details:
            message += f"\nThe source answered: {details}"
        super().__init__(message)


class SchemaError(DataError):
    def __init__(self, source: str, reason: str, payload: Optional[Any] = None):
        self.source = source
        self.payload_file = None
        message = f"The payload received from {source} is malformed: {reason}\n"
        if payload is not None:
            # the payload is usually too big to be printed on the screen
            fd, self.payload_file = tempfile.mkstemp(suffix=".json", text=True)
            with os.fdopen(fd, "w") as f:
                json.dump(payload, f, default=str)
            message += f"The raw payload was written to {self.payload_file}\n"
        super().__init__(message)


class ValidationError(DataError, ValueError):
    def __init__(self, row: int, reason: str, source: Optional[str] = None):
        self.row = row
        self.reason = reason
        location = f"row {row}"
        if source is not None:
            location += f" of {source}"
        super().__init__(f"Invalid record at {location}: {reason}")


class IoError(DataError):
    def __init__(self, path: Any, reason: str):
        self.path = path
        super().__init__(f"Could not access `{path}`: {reason}")


class EmptyPanel(DataError):
    def __init__(self, reason: str = "no symbol has any data in the requested range"):
        super().__init__(f"The panel is empty: {reason}.")


class TimestampOffGrid(DataError):
    def __init__(self, ts: int):
        self.ts = ts
        super().__init__(f"The timestamp {ts} is not on the panel's timestamp grid.")


class MixedSymbols(DataError):
    def __init__(self, pairs):
        self.pairs = sorted(pairs)
        pairs_str = ", ".join(f"{s}/{q}" for s, q in self.pairs)
        super().__init__(
            f"All trades must share a single symbol and quote, found: {pairs_str}"
        )


class MixedQuotes(DataError):
    def __init__(self, symbol: str, quotes):
        self.symbol = symbol
        self.quotes = sorted(quotes)
        super().__init__(
            f"`{symbol}` is stored in several quote currencies over the range: "
            f"{self.quotes}. Pick one with `quote=...` (`--quote`)."
        )


class EmptyInput(DataError):
    def __init__(self, what: str = "trades", can_be_allowed: bool = True):
        message = f"No {what} were given."
        if can_be_allowed:
            message += (
                " Use `allow_empty=True` (`--allow-empty`) "
                "to get an empty result instead."
            )
        super().__init__(message)


class FocusMissing(DataError):
    def __init__(self, symbols):
        self.symbols = list(symbols)
        super().__init__(
            f"The focus symbol(s) {self.symbols} never appear in the given vectors."
        )


class InvalidParameter(NumericError, ValueError):
    def __init__(self, name: str, value: Any, constraint: str):
        self.name = name
        self.value = value
        super().__init__(f"Invalid value {value!r} for `{name}`: {constraint}")


class ZeroVariance(NumericError):
    def __init__(self, which: str = "x"):
        self.which = which
        super().__init__(
            f"The series `{which}` has zero weighted variance, "
            f"its correlation is undefined."
        )


class WindowTooLong(NumericError):
    def __init__(self, window: int, observations: int):
        self.window = window
        self.observations = observations
        super().__init__(
            f"The window ({window}) is longer than the number of "
            f"observations available ({observations})."
        )


class TooFewVertices(NumericError):
    def __init__(self, n_vertices: int, minimum: int = 4):
        self.n_vertices = n_vertices
        super().__init__(
            f"A filtered graph needs at least {minimum} vertices, got {n_vertices}."
        )


class NoConvergence(NumericError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"The power iteration did not converge after {iterations} iterations, "
            f"the last residual was {residual:.3e}."
        )


class DisconnectedGraph(NumericError):
    def __init__(self, n_components: int):
        self.n_components = n_components
        super().__init__(
            f"The graph has {n_components} connected components, "
            f"eigenvector centrality needs a connected graph."
        )


class StageError(CryptonetException):
    def __init__(
        self,
        stage: str,
        cause: BaseException,
        window_index: Optional[int] = None,
    ):
        self.stage = stage
        self.cause = cause
        self.window_index = window_index
        self.exit_code = getattr(cause, "exit_code", 1)
        location = f"stage `{stage}`"
        if window_index is not None:
            location += f", window {window_index}"
        super().__init__(f"The pipeline halted at {location}.\n{cause}")
