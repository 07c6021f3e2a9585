"""Exception types shared across the package.

Every error carries a coarse ``category`` that outer layers map onto a
transport: the HTTP service turns it into a status code (config -> 400,
data -> 404, runtime -> 500) and the CLI into an exit code (1, 2, 3).
"""

from __future__ import annotations


class RweNasError(Exception):
    """Base class for all errors raised by this package."""

    category = "runtime"  # one of: "config", "data", "runtime"

    def detail(self) -> dict:
        """Structured payload for transports; subclasses add fields."""
        return {}


class InvalidLength(RweNasError):
    """Genome vector does not have the expected number of genes."""

    category = "config"

    def __init__(self, length: int, expected: int):
        super().__init__(f"genome has {length} genes, expected {expected}")
        self.length = length
        self.expected = expected

    def detail(self) -> dict:
        return {"length": self.length, "expected": self.expected}


class OutOfBounds(RweNasError):
    """A gene value exceeds the inclusive bound for its position."""

    category = "config"

    def __init__(self, position: int, value: int, bound: int):
        super().__init__(
            f"gene at position {position} is {value}, allowed range is 0..{bound}"
        )
        self.position = position
        self.value = value
        self.bound = bound

    def detail(self) -> dict:
        return {"position": self.position, "value": self.value, "bound": self.bound}


class DegenerateResolution(RweNasError):
    """Macro layout would shrink the spatial resolution below 1x1."""

    category = "config"

    def __init__(self, layer: int, resolution: tuple[int, int]):
        super().__init__(
            f"reduction cell at layer {layer} cannot halve resolution {resolution}"
        )
        self.layer = layer
        self.resolution = resolution

    def detail(self) -> dict:
        return {"layer": self.layer, "resolution": list(self.resolution)}


class ShapeMismatch(RweNasError):
    """A tensor does not have the shape an operation requires."""

    category = "runtime"

    def __init__(self, message: str):
        super().__init__(message)


class TooFewSamples(RweNasError):
    """A split or subsample asks for more samples than are available."""

    category = "data"

    def __init__(self, message: str):
        super().__init__(message)


class EmptyValidation(RweNasError):
    """The validation side of a split contains no samples."""

    category = "data"

    def __init__(self, message: str = "validation set is empty"):
        super().__init__(message)


class MissingFile(RweNasError):
    """A required data file or directory does not exist."""

    category = "data"

    def __init__(self, path: str):
        super().__init__(f"missing data file: {path}")
        self.path = path

    def detail(self) -> dict:
        return {"path": self.path}


class CorruptRecord(RweNasError):
    """A binary data file has a malformed record."""

    category = "data"

    def __init__(self, file: str, offset: int, reason: str):
        super().__init__(f"corrupt record in {file} at byte offset {offset}: {reason}")
        self.file = file
        self.offset = offset
        self.reason = reason

    def detail(self) -> dict:
        return {"file": self.file, "offset": self.offset, "reason": self.reason}


class InvalidStats(RweNasError):
    """Normalization statistics are unusable (non-positive or non-finite)."""

    category = "config"

    def __init__(self, message: str):
        super().__init__(message)


class LengthMismatch(RweNasError):
    """Two paired sequences differ in length."""

    category = "config"

    def __init__(self, left: int, right: int):
        super().__init__(f"paired sequences have lengths {left} and {right}")
        self.left = left
        self.right = right

    def detail(self) -> dict:
        return {"left": self.left, "right": self.right}


class DegenerateInput(RweNasError):
    """An input admits no meaningful answer (constant vector, too short, non-finite)."""

    category = "config"

    def __init__(self, message: str):
        super().__init__(message)


class MissingGroundTruth(RweNasError):
    """Prediction ids with no matching ground-truth entry."""

    category = "data"

    def __init__(self, ids: list[str]):
        shown = ", ".join(ids[:5]) + (", ..." if len(ids) > 5 else "")
        super().__init__(f"{len(ids)} prediction id(s) missing from ground truth: {shown}")
        self.ids = ids

    def detail(self) -> dict:
        return {"ids": self.ids}


class SearchInterrupted(RweNasError):
    """Search stopped early; carries the completed generations."""

    category = "runtime"

    def __init__(self, history):
        super().__init__("search interrupted before completion")
        self.history = history
