"""Exception types shared across the package."""

from __future__ import annotations


class WalkdistError(Exception):
    """Base class for all package-specific errors."""


class Graph6ParseError(WalkdistError, ValueError):
    """Malformed graph6 input; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class SizeCapError(WalkdistError):
    """An operation refused to run because a point-set would exceed its cap."""

    def __init__(self, dimension: int, cap: int, what: str = "point set"):
        self.dimension = dimension
        self.cap = cap
        super().__init__(f"refused: {what} of size {dimension} exceeds cap {cap}")


class ConsistencyError(WalkdistError):
    """A basis failed an exact algebraic check (signals a broken partition)."""


class NumericsError(WalkdistError):
    """A numerical routine failed or violated its accuracy contract."""


class SearchTimeout(WalkdistError):
    """Internal signal: a backtracking search ran past its deadline."""
