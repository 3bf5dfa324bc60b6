from __future__ import annotations

import enum
import typing
from typing import Any, Iterable

import numpy as np

from gflbs.matrices import matrix


class status(enum.Enum):

    """
    Enumeration class representing the status of a decomposition.
    """

    UNKNOWN = enum.auto()
    CONVERGED = enum.auto()
    NOT_CONVERGED = enum.auto()

    def __str__(self):
        return self.name


class trace_record(typing.NamedTuple):

    """
    One outer iteration of the ALM loop.
    """

    iteration: int
    objective: float
    lagrangian: float
    residual: float
    mu: float
    rank: int
    nonzeros: int

    def todict(self) -> dict[str, float | int]:
        """The record as a dictionary of plain python numbers."""
        return {
            k: (v.item() if isinstance(v, np.generic) else v)
            for k, v in self._asdict().items()
        }


class decomposition:

    """
    Class representing the result of a background / foreground decomposition.
    """

    _background: matrix
    _foreground: matrix
    _dual: matrix
    _coefficients: matrix | None
    _trace: list[trace_record]
    _status: status
    _diagnostics: dict[str, Any]

    def __init__(
        self,
        background: matrix,
        foreground: matrix,
        dual: matrix,
        trace: Iterable[trace_record] = (),
        status: status = status.UNKNOWN,
        coefficients: matrix | None = None,
        diagnostics: dict[str, Any] | None = None,
    ):
        """
        Args:
            background: Background matrix (B, or D1 S for the supervised model).
            foreground: Foreground matrix, one frame per column.
            dual: Lagrange multiplier of the equality constraint.
            trace: Per-iteration convergence records.
            status: Status of the decomposition.
            coefficients: Coefficient matrix S (supervised model only).
            diagnostics: Additional named quantities computed by the solver.
        """
        self._background = background
        self._foreground = foreground
        self._dual = dual
        self._trace = list(trace)
        self._status = status
        self._coefficients = coefficients
        self._diagnostics = dict(diagnostics or {})

    @property
    def background(self) -> matrix:
        return self._background

    @property
    def foreground(self) -> matrix:
        return self._foreground

    @property
    def dual(self) -> matrix:
        return self._dual

    @property
    def coefficients(self) -> matrix | None:
        """Coefficients S of the supervised model, None otherwize."""
        return self._coefficients

    @property
    def trace(self) -> list[trace_record]:
        return self._trace

    @property
    def status(self) -> status:
        return self._status

    @property
    def diagnostics(self) -> dict[str, Any]:
        return self._diagnostics

    @property
    def converged(self) -> bool:
        """True if the relative residual reached the tolerance."""
        return self._status == status.CONVERGED

    @property
    def iterations(self) -> int:
        return len(self._trace)

    @property
    def residual(self) -> float:
        """Relative constraint residual of the last iterate, or nan."""
        return self._trace[-1].residual if self._trace else float("nan")

    def trace_table(self) -> list[dict[str, float | int]]:
        """
        Returns:
            The trace as a list of plain dictionaries, one per iteration.
        """
        return [r.todict() for r in self._trace]

    def __repr__(self):
        return "status = {}, iterations = {}, residual = {:.3g}".format(
            self.status, self.iterations, self.residual
        )

    def __bool__(self) -> bool:
        """True if the decomposition converged, False otherwize."""
        return self.converged
