from __future__ import annotations

from typing import Sequence

import numpy as np
import numpy.typing as npt

import gflbs.solvers as solvers
from gflbs.matrices import matrix
from gflbs.results import decomposition


def _as_matrix(m: npt.ArrayLike, what: str) -> matrix:
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(
            "{} must be a matrix, got an array of shape {}.".format(what, a.shape)
        )
    if not np.all(np.isfinite(a)):
        raise ValueError("{} has non-finite entries.".format(what))
    return a


class observation:

    """
    Observation matrix: one vectorized ``height x width`` frame per column,
    pixels in row-major order.
    """

    _matrix: matrix
    _width: int
    _height: int
    _names: list[str]

    def __init__(
        self,
        m: npt.ArrayLike,
        width: int,
        height: int,
        names: Sequence[str] | None = None,
    ):
        """
        Args:
            m: Matrix of size ``(width * height) x n``.
            width: Number of pixel columns of a frame.
            height: Number of pixel rows of a frame.
            names: Name of each frame, defaults to the frame index.
        """
        self._matrix = _as_matrix(m, "Observation")
        if width < 1 or height < 1 or self._matrix.shape[0] != width * height:
            raise ValueError(
                "Observation with {} rows does not match {}x{} frames.".format(
                    self._matrix.shape[0], width, height
                )
            )
        self._width = width
        self._height = height
        if names is None:
            names = [str(k) for k in range(self._matrix.shape[1])]
        self._names = list(names)
        if len(self._names) != self._matrix.shape[1]:
            raise ValueError(
                "Got {} frame names for {} frames.".format(
                    len(self._names), self._matrix.shape[1]
                )
            )

    @property
    def matrix(self) -> matrix:
        return self._matrix

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    @property
    def names(self) -> list[str]:
        return self._names

    @property
    def shape(self) -> tuple[int, int]:
        return self._matrix.shape  # type: ignore

    @property
    def pixel_count(self) -> int:
        return self._matrix.shape[0]

    @property
    def frame_count(self) -> int:
        return self._matrix.shape[1]

    def frame(self, k: int) -> matrix:
        """
        Args:
            k: Index of the frame.

        Returns:
            Column k reshaped to a ``height x width`` image.
        """
        return self.column_to_frame(self._matrix[:, k])

    def column_to_frame(self, column: npt.ArrayLike) -> matrix:
        """Reshape a vector of this geometry to a ``height x width`` image."""
        return np.asarray(column).reshape(self._height, self._width)

    def decompose(self, config: solvers.solver_config | None = None) -> decomposition:
        """
        Decompose this observation into a low-rank background and a sparse,
        spatially smooth foreground.

        Args:
            config: Solver configuration, defaults are used if None.

        Returns:
            The decomposition of this observation.
        """
        return solvers.solve_uml(self, config)

    def __repr__(self):
        return "observation({} frames of {}x{})".format(
            self.frame_count, self._width, self._height
        )


class sml_problem:

    """
    Supervised decomposition problem: training frames ``d1`` holding pure
    background and mixed frames ``d2`` to decompose over the span of ``d1``.
    """

    _d1: matrix
    _d2: matrix
    _width: int
    _height: int
    _names: list[str]

    def __init__(
        self,
        d1: npt.ArrayLike,
        d2: npt.ArrayLike,
        width: int,
        height: int,
        names: Sequence[str] | None = None,
    ):
        """
        Args:
            d1: Training matrix, ``p x n1`` with ``n1 >= 1``.
            d2: Mixed matrix, ``p x n2``.
            width: Number of pixel columns of a frame.
            height: Number of pixel rows of a frame.
            names: Name of each mixed frame.
        """
        mixed = observation(d2, width, height, names)
        self._d1 = _as_matrix(d1, "Training matrix")
        if self._d1.shape[0] != mixed.pixel_count:
            raise ValueError(
                "Training matrix has {} rows, mixed matrix has {}.".format(
                    self._d1.shape[0], mixed.pixel_count
                )
            )
        if self._d1.shape[1] < 1:
            raise ValueError("Training matrix must hold at least one frame.")
        self._d2 = mixed.matrix
        self._width = width
        self._height = height
        self._names = mixed.names

    @classmethod
    def from_observations(cls, training: observation, mixed: observation):
        """Build a problem from two observations of the same geometry."""
        if (training.width, training.height) != (mixed.width, mixed.height):
            raise ValueError(
                "Training frames are {}x{}, mixed frames are {}x{}.".format(
                    training.width, training.height, mixed.width, mixed.height
                )
            )
        return cls(
            training.matrix, mixed.matrix, mixed.width, mixed.height, mixed.names
        )

    @property
    def d1(self) -> matrix:
        return self._d1

    @property
    def d2(self) -> matrix:
        return self._d2

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    @property
    def names(self) -> list[str]:
        return self._names

    def decompose(self, config: solvers.solver_config | None = None) -> decomposition:
        """
        Args:
            config: Solver configuration, defaults are used if None.

        Returns:
            The decomposition of the mixed frames.
        """
        return solvers.solve_sml(self, config)

    def __repr__(self):
        return "sml_problem({} training, {} mixed frames of {}x{})".format(
            self._d1.shape[1], self._d2.shape[1], self._width, self._height
        )
