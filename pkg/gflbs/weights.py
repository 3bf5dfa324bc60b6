"""
Spatial neighborhood of the pixel lattice and the adaptive fusion weights
``w_ij = exp(-(d_i - d_j)^2 / (2 sigma^2))`` computed from observed frames.

Pixels are indexed in row-major order, ``i = y * width + x``, the same
convention used to vectorize frames into observation columns.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt


class neighbor_graph:

    """
    Class representing the neighborhood set of a ``width x height`` lattice.

    Edges are stored as an ``k x 2`` integer array of canonical pairs
    ``(i, j)`` with ``i < j``.
    """

    _width: int
    _height: int
    _connectivity: int
    _edges: npt.NDArray[np.intp]

    def __init__(
        self, width: int, height: int, edges: npt.ArrayLike, connectivity: int = 4
    ):
        """
        Args:
            width: Number of pixel columns.
            height: Number of pixel rows.
            edges: Canonical pixel index pairs.
            connectivity: Lattice connectivity the edges were built with.
        """
        self._width = width
        self._height = height
        self._connectivity = connectivity
        self._edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    @property
    def connectivity(self) -> int:
        return self._connectivity

    @property
    def node_count(self) -> int:
        """Number of pixels in the lattice."""
        return self._width * self._height

    @property
    def edges(self) -> npt.NDArray[np.intp]:
        """Array of canonical pairs (i, j), i < j."""
        return self._edges

    def __len__(self) -> int:
        return len(self._edges)

    def __repr__(self):
        return "neighbor_graph({}x{}, {}-connected, {} edges)".format(
            self._width, self._height, self._connectivity, len(self)
        )


def build_neighborhood(
    width: int, height: int, connectivity: int = 4
) -> neighbor_graph:
    """
    Build the lattice neighborhood of a frame.

    With 4-connectivity the graph has ``2 * width * height - width - height``
    edges; 8-connectivity adds both diagonals of every 2x2 block.

    Args:
        width: Number of pixel columns.
        height: Number of pixel rows.
        connectivity: 4 or 8.

    Returns:
        The neighbor graph of the lattice.
    """
    if width < 1 or height < 1:
        raise ValueError(
            "Frame dimensions must be positive, got {}x{}.".format(width, height)
        )
    if connectivity not in (4, 8):
        raise ValueError("Connectivity must be 4 or 8, got {}.".format(connectivity))

    index = np.arange(width * height).reshape(height, width)
    pairs = [
        (index[:, :-1], index[:, 1:]),
        (index[:-1, :], index[1:, :]),
    ]
    if connectivity == 8:
        pairs.append((index[:-1, :-1], index[1:, 1:]))
        pairs.append((index[:-1, 1:], index[1:, :-1]))

    edges = np.concatenate(
        [np.stack([a.ravel(), b.ravel()], axis=1) for a, b in pairs]
    ).reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return neighbor_graph(width, height, edges[order], connectivity)


def compute_weights(
    frame: npt.ArrayLike, graph: neighbor_graph, sigma: float
) -> npt.NDArray[np.float64]:
    """
    Compute the fusion weight of every edge of the graph for one frame.

    ``sigma = 0`` is defined as all weights 0, which turns the fused term off
    and reduces the model to RPCA.

    Args:
        frame: Vectorized intensities in [0, 1], length ``width * height``.
        graph: Neighbor graph of the frame.
        sigma: Nonnegative weight bandwidth, in intensity units.

    Returns:
        A vector with one weight in [0, 1] per edge.
    """
    if sigma < 0:
        raise ValueError("Weight bandwidth must be nonnegative, got {}.".format(sigma))
    d = np.asarray(frame, dtype=np.float64).ravel()
    if len(d) != graph.node_count:
        raise ValueError(
            "Frame has {} pixels, graph expects {}.".format(len(d), graph.node_count)
        )
    if sigma == 0:
        return np.zeros(len(graph))
    diff = d[graph.edges[:, 0]] - d[graph.edges[:, 1]]
    return np.exp(-(diff * diff) / (2.0 * sigma * sigma))


def compute_all_weights(
    d: npt.ArrayLike, graph: neighbor_graph, sigma: float
) -> npt.NDArray[np.float64]:
    """
    Compute the fusion weights of every frame of an observation matrix.

    Args:
        d: Matrix with one vectorized frame per column.
        graph: Neighbor graph of the frames.
        sigma: Nonnegative weight bandwidth.

    Returns:
        A ``len(graph) x n`` matrix, column k holding the weights of frame k.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape[1] == 0:
        return np.zeros((len(graph), 0))
    return np.stack(
        [compute_weights(d[:, k], graph, sigma) for k in range(d.shape[1])], axis=1
    ).reshape(len(graph), d.shape[1])
