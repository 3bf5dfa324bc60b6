"""
Proximal operators used by the ALM updates: singular value thresholding for
the nuclear norm, the generalized fused lasso (weighted TV followed by
soft-thresholding) and the plain l1 norm.
"""

from __future__ import annotations

import typing

import numpy as np
import numpy.typing as npt

from gflbs.flows import tv_prox, tv_value
from gflbs.matrices import matrix, soft_threshold, svd
from gflbs.weights import neighbor_graph


class gfl_params(typing.NamedTuple):

    """
    Penalties of one generalized fused lasso prox: ``lam1`` on values and
    ``lam2`` on weighted neighbor differences.
    """

    lam1: float
    lam2: float

    def validate(self) -> gfl_params:
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError(
                "Fused lasso penalties must be nonnegative, got {}.".format(self)
            )
        return self


def svt(m: matrix, tau: float) -> tuple[matrix, npt.NDArray[np.float64]]:
    """
    Singular value thresholding.

    Args:
        m: Matrix to shrink.
        tau: Nonnegative threshold.

    Returns:
        The shrunk matrix and its (thresholded) singular values.
    """
    if tau < 0:
        raise ValueError("Threshold must be nonnegative, got {}.".format(tau))
    u, s, v = svd(m)
    s = soft_threshold(s, tau)
    r = int(np.count_nonzero(s))
    return (u[:, :r] * s[:r]) @ v[:, :r].T, s


def prox_nuclear(m: matrix, tau: float) -> matrix:
    """
    Proximal operator of ``tau * ||B||_*``.

    Args:
        m: Matrix to shrink.
        tau: Nonnegative threshold.

    Returns:
        The minimizer of ``tau * ||B||_* + 1/2 ||B - m||_F^2``.
    """
    if tau == 0:
        return np.array(m, dtype=np.float64)
    return svt(m, tau)[0]


def prox_l1(m: npt.ArrayLike, tau: float) -> npt.NDArray[np.float64]:
    """Proximal operator of ``tau * ||f||_1``, i.e. soft-thresholding."""
    return soft_threshold(m, tau)


def prox_gfl(
    m: npt.ArrayLike,
    graph: neighbor_graph,
    weights: npt.ArrayLike,
    params: gfl_params,
) -> npt.NDArray[np.float64]:
    """
    Proximal operator of the generalized fused lasso

        lam1 * ||f||_1 + lam2 * sum_ij w_ij |f_i - f_j|

    obtained by soft-thresholding the weighted TV prox at ``lam1``.

    Args:
        m: Input vector, one value per pixel.
        graph: Neighbor graph of the pixels.
        weights: Fusion weight of each edge.
        params: The two penalties.

    Returns:
        The minimizer, with exact zeros.
    """
    lam1, lam2 = params.validate()
    if lam2 == 0:
        return soft_threshold(m, lam1)
    f = tv_prox(m, graph.edges, weights, lam2, zero_band=lam1 if lam1 > 0 else None)
    return soft_threshold(f, lam1)


def gfl_norm(
    f: npt.ArrayLike, graph: neighbor_graph, weights: npt.ArrayLike, rho: float
) -> float:
    """
    Generalized fused lasso norm of a foreground matrix.

    Args:
        f: Vector, or matrix with one frame per column.
        graph: Neighbor graph of the pixels.
        weights: Edge weights, one column per frame for a matrix.
        rho: Fusion weight.

    Returns:
        ``sum_k ||f_k||_1 + rho * sum_ij w_ij^k |f_ik - f_jk|``.
    """
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if f.ndim == 1:
        f, w = f[:, None], w.reshape(-1, 1)
    value = float(np.abs(f).sum())
    if rho:
        value += rho * sum(
            tv_value(f[:, k], graph.edges, w[:, k]) for k in range(f.shape[1])
        )
    return value
