"""
Dense matrix kernels shared by every solver step: thin SVD, soft-thresholding
and the usual matrix norms.

Matrices are plain ``numpy`` arrays of ``float64``. Observation-like matrices
hold one vectorized frame per column.
"""

from __future__ import annotations

import abc
import logging
import typing

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

matrix = npt.NDArray[np.float64]


class NumericalError(ArithmeticError):

    """
    Raised when an iterative numerical kernel fails to converge.
    """

    pass


class svd_factors(typing.NamedTuple):

    """
    Thin singular value decomposition ``m = u @ diag(s) @ v.T``.

    ``u`` is ``p x r``, ``s`` has ``r = min(p, n)`` nonincreasing nonnegative
    entries and ``v`` is ``n x r``.
    """

    u: matrix
    s: npt.NDArray[np.float64]
    v: matrix

    def reconstruct(self) -> matrix:
        """
        Returns:
            The product ``u @ diag(s) @ v.T``.
        """
        return (self.u * self.s) @ self.v.T


class svd_solver(abc.ABC):

    """
    Abstract class representing a backend computing thin SVDs.
    """

    @abc.abstractmethod
    def factorize(self, m: matrix) -> svd_factors:
        """
        Compute the thin SVD of the given matrix.

        Args:
            m: A finite two-dimensional array.

        Returns:
            The thin singular value decomposition of m.
        """
        pass


class jacobi(svd_solver):

    """
    One-sided (Hestenes) Jacobi SVD, preconditioned by a QR factorization so
    that rotations act on a ``r x r`` triangular factor only.
    """

    eps = 1e-15
    max_sweeps = 80

    def _rotate(self, w: matrix, v: matrix) -> int:
        # One sweep over all column pairs, returns the number of rotations.
        n = w.shape[1]
        tol = self.eps * max(n, 10)
        rotations = 0
        for i in range(n - 1):
            for j in range(i + 1, n):
                wi = w[:, i]
                wj = w[:, j]
                alpha = wi @ wi
                beta = wj @ wj
                gamma = wi @ wj
                if abs(gamma) <= tol * np.sqrt(alpha) * np.sqrt(beta):
                    continue
                rotations += 1
                zeta = (beta - alpha) / (2 * gamma)
                t = 1 / (abs(zeta) + np.sqrt(1 + zeta * zeta))
                if zeta < 0:
                    t = -t
                c = 1 / np.sqrt(1 + t * t)
                s = c * t
                w[:, i], w[:, j] = c * wi - s * wj, s * wi + c * wj
                vi = v[:, i]
                vj = v[:, j]
                v[:, i], v[:, j] = c * vi - s * vj, s * vi + c * vj
        return rotations

    @staticmethod
    def _complete(u: matrix, known: npt.NDArray[np.bool_]) -> matrix:
        # Replace the columns of u that are not known by an orthonormal
        # completion of the known ones.
        r = u.shape[0]
        basis = [u[:, k] for k in range(u.shape[1]) if known[k]]
        candidates = iter(np.eye(r))
        for k in range(u.shape[1]):
            if known[k]:
                continue
            while True:
                x = next(candidates).copy()
                for _ in range(2):
                    for b in basis:
                        x -= (b @ x) * b
                norm = np.linalg.norm(x)
                if norm > 1e-8:
                    break
            u[:, k] = x / norm
            basis.append(u[:, k])
        return u

    def factorize(self, m: matrix) -> svd_factors:
        a = np.array(m, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError(
                "Expected a matrix, got an array of shape {}.".format(a.shape)
            )
        p, n = a.shape
        if p < n:
            u, s, v = self.factorize(a.T)
            return svd_factors(v, s, u)
        if n == 0:
            return svd_factors(np.zeros((p, 0)), np.zeros(0), np.zeros((0, 0)))

        # Sweeps run on a copy scaled to unit max-abs entry.
        scale = float(np.abs(a).max())
        if scale > 0:
            a = a / scale
        q, w = np.linalg.qr(a)
        v = np.eye(n)
        for _ in range(self.max_sweeps):
            if self._rotate(w, v) == 0:
                break
        else:
            raise NumericalError(
                "Jacobi SVD did not converge after {} sweeps on a {}x{} matrix.".format(
                    self.max_sweeps, p, n
                )
            )

        s = np.linalg.norm(w, axis=0)
        order = np.argsort(-s, kind="stable")
        s = s[order]
        w = w[:, order]
        v = v[:, order]

        known = s > s[0] * 1e-13 if s[0] > 0 else np.zeros(n, dtype=bool)
        ur = np.zeros((n, n))
        ur[:, known] = w[:, known] / s[known]
        ur = self._complete(ur, known)
        return svd_factors(q @ ur, s * scale, v)


class lapack(svd_solver):

    """
    Thin SVD computed by LAPACK through ``scipy.linalg.svd``.
    """

    def __init__(self):
        from scipy.linalg import svd

        self.__svd = svd

    def factorize(self, m: matrix) -> svd_factors:
        a = np.asarray(m, dtype=np.float64)
        try:
            u, s, vt = self.__svd(a, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as e:
            raise NumericalError(
                "LAPACK SVD did not converge on a {}x{} matrix.".format(*a.shape)
            ) from e
        return svd_factors(u, s, vt.T)


# The default SVD backend to use:
default_svd_solver: typing.Optional[typing.Type[svd_solver]] = None


def set_default_svd_solver(solver_class: typing.Optional[typing.Type[svd_solver]]):
    """Set the type of the default SVD backend to use.

    Args:
        solver_class: Class of the backend to use. Must inherit svd_solver, or
            None to restore the in-tree Jacobi backend.
    """
    global default_svd_solver
    default_svd_solver = solver_class


def get_default_svd_solver() -> svd_solver:
    """Get a new instance of the default SVD backend.

    Returns:
        An instance of the class set by set_default_svd_solver, or of jacobi
        if none was set.
    """
    if default_svd_solver is not None:
        return default_svd_solver()
    return jacobi()


def _check_finite(m: npt.ArrayLike) -> npt.NDArray[np.float64]:
    a = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("Matrix of shape {} has non-finite entries.".format(a.shape))
    return a


def svd(m: matrix, solver: svd_solver | None = None) -> svd_factors:
    """
    Compute the thin SVD of a finite matrix.

    Args:
        m: Matrix to factorize.
        solver: Backend to use, the default backend if None.

    Returns:
        Factors with orthonormal u and v and nonincreasing singular values.
    """
    a = _check_finite(m)
    if solver is None:
        solver = get_default_svd_solver()
    return solver.factorize(a)


def soft_threshold(x: npt.ArrayLike, tau: float) -> npt.NDArray[np.float64]:
    """
    Element-wise soft-thresholding ``sign(x) * max(|x| - tau, 0)``.

    Entries with ``|x| <= tau`` map to exact (positive) zeros.

    Args:
        x: Scalar, vector or matrix.
        tau: Nonnegative threshold.

    Returns:
        An array with the shape of x.
    """
    if tau < 0:
        raise ValueError("Threshold must be nonnegative, got {}.".format(tau))
    a = np.asarray(x, dtype=np.float64)
    out = np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)
    # sign(-x) * 0 leaves negative zeros behind, -0.0 + 0.0 is +0.0.
    return np.asarray(out + 0.0)


def nuclear_norm(m: matrix) -> float:
    """Sum of the singular values of m."""
    return float(svd(m).s.sum())


def frobenius_norm(m: npt.ArrayLike) -> float:
    """Square root of the sum of squared entries of m."""
    return float(np.linalg.norm(_check_finite(m)))


def l1_norm(m: npt.ArrayLike) -> float:
    """Sum of the absolute entries of m."""
    return float(np.abs(_check_finite(m)).sum())


def spectral_norm(m: matrix) -> float:
    """Largest singular value of m (0 for empty matrices)."""
    s = svd(m).s
    return float(s[0]) if len(s) else 0.0


def numerical_rank(m: matrix, rtol: float = 1e-6) -> int:
    """
    Number of singular values above ``rtol`` times the largest one.

    Args:
        m: Matrix to inspect.
        rtol: Relative threshold.

    Returns:
        The numerical rank of m.
    """
    s = svd(m).s
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))
