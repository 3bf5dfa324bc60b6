"""
Inexact augmented Lagrangian loops of the two decomposition models:

- unsupervised, ``min ||B||_* + lam ||F||_gfl  s.t.  D = B + F``,
- supervised, ``min ||S||_1 + lam ||F||_gfl  s.t.  D2 = D1 S + F``,

where ``||F||_gfl = sum_k ||f_k||_1 + rho * sum_ij w_ij^k |f_ik - f_jk|``.
"""

from __future__ import annotations

import concurrent.futures
import contextlib
import dataclasses
import logging
import math
import numbers
import typing
from typing import Iterator

import numpy as np
import numpy.typing as npt

import gflbs.problems
from gflbs.matrices import (
    frobenius_norm,
    matrix,
    numerical_rank,
    soft_threshold,
    spectral_norm,
)
from gflbs.proxes import gfl_norm, gfl_params, prox_gfl, svt
from gflbs.results import decomposition, status, trace_record
from gflbs.weights import build_neighborhood, compute_all_weights, neighbor_graph

logger = logging.getLogger(__name__)

# Fields resolved from the data when None, and integer-valued fields.
_DERIVED = frozenset({"lam", "mu0", "mu_max"})
_COUNTS = frozenset({"max_outer_iters", "fista_iters", "connectivity", "workers"})


@dataclasses.dataclass(frozen=True)
class solver_config:

    """
    Knobs of the ALM solvers. ``lam`` and ``mu0`` left to None are derived
    from the data by ``resolve``, as is ``mu_max`` (``1e7 * mu0``).
    """

    lam: float | None = None
    rho: float = 1.0
    sigma: float = 0.05
    mu0: float | None = None
    beta: float = 1.5
    mu_max: float | None = None
    tol: float = 1e-7
    max_outer_iters: int = 100
    fista_iters: int = 200
    connectivity: int = 4
    mask_eps: float = 0.0
    workers: int = 1

    def validate(self) -> solver_config:
        """
        Returns:
            This configuration.

        Raises:
            ValueError: If a field has the wrong type or is out of range.
        """

        def check(name: str, ok: bool, expected: str):
            if not ok:
                raise ValueError(
                    "Invalid {} = {}, expected {}.".format(
                        name, getattr(self, name), expected
                    )
                )

        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None and f.name in _DERIVED:
                continue
            kind = numbers.Integral if f.name in _COUNTS else numbers.Real
            check(
                f.name,
                isinstance(value, kind) and not isinstance(value, bool),
                "an integer" if f.name in _COUNTS else "a number",
            )

        check("lam", self.lam is None or self.lam >= 0, "a nonnegative value")
        check("rho", self.rho >= 0, "a nonnegative value")
        check("sigma", self.sigma >= 0, "a nonnegative value")
        check("mu0", self.mu0 is None or self.mu0 > 0, "a positive value")
        check("beta", self.beta > 1, "a value above 1")
        check(
            "mu_max",
            self.mu_max is None or self.mu0 is None or self.mu_max > self.mu0,
            "a value above mu0",
        )
        check("mu_max", self.mu_max is None or self.mu_max > 0, "a positive value")
        check("tol", self.tol > 0, "a positive value")
        check("max_outer_iters", self.max_outer_iters >= 1, "at least 1")
        check("fista_iters", self.fista_iters >= 1, "at least 1")
        check("connectivity", self.connectivity in (4, 8), "4 or 8")
        check("mask_eps", self.mask_eps >= 0, "a nonnegative value")
        check("workers", self.workers >= 1, "at least 1")
        return self

    def resolve(self, d: npt.ArrayLike) -> solver_config:
        """
        Fill the data-derived fields for the given observation matrix.

        Args:
            d: Matrix the solver runs on.

        Returns:
            A validated copy with ``lam``, ``mu0`` and ``mu_max`` set.
        """
        self.validate()
        d = np.asarray(d, dtype=np.float64)
        lam = self.lam
        if lam is None:
            lam = 1.0 / math.sqrt(max(d.shape[0], d.shape[1], 1))
        mu0 = self.mu0
        if mu0 is None:
            norm = spectral_norm(d)
            mu0 = 1.25 / norm if norm > 0 else 1.25
        mu_max = self.mu_max if self.mu_max is not None else mu0 * 1e7
        return dataclasses.replace(self, lam=lam, mu0=mu0, mu_max=mu_max).validate()

    def asdict(self) -> dict[str, typing.Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class solver_state:

    """
    Iterate of the ALM loop. ``m1`` and ``m2`` are the inputs of the last
    background and foreground proximal steps.
    """

    background: matrix
    foreground: matrix
    dual: matrix
    mu: float
    iteration: int = 0
    m1: matrix | None = None
    m2: matrix | None = None
    params: gfl_params | None = None

    @classmethod
    def zeros(cls, shape: tuple[int, int], mu: float) -> solver_state:
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape), mu)


def extract_mask(column: npt.ArrayLike, eps: float = 0.0) -> npt.NDArray[np.bool_]:
    """
    Turn a foreground column into a binary mask.

    Args:
        column: Foreground values (exact zeros on background pixels).
        eps: Magnitude floor, pixels with ``|f| <= eps`` are background.

    Returns:
        A boolean vector, True on foreground pixels.
    """
    if eps < 0:
        raise ValueError("Mask floor must be nonnegative, got {}.".format(eps))
    return np.abs(np.asarray(column, dtype=np.float64)) > eps


def fista_lasso(
    a: npt.ArrayLike,
    m: npt.ArrayLike,
    tau: float,
    iters: int,
    start: npt.ArrayLike | None = None,
    lipschitz: float | None = None,
) -> npt.NDArray[np.float64]:
    """
    Approximately solve ``min_s tau ||s||_1 + 1/2 ||a s - m||^2`` with the
    monotone variant of FISTA.

    Args:
        a: Dictionary matrix, ``p x r``.
        m: Target vector of length p, or ``p x c`` matrix solved column-wise.
        tau: Nonnegative l1 weight.
        iters: Number of iterations.
        start: Initial point, zeros if None.
        lipschitz: Upper bound of ``||a^T a||_2``, computed if None.

    Returns:
        The last monotone iterate, with the shape of ``a^T m``.
    """
    if tau < 0:
        raise ValueError("Lasso weight must be nonnegative, got {}.".format(tau))
    a = np.asarray(a, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    vector = m.ndim == 1
    mm = m.reshape(m.shape[0], -1)
    if a.shape[0] != mm.shape[0]:
        raise ValueError(
            "Dictionary has {} rows, target has {}.".format(a.shape[0], mm.shape[0])
        )
    r, c = a.shape[1], mm.shape[1]
    x = np.zeros((r, c)) if start is None else np.array(start, dtype=np.float64)
    x = x.reshape(r, c)

    if lipschitz is None:
        lipschitz = spectral_norm(a) ** 2
    if lipschitz == 0:
        out = np.zeros((r, c))
        return out.ravel() if vector else out
    step = 1.0 / lipschitz

    def objective(s: matrix) -> npt.NDArray[np.float64]:
        e = a @ s - mm
        return 0.5 * np.einsum("ij,ij->j", e, e) + tau * np.abs(s).sum(axis=0)

    fx = objective(x)
    y = x.copy()
    t = 1.0
    for _ in range(iters):
        z = soft_threshold(y - step * (a.T @ (a @ y - mm)), tau * step)
        fz = objective(z)
        better = fz <= fx
        xn = np.where(better, z, x)
        tn = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = xn + (t / tn) * (z - xn) + ((t - 1.0) / tn) * (xn - x)
        x, fx, t = xn, np.where(better, fz, fx), tn

    return x.ravel() if vector else x


# Neighbor graph shared with worker processes.
_worker_graph: neighbor_graph | None = None


def _init_worker(graph: neighbor_graph):
    global _worker_graph
    _worker_graph = graph


def _prox_column(
    args: tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], gfl_params]
) -> npt.NDArray[np.float64]:
    assert _worker_graph is not None
    return prox_gfl(args[0], _worker_graph, args[1], args[2])


@contextlib.contextmanager
def _column_pool(
    workers: int, columns: int, graph: neighbor_graph
) -> Iterator[concurrent.futures.Executor | None]:
    if workers <= 1 or columns <= 1:
        yield None
        return
    with concurrent.futures.ProcessPoolExecutor(
        max_workers=min(workers, columns),
        initializer=_init_worker,
        initargs=(graph,),
    ) as pool:
        yield pool


def _foreground_step(
    m2: matrix,
    graph: neighbor_graph,
    weights: matrix,
    params: gfl_params,
    pool: concurrent.futures.Executor | None,
) -> matrix:
    n = m2.shape[1]
    if pool is None:
        columns = [prox_gfl(m2[:, k], graph, weights[:, k], params) for k in range(n)]
    else:
        columns = list(
            pool.map(
                _prox_column, [(m2[:, k], weights[:, k], params) for k in range(n)]
            )
        )
    if not columns:
        return np.zeros_like(m2)
    return np.stack(columns, axis=1)


def _log_header():
    logger.info(
        "%5s %14s %14s %11s %11s %5s %8s",
        "iter",
        "objective",
        "lagrangian",
        "residual",
        "mu",
        "rank",
        "nnz",
    )


def _record(
    state: solver_state,
    objective: float,
    residual: matrix,
    dual: matrix,
    relative: float,
    rank: int,
) -> trace_record:
    lagrangian = (
        objective
        + float(np.sum(dual * residual))
        + 0.5 * state.mu * float(np.sum(residual * residual))
    )
    record = trace_record(
        state.iteration,
        objective,
        lagrangian,
        relative,
        state.mu,
        rank,
        int(np.count_nonzero(state.foreground)),
    )
    logger.info(
        "%5d %14.6e %14.6e %11.3e %11.3e %5d %8d",
        *record,
    )
    return record


def _finish(converged: bool, cfg: solver_config, residual: float) -> status:
    if converged:
        return status.CONVERGED
    logger.warning(
        "ALM stopped after %d iterations without convergence "
        "(residual %.3e > tol %.3e).",
        cfg.max_outer_iters,
        residual,
        cfg.tol,
    )
    return status.NOT_CONVERGED


def solve_uml(
    d: gflbs.problems.observation,
    cfg: solver_config | None = None,
    callback: typing.Callable[[solver_state], None] | None = None,
) -> decomposition:
    """
    Decompose an observation into a low-rank background and a generalized
    fused lasso foreground.

    Args:
        d: Observation, one frame per column.
        cfg: Solver configuration, defaults are used if None.
        callback: Called with the state after the background and foreground
            steps of every iteration.

    Returns:
        The last iterate, with status NOT_CONVERGED if the residual did not
        reach ``cfg.tol`` within ``cfg.max_outer_iters`` iterations.
    """
    data = d.matrix
    cfg = (cfg or solver_config()).resolve(data)
    assert cfg.lam is not None and cfg.mu0 is not None and cfg.mu_max is not None
    graph = build_neighborhood(d.width, d.height, cfg.connectivity)
    weights = compute_all_weights(data, graph, cfg.sigma)
    norm_d = frobenius_norm(data)

    logger.info(
        "unsupervised decomposition of %d frames of %dx%d, lam=%.4g, rho=%.4g, "
        "sigma=%.4g, mu0=%.4g",
        d.frame_count,
        d.width,
        d.height,
        cfg.lam,
        cfg.rho,
        cfg.sigma,
        cfg.mu0,
    )
    _log_header()

    state = solver_state.zeros(data.shape, cfg.mu0)
    trace: list[trace_record] = []
    converged = False
    relative = math.inf
    with _column_pool(cfg.workers, d.frame_count, graph) as pool:
        while state.iteration < cfg.max_outer_iters:
            mu = state.mu
            state.iteration += 1
            dual = state.dual

            state.m1 = data - state.foreground + dual / mu
            state.background, s = svt(state.m1, 1.0 / mu)

            state.m2 = data - state.background + dual / mu
            state.params = gfl_params(cfg.lam / mu, cfg.lam * cfg.rho / mu)
            state.foreground = _foreground_step(
                state.m2, graph, weights, state.params, pool
            )

            residual = data - state.background - state.foreground
            relative = frobenius_norm(residual) / norm_d if norm_d > 0 else 0.0
            objective = float(s.sum()) + cfg.lam * gfl_norm(
                state.foreground, graph, weights, cfg.rho
            )
            trace.append(
                _record(
                    state,
                    objective,
                    residual,
                    dual,
                    relative,
                    int(np.count_nonzero(s)),
                )
            )
            if callback is not None:
                callback(state)

            state.dual = dual + mu * residual
            state.mu = min(cfg.beta * mu, cfg.mu_max)
            if relative <= cfg.tol:
                converged = True
                break

    return decomposition(
        state.background,
        state.foreground,
        state.dual,
        trace,
        _finish(converged, cfg, relative),
        diagnostics={"config": cfg.asdict()},
    )


def solve_sml(
    prob: gflbs.problems.sml_problem,
    cfg: solver_config | None = None,
    callback: typing.Callable[[solver_state], None] | None = None,
) -> decomposition:
    """
    Decompose mixed frames over the span of background-only training frames.

    The coefficient step solves one lasso per mixed frame with FISTA, warm
    started from the previous outer iterate.

    Args:
        prob: Training and mixed frames.
        cfg: Solver configuration, defaults are used if None.
        callback: Called with the state after every iteration, as in
            solve_uml.

    Returns:
        The last iterate, with ``background = D1 @ coefficients``.
    """
    d1, d2 = prob.d1, prob.d2
    cfg = (cfg or solver_config()).resolve(d2)
    assert cfg.lam is not None and cfg.mu0 is not None and cfg.mu_max is not None
    graph = build_neighborhood(prob.width, prob.height, cfg.connectivity)
    weights = compute_all_weights(d2, graph, cfg.sigma)
    norm_d = frobenius_norm(d2)
    lipschitz = spectral_norm(d1) ** 2
    training_rank = numerical_rank(d1, 1e-6)

    logger.info(
        "supervised decomposition of %d frames of %dx%d over %d training frames "
        "(numerical rank %d), lam=%.4g, rho=%.4g, sigma=%.4g, mu0=%.4g",
        d2.shape[1],
        prob.width,
        prob.height,
        d1.shape[1],
        training_rank,
        cfg.lam,
        cfg.rho,
        cfg.sigma,
        cfg.mu0,
    )
    _log_header()

    state = solver_state.zeros(d2.shape, cfg.mu0)
    coefficients = np.zeros((d1.shape[1], d2.shape[1]))
    trace: list[trace_record] = []
    converged = False
    relative = math.inf
    with _column_pool(cfg.workers, d2.shape[1], graph) as pool:
        while state.iteration < cfg.max_outer_iters:
            mu = state.mu
            state.iteration += 1
            dual = state.dual

            state.m1 = d2 - state.foreground + dual / mu
            coefficients = fista_lasso(
                d1,
                state.m1,
                1.0 / mu,
                cfg.fista_iters,
                start=coefficients,
                lipschitz=lipschitz,
            )
            state.background = d1 @ coefficients

            state.m2 = d2 - state.background + dual / mu
            state.params = gfl_params(cfg.lam / mu, cfg.lam * cfg.rho / mu)
            state.foreground = _foreground_step(
                state.m2, graph, weights, state.params, pool
            )

            residual = d2 - state.background - state.foreground
            relative = frobenius_norm(residual) / norm_d if norm_d > 0 else 0.0
            objective = float(np.abs(coefficients).sum()) + cfg.lam * gfl_norm(
                state.foreground, graph, weights, cfg.rho
            )
            trace.append(
                _record(
                    state,
                    objective,
                    residual,
                    dual,
                    relative,
                    numerical_rank(state.background, 1e-6),
                )
            )
            if callback is not None:
                callback(state)

            state.dual = dual + mu * residual
            state.mu = min(cfg.beta * mu, cfg.mu_max)
            if relative <= cfg.tol:
                converged = True
                break

    return decomposition(
        state.background,
        state.foreground,
        state.dual,
        trace,
        _finish(converged, cfg, relative),
        coefficients=coefficients,
        diagnostics={"config": cfg.asdict(), "training_rank": training_rank},
    )
