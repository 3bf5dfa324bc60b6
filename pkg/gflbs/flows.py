"""
Maximum flow / minimum cut on s-t networks, and the exact weighted
total-variation proximal operator

    argmin_f  lam2 * sum_ij w_ij |f_i - f_j| + 1/2 ||f - m||^2

computed by recursive divide-and-conquer: every group of nodes sharing a
tentative common value is either certified fused by a minimum cut, or split
into the nodes strictly above and below that value.
"""

from __future__ import annotations

import logging

import maxflow
import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

vector = npt.NDArray[np.float64]


class flow_network:

    """
    Class representing a capacitated network over ``node_count`` nodes plus an
    implicit source and sink.

    Pairwise arcs go from ``tails[k]`` to ``heads[k]`` with capacity
    ``capacities[k]`` and, in the opposite direction, capacity
    ``reverse_capacities[k]`` (0 for a purely directed arc).
    """

    _node_count: int
    _source_caps: vector
    _sink_caps: vector
    _tails: npt.NDArray[np.intp]
    _heads: npt.NDArray[np.intp]
    _caps: vector
    _rcaps: vector

    def __init__(
        self,
        node_count: int,
        source_caps: npt.ArrayLike,
        sink_caps: npt.ArrayLike,
        tails: npt.ArrayLike = (),
        heads: npt.ArrayLike = (),
        capacities: npt.ArrayLike = (),
        reverse_capacities: npt.ArrayLike | None = None,
    ):
        """
        Args:
            node_count: Number of non-terminal nodes.
            source_caps: Capacity of the arc from the source to each node.
            sink_caps: Capacity of the arc from each node to the sink.
            tails: Tail node of each pairwise arc.
            heads: Head node of each pairwise arc.
            capacities: Capacity of each pairwise arc.
            reverse_capacities: Capacity of the opposite arc, zeros if None.
        """
        self._node_count = int(node_count)
        self._source_caps = np.asarray(source_caps, dtype=np.float64).ravel()
        self._sink_caps = np.asarray(sink_caps, dtype=np.float64).ravel()
        self._tails = np.asarray(tails, dtype=np.intp).ravel()
        self._heads = np.asarray(heads, dtype=np.intp).ravel()
        self._caps = np.asarray(capacities, dtype=np.float64).ravel()
        if reverse_capacities is None:
            self._rcaps = np.zeros(len(self._caps))
        else:
            self._rcaps = np.asarray(reverse_capacities, dtype=np.float64).ravel()
        self._validate()

    def _validate(self):
        n = self._node_count
        if len(self._source_caps) != n or len(self._sink_caps) != n:
            raise ValueError(
                "Expected {} terminal capacities, got {} and {}.".format(
                    n, len(self._source_caps), len(self._sink_caps)
                )
            )
        k = len(self._tails)
        if not (len(self._heads) == len(self._caps) == len(self._rcaps) == k):
            raise ValueError("Pairwise arc arrays must have the same length.")
        for name, caps in (
            ("source", self._source_caps),
            ("sink", self._sink_caps),
            ("pairwise", self._caps),
            ("reverse", self._rcaps),
        ):
            if not np.all(np.isfinite(caps)) or np.any(caps < 0):
                raise ValueError(
                    "All {} capacities must be finite and nonnegative.".format(name)
                )
        if k:
            if min(self._tails.min(), self._heads.min()) < 0 or (
                max(self._tails.max(), self._heads.max()) >= n
            ):
                raise ValueError(
                    "Pairwise arc references a node outside [0, {}).".format(n)
                )
            if np.any(self._tails == self._heads):
                raise ValueError("Self-loops are not allowed in a flow network.")
            pairs = np.sort(np.stack([self._tails, self._heads], axis=1), axis=1)
            if len(np.unique(pairs, axis=0)) != k:
                raise ValueError("At most one pairwise arc is allowed per node pair.")

    @property
    def node_count(self) -> int:
        return self._node_count

    @property
    def source_caps(self) -> vector:
        return self._source_caps

    @property
    def sink_caps(self) -> vector:
        return self._sink_caps

    @property
    def tails(self) -> npt.NDArray[np.intp]:
        return self._tails

    @property
    def heads(self) -> npt.NDArray[np.intp]:
        return self._heads

    @property
    def capacities(self) -> vector:
        return self._caps

    @property
    def reverse_capacities(self) -> vector:
        return self._rcaps

    def cut_capacity(self, source_side: npt.ArrayLike) -> float:
        """
        Compute the capacity of the cut separating the given source side
        (plus the source) from the remaining nodes (plus the sink).

        Args:
            source_side: Boolean array, True for nodes on the source side.

        Returns:
            The total capacity of the arcs leaving the source side.
        """
        side = np.asarray(source_side, dtype=bool)
        value = self._sink_caps[side].sum() + self._source_caps[~side].sum()
        if len(self._tails):
            st, sh = side[self._tails], side[self._heads]
            value += self._caps[st & ~sh].sum() + self._rcaps[sh & ~st].sum()
        return float(value)


class min_cut:

    """
    Class representing a minimum cut, certified by the value of a maximum flow.
    """

    _source_side: npt.NDArray[np.bool_]
    _flow_value: float

    def __init__(self, source_side: npt.ArrayLike, flow_value: float):
        """
        Args:
            source_side: Boolean array, True for nodes on the source side.
            flow_value: Value of the maximum flow.
        """
        self._source_side = np.asarray(source_side, dtype=bool)
        self._flow_value = flow_value

    @property
    def source_side(self) -> npt.NDArray[np.bool_]:
        """True for nodes reachable from the source in the residual network."""
        return self._source_side

    @property
    def flow_value(self) -> float:
        return self._flow_value

    def __repr__(self):
        return "flow = {}, source side = {} node(s)".format(
            self._flow_value, int(self._source_side.sum())
        )


def max_flow(net: flow_network) -> min_cut:
    """
    Compute a maximum flow and the associated minimum cut with the
    Boykov-Kolmogorov search-tree algorithm of ``PyMaxflow``.

    Among all minimum cuts, the returned one has the smallest source side:
    the nodes reachable from the source in the final residual network. The
    network is solved reversed (terminals swapped, arcs flipped), so these
    nodes are exactly the ones grown into the sink search tree.

    Args:
        net: The network to solve.

    Returns:
        The minimum cut and the maximum flow value.
    """
    n = net.node_count
    if n == 0:
        return min_cut(np.zeros(0, dtype=bool), 0.0)

    g = maxflow.Graph[float](n, len(net.tails))
    nodes = g.add_nodes(n)
    g.add_grid_tedges(nodes, net.sink_caps, net.source_caps)
    for u, v, c, rc in zip(
        net.tails.tolist(),
        net.heads.tolist(),
        net.capacities.tolist(),
        net.reverse_capacities.tolist(),
    ):
        if c > 0 or rc > 0:
            g.add_edge(u, v, rc, c)
    flow = float(g.maxflow())
    return min_cut(np.asarray(g.get_grid_segments(nodes), dtype=bool), flow)


def tv_value(f: npt.ArrayLike, edges: npt.ArrayLike, weights: npt.ArrayLike) -> float:
    """
    Weighted total variation ``sum_ij w_ij |f_i - f_j|``.

    Args:
        f: Node values.
        edges: ``k x 2`` array of node pairs.
        weights: Nonnegative weight of each pair.

    Returns:
        The weighted total variation of f.
    """
    f = np.asarray(f, dtype=np.float64).ravel()
    e = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    w = np.asarray(weights, dtype=np.float64).ravel()
    return float((w * np.abs(f[e[:, 0]] - f[e[:, 1]])).sum())


def _linearize(
    mp: vector,
    ei: npt.NDArray[np.intp],
    ej: npt.NDArray[np.intp],
    caps: vector,
    passes: int = 8,
):
    # Drop the edges whose ordering is certified by |f_i - m_i| <= radius_i,
    # folding their (constant) subgradient into mp.
    n = len(mp)
    for _ in range(passes):
        if not len(caps):
            break
        radius = np.bincount(ei, caps, n) + np.bincount(ej, caps, n)
        lo, hi = mp - radius, mp + radius
        above = lo[ei] > hi[ej]
        below = hi[ei] < lo[ej]
        fixed = above | below
        if not fixed.any():
            break
        c = np.where(above[fixed], caps[fixed], -caps[fixed])
        mp -= np.bincount(ei[fixed], c, n)
        mp += np.bincount(ej[fixed], c, n)
        ei, ej, caps = ei[~fixed], ej[~fixed], caps[~fixed]
    return ei, ej, caps


def _components(n: int, ei: npt.NDArray[np.intp], ej: npt.NDArray[np.intp]):
    # Connected components with more than one node, as (nodes, edge indices).
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    graph = coo_matrix((np.ones(len(ei)), (ei, ej)), shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    node_order = np.argsort(labels, kind="stable")
    node_bounds = np.cumsum(np.bincount(labels, minlength=count))[:-1]
    edge_labels = labels[ei]
    edge_order = np.argsort(edge_labels, kind="stable")
    edge_bounds = np.cumsum(np.bincount(edge_labels, minlength=count))[:-1]
    return [
        (nodes, eidx)
        for nodes, eidx in zip(
            np.split(node_order, node_bounds), np.split(edge_order, edge_bounds)
        )
        if len(nodes) > 1
    ]


def tv_prox(
    m: npt.ArrayLike,
    edges: npt.ArrayLike,
    weights: npt.ArrayLike,
    lam2: float,
    zero_band: float | None = None,
) -> vector:
    """
    Exact proximal operator of the weighted total variation.

    Args:
        m: Input vector, one value per node.
        edges: ``k x 2`` array of node pairs.
        weights: Nonnegative weight of each pair.
        lam2: Nonnegative penalty.
        zero_band: If given, groups of nodes whose (adjusted) data all lie in
            ``[-zero_band, zero_band]`` are not refined further. The result is
            then exact only after soft-thresholding at ``zero_band``.

    Returns:
        The unique minimizer of ``lam2 * sum w_ij |f_i - f_j| + 1/2 ||f - m||^2``.
    """
    m = np.asarray(m, dtype=np.float64).ravel()
    e = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    w = np.asarray(weights, dtype=np.float64).ravel()
    if lam2 < 0:
        raise ValueError("TV penalty must be nonnegative, got {}.".format(lam2))
    if len(w) != len(e):
        raise ValueError("Expected {} edge weights, got {}.".format(len(e), len(w)))
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("Edge weights must be finite and nonnegative.")

    n = len(m)
    if lam2 == 0 or len(e) == 0:
        return m.copy()
    if e.min() < 0 or e.max() >= n:
        raise ValueError("Edge references a node outside [0, {}).".format(n))

    caps = lam2 * w
    keep = caps > 0
    mp = m.copy()
    ei, ej, caps = _linearize(mp, e[keep, 0], e[keep, 1], caps[keep])

    f = mp.copy()
    if not len(caps):
        return f

    groups = _components(n, ei, ej)
    local = np.empty(n, dtype=np.intp)
    flows = fused = 0
    while groups:
        nodes, eidx = groups.pop()
        values = mp[nodes]
        k = len(nodes)
        if len(eidx) == 0:
            f[nodes] = values
            continue
        alpha = values.mean()
        if zero_band is not None and np.abs(values).max() <= zero_band:
            f[nodes] = alpha
            continue

        local[nodes] = np.arange(k)
        a, b, c = local[ei[eidx]], local[ej[eidx]], caps[eidx]
        if k == 2:
            # Closed form for a single (possibly merged) edge.
            c2 = c.sum()
            gap = values[0] - values[1]
            if abs(gap) <= 2 * c2:
                f[nodes] = alpha
            else:
                shift = c2 if gap > 0 else -c2
                f[nodes] = values - np.array([shift, -shift])
            continue

        excess = values - alpha
        radius = np.bincount(a, c, k) + np.bincount(b, c, k)
        margin = 1e-12 * max(1.0, float(np.abs(values).max()))
        upper = excess - radius > margin
        lower = excess + radius < -margin
        free = ~(upper | lower)

        side = upper.copy()
        if free.any():
            fa, fb = free[a], free[b]
            both = fa & fb
            src = np.maximum(excess, 0.0)
            src += np.bincount(a[fa & upper[b]], c[fa & upper[b]], k)
            src += np.bincount(b[fb & upper[a]], c[fb & upper[a]], k)
            snk = np.maximum(-excess, 0.0)
            snk += np.bincount(a[fa & lower[b]], c[fa & lower[b]], k)
            snk += np.bincount(b[fb & lower[a]], c[fb & lower[a]], k)

            free_nodes = np.flatnonzero(free)
            sub = np.empty(k, dtype=np.intp)
            sub[free_nodes] = np.arange(len(free_nodes))
            pa, pb = sub[a[both]], sub[b[both]]
            if len(pa):
                # Parallel edges between the same pair are merged.
                pairs, inverse = np.unique(
                    np.stack([np.minimum(pa, pb), np.maximum(pa, pb)], axis=1),
                    axis=0,
                    return_inverse=True,
                )
                pcaps = np.bincount(inverse.ravel(), c[both], len(pairs))
            else:
                pairs, pcaps = np.zeros((0, 2), dtype=np.intp), np.zeros(0)
            cut = max_flow(
                flow_network(
                    len(free_nodes),
                    src[free_nodes],
                    snk[free_nodes],
                    pairs[:, 0],
                    pairs[:, 1],
                    pcaps,
                    pcaps,
                )
            )
            flows += 1
            side[free_nodes[cut.source_side]] = True

        count = int(side.sum())
        if count == 0 or count == k:
            f[nodes] = alpha
            fused += 1
            continue

        # Edges across the split contribute a constant subgradient.
        sa, sb = side[a], side[b]
        across = sa != sb
        shift = np.where(sa[across], c[across], -c[across])
        mp[nodes] -= np.bincount(a[across], shift, k)
        mp[nodes] += np.bincount(b[across], shift, k)
        groups.append((nodes[~side], eidx[~sa & ~sb]))
        groups.append((nodes[side], eidx[sa & sb]))

    logger.debug("tv prox: %d max-flow solve(s), %d fused group(s)", flows, fused)
    return f
