"""Pure-Python lane of the hot-loop kernels.

Reference implementation of the contract documented in the package
docstring; the Cython lane mirrors it operation for operation. Scalar
math goes through ``math.exp`` (libm) rather than numpy ufuncs so both
lanes round identically.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.random import Generator

ENV_DETERMINISTIC = 0
ENV_ADDITIVE = 1
ENV_MULTIPLICATIVE = 2


def _draw_index(x: float, m: int) -> int:
    j = int(x * m)
    return m - 1 if j >= m else j


def _initial_state(x: float, mu: np.ndarray) -> int:
    cum = 0.0
    for i in range(mu.size - 1):
        cum += mu[i]
        if x < cum:
            return i
    return mu.size - 1


def _propose(gen: Generator, a: int, n: int, qcum: np.ndarray | None) -> int:
    x = gen.random()
    if qcum is None:
        j = _draw_index(x, n - 1)
        return j if j < a else j + 1
    row = qcum[a]
    for b in range(n):
        if x < row[b]:
            return b
    return n - 1


def metropolis_chain(bit_generator, u, beta, steps, mu, qcum=None):
    """Trajectory a_0..a_steps of the Metropolis chain on payoffs ``u``."""
    u = np.asarray(u, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    n = u.size
    gen = Generator(bit_generator)
    states = np.empty(steps + 1, dtype=np.int64)
    a = _initial_state(gen.random(), mu)
    states[0] = a
    for t in range(steps):
        b = _propose(gen, a, n, qcum)
        du = u[b] - u[a]
        if du >= 0.0 or gen.random() < math.exp(beta * du):
            a = b
        states[t + 1] = a
    return states


def macau_chain(
    bit_generator,
    prior,
    means,
    beta,
    steps,
    mu,
    env_kind,
    half_width,
    qcum=None,
    record=True,
):
    """Macau chain: Metropolis on running-mean payoff estimates.

    Each step proposes, accepts against the current estimates, then draws
    one payoff observation for the realized state and folds it into that
    state's running mean. Returns ``(states, estimates, counts)``; when
    ``record`` is false only the final state is kept.
    """
    est = np.array(prior, dtype=np.float64, copy=True)
    means = np.asarray(means, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    n = est.size
    counts = np.zeros(n, dtype=np.int64)
    gen = Generator(bit_generator)
    states = np.empty(steps + 1 if record else 1, dtype=np.int64)
    a = _initial_state(gen.random(), mu)
    if record:
        states[0] = a
    w = float(half_width)
    for t in range(steps):
        b = _propose(gen, a, n, qcum)
        du = est[b] - est[a]
        if du >= 0.0 or gen.random() < math.exp(beta * du):
            a = b
        if env_kind == ENV_DETERMINISTIC:
            v = means[a]
        elif env_kind == ENV_ADDITIVE:
            v = means[a] + w * (2.0 * gen.random() - 1.0)
        else:
            v = means[a] * (1.0 + w * (2.0 * gen.random() - 1.0))
        c = counts[a] + 1
        counts[a] = c
        est[a] = ((c - 1.0) / c) * est[a] + v / c
        if record:
            states[t + 1] = a
    if not record:
        states[0] = a
    return states, est, counts


def _dst_evaluate(in_ptr, in_src, view, induced, parents_out):
    """Min-cost in-edge per induced non-root vertex.

    Returns (feasible, total_cost). ``parents_out`` receives the chosen
    edge id per vertex (first minimum in edge order); it is only
    meaningful for induced vertices when feasible.
    """
    n_vertices = in_ptr.size - 1
    total = 0.0
    for v in range(1, n_vertices):
        if not induced[v]:
            continue
        best = math.inf
        best_e = -1
        for e in range(in_ptr[v], in_ptr[v + 1]):
            if induced[in_src[e]] and view[e] < best:
                best = view[e]
                best_e = e
        if best_e < 0:
            return False, 0.0
        parents_out[v] = best_e
        total += best
    return True, total


def dst_anneal(
    bit_generator,
    in_ptr,
    in_src,
    true_cost,
    steiner_vertices,
    init_sel,
    betas,
    freeze_window,
    estimate_costs,
    prior,
):
    """Anneal a layered Steiner-node selection with uniform toggle moves.

    One step: toggle a uniformly chosen potential Steiner node, reject
    outright if the induced subgraph loses feasibility, otherwise apply
    the Metropolis rule on the cost view (true costs, or per-edge running
    means when ``estimate_costs``). After the move resolves, the realized
    configuration's tree edges are observed (estimated mode only; edge
    costs are deterministic, so an observation is the edge's true cost).

    Stops when the configuration is unchanged ``freeze_window`` steps in
    a row or after ``len(betas)`` steps.
    """
    in_ptr = np.asarray(in_ptr, dtype=np.int64)
    in_src = np.asarray(in_src, dtype=np.int64)
    true_cost = np.asarray(true_cost, dtype=np.float64)
    steiner_vertices = np.asarray(steiner_vertices, dtype=np.int64)
    betas = np.asarray(betas, dtype=np.float64)
    n_vertices = in_ptr.size - 1
    n_steiner = steiner_vertices.size
    n_edges = in_src.size

    sel = np.array(init_sel, dtype=np.uint8, copy=True)
    induced = np.ones(n_vertices, dtype=np.uint8)
    induced[steiner_vertices] = sel

    if estimate_costs:
        est = np.full(n_edges, float(prior), dtype=np.float64)
        counts = np.zeros(n_edges, dtype=np.int64)
        view = est
    else:
        est = None
        counts = None
        view = true_cost

    cur_parents = np.full(n_vertices, -1, dtype=np.int64)
    prop_parents = np.full(n_vertices, -1, dtype=np.int64)
    true_parents = np.full(n_vertices, -1, dtype=np.int64)

    feasible, cur_view_cost = _dst_evaluate(in_ptr, in_src, view, induced, cur_parents)
    if not feasible:
        raise ValueError("initial configuration is infeasible")
    if estimate_costs:
        _, cur_true_cost = _dst_evaluate(in_ptr, in_src, true_cost, induced, true_parents)
    else:
        cur_true_cost = cur_view_cost

    best_sel = sel.copy()
    best_true_cost = cur_true_cost

    gen = Generator(bit_generator)
    unchanged = 0
    iterations = 0
    frozen = False

    for t in range(betas.size):
        beta = betas[t]
        pos = _draw_index(gen.random(), n_steiner)
        vtx = steiner_vertices[pos]

        if estimate_costs:
            # estimates moved last step; refresh the incumbent's value/tree
            feasible, cur_view_cost = _dst_evaluate(in_ptr, in_src, view, induced, cur_parents)

        sel[pos] ^= 1
        induced[vtx] ^= 1
        feasible, prop_view_cost = _dst_evaluate(in_ptr, in_src, view, induced, prop_parents)

        accepted = False
        if feasible:
            du = cur_view_cost - prop_view_cost
            if du >= 0.0 or gen.random() < math.exp(beta * du):
                accepted = True
        if accepted:
            cur_parents, prop_parents = prop_parents, cur_parents
            cur_view_cost = prop_view_cost
            if estimate_costs:
                _, cur_true_cost = _dst_evaluate(in_ptr, in_src, true_cost, induced, true_parents)
            else:
                cur_true_cost = prop_view_cost
            if cur_true_cost < best_true_cost:
                best_true_cost = cur_true_cost
                best_sel[:] = sel
        else:
            sel[pos] ^= 1
            induced[vtx] ^= 1

        if estimate_costs:
            for v in range(1, n_vertices):
                if induced[v]:
                    e = cur_parents[v]
                    c = counts[e] + 1
                    counts[e] = c
                    est[e] = ((c - 1.0) / c) * est[e] + true_cost[e] / c

        iterations = t + 1
        if accepted:
            unchanged = 0
        else:
            unchanged += 1
            if unchanged >= freeze_window:
                frozen = True
                break

    if estimate_costs:
        _, final_view_cost = _dst_evaluate(in_ptr, in_src, view, induced, cur_parents)
        _, final_true_cost = _dst_evaluate(in_ptr, in_src, true_cost, induced, true_parents)
    else:
        final_view_cost = cur_view_cost
        final_true_cost = cur_true_cost

    return (
        sel,
        iterations,
        frozen,
        final_view_cost,
        final_true_cost,
        best_sel,
        best_true_cost,
        est,
        counts,
    )


def _tour_cost(order, costs):
    n = order.size
    total = 0.0
    for k in range(n):
        total += costs[order[k], order[(k + 1) % n]]
    return total


def tsp_anneal(
    bit_generator,
    dist,
    init_order,
    betas,
    freeze_window,
    estimate_costs,
    noise_half_width,
    prior,
):
    """Anneal a tour with uniform 2-opt segment reversals.

    A move cuts the cycle at position ``p`` and at gap ``g`` in [2, n-2]
    and reverses the enclosed arc (the complementary arc when it would
    wrap), which changes exactly two legs. In estimated mode the
    acceptance delta reads per-leg running means, and after each step all
    legs of the realized tour are observed under multiplicative uniform
    noise. True leg times drive scoring only.
    """
    dist = np.asarray(dist, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    order = np.array(init_order, dtype=np.int64, copy=True)
    n = order.size
    if n < 4:
        raise ValueError("tours with fewer than 4 cities cannot be annealed")

    if estimate_costs:
        est = np.full((n, n), float(prior), dtype=np.float64)
        counts = np.zeros((n, n), dtype=np.int64)
        view = est
    else:
        est = None
        counts = None
        view = dist

    w = float(noise_half_width)
    cur_true_cost = _tour_cost(order, dist)
    best_order = order.copy()
    best_true_cost = cur_true_cost

    gen = Generator(bit_generator)
    unchanged = 0
    iterations = 0
    frozen = False

    for t in range(betas.size):
        beta = betas[t]
        p = _draw_index(gen.random(), n)
        g = 2 + _draw_index(gen.random(), n - 3)
        if p + g <= n:
            lo, hi = p, p + g
        else:
            lo, hi = p + g - n, p
        a = order[lo - 1]  # lo == 0 wraps to the last city
        b = order[lo]
        c = order[hi - 1]
        d = order[hi % n]
        du = (view[a, b] + view[c, d]) - (view[a, c] + view[b, d])
        accepted = False
        if du >= 0.0 or gen.random() < math.exp(beta * du):
            accepted = True
            order[lo:hi] = order[lo:hi][::-1]
            cur_true_cost += (dist[a, c] + dist[b, d]) - (dist[a, b] + dist[c, d])
            if cur_true_cost < best_true_cost:
                cur_true_cost = _tour_cost(order, dist)  # resync accumulated drift
                if cur_true_cost < best_true_cost:
                    best_true_cost = cur_true_cost
                    best_order[:] = order

        if estimate_costs:
            xs = gen.random(n)
            for k in range(n):
                i = order[k]
                j = order[(k + 1) % n]
                v = dist[i, j] * (1.0 + w * (2.0 * xs[k] - 1.0))
                cnt = counts[i, j] + 1
                counts[i, j] = cnt
                counts[j, i] = cnt
                e = ((cnt - 1.0) / cnt) * est[i, j] + v / cnt
                est[i, j] = e
                est[j, i] = e

        iterations = t + 1
        if accepted:
            unchanged = 0
        else:
            unchanged += 1
            if unchanged >= freeze_window:
                frozen = True
                break

    final_true_cost = _tour_cost(order, dist)
    final_view_cost = _tour_cost(order, view)
    best_true_cost = _tour_cost(best_order, dist)

    return (
        order,
        iterations,
        frozen,
        final_view_cost,
        final_true_cost,
        best_order,
        best_true_cost,
        est,
        counts,
    )
