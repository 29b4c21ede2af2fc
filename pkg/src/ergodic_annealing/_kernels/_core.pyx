# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled lane of the hot-loop kernels.

Mirrors ``_pure`` operation for operation: same draw order, same index
mapping, same update formulas, same accumulation order. Given the same
bit generator state the two lanes return bit-identical results.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport INFINITY, exp
from numpy.random cimport bitgen_t

import numpy as np

cdef enum:
    _ENV_DETERMINISTIC = 0
    _ENV_ADDITIVE = 1
    _ENV_MULTIPLICATIVE = 2

ENV_DETERMINISTIC = _ENV_DETERMINISTIC
ENV_ADDITIVE = _ENV_ADDITIVE
ENV_MULTIPLICATIVE = _ENV_MULTIPLICATIVE

cdef const char *CAPSULE_NAME = "BitGenerator"


cdef bitgen_t *_bitgen(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("invalid bit generator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, CAPSULE_NAME)


cdef inline double _next(bitgen_t *bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline Py_ssize_t _draw_index(double x, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j = <Py_ssize_t>(x * m)
    return m - 1 if j >= m else j


cdef inline Py_ssize_t _initial_state(double x, const double[::1] mu) noexcept nogil:
    cdef double cum = 0.0
    cdef Py_ssize_t i
    for i in range(mu.shape[0] - 1):
        cum += mu[i]
        if x < cum:
            return i
    return mu.shape[0] - 1


cdef inline Py_ssize_t _propose(
    bitgen_t *bg, Py_ssize_t a, Py_ssize_t n, const double[:, ::1] qcum, bint uniform
) noexcept nogil:
    cdef double x = _next(bg)
    cdef Py_ssize_t j, b
    if uniform:
        j = _draw_index(x, n - 1)
        return j if j < a else j + 1
    for b in range(n):
        if x < qcum[a, b]:
            return b
    return n - 1


def metropolis_chain(bit_generator, u, double beta, Py_ssize_t steps, mu, qcum=None):
    """Trajectory a_0..a_steps of the Metropolis chain on payoffs ``u``."""
    u_arr = np.ascontiguousarray(u, dtype=np.float64)
    mu_arr = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] uv = u_arr
    cdef const double[::1] muv = mu_arr
    cdef bint uniform = qcum is None
    q_arr = np.zeros((1, 1)) if uniform else np.ascontiguousarray(qcum, dtype=np.float64)
    cdef const double[:, ::1] qv = q_arr
    states_arr = np.empty(steps + 1, dtype=np.int64)
    cdef long long[::1] states = states_arr
    cdef bitgen_t *bg = _bitgen(bit_generator)
    cdef Py_ssize_t n = uv.shape[0]
    cdef Py_ssize_t a, b, t
    cdef double du
    with bit_generator.lock, nogil:
        a = _initial_state(_next(bg), muv)
        states[0] = a
        for t in range(steps):
            b = _propose(bg, a, n, qv, uniform)
            du = uv[b] - uv[a]
            if du >= 0.0 or _next(bg) < exp(beta * du):
                a = b
            states[t + 1] = a
    return states_arr


def macau_chain(
    bit_generator,
    prior,
    means,
    double beta,
    Py_ssize_t steps,
    mu,
    int env_kind,
    double half_width,
    qcum=None,
    bint record=True,
):
    """Macau chain: Metropolis on running-mean payoff estimates."""
    est_arr = np.array(prior, dtype=np.float64, copy=True)
    means_arr = np.ascontiguousarray(means, dtype=np.float64)
    mu_arr = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[::1] est = est_arr
    cdef const double[::1] mn = means_arr
    cdef const double[::1] muv = mu_arr
    cdef Py_ssize_t n = est.shape[0]
    counts_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef bint uniform = qcum is None
    q_arr = np.zeros((1, 1)) if uniform else np.ascontiguousarray(qcum, dtype=np.float64)
    cdef const double[:, ::1] qv = q_arr
    states_arr = np.empty(steps + 1 if record else 1, dtype=np.int64)
    cdef long long[::1] states = states_arr
    cdef bitgen_t *bg = _bitgen(bit_generator)
    cdef Py_ssize_t a, b, t
    cdef double du, v, dc, w = half_width
    cdef long long c
    with bit_generator.lock, nogil:
        a = _initial_state(_next(bg), muv)
        if record:
            states[0] = a
        for t in range(steps):
            b = _propose(bg, a, n, qv, uniform)
            du = est[b] - est[a]
            if du >= 0.0 or _next(bg) < exp(beta * du):
                a = b
            if env_kind == _ENV_DETERMINISTIC:
                v = mn[a]
            elif env_kind == _ENV_ADDITIVE:
                v = mn[a] + w * (2.0 * _next(bg) - 1.0)
            else:
                v = mn[a] * (1.0 + w * (2.0 * _next(bg) - 1.0))
            c = counts[a] + 1
            counts[a] = c
            dc = <double> c
            est[a] = ((dc - 1.0) / dc) * est[a] + v / dc
            if record:
                states[t + 1] = a
        if not record:
            states[0] = a
    return states_arr, est_arr, counts_arr


cdef bint _dst_eval(
    const long long[::1] in_ptr,
    const long long[::1] in_src,
    const double[::1] view,
    const unsigned char[::1] induced,
    long long[:, ::1] parents,
    Py_ssize_t row,
    double *total,
) noexcept nogil:
    cdef Py_ssize_t nv = in_ptr.shape[0] - 1
    cdef Py_ssize_t v
    cdef long long e, best_e
    cdef double best, tot = 0.0
    for v in range(1, nv):
        if not induced[v]:
            continue
        best = INFINITY
        best_e = -1
        for e in range(in_ptr[v], in_ptr[v + 1]):
            if induced[in_src[e]] and view[e] < best:
                best = view[e]
                best_e = e
        if best_e < 0:
            total[0] = 0.0
            return False
        parents[row, v] = best_e
        tot += best
    total[0] = tot
    return True


def dst_anneal(
    bit_generator,
    in_ptr,
    in_src,
    true_cost,
    steiner_vertices,
    init_sel,
    betas,
    long long freeze_window,
    bint estimate_costs,
    double prior,
):
    """Anneal a layered Steiner-node selection with uniform toggle moves."""
    ptr_arr = np.ascontiguousarray(in_ptr, dtype=np.int64)
    src_arr = np.ascontiguousarray(in_src, dtype=np.int64)
    cost_arr = np.ascontiguousarray(true_cost, dtype=np.float64)
    sv_arr = np.ascontiguousarray(steiner_vertices, dtype=np.int64)
    betas_arr = np.ascontiguousarray(betas, dtype=np.float64)
    cdef const long long[::1] ptr = ptr_arr
    cdef const long long[::1] src = src_arr
    cdef const double[::1] tc = cost_arr
    cdef const long long[::1] sv = sv_arr
    cdef const double[::1] bts = betas_arr

    cdef Py_ssize_t n_vertices = ptr.shape[0] - 1
    cdef Py_ssize_t n_steiner = sv.shape[0]
    cdef Py_ssize_t n_edges = src.shape[0]

    sel_arr = np.array(init_sel, dtype=np.uint8, copy=True)
    cdef unsigned char[::1] sel = sel_arr
    induced_arr = np.ones(n_vertices, dtype=np.uint8)
    cdef unsigned char[::1] induced = induced_arr
    cdef Py_ssize_t pos
    for pos in range(n_steiner):
        induced[sv[pos]] = sel[pos]

    est_arr = np.full(n_edges, prior, dtype=np.float64) if estimate_costs else None
    counts_arr = np.zeros(n_edges, dtype=np.int64) if estimate_costs else None
    cdef double[::1] est = est_arr if estimate_costs else np.empty(0, dtype=np.float64)
    cdef long long[::1] counts = counts_arr if estimate_costs else np.empty(0, dtype=np.int64)
    cdef const double[::1] view = est if estimate_costs else tc

    parents_arr = np.full((3, n_vertices), -1, dtype=np.int64)
    cdef long long[:, ::1] parents = parents_arr
    cdef Py_ssize_t cur_i = 0, prop_i = 1, swap_i
    cdef Py_ssize_t TRUE_ROW = 2

    best_sel_arr = sel_arr.copy()
    cdef unsigned char[::1] best_sel = best_sel_arr

    cdef double cur_view_cost = 0.0, prop_view_cost = 0.0, cur_true_cost = 0.0
    cdef double best_true_cost, final_view_cost, final_true_cost
    cdef bint feasible, accepted, froze = False
    cdef long long unchanged = 0, iterations = 0
    cdef Py_ssize_t t, v, vtx
    cdef long long e, c
    cdef double beta, du, dc

    cdef bitgen_t *bg = _bitgen(bit_generator)

    feasible = _dst_eval(ptr, src, view, induced, parents, cur_i, &cur_view_cost)
    if not feasible:
        raise ValueError("initial configuration is infeasible")
    if estimate_costs:
        _dst_eval(ptr, src, tc, induced, parents, TRUE_ROW, &cur_true_cost)
    else:
        cur_true_cost = cur_view_cost
    best_true_cost = cur_true_cost

    with bit_generator.lock, nogil:
        for t in range(bts.shape[0]):
            beta = bts[t]
            pos = _draw_index(_next(bg), n_steiner)
            vtx = sv[pos]

            if estimate_costs:
                _dst_eval(ptr, src, view, induced, parents, cur_i, &cur_view_cost)

            sel[pos] ^= 1
            induced[vtx] ^= 1
            feasible = _dst_eval(ptr, src, view, induced, parents, prop_i, &prop_view_cost)

            accepted = False
            if feasible:
                du = cur_view_cost - prop_view_cost
                if du >= 0.0 or _next(bg) < exp(beta * du):
                    accepted = True
            if accepted:
                swap_i = cur_i
                cur_i = prop_i
                prop_i = swap_i
                cur_view_cost = prop_view_cost
                if estimate_costs:
                    _dst_eval(ptr, src, tc, induced, parents, TRUE_ROW, &cur_true_cost)
                else:
                    cur_true_cost = prop_view_cost
                if cur_true_cost < best_true_cost:
                    best_true_cost = cur_true_cost
                    for pos in range(n_steiner):
                        best_sel[pos] = sel[pos]
            else:
                sel[pos] ^= 1
                induced[vtx] ^= 1

            if estimate_costs:
                for v in range(1, n_vertices):
                    if induced[v]:
                        e = parents[cur_i, v]
                        c = counts[e] + 1
                        counts[e] = c
                        dc = <double> c
                        est[e] = ((dc - 1.0) / dc) * est[e] + tc[e] / dc

            iterations = t + 1
            if accepted:
                unchanged = 0
            else:
                unchanged += 1
                if unchanged >= freeze_window:
                    froze = True
                    break

    if estimate_costs:
        _dst_eval(ptr, src, view, induced, parents, cur_i, &final_view_cost)
        _dst_eval(ptr, src, tc, induced, parents, TRUE_ROW, &final_true_cost)
    else:
        final_view_cost = cur_view_cost
        final_true_cost = cur_true_cost

    return (
        sel_arr,
        int(iterations),
        bool(froze),
        float(final_view_cost),
        float(final_true_cost),
        best_sel_arr,
        float(best_true_cost),
        est_arr,
        counts_arr,
    )


cdef double _tour_cost(const long long[::1] order, const double[:, ::1] costs) noexcept nogil:
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t k, kp
    cdef double total = 0.0
    for k in range(n):
        kp = k + 1
        if kp == n:
            kp = 0
        total += costs[order[k], order[kp]]
    return total


def tsp_anneal(
    bit_generator,
    dist,
    init_order,
    betas,
    long long freeze_window,
    bint estimate_costs,
    double noise_half_width,
    double prior,
):
    """Anneal a tour with uniform 2-opt segment reversals."""
    dist_arr = np.ascontiguousarray(dist, dtype=np.float64)
    betas_arr = np.ascontiguousarray(betas, dtype=np.float64)
    order_arr = np.array(init_order, dtype=np.int64, copy=True)
    cdef const double[:, ::1] dv = dist_arr
    cdef const double[::1] bts = betas_arr
    cdef long long[::1] order = order_arr
    cdef Py_ssize_t n = order.shape[0]
    if n < 4:
        raise ValueError("tours with fewer than 4 cities cannot be annealed")

    est_arr = np.full((n, n), prior, dtype=np.float64) if estimate_costs else None
    counts_arr = np.zeros((n, n), dtype=np.int64) if estimate_costs else None
    cdef double[:, ::1] est = est_arr if estimate_costs else np.empty((0, 0), dtype=np.float64)
    cdef long long[:, ::1] counts = counts_arr if estimate_costs else np.empty((0, 0), dtype=np.int64)
    cdef const double[:, ::1] view = est if estimate_costs else dv

    best_order_arr = order_arr.copy()
    cdef long long[::1] best_order = best_order_arr

    cdef double w = noise_half_width
    cdef double cur_true_cost = 0.0, best_true_cost
    cdef double final_view_cost, final_true_cost
    cdef bint accepted, froze = False
    cdef long long unchanged = 0, iterations = 0
    cdef Py_ssize_t t, p, g, lo, hi, i, j, k, kp
    cdef long long a, b, c, d, tmp
    cdef double beta, du, v, dc
    cdef long long cnt
    cdef bitgen_t *bg = _bitgen(bit_generator)

    with bit_generator.lock, nogil:
        cur_true_cost = _tour_cost(order, dv)
        best_true_cost = cur_true_cost
        for t in range(bts.shape[0]):
            beta = bts[t]
            p = _draw_index(_next(bg), n)
            g = 2 + _draw_index(_next(bg), n - 3)
            if p + g <= n:
                lo = p
                hi = p + g
            else:
                lo = p + g - n
                hi = p
            a = order[n - 1] if lo == 0 else order[lo - 1]
            b = order[lo]
            c = order[hi - 1]
            d = order[0] if hi == n else order[hi]
            du = (view[a, b] + view[c, d]) - (view[a, c] + view[b, d])
            accepted = False
            if du >= 0.0 or _next(bg) < exp(beta * du):
                accepted = True
                i = lo
                j = hi - 1
                while i < j:
                    tmp = order[i]
                    order[i] = order[j]
                    order[j] = tmp
                    i += 1
                    j -= 1
                cur_true_cost += (dv[a, c] + dv[b, d]) - (dv[a, b] + dv[c, d])
                if cur_true_cost < best_true_cost:
                    cur_true_cost = _tour_cost(order, dv)  # resync accumulated drift
                    if cur_true_cost < best_true_cost:
                        best_true_cost = cur_true_cost
                        for k in range(n):
                            best_order[k] = order[k]

            if estimate_costs:
                for k in range(n):
                    kp = k + 1
                    if kp == n:
                        kp = 0
                    i = order[k]
                    j = order[kp]
                    v = dv[i, j] * (1.0 + w * (2.0 * _next(bg) - 1.0))
                    cnt = counts[i, j] + 1
                    counts[i, j] = cnt
                    counts[j, i] = cnt
                    dc = <double> cnt
                    du = ((dc - 1.0) / dc) * est[i, j] + v / dc
                    est[i, j] = du
                    est[j, i] = du

            iterations = t + 1
            if accepted:
                unchanged = 0
            else:
                unchanged += 1
                if unchanged >= freeze_window:
                    froze = True
                    break

        final_true_cost = _tour_cost(order, dv)
        final_view_cost = _tour_cost(order, view)
        best_true_cost = _tour_cost(best_order, dv)

    return (
        order_arr,
        int(iterations),
        bool(froze),
        float(final_view_cost),
        float(final_true_cost),
        best_order_arr,
        float(best_true_cost),
        est_arr,
        counts_arr,
    )
