"""Compiled event loops for the scaled workload simulators.

Both kernels consume pre-drawn uniform variates so that the calling code
owns the random streams.  A kernel that runs out of variates or output
capacity returns a status code and the caller retries with larger buffers
drawn from the same streams (``Generator.random`` is prefix-stable).
"""
import math

import numpy as np
from numba import njit

OK = 0
NEED_ARRIVAL_U = 1
NEED_DURATION_U = 2
NEED_CAPACITY = 3
BUDGET = 4
ROOT_FAIL = 5

_GL_X = np.array([-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                  -0.1834346424956498, 0.1834346424956498, 0.5255324099163290,
                  0.7966664774136267, 0.9602898564975363])
_GL_W = np.array([0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                  0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                  0.2223810344533745, 0.1012285362903763])


@njit(cache=True)
def g_eval(x, c1, c2):
    return c1 * x + c2 * math.tanh(x)


@njit(cache=True)
def seg_int(x0, sx, dt, c1, c2):
    """int_0^dt exp(-g(x0 + sx u)) du for g = c1 x + c2 tanh x."""
    if dt <= 0.0:
        return 0.0
    if c2 == 0.0:
        c = c1 * sx
        z = c * dt
        base = math.exp(-c1 * x0)
        if abs(z) < 1e-8:
            return base * dt * (1.0 - 0.5 * z + z * z / 6.0)
        return base * (-math.expm1(-z)) / c
    panels = max(1, int(math.ceil(abs(sx * dt) / 0.25)))
    w = dt / panels
    total = 0.0
    for k in range(panels):
        a = k * w
        for j in range(8):
            u = a + 0.5 * w * (_GL_X[j] + 1.0)
            total += _GL_W[j] * math.exp(-g_eval(x0 + sx * u, c1, c2))
    return 0.5 * w * total


@njit(cache=True)
def _heap_push(ht, hs, size, t, s):
    i = size
    ht[i] = t
    hs[i] = s
    while i > 0:
        parent = (i - 1) // 2
        if ht[parent] <= ht[i]:
            break
        ht[parent], ht[i] = ht[i], ht[parent]
        hs[parent], hs[i] = hs[i], hs[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(ht, hs, size):
    size -= 1
    ht[0] = ht[size]
    hs[0] = hs[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        m = i
        if left < size and ht[left] < ht[m]:
            m = left
        if right < size and ht[right] < ht[m]:
            m = right
        if m == i:
            break
        ht[m], ht[i] = ht[i], ht[m]
        hs[m], hs[i] = hs[i], hs[m]
        i = m
    return size


@njit(cache=True)
def _duration(u, beta, ntheta):
    # inverse CDF of (beta-1) n theta (n theta r + 1)^(-beta)
    return math.expm1(-math.log1p(-u) / (beta - 1.0)) / ntheta


@njit(cache=True)
def _advance(Y, K, inv_scale, dt):
    total = 0.0
    for i in range(Y.shape[0]):
        Y[i] += K[i] * inv_scale * dt
        total += Y[i]
    return total / Y.shape[0]


@njit(cache=True)
def _record(bt, bY, bN, bK, bL, nb, t, Y, N, K, lam):
    bt[nb] = t
    for i in range(Y.shape[0]):
        bY[nb, i] = Y[i]
        bN[nb, i] = N[i]
        bK[nb, i] = K[i]
    bL[nb] = lam
    return nb + 1


@njit(cache=True)
def simulate_thinning(rate, inv_scale, d, b, c1, c2, beta, ntheta, horizon,
                      arr_u, dur_u, cap, max_events):
    """Ogata thinning with a lookahead dominating rate.

    rate = n^alpha, inv_scale = n^(1-alpha).  Returns
    (status, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur).
    """
    bt = np.empty(cap)
    bY = np.empty((cap, d))
    bN = np.empty((cap, d), dtype=np.int64)
    bK = np.empty((cap, d), dtype=np.int64)
    bL = np.empty(cap)
    ev_station = np.empty(cap, dtype=np.int64)
    ev_start = np.empty(cap)
    ev_dur = np.empty(cap)
    ht = np.empty(cap)
    hs = np.empty(cap, dtype=np.int64)
    hsize = 0
    Y = np.zeros(d)
    N = np.zeros(d, dtype=np.int64)
    K = np.zeros(d, dtype=np.int64)
    t = 0.0
    lam = 0.0
    ybar = 0.0
    active = 0
    ia = 0
    nd = np.zeros(d, dtype=np.int64)
    ne = 0
    nb = _record(bt, bY, bN, bK, bL, 0, t, Y, N, K, lam)
    steps = 0
    n_arr = arr_u.shape[0]
    n_dur = dur_u.shape[1]
    while True:
        steps += 1
        if steps > max_events:
            return BUDGET, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
        next_end = ht[0] if hsize > 0 else math.inf
        x_now = ybar - b * t
        f_now = math.exp(-g_eval(x_now, c1, c2))
        delta = min(next_end - t, 1.0 / (rate * f_now), horizon - t)
        which = 1
        if next_end - t <= delta:
            which = 0
        if horizon - t <= delta and horizon <= next_end:
            which = 2
        bound = rate * math.exp(-g_eval(ybar - b * (t + delta), c1, c2))
        if ia >= n_arr:
            return NEED_ARRIVAL_U, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
        gap = -math.log1p(-arr_u[ia]) / (d * bound)
        ia += 1
        slope = active * inv_scale / d
        if gap > delta:
            t_new = t + delta
            if which == 0:
                t_new = next_end
            elif which == 2:
                t_new = horizon
            dt = t_new - t
            lam += seg_int(x_now, slope - b, dt, c1, c2)
            ybar = _advance(Y, K, inv_scale, dt)
            t = t_new
            if which == 2:
                nb = _record(bt, bY, bN, bK, bL, nb, t, Y, N, K, lam)
                return OK, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
            if which == 0:
                while hsize > 0 and ht[0] <= t:
                    st = hs[0]
                    hsize = _heap_pop(ht, hs, hsize)
                    K[st] -= 1
                    active -= 1
                if nb >= cap:
                    return NEED_CAPACITY, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
                nb = _record(bt, bY, bN, bK, bL, nb, t, Y, N, K, lam)
            continue
        dt = gap
        lam += seg_int(x_now, slope - b, dt, c1, c2)
        ybar = _advance(Y, K, inv_scale, dt)
        t = t + dt
        if ia + 1 >= n_arr:
            return NEED_ARRIVAL_U, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
        accept_u = arr_u[ia]
        ia += 1
        f_s = rate * math.exp(-g_eval(ybar - b * t, c1, c2))
        if accept_u * bound >= f_s:
            continue
        st = min(int(arr_u[ia] * d), d - 1)
        ia += 1
        if nd[st] >= n_dur:
            return NEED_DURATION_U, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
        tau = _duration(dur_u[st, nd[st]], beta, ntheta)
        nd[st] += 1
        if nb >= cap or ne >= cap or hsize >= cap:
            return NEED_CAPACITY, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
        ev_station[ne] = st
        ev_start[ne] = t
        ev_dur[ne] = tau
        ne += 1
        if tau > 0.0:
            hsize = _heap_push(ht, hs, hsize, t + tau, st)
            K[st] += 1
            active += 1
        N[st] += 1
        nb = _record(bt, bY, bN, bK, bL, nb, t, Y, N, K, lam)


@njit(cache=True)
def _solve_seg(x0, sx, target, dt_max, c1, c2, t0):
    """Smallest tau in [0, dt_max] with seg_int(x0, sx, tau) = target."""
    lo = 0.0
    hi = dt_max
    tau = min(dt_max, target * math.exp(g_eval(x0, c1, c2)))
    for _ in range(200):
        F = seg_int(x0, sx, tau, c1, c2) - target
        if F > 0.0:
            hi = tau
        else:
            lo = tau
        dF = math.exp(-g_eval(x0 + sx * tau, c1, c2))
        step = F / dF
        new = tau - step
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - tau) <= 1e-12 * max(abs(t0 + new), 1e-300) or hi - lo <= 1e-12 * max(abs(t0 + lo), 1e-300):
            return new, True
        tau = new
    return tau, False


@njit(cache=True)
def simulate_inversion(rate, inv_scale, d, b, c1, c2, beta, ntheta, horizon,
                       arr_u, dur_u, cap, max_events):
    """Operational-time construction: unit-rate-per-station Poisson times in
    Lambda-time mapped to clock time through the inverse of Lambda."""
    bt = np.empty(cap)
    bY = np.empty((cap, d))
    bN = np.empty((cap, d), dtype=np.int64)
    bK = np.empty((cap, d), dtype=np.int64)
    bL = np.empty(cap)
    ev_station = np.empty(cap, dtype=np.int64)
    ev_start = np.empty(cap)
    ev_dur = np.empty(cap)
    ht = np.empty(cap)
    hs = np.empty(cap, dtype=np.int64)
    hsize = 0
    Y = np.zeros(d)
    N = np.zeros(d, dtype=np.int64)
    K = np.zeros(d, dtype=np.int64)
    t = 0.0
    lam = 0.0
    ybar = 0.0
    active = 0
    ia = 0
    nd = np.zeros(d, dtype=np.int64)
    ne = 0
    nb = _record(bt, bY, bN, bK, bL, 0, t, Y, N, K, lam)
    n_arr = arr_u.shape[0]
    n_dur = dur_u.shape[1]
    steps = 0
    if n_arr < 1:
        return NEED_ARRIVAL_U, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
    target = -math.log1p(-arr_u[0]) / (d * rate)
    ia = 1
    while True:
        steps += 1
        if steps > max_events:
            return BUDGET, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
        next_end = ht[0] if hsize > 0 else math.inf
        seg_end = min(next_end, horizon)
        x_now = ybar - b * t
        slope = active * inv_scale / d
        full = seg_int(x_now, slope - b, seg_end - t, c1, c2)
        if lam + full >= target:
            tau, ok = _solve_seg(x_now, slope - b, target - lam, seg_end - t, c1, c2, t)
            if not ok:
                return ROOT_FAIL, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
            lam = target
            ybar = _advance(Y, K, inv_scale, tau)
            t = t + tau
            if ia + 1 >= n_arr:
                return NEED_ARRIVAL_U, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
            st = min(int(arr_u[ia] * d), d - 1)
            ia += 1
            target = lam - math.log1p(-arr_u[ia]) / (d * rate)
            ia += 1
            if nd[st] >= n_dur:
                return NEED_DURATION_U, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
            tau_s = _duration(dur_u[st, nd[st]], beta, ntheta)
            nd[st] += 1
            if nb >= cap or ne >= cap or hsize >= cap:
                return NEED_CAPACITY, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
            ev_station[ne] = st
            ev_start[ne] = t
            ev_dur[ne] = tau_s
            ne += 1
            if tau_s > 0.0:
                hsize = _heap_push(ht, hs, hsize, t + tau_s, st)
                K[st] += 1
                active += 1
            N[st] += 1
            nb = _record(bt, bY, bN, bK, bL, nb, t, Y, N, K, lam)
            continue
        dt = seg_end - t
        lam += full
        ybar = _advance(Y, K, inv_scale, dt)
        t = seg_end
        if seg_end == horizon and horizon <= next_end:
            nb = _record(bt, bY, bN, bK, bL, nb, t, Y, N, K, lam)
            return OK, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
        while hsize > 0 and ht[0] <= t:
            st = hs[0]
            hsize = _heap_pop(ht, hs, hsize)
            K[st] -= 1
            active -= 1
        if nb >= cap:
            return NEED_CAPACITY, nb, bt, bY, bN, bK, bL, ne, ev_station, ev_start, ev_dur
        nb = _record(bt, bY, bN, bK, bL, nb, t, Y, N, K, lam)
