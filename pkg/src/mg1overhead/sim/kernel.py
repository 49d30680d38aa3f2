"""Compiled event loop for the preemptive-priority queue with preemption overhead.

The loop keeps per-class Poisson arrival clocks and a single activity in
progress (service, pause or resume).  The next event is the earliest of
these; when the activity end ties with an arrival the activity end goes
first.  Only one activity runs at a time, so the remaining tie order
(service < pause < resume < arrival) needs no further rule.

Each completed busy cycle (an arrival to an empty system up to the next
such arrival) produces one feature vector.  Running sums of the features,
of their squares and of their products with a few denominator columns
are all the regenerative estimators need.

Random numbers come from xoshiro256** streams, one per stochastic
primitive: arrivals of class k use stream k, sizes of class k use stream
n + k and overheads of class k use stream 2n + k.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# server states
IDLE, SERVE, PAUSE, RESUME = 0, 1, 2, 3
# preemption modes
PAUSE_RESUME, REPEAT_DIFFERENT, REPEAT_IDENTICAL = 0, 1, 2
# distribution codes
EXP, DET, ERLANG, HYPEREXP, UNIFORM, POINTMIX = 0, 1, 2, 3, 4, 5
# trace event kinds
ARRIVAL, SERVICE_START, SERVICE_END, PAUSE_START, PAUSE_END, RESUME_START, RESUME_END, RESTART, EARLY_TAG = range(9)
TRACE_KINDS = (
    "arrival",
    "service_start",
    "service_end",
    "pause_start",
    "pause_end",
    "resume_start",
    "resume_end",
    "restart",
    "early",
)

# feature layout: global columns, then PER_CLASS_FIXED + n columns per class
COUNT, CYCLE_LEN, BUSY_LEN, BUSY_LST = 0, 1, 2, 3
N_THETAS = 3
GLOBAL_COLS = BUSY_LST + N_THETAS
(
    DONE,
    SUM_T,
    SUM_T2,
    SUM_R,
    SUM_S,
    SUM_C,
    SUM_D,
    TIME_SERVE,
    TIME_PAUSE,
    TIME_RESUME,
    CHAINS,
    LINKS,
    EARLY,
    SUM_X,
    SUM_X2,
    X_LST,
) = range(16)
ARRIVALS = X_LST + N_THETAS
PER_CLASS_FIXED = ARRIVALS

LINK_BINS = 64


def n_features(n: int) -> int:
    return GLOBAL_COLS + n * (PER_CLASS_FIXED + n)


def class_base(n: int, k: int) -> int:
    return GLOBAL_COLS + k * (PER_CLASS_FIXED + n)


def denominator_columns(n: int) -> np.ndarray:
    """Columns whose cross-products with every feature are accumulated."""
    cols = [COUNT, CYCLE_LEN]
    for k in range(n):
        base = class_base(n, k)
        cols += [base + DONE, base + SUM_R, base + LINKS, base + EARLY]
    return np.asarray(cols, dtype=np.int64)


# -- random numbers ------------------------------------------------------------


@njit(inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit
def _uniform(state, i):
    """Next double in [0, 1) from stream i (xoshiro256**)."""
    s0, s1, s2, s3 = state[i, 0], state[i, 1], state[i, 2], state[i, 3]
    result = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[i, 0], state[i, 1], state[i, 2], state[i, 3] = s0, s1, s2, s3
    return np.float64(result >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit
def _std_exp(state, i):
    return -np.log1p(-_uniform(state, i))


@njit
def _branch(p, m, u):
    """Index of the branch whose cumulative probability first exceeds u."""
    idx = 0
    while idx < m - 1 and u >= p[1 + idx]:
        idx += 1
    return idx


@njit
def _draw(code, p, state, i):
    if code == EXP:
        return _std_exp(state, i) / p[0]
    if code == DET:
        return p[0]
    if code == ERLANG:
        acc = 0.0
        for _ in range(int(p[0])):
            acc += _std_exp(state, i)
        return acc / p[1]
    if code == HYPEREXP:
        m = int(p[0])
        idx = _branch(p, m, _uniform(state, i))
        return _std_exp(state, i) / p[1 + m + idx]
    if code == UNIFORM:
        return p[0] + (p[1] - p[0]) * _uniform(state, i)
    m = int(p[0])
    return p[1 + m + _branch(p, m, _uniform(state, i))]


@njit
def draw_many(code, p, state, count):
    """``count`` draws from stream 0 of ``state``; used to test the samplers."""
    out = np.empty(count)
    for c in range(count):
        out[c] = _draw(code, p, state, 0)
    return out


# -- growable storage ----------------------------------------------------------


@njit
def _grow1(a):
    out = np.zeros(2 * a.shape[0], a.dtype)
    out[: a.shape[0]] = a
    return out


@njit
def _grow2(a):
    out = np.zeros((2 * a.shape[0], a.shape[1]), a.dtype)
    out[: a.shape[0]] = a
    return out


@njit
def _grow_cols(a):
    out = np.zeros((a.shape[0], 2 * a.shape[1]), a.dtype)
    out[:, : a.shape[1]] = a
    return out


@njit
def _grow_ring(q, head, length):
    """Double the per-class ring buffers, unrolling each so its head is at 0."""
    n, cap = q.shape
    out = np.zeros((n, 2 * cap), q.dtype)
    for k in range(n):
        for c in range(length[k]):
            out[k, c] = q[k, (head[k] + c) % cap]
        head[k] = 0
    return out


# -- main loop -----------------------------------------------------------------


@njit(cache=True)
def run(n, mode, lam, codes, params, rng, min_cycles, max_time, thetas, dcols, trace_on):
    nf = GLOBAL_COLS + n * (PER_CLASS_FIXED + n)
    stride = PER_CLASS_FIXED + n
    nd = dcols.shape[0]
    sums = np.zeros(nf)
    squares = np.zeros(nf)
    cross = np.zeros((nf, nd))
    cur = np.zeros(nf)
    link_hist = np.zeros((n, LINK_BINS), np.int64)

    # job slots
    cap = 64
    j_cls = np.zeros(cap, np.int64)
    j_id = np.zeros(cap, np.int64)
    j_arr = np.zeros(cap)
    j_size = np.zeros(cap)
    j_rem = np.zeros(cap)
    j_started = np.zeros(cap, np.int8)
    j_paused = np.zeros(cap, np.int8)
    j_r = np.zeros(cap)
    j_c = np.zeros(cap)
    j_d = np.zeros(cap)
    j_links = np.zeros(cap, np.int64)
    j_a = np.zeros((cap, n))
    free = np.arange(cap - 1, -1, -1).astype(np.int64)
    n_free = cap

    # per-class FCFS queues of slots, and pending early-arrival times
    qcap = 64
    queue = np.zeros((n, qcap), np.int64)
    q_head = np.zeros(n, np.int64)
    q_len = np.zeros(n, np.int64)
    pcap = 64
    pending = np.zeros((n, pcap))
    p_len = np.zeros(n, np.int64)

    # trace buffers
    tcap = 1024 if trace_on else 1
    tr_time = np.zeros(tcap)
    tr_kind = np.zeros(tcap, np.int64)
    tr_cls = np.zeros(tcap, np.int64)
    tr_job = np.zeros(tcap, np.int64)
    tr_len = 0

    t = 0.0
    next_arr = np.empty(n)
    for k in range(n):
        next_arr[k] = _std_exp(rng, k) / lam[k]
    state = IDLE
    owner = -1
    act_end = np.inf
    resume_failed = False
    in_system = 0
    next_id = 0
    cycles = 0
    in_cycle = False
    cycle_start = 0.0
    busy_end = 0.0
    finished = False

    while True:
        ka = 0
        ta = next_arr[0]
        for k in range(1, n):
            if next_arr[k] < ta:
                ta = next_arr[k]
                ka = k
        is_arrival = ta < act_end
        te = ta if is_arrival else act_end
        if te > max_time:
            break

        # charge the elapsed time to the job holding the server
        dt = te - t
        if state != IDLE:
            base = GLOBAL_COLS + j_cls[owner] * stride
            j_r[owner] += dt
            if state == SERVE:
                cur[base + TIME_SERVE] += dt
                j_rem[owner] -= dt
            elif state == PAUSE:
                cur[base + TIME_PAUSE] += dt
                j_c[owner] += dt
            else:
                cur[base + TIME_RESUME] += dt
                j_d[owner] += dt
        t = te

        dispatch = False
        if not is_arrival:
            x = owner
            kx = j_cls[x]
            base = GLOBAL_COLS + kx * stride
            if state == SERVE:
                if trace_on:
                    if tr_len == tr_time.shape[0]:
                        tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                    tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, SERVICE_END, kx, j_id[x]
                    tr_len += 1
                resp = t - j_arr[x]
                cur[base + DONE] += 1.0
                cur[base + SUM_T] += resp
                cur[base + SUM_T2] += resp * resp
                cur[base + SUM_R] += j_r[x]
                cur[base + SUM_S] += j_size[x]
                cur[base + SUM_C] += j_c[x]
                cur[base + SUM_D] += j_d[x]
                for j in range(n):
                    cur[base + ARRIVALS + j] += j_a[x, j]
                q_head[kx] = (q_head[kx] + 1) % queue.shape[1]
                q_len[kx] -= 1
                free[n_free] = x
                n_free += 1
                in_system -= 1
                if in_system > 0:
                    dispatch = True
                else:
                    state = IDLE
                    owner = -1
                    act_end = np.inf
                    busy_end = t
            elif state == PAUSE:
                if trace_on:
                    if tr_len == tr_time.shape[0]:
                        tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                    tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, PAUSE_END, kx, j_id[x]
                    tr_len += 1
                dispatch = True
            else:
                if trace_on:
                    if tr_len == tr_time.shape[0]:
                        tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                    tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, RESUME_END, kx, j_id[x]
                    tr_len += 1
                if resume_failed:
                    # another link of the same chain
                    j_links[x] += 1
                    cur[base + LINKS] += 1.0
                    state = PAUSE
                    act_end = t + _draw(codes[kx, 1], params[kx, 1], rng, 2 * n + kx)
                    if trace_on:
                        if tr_len == tr_time.shape[0]:
                            tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                        tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, PAUSE_START, kx, j_id[x]
                        tr_len += 1
                else:
                    link_hist[kx, min(j_links[x], LINK_BINS - 1)] += 1
                    j_links[x] = 0
                    j_paused[x] = 0
                    state = SERVE
                    act_end = t + j_rem[x]
                    if trace_on:
                        if tr_len == tr_time.shape[0]:
                            tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                        tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, SERVICE_START, kx, j_id[x]
                        tr_len += 1
        else:
            j = ka
            next_arr[j] = t + _std_exp(rng, j) / lam[j]
            if in_system == 0:
                if in_cycle:
                    cur[COUNT] = 1.0
                    cur[CYCLE_LEN] = t - cycle_start
                    busy = busy_end - cycle_start
                    cur[BUSY_LEN] = busy
                    for i in range(N_THETAS):
                        cur[BUSY_LST + i] = np.exp(-thetas[i] * busy)
                    for a in range(nf):
                        v = cur[a]
                        sums[a] += v
                        squares[a] += v * v
                        for d in range(nd):
                            cross[a, d] += v * cur[dcols[d]]
                    cycles += 1
                    if cycles >= min_cycles:
                        finished = True
                        break
                in_cycle = True
                cycle_start = t
                cur[:] = 0.0
            if owner >= 0:
                j_a[owner, j] += 1.0

            if n_free == 0:
                old = j_cls.shape[0]
                j_cls, j_id, j_arr, j_size, j_rem = _grow1(j_cls), _grow1(j_id), _grow1(j_arr), _grow1(j_size), _grow1(j_rem)
                j_started, j_paused, j_links = _grow1(j_started), _grow1(j_paused), _grow1(j_links)
                j_r, j_c, j_d, j_a = _grow1(j_r), _grow1(j_c), _grow1(j_d), _grow2(j_a)
                free = _grow1(free)
                for s in range(old):
                    free[s] = 2 * old - 1 - s
                n_free = old
            n_free -= 1
            x = free[n_free]
            size = _draw(codes[j, 0], params[j, 0], rng, n + j)
            j_cls[x], j_id[x], j_arr[x], j_size[x], j_rem[x] = j, next_id, t, size, size
            j_started[x], j_paused[x], j_links[x] = 0, 0, 0
            j_r[x], j_c[x], j_d[x] = 0.0, 0.0, 0.0
            j_a[x, :] = 0.0
            next_id += 1
            if trace_on:
                if tr_len == tr_time.shape[0]:
                    tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, ARRIVAL, j, j_id[x]
                tr_len += 1

            # early: no class-j job present has been served yet
            if q_len[j] == 0 or j_started[queue[j, q_head[j]]] == 0:
                cur[GLOBAL_COLS + j * stride + EARLY] += 1.0
                if trace_on:
                    if tr_len == tr_time.shape[0]:
                        tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                    tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, EARLY_TAG, j, j_id[x]
                    tr_len += 1
                if p_len[j] == pending.shape[1]:
                    pending = _grow_cols(pending)
                pending[j, p_len[j]] = t
                p_len[j] += 1

            if q_len[j] == queue.shape[1]:
                queue = _grow_ring(queue, q_head, q_len)
            queue[j, (q_head[j] + q_len[j]) % queue.shape[1]] = x
            q_len[j] += 1
            in_system += 1

            if state == IDLE:
                dispatch = True
            elif state == SERVE and j < j_cls[owner]:
                y = owner
                ky = j_cls[y]
                if mode == PAUSE_RESUME:
                    base = GLOBAL_COLS + ky * stride
                    j_paused[y] = 1
                    j_links[y] = 1
                    cur[base + CHAINS] += 1.0
                    cur[base + LINKS] += 1.0
                    state = PAUSE
                    act_end = t + _draw(codes[ky, 1], params[ky, 1], rng, 2 * n + ky)
                    if trace_on:
                        if tr_len == tr_time.shape[0]:
                            tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                        tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, PAUSE_START, ky, j_id[y]
                        tr_len += 1
                else:
                    if mode == REPEAT_DIFFERENT:
                        j_rem[y] = _draw(codes[ky, 0], params[ky, 0], rng, n + ky)
                    else:
                        j_rem[y] = j_size[y]
                    if trace_on:
                        if tr_len == tr_time.shape[0]:
                            tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                        tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, RESTART, ky, j_id[y]
                        tr_len += 1
                    dispatch = True
            elif state == RESUME and j < j_cls[owner]:
                resume_failed = True

        if dispatch:
            best = 0
            while q_len[best] == 0:
                best += 1
            x = queue[best, q_head[best]]
            owner = x
            if j_paused[x] == 1:
                state = RESUME
                resume_failed = False
                act_end = t + _draw(codes[best, 2], params[best, 2], rng, 2 * n + best)
                kind = RESUME_START
            else:
                if j_started[x] == 0:
                    j_started[x] = 1
                    base = GLOBAL_COLS + best * stride
                    for c in range(p_len[best]):
                        wait = t - pending[best, c]
                        cur[base + SUM_X] += wait
                        cur[base + SUM_X2] += wait * wait
                        for i in range(N_THETAS):
                            cur[base + X_LST + i] += np.exp(-thetas[i] * wait)
                    p_len[best] = 0
                state = SERVE
                act_end = t + j_rem[x]
                kind = SERVICE_START
            if trace_on:
                if tr_len == tr_time.shape[0]:
                    tr_time, tr_kind, tr_cls, tr_job = _grow1(tr_time), _grow1(tr_kind), _grow1(tr_cls), _grow1(tr_job)
                tr_time[tr_len], tr_kind[tr_len], tr_cls[tr_len], tr_job[tr_len] = t, kind, best, j_id[x]
                tr_len += 1

    return (
        sums,
        squares,
        cross,
        cycles,
        finished,
        t,
        in_system,
        link_hist,
        tr_time[:tr_len].copy(),
        tr_kind[:tr_len].copy(),
        tr_cls[:tr_len].copy(),
        tr_job[:tr_len].copy(),
    )
