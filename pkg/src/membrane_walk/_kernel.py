"""Compiled inner loop of the walk engine.

One call advances a single path by ``us.shape[0]`` steps, consuming one
uniform per step, and updates the excursion bookkeeping in place.

State layout ``st = [x, side, cur_type, step]``: ``side`` is -1 off the
membrane, 0 for an arrival from x=-1 and 1 for an arrival from x=+1;
``cur_type = 2 * (side * |U| + class) + sign`` identifies the running
excursion by the arrival it started from and its sign (1 for x > 0); it is
-1 while on the membrane.
"""
import numba
import numpy as np

from ._hashing import site_value

OK = 0
OVERFLOW = 2


@numba.njit(cache=True, nogil=True, inline="always")
def _class(y, periods, mult):
    c = 0
    for l in range(y.shape[0]):
        c += (y[l] % periods[l]) * mult[l]
    return c


@numba.njit(cache=True, nogil=True)
def advance(us, st, y,
            m, periods, mult, n_cls,
            mode, entry_ptr, move_exit, move_slide, move_cum,
            env_seed, env_values, env_cum,
            drift, ybound,
            l_type, m_type, occ_type, my, dy, visits,
            register_start,
            stride, s_step, s_x, s_side, s_type, s_y, s_m, s_l, s_my, s_dy,
            rec_counters, s_cnt,
            v_tau, v_side, v_cls, v_y, v_cnt,
            g_steps, g_pos, g_x, g_y, g_l, g_dy):
    d = m - 1
    w = 1.0 / (2 * m)
    p_up = (1.0 + drift) * w
    two_w = 2.0 * w
    y_span = 1.0 - two_w
    n_dirs = 2 * d

    x = st[0]
    side = st[1]
    cur = st[2]
    step = st[3]

    if register_start and x == 0:
        c = _class(y, periods, mult)
        visits[side * n_cls + c] += 1
        if v_tau.shape[0] > 0:
            k = v_cnt[0]
            v_tau[k] = step
            v_side[k] = side
            v_cls[k] = c
            for l in range(d):
                v_y[k, l] = y[l]
            v_cnt[0] = k + 1

    status = OK
    for i in range(us.shape[0]):
        u = us[i]
        if x != 0:
            occ_type[cur] += 1
            if u < two_w:
                dx = 1 if u < p_up else -1
                nx = x + dx
                m_type[cur] += abs(nx) - abs(x)
                x = nx
                if x == 0:
                    side = 1 if dx == -1 else 0
                    cur = -1
                    c = _class(y, periods, mult)
                    visits[side * n_cls + c] += 1
                    if v_tau.shape[0] > 0:
                        k = v_cnt[0]
                        v_tau[k] = step + 1
                        v_side[k] = side
                        v_cls[k] = c
                        for l in range(d):
                            v_y[k, l] = y[l]
                        v_cnt[0] = k + 1
            else:
                j = int((u - two_w) / y_span * n_dirs)
                if j >= n_dirs:
                    j = n_dirs - 1
                l = j // 2
                sgn = 1 if j % 2 == 0 else -1
                y[l] += sgn
                my[l] += sgn
        else:
            c = _class(y, periods, mult)
            if mode == 0:
                e = side * n_cls + c
                lo = entry_ptr[e]
                hi = entry_ptr[e + 1]
                k = hi - 1
                for q in range(lo, hi - 1):
                    if u < move_cum[q]:
                        k = q
                        break
                ex = move_exit[k]
                for l in range(d):
                    s = move_slide[k, l]
                    if s != 0:
                        y[l] += s
                        dy[l] += s
                        if abs(y[l]) >= ybound:
                            status = OVERFLOW
            else:
                p = site_value(env_seed, y, env_values, env_cum)
                ex = 1 if u < p else 0
            x = 1 if ex == 1 else -1
            cur = 2 * (side * n_cls + c) + ex
            side = -1
            l_type[cur] += 1
        step += 1

        if stride > 0 and step % stride == 0:
            k = s_cnt[0]
            s_step[k] = step
            s_x[k] = x
            s_side[k] = side
            s_type[k] = cur
            for l in range(d):
                s_y[k, l] = y[l]
            if rec_counters:
                for t in range(m_type.shape[0]):
                    s_m[k, t] = m_type[t]
                    s_l[k, t] = l_type[t]
                for l in range(d):
                    s_my[k, l] = my[l]
                    s_dy[k, l] = dy[l]
            s_cnt[0] = k + 1
        gp = g_pos[0]
        if gp < g_steps.shape[0] and g_steps[gp] == step:
            g_x[gp] = x
            ltot = 0
            for t in range(l_type.shape[0]):
                ltot += l_type[t]
            g_l[gp] = ltot
            for l in range(d):
                g_y[gp, l] = y[l]
                g_dy[gp, l] = dy[l]
            g_pos[0] = gp + 1
        if status != OK:
            break

    st[0] = x
    st[1] = side
    st[2] = cur
    st[3] = step
    return status


@numba.njit(cache=True, nogil=True)
def run_block(U, lengths, st, y,
              m, periods, mult, n_cls,
              mode, entry_ptr, move_exit, move_slide, move_cum,
              env_seed, env_values, env_cum,
              drift, ybound,
              l_type, m_type, occ_type, my, dy, visits, register_start,
              g_steps, g_pos, g_x, g_y, g_l, g_dy, status):
    """Advance row ``p`` of the block by ``U[p, :lengths[p]]`` (no trajectory log)."""
    d = m - 1
    e1 = np.zeros(1, dtype=np.int64)
    e2 = np.zeros((1, d), dtype=np.int64)
    e3 = np.zeros((1, 1), dtype=np.int64)
    nov = np.zeros(0, dtype=np.int64)
    novy = np.zeros((0, d), dtype=np.int64)
    cnt = np.zeros(1, dtype=np.int64)
    vcnt = np.zeros(1, dtype=np.int64)
    for p in range(U.shape[0]):
        if status[p] != OK:
            continue
        status[p] = advance(U[p, :lengths[p]], st[p], y[p],
                            m, periods, mult, n_cls,
                            mode, entry_ptr, move_exit, move_slide, move_cum,
                            env_seed, env_values, env_cum,
                            drift, ybound,
                            l_type[p], m_type[p], occ_type[p], my[p], dy[p], visits[p],
                            register_start,
                            0, e1, e1, e1, e1, e2, e3, e3, e2, e2, False, cnt,
                            nov, nov, nov, novy, vcnt,
                            g_steps, g_pos[p:p + 1], g_x[p], g_y[p], g_l[p], g_dy[p])
