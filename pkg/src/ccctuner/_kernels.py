"""Hot numeric kernels: fixed-step RK4 delay integrators and objective sums.

Every kernel exists twice: a loop implementation that numba compiles with
``@njit``, and a fallback selected when numba is unavailable or when the
environment variable ``CCCTUNER_NO_NUMBA`` is set to a truthy value.  For the
integrators the fallback is the same loop code interpreted by CPython (slow
but numerically identical); for the spectral objective the fallback is a
vectorized numpy implementation.  ``benchmarks/bench_kernels.py`` compares
the two paths.

Delay handling: all delays are rounded to integer multiples of the step by
the callers.  Delayed state at RK4 half-stages is read as the midpoint of
the two bracketing history nodes; before t0 the history is the equilibrium
value.  A zero self-delay degenerates to plain RK4 on an ODE (the stage
state itself is used).
"""

import os

import numpy as np


def _truthy(value):
    return value.strip().lower() not in ("", "0", "false", "no")


NUMBA_ENABLED = not _truthy(os.environ.get("CCCTUNER_NO_NUMBA", ""))

if NUMBA_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _jit(func):
        return numba.njit(cache=True, nogil=True)(func)
else:
    def _jit(func):
        return func


def _node(arr, idx, pre):
    """History value at a grid node; equilibrium value before the record."""
    if idx < 0:
        return pre
    return arr[idx]


def _mid(arr, idx, pre):
    """History value at node idx + 1/2 (linear midpoint)."""
    a = pre if idx < 0 else arr[idx]
    b = pre if idx + 1 < 0 else arr[idx + 1]
    return 0.5 * (a + b)


def _clip_policy(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def _rk4_follower(lead, dt, alpha_h, beta_h, kappa_h, h_st, v_max,
                  delay_steps, h0, v0, lead_pre):
    """Integrate one car-following (optimal-velocity) vehicle behind ``lead``.

    The driver reacts to stale stimuli: the headway and the predecessor
    speed enter with the reaction delay, while the relaxation uses the
    current own speed. Returns (h, v, collided_at) where collided_at is the
    first node with h <= 0, or -1; after a collision the arrays hold the
    frozen pre-collision state.
    """
    n = lead.shape[0]
    h = np.empty(n)
    v = np.empty(n)
    h[0] = h0
    v[0] = v0
    m = delay_steps
    gain = alpha_h + beta_h
    collided_at = -1
    for k in range(n - 1):
        if h[k] <= 0.0 and collided_at < 0:
            collided_at = k
            for j in range(k + 1, n):
                h[j] = h[k]
                v[j] = v[k]
            break
        hk = h[k]
        vk = v[k]
        lead_k = lead[k]
        lead_k1 = lead[k + 1]
        lead_mid = 0.5 * (lead_k + lead_k1)

        # delayed drive term: alpha_h V(h(t - sigma)) + beta_h W(v_lead(t - sigma))
        if m == 0:
            p1 = (alpha_h * _clip_policy(kappa_h * (hk - h_st), 0.0, v_max)
                  + beta_h * min(lead_k, v_max))
        else:
            p1 = (alpha_h * _clip_policy(kappa_h * (_node(h, k - m, h0) - h_st), 0.0, v_max)
                  + beta_h * min(_node(lead, k - m, lead_pre), v_max))
        d1h = lead_k - vk
        d1v = p1 - gain * vk

        v2 = vk + 0.5 * dt * d1v
        h2 = hk + 0.5 * dt * d1h
        if m == 0:
            p_mid = (alpha_h * _clip_policy(kappa_h * (h2 - h_st), 0.0, v_max)
                     + beta_h * min(lead_mid, v_max))
        else:
            p_mid = (alpha_h * _clip_policy(kappa_h * (_mid(h, k - m, h0) - h_st), 0.0, v_max)
                     + beta_h * min(_mid(lead, k - m, lead_pre), v_max))
        d2h = lead_mid - v2
        d2v = p_mid - gain * v2

        v3 = vk + 0.5 * dt * d2v
        h3 = hk + 0.5 * dt * d2h
        if m == 0:
            p_mid3 = (alpha_h * _clip_policy(kappa_h * (h3 - h_st), 0.0, v_max)
                      + beta_h * min(lead_mid, v_max))
        else:
            p_mid3 = p_mid
        d3h = lead_mid - v3
        d3v = p_mid3 - gain * v3

        v4 = vk + dt * d3v
        h4 = hk + dt * d3h
        if m == 0:
            p4 = (alpha_h * _clip_policy(kappa_h * (h4 - h_st), 0.0, v_max)
                  + beta_h * min(lead_k1, v_max))
        else:
            p4 = (alpha_h * _clip_policy(kappa_h * (_node(h, k - m + 1, h0) - h_st), 0.0, v_max)
                  + beta_h * min(_node(lead, k - m + 1, lead_pre), v_max))
        d4h = lead_k1 - v4
        d4v = p4 - gain * v4

        h[k + 1] = hk + dt * (d1h + 2.0 * d2h + 2.0 * d3h + d4h) / 6.0
        v[k + 1] = vk + dt * (d1v + 2.0 * d2v + 2.0 * d3v + d4v) / 6.0
    if collided_at < 0 and h[n - 1] <= 0.0:
        collided_at = n - 1
    return h, v, collided_at


def _rk4_truck_nonlinear(v1, others, delays_in, dt, alpha, kappa, h_st, v_max,
                         betas, c0, c2, u_min, u_max, pmax_over_meff,
                         delay_steps, h0, v0, pre_speed):
    """Truck with resistance, saturated delayed actuation and headway policy.

    v1 is the immediate predecessor speed on the simulation grid; ``others``
    stacks the speed records of every connected vehicle (row order matches
    ``betas`` and ``delays_in``, which hold the total input delay steps,
    actuation plus intentional).  Returns (h, v, accel, collided_at).
    """
    n = v1.shape[0]
    n_in = betas.shape[0]
    h = np.empty(n)
    v = np.empty(n)
    acc = np.empty(n)
    h[0] = h0
    v[0] = v0
    m = delay_steps
    collided_at = -1

    for k in range(n - 1):
        if h[k] <= 0.0 and collided_at < 0:
            collided_at = k
            for j in range(k + 1, n):
                h[j] = h[k]
                v[j] = v[k]
                acc[j] = 0.0
            break
        hk = h[k]
        vk = v[k]

        # stage 1 (t_k)
        if m == 0:
            hd = hk
            vd = vk
        else:
            hd = _node(h, k - m, h0)
            vd = _node(v, k - m, v0)
        ad = alpha * (_clip_policy(kappa * (hd - h_st), 0.0, v_max) - vd)
        for i in range(n_in):
            vi = _node(others[i], k - delays_in[i], pre_speed)
            ad += betas[i] * (min(vi, v_max) - vd)
        u = c0 + c2 * vd * vd + ad
        uu = u_max if vk <= 0.0 else min(u_max, pmax_over_meff / vk)
        d1v = -(c0 + c2 * vk * vk) + _clip_policy(u, u_min, uu)
        d1h = v1[k] - vk
        acc[k] = d1v

        # stages 2 and 3 (t_k + dt/2): the delayed command is common
        v1_mid = 0.5 * (v1[k] + v1[k + 1])
        v2 = vk + 0.5 * dt * d1v
        if m == 0:
            hd = hk + 0.5 * dt * d1h
            vd = v2
        else:
            hd = _mid(h, k - m, h0)
            vd = _mid(v, k - m, v0)
        ad = alpha * (_clip_policy(kappa * (hd - h_st), 0.0, v_max) - vd)
        for i in range(n_in):
            vi = _mid(others[i], k - delays_in[i], pre_speed)
            ad += betas[i] * (min(vi, v_max) - vd)
        u_mid = c0 + c2 * vd * vd + ad

        uu = u_max if v2 <= 0.0 else min(u_max, pmax_over_meff / v2)
        d2v = -(c0 + c2 * v2 * v2) + _clip_policy(u_mid, u_min, uu)
        d2h = v1_mid - v2

        v3 = vk + 0.5 * dt * d2v
        if m == 0:
            # recompute command with stage-3 state (ODE case only)
            hd = hk + 0.5 * dt * d2h
            vd = v3
            ad = alpha * (_clip_policy(kappa * (hd - h_st), 0.0, v_max) - vd)
            for i in range(n_in):
                vi = _mid(others[i], k - delays_in[i], pre_speed)
                ad += betas[i] * (min(vi, v_max) - vd)
            u_mid = c0 + c2 * vd * vd + ad
        uu = u_max if v3 <= 0.0 else min(u_max, pmax_over_meff / v3)
        d3v = -(c0 + c2 * v3 * v3) + _clip_policy(u_mid, u_min, uu)
        d3h = v1_mid - v3

        # stage 4 (t_k + dt)
        v4 = vk + dt * d3v
        if m == 0:
            hd = hk + dt * d3h
            vd = v4
        else:
            hd = _node(h, k - m + 1, h0)
            vd = _node(v, k - m + 1, v0)
        ad = alpha * (_clip_policy(kappa * (hd - h_st), 0.0, v_max) - vd)
        for i in range(n_in):
            vi = _node(others[i], k - delays_in[i] + 1, pre_speed)
            ad += betas[i] * (min(vi, v_max) - vd)
        u = c0 + c2 * vd * vd + ad
        uu = u_max if v4 <= 0.0 else min(u_max, pmax_over_meff / v4)
        d4v = -(c0 + c2 * v4 * v4) + _clip_policy(u, u_min, uu)
        d4h = v1[k + 1] - v4

        h[k + 1] = hk + dt * (d1h + 2.0 * d2h + 2.0 * d3h + d4h) / 6.0
        v[k + 1] = vk + dt * (d1v + 2.0 * d2v + 2.0 * d3v + d4v) / 6.0

    if collided_at < 0:
        # acceleration at the final node, for energy metering
        k = n - 1
        vk = v[k]
        if m == 0:
            hd = h[k]
            vd = vk
        else:
            hd = _node(h, k - m, h0)
            vd = _node(v, k - m, v0)
        ad = alpha * (_clip_policy(kappa * (hd - h_st), 0.0, v_max) - vd)
        for i in range(n_in):
            vi = _node(others[i], k - delays_in[i], pre_speed)
            ad += betas[i] * (min(vi, v_max) - vd)
        u = c0 + c2 * vd * vd + ad
        uu = u_max if vk <= 0.0 else min(u_max, pmax_over_meff / vk)
        acc[k] = -(c0 + c2 * vk * vk) + _clip_policy(u, u_min, uu)
        if h[n - 1] <= 0.0:
            collided_at = n - 1
    return h, v, acc, collided_at


def _rk4_truck_linear(v1, others, delays_in, dt, alpha, kappa, betas,
                      delay_steps):
    """Linearized truck dynamics driven by zero-mean speed perturbations.

    States are the headway and speed perturbations around equilibrium; the
    input rows of ``others`` are perturbation records.  Returns
    (h_tilde, v_tilde, accel).
    """
    n = v1.shape[0]
    n_in = betas.shape[0]
    h = np.empty(n)
    v = np.empty(n)
    acc = np.empty(n)
    h[0] = 0.0
    v[0] = 0.0
    m = delay_steps

    for k in range(n - 1):
        hk = h[k]
        vk = v[k]

        if m == 0:
            hd = hk
            vd = vk
        else:
            hd = _node(h, k - m, 0.0)
            vd = _node(v, k - m, 0.0)
        d1v = alpha * (kappa * hd - vd)
        for i in range(n_in):
            vi = _node(others[i], k - delays_in[i], 0.0)
            d1v += betas[i] * (vi - vd)
        d1h = v1[k] - vk
        acc[k] = d1v

        v1_mid = 0.5 * (v1[k] + v1[k + 1])
        v2 = vk + 0.5 * dt * d1v
        if m == 0:
            hd = hk + 0.5 * dt * d1h
            vd = v2
        else:
            hd = _mid(h, k - m, 0.0)
            vd = _mid(v, k - m, 0.0)
        dv_mid = alpha * (kappa * hd - vd)
        for i in range(n_in):
            vi = _mid(others[i], k - delays_in[i], 0.0)
            dv_mid += betas[i] * (vi - vd)
        d2v = dv_mid
        d2h = v1_mid - v2

        v3 = vk + 0.5 * dt * d2v
        if m == 0:
            hd = hk + 0.5 * dt * d2h
            vd = v3
            dv_mid = alpha * (kappa * hd - vd)
            for i in range(n_in):
                vi = _mid(others[i], k - delays_in[i], 0.0)
                dv_mid += betas[i] * (vi - vd)
        d3v = dv_mid
        d3h = v1_mid - v3

        v4 = vk + dt * d3v
        if m == 0:
            hd = hk + dt * d3h
            vd = v4
        else:
            hd = _node(h, k - m + 1, 0.0)
            vd = _node(v, k - m + 1, 0.0)
        d4v = alpha * (kappa * hd - vd)
        for i in range(n_in):
            vi = _node(others[i], k - delays_in[i] + 1, 0.0)
            d4v += betas[i] * (vi - vd)
        d4h = v1[k + 1] - v4

        h[k + 1] = hk + dt * (d1h + 2.0 * d2h + 2.0 * d3h + d4h) / 6.0
        v[k + 1] = vk + dt * (d1v + 2.0 * d2v + 2.0 * d3v + d4v) / 6.0

    k = n - 1
    if m == 0:
        hd = h[k]
        vd = v[k]
    else:
        hd = _node(h, k - m, 0.0)
        vd = _node(v, k - m, 0.0)
    a_last = alpha * (kappa * hd - vd)
    for i in range(n_in):
        vi = _node(others[i], k - delays_in[i], 0.0)
        a_last += betas[i] * (vi - vd)
    acc[k] = a_last
    return h, v, acc


def _objective_pair_grid(weights, omega, s11, sll, s1l_re, s1l_im, exp_sigma_re,
                         exp_sigma_im, alpha, kappa, beta1_grid, betal_grid,
                         phase_re, phase_im):
    """Spectral objective on a (beta_1, beta_L) grid for one fixed delay.

    ``weights`` already folds the one/two-sided bin bookkeeping into the
    omega^2 factor. phase_* hold exp(-j omega sigma_L).
    """
    n1 = beta1_grid.shape[0]
    nl = betal_grid.shape[0]
    nk = omega.shape[0]
    out = np.empty((n1, nl))
    for a_idx in range(n1):
        b1 = beta1_grid[a_idx]
        for b_idx in range(nl):
            bl = betal_grid[b_idx]
            bsum = alpha + b1 + bl
            total = 0.0
            for k in range(nk):
                w = omega[k]
                dre = -w * w * exp_sigma_re[k] + alpha * kappa
                dim = -w * w * exp_sigma_im[k] + bsum * w
                inv_d2 = 1.0 / (dre * dre + dim * dim)
                # T1 numerator A = j b1 w + alpha kappa
                are = alpha * kappa
                aim = b1 * w
                # TL numerator B = j bl w * exp(-j w sigma_L)
                bre = -bl * w * phase_im[k]
                bim = bl * w * phase_re[k]
                # A * conj(B)
                ab_re = are * bre + aim * bim
                ab_im = aim * bre - are * bim
                q = ((are * are + aim * aim) * s11[k]
                     + (bre * bre + bim * bim) * sll[k]
                     + 2.0 * (ab_re * s1l_re[k] - ab_im * s1l_im[k]))
                total += weights[k] * q * inv_d2
            out[a_idx, b_idx] = total
    return out


def _objective_pair_grid_numpy(weights, omega, s11, sll, s1l_re, s1l_im,
                               exp_sigma_re, exp_sigma_im, alpha, kappa,
                               beta1_grid, betal_grid, phase_re, phase_im):
    """Vectorized twin of :func:`_objective_pair_grid` (fallback path)."""
    w = omega[None, None, :]
    wt = weights[None, None, :]
    b1 = beta1_grid[:, None, None]
    bl = betal_grid[None, :, None]
    bsum = alpha + b1 + bl
    dre = -w ** 2 * exp_sigma_re[None, None, :] + alpha * kappa
    dim = -w ** 2 * exp_sigma_im[None, None, :] + bsum * w
    inv_d2 = 1.0 / (dre ** 2 + dim ** 2)
    are = alpha * kappa
    aim = b1 * w
    bre = -bl * w * phase_im[None, None, :]
    bim = bl * w * phase_re[None, None, :]
    ab_re = are * bre + aim * bim
    ab_im = aim * bre - are * bim
    q = ((are ** 2 + aim ** 2) * s11[None, None, :]
         + (bre ** 2 + bim ** 2) * sll[None, None, :]
         + 2.0 * (ab_re * s1l_re[None, None, :] - ab_im * s1l_im[None, None, :]))
    return np.sum(wt * q * inv_d2, axis=2)


def _objective_single_grid(weights, omega, s11, exp_sigma_re, exp_sigma_im,
                           alpha, kappa, beta1_grid):
    """Spectral objective on a beta_1 grid with a single connected vehicle."""
    n1 = beta1_grid.shape[0]
    nk = omega.shape[0]
    out = np.empty(n1)
    for a_idx in range(n1):
        b1 = beta1_grid[a_idx]
        bsum = alpha + b1
        total = 0.0
        for k in range(nk):
            w = omega[k]
            dre = -w * w * exp_sigma_re[k] + alpha * kappa
            dim = -w * w * exp_sigma_im[k] + bsum * w
            num = (alpha * kappa) ** 2 + (b1 * w) ** 2
            total += weights[k] * num * s11[k] / (dre * dre + dim * dim)
        out[a_idx] = total
    return out


def _objective_single_grid_numpy(weights, omega, s11, exp_sigma_re,
                                 exp_sigma_im, alpha, kappa, beta1_grid):
    b1 = beta1_grid[:, None]
    w = omega[None, :]
    bsum = alpha + b1
    dre = -w ** 2 * exp_sigma_re[None, :] + alpha * kappa
    dim = -w ** 2 * exp_sigma_im[None, :] + bsum * w
    num = (alpha * kappa) ** 2 + (b1 * w) ** 2
    return np.sum(weights[None, :] * num * s11[None, :] / (dre ** 2 + dim ** 2),
                  axis=1)


# Pure-python references, kept importable for cross-checks and benchmarks.
rk4_follower_py = _rk4_follower
rk4_truck_nonlinear_py = _rk4_truck_nonlinear
rk4_truck_linear_py = _rk4_truck_linear
objective_pair_grid_py = _objective_pair_grid
objective_single_grid_py = _objective_single_grid
objective_pair_grid_numpy = _objective_pair_grid_numpy
objective_single_grid_numpy = _objective_single_grid_numpy

if NUMBA_ENABLED:
    _node = _jit(_node)
    _mid = _jit(_mid)
    _clip_policy = _jit(_clip_policy)
    rk4_follower = _jit(_rk4_follower)
    rk4_truck_nonlinear = _jit(_rk4_truck_nonlinear)
    rk4_truck_linear = _jit(_rk4_truck_linear)
    objective_pair_grid = _jit(_objective_pair_grid)
    objective_single_grid = _jit(_objective_single_grid)
else:
    rk4_follower = _rk4_follower
    rk4_truck_nonlinear = _rk4_truck_nonlinear
    rk4_truck_linear = _rk4_truck_linear
    objective_pair_grid = _objective_pair_grid_numpy
    objective_single_grid = _objective_single_grid_numpy
