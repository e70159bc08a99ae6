"""Compiled numeric core: dynamics right-hand side, integrator and trial loops.

All floating-point arithmetic of the simulator lives here, in one place, so
that every execution path (library calls, offline learning, sweeps, the CLI)
performs bit-identical operations.  The Python modules wrap these kernels.

Parameter array layout (``CipParams.to_array``):
0 m_theta, 1 m_x, 2 g, 3 r, 4 c_x, 5 c_theta, 6 w0, 7 k_w, 8 c_w,
9 k_f, 10 c_f, 11 mu, 12 sigma, 13 alpha, 14 k_p, 15 k_d, 16 delta_theta.

State layout: (x1, v1, th1, w1, x2, v2, th2, w2).

Trial status codes: 0 converged, 1 horizon elapsed, 2 non-finite state,
3 degenerate rod.
"""

import math

import numpy as np
from numba import njit

SQRT2 = math.sqrt(2.0)

# Relative guard for timer comparisons on the integration grid: much larger
# than double rounding error, much smaller than one step relative to a timer
# width, so boundary steps resolve deterministically.
_TIMER_EPS = 1e-9

STATUS_CONVERGED = 0
STATUS_TIMEOUT = 1
STATUS_NONFINITE = 2
STATUS_DEGENERATE_ROD = 3


@njit(cache=True, nogil=True)
def smooth_step(s, sigma):
    """Overflow-safe logistic step {1 + exp(-sigma*s)}^-1."""
    z = sigma * s
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def trap(theta, delta_theta, alpha):
    """Smooth unit-height trapezoid centered at zero with half width delta_theta."""
    return smooth_step(theta + delta_theta, alpha) * smooth_step(-theta + delta_theta, alpha)


@njit(cache=True, nogil=True)
def pd_torque(theta, theta_dot, par):
    """Deadband PD standing torque."""
    return trap(theta, par[16], par[13]) * (-par[14] * theta - par[15] * theta_dot)


@njit(cache=True, nogil=True)
def rhs(y, t1, t2, par):
    """Time derivative of the 8-D state under constant torques (t1, t2).

    Returns (derivative, status).  The two pendula couple only through the
    tip forces, so the accelerations come from two closed-form 2x2 solves.
    """
    out = np.empty(8)
    m_t = par[0]
    m_x = par[1]
    g = par[2]
    r = par[3]
    c_x = par[4]
    c_t = par[5]
    w0 = par[6]
    k_w = par[7]
    c_w = par[8]
    k_f = par[9]
    c_f = par[10]
    mu = par[11]
    sigma = par[12]

    s1 = math.sin(y[2])
    c1 = math.cos(y[2])
    s2 = math.sin(y[6])
    c2 = math.cos(y[6])

    # tip kinematics
    xt1 = y[0] + r * s1
    yt1 = r * c1
    xt2 = y[4] + r * s2
    yt2 = r * c2
    xd1 = y[1] + r * y[3] * c1
    yd1 = -r * y[3] * s1
    xd2 = y[5] + r * y[7] * c2
    yd2 = -r * y[7] * s2

    # rod reaction
    w_x = xt2 - xt1
    w_y = yt2 - yt1
    w = math.sqrt(w_x * w_x + w_y * w_y)
    if w < 1e-9:
        return out, STATUS_DEGENERATE_ROD
    w_dot = ((xd2 - xd1) * w_x + (yd2 - yd1) * w_y) / w
    p_scalar = -k_w * (w - w0) - c_w * w_dot
    p_x = p_scalar / w * w_x
    p_y = p_scalar / w * w_y

    # floor penalty forces
    r1 = smooth_step(-yt1, sigma) * (-k_f * yt1 - c_f * yd1)
    f1 = -mu * r1 * (2.0 * smooth_step(xd1, sigma) - 1.0)
    r2 = smooth_step(-yt2, sigma) * (-k_f * yt2 - c_f * yd2)
    f2 = -mu * r2 * (2.0 * smooth_step(xd2, sigma) - 1.0)

    f1x = -p_x + f1
    f1y = -p_y + r1
    f2x = p_x + f2
    f2y = p_y + r2

    a_diag = m_x + m_t
    c_diag = m_t * r * r

    # agent 1
    b = m_t * r * c1
    rx = m_t * r * y[3] * y[3] * s1 - c_x * y[1] + f1x
    rt = m_t * g * r * s1 - c_t * y[3] + r * (c1 * f1x - s1 * f1y) + t1
    det = a_diag * c_diag - b * b
    if abs(det) < 1e-12 * a_diag * c_diag:
        return out, STATUS_NONFINITE
    out[0] = y[1]
    out[1] = (c_diag * rx - b * rt) / det
    out[2] = y[3]
    out[3] = (a_diag * rt - b * rx) / det

    # agent 2
    b = m_t * r * c2
    rx = m_t * r * y[7] * y[7] * s2 - c_x * y[5] + f2x
    rt = m_t * g * r * s2 - c_t * y[7] + r * (c2 * f2x - s2 * f2y) + t2
    det = a_diag * c_diag - b * b
    if abs(det) < 1e-12 * a_diag * c_diag:
        return out, STATUS_NONFINITE
    out[4] = y[5]
    out[5] = (c_diag * rx - b * rt) / det
    out[6] = y[7]
    out[7] = (a_diag * rt - b * rx) / det
    return out, 0


@njit(cache=True, nogil=True)
def rkg4_step(y, t1, t2, dt, par):
    """One fixed step of the 4-stage Runge-Kutta-Gill scheme, torques held constant."""
    k1, st = rhs(y, t1, t2, par)
    if st != 0:
        return y, st
    k2, st = rhs(y + (0.5 * dt) * k1, t1, t2, par)
    if st != 0:
        return y, st
    k3, st = rhs(y + dt * (((SQRT2 - 1.0) / 2.0) * k1 + ((2.0 - SQRT2) / 2.0) * k2), t1, t2, par)
    if st != 0:
        return y, st
    k4, st = rhs(y + dt * ((-SQRT2 / 2.0) * k2 + (1.0 + SQRT2 / 2.0) * k3), t1, t2, par)
    if st != 0:
        return y, st
    return y + (dt / 6.0) * (k1 + (2.0 - SQRT2) * k2 + (2.0 + SQRT2) * k3 + k4), 0


@njit(cache=True, nogil=True)
def classify_angles(th1, th2):
    """Equilibrium index from angle statuses (nearest of -pi/2, 0, +pi/2)."""
    if th1 < -0.25 * math.pi:
        a = 1
    elif th1 > 0.25 * math.pi:
        a = 2
    else:
        a = 0
    if th2 < -0.25 * math.pi:
        b = 1
    elif th2 > 0.25 * math.pi:
        b = 2
    else:
        b = 0
    return 3 * a + b + 1


@njit(cache=True, nogil=True)
def cell_of4(y4, lo, hi, m):
    """Linear (row-major, last dimension fastest) cell index of y4, or -1 outside."""
    idx = 0
    for j in range(4):
        a = lo[j]
        b = hi[j]
        v = y4[j]
        if v < a or v > b:
            return -1
        i = int(math.floor((v - a) * m[j] / (b - a)))
        if i >= m[j]:
            i = m[j] - 1
        idx = idx * m[j] + i
    return idx


@njit(cache=True, nogil=True)
def generator_step(delta, t, last_rise, last_gated, delta_tau, tau_g):
    """Advance the AND-gate + two-timer impulse generator to time t.

    The gate input is forced low during the refractory window (t_r, t_r+tau_g);
    the left limit of the gated signal is low throughout (t_r, t_r+tau_g], so a
    high selector at the reopening instant counts as a fresh rise.
    Returns (output, last_rise, gated).
    """
    dtr = t - last_rise
    in_refractory = dtr > 0.0 and dtr < tau_g * (1.0 - _TIMER_EPS)
    gated = delta and not in_refractory
    left_zero = dtr > 0.0 and dtr <= tau_g * (1.0 + _TIMER_EPS)
    prev = False if left_zero else last_gated
    if gated and not prev:
        last_rise = t
    out = 0.0
    if t - last_rise < delta_tau * (1.0 - _TIMER_EPS):
        out = 1.0 / delta_tau
    return out, last_rise, gated


@njit(cache=True, nogil=True)
def reconstruct4(th1, om1, th2, om2, w0, r):
    """Rigid-rod state reconstruction from the 4-D measurement, x1 = v1 = 0.

    Returns (state, ok); ok is False when the square-root argument is not positive.
    """
    out = np.zeros(8)
    c1 = math.cos(th1)
    c2 = math.cos(th2)
    s1 = math.sin(th1)
    s2 = math.sin(th2)
    dc = c2 - c1
    arg = w0 * w0 - r * r * dc * dc
    if arg <= 0.0:
        return out, False
    root = math.sqrt(arg)
    out[2] = th1
    out[3] = om1
    out[6] = th2
    out[7] = om2
    out[4] = -r * (s2 - s1) + root
    out[5] = -r * (om2 * c2 - om1 * c1) + r * r * dc * (om2 * s2 - om1 * s1) / root
    return out, True


@njit(cache=True, nogil=True)
def run_trial(
    x0,
    par,
    dt,
    n_steps,
    dwell_steps,
    omega_tol,
    v_tol,
    dist_agent,  # -1 none, 0 agent 1, 1 agent 2
    dist_q,
    dist_width,
    ic1_on,
    labels1,
    lo1,
    hi1,
    m1,
    j1,
    p1,
    delay1,
    dtau1,
    taug1,
    ic2_on,
    labels2,
    lo2,
    hi2,
    m2,
    j2,
    p2,
    delay2,
    dtau2,
    taug2,
    mirror2,
    record,
    traj,
):
    """Integrate one trial of the standard configuration.

    Standing PD on both agents, an optional rectangular disturbance impulse at
    t = 0, and optional per-agent intelligent controllers (table classifier ->
    selector -> impulse generator), each with a step-quantized delay.  Agent 2
    may run the mirror-reuse form (negate-and-swap measurement).

    Returns (final_state, nu, status, t_converge, fired1, fired2, n_recorded).
    """
    y = x0.copy()
    hist = np.empty((n_steps + 1, 4))
    hist[0, 0] = y[2]
    hist[0, 1] = y[3]
    hist[0, 2] = y[6]
    hist[0, 3] = y[7]

    last_rise1 = -1e18
    last_gated1 = False
    fired1 = False
    last_rise2 = -1e18
    last_gated2 = False
    fired2 = False

    dwell = 0
    nu = 0
    status = STATUS_TIMEOUT
    t_conv = np.nan
    n_rec = 0
    k_done = 0

    for k in range(n_steps):
        t = k * dt
        t1 = pd_torque(y[2], y[3], par)
        t2 = pd_torque(y[6], y[7], par)
        if dist_agent >= 0 and t < dist_width * (1.0 - _TIMER_EPS):
            if dist_agent == 0:
                t1 = t1 + dist_q / dist_width
            else:
                t2 = t2 + dist_q / dist_width

        g1 = 0.0
        if ic1_on:
            kd = k - delay1
            if kd < 0:
                kd = 0
            ci = cell_of4(hist[kd], lo1, hi1, m1)
            nu_c = int(labels1[ci]) if ci >= 0 else 0
            g1, last_rise1, last_gated1 = generator_step(
                j1[nu_c], t, last_rise1, last_gated1, dtau1, taug1
            )
            if g1 > 0.0:
                fired1 = True
            t1 = t1 + p1 * g1

        g2 = 0.0
        if ic2_on:
            kd = k - delay2
            if kd < 0:
                kd = 0
            y4 = hist[kd]
            if mirror2:
                ym = np.empty(4)
                ym[0] = -y4[2]
                ym[1] = -y4[3]
                ym[2] = -y4[0]
                ym[3] = -y4[1]
                ci = cell_of4(ym, lo2, hi2, m2)
            else:
                ci = cell_of4(y4, lo2, hi2, m2)
            nu_c = int(labels2[ci]) if ci >= 0 else 0
            if mirror2 and nu_c > 0:
                # swap the per-agent statuses: the table predicts the outcome
                # of the impulse applied on the opposite side
                nu_c = 3 * ((nu_c - 1) % 3) + (nu_c - 1) // 3 + 1
            g2, last_rise2, last_gated2 = generator_step(
                j2[nu_c], t, last_rise2, last_gated2, dtau2, taug2
            )
            if g2 > 0.0:
                fired2 = True
            t2 = t2 + p2 * g2

        if record:
            traj[n_rec, 0] = t
            for q in range(8):
                traj[n_rec, 1 + q] = y[q]
            traj[n_rec, 9] = t1
            traj[n_rec, 10] = t2
            traj[n_rec, 11] = 1.0 if g1 > 0.0 else 0.0
            traj[n_rec, 12] = 1.0 if g2 > 0.0 else 0.0
            n_rec += 1

        y, st = rkg4_step(y, t1, t2, dt, par)
        k_done = k + 1
        if st != 0:
            status = st
            t_conv = k_done * dt
            break
        ok = True
        for q in range(8):
            if not math.isfinite(y[q]):
                ok = False
        if not ok:
            status = STATUS_NONFINITE
            t_conv = k_done * dt
            break

        hist[k + 1, 0] = y[2]
        hist[k + 1, 1] = y[3]
        hist[k + 1, 2] = y[6]
        hist[k + 1, 3] = y[7]

        if (
            abs(y[3]) < omega_tol
            and abs(y[7]) < omega_tol
            and abs(y[1] - y[5]) < v_tol
        ):
            dwell += 1
            if dwell >= dwell_steps:
                status = STATUS_CONVERGED
                nu = classify_angles(y[2], y[6])
                t_conv = k_done * dt
                break
        else:
            dwell = 0

    if record:
        traj[n_rec, 0] = k_done * dt
        for q in range(8):
            traj[n_rec, 1 + q] = y[q]
        traj[n_rec, 9] = 0.0
        traj[n_rec, 10] = 0.0
        traj[n_rec, 11] = 0.0
        traj[n_rec, 12] = 0.0
        n_rec += 1

    return y, nu, status, t_conv, fired1, fired2, n_rec


_NO_TABLE = np.zeros(1, dtype=np.uint8)
_NO_BOUND = np.zeros(4)
_NO_RES = np.ones(4, dtype=np.int64)
_NO_SEL = np.zeros(10, dtype=np.bool_)
_NO_TRAJ = np.zeros((1, 13))


@njit(cache=True, nogil=True)
def learn_range(
    start,
    stop,
    lo,
    hi,
    m,
    par,
    dt,
    n_steps,
    dwell_steps,
    omega_tol,
    v_tol,
    p_learn,
    dtau,
    no_table,
    no_bound,
    no_res,
    no_sel,
    no_traj,
):
    """Label cells [start, stop) of a 4-D grid by single-impulse convergence runs.

    Each cell center is reconstructed through the rigid-rod inverse and
    integrated under standing PD plus one angular impulse of area ``p_learn``
    on agent 1 at t = 0.  Returns (labels, n_infeasible).
    """
    out = np.zeros(stop - start, dtype=np.uint8)
    infeasible = 0
    w0 = par[6]
    r = par[3]
    for lin in range(start, stop):
        rem = lin
        i3 = rem % m[3]
        rem //= m[3]
        i2 = rem % m[2]
        rem //= m[2]
        i1 = rem % m[1]
        i0 = rem // m[1]
        y0 = lo[0] + (i0 + 0.5) * (hi[0] - lo[0]) / m[0]
        y1 = lo[1] + (i1 + 0.5) * (hi[1] - lo[1]) / m[1]
        y2 = lo[2] + (i2 + 0.5) * (hi[2] - lo[2]) / m[2]
        y3 = lo[3] + (i3 + 0.5) * (hi[3] - lo[3]) / m[3]
        x0, ok = reconstruct4(y0, y1, y2, y3, w0, r)
        if not ok:
            infeasible += 1
            continue
        _, nu, status, _, _, _, _ = run_trial(
            x0,
            par,
            dt,
            n_steps,
            dwell_steps,
            omega_tol,
            v_tol,
            0,
            p_learn,
            dtau,
            False,
            no_table,
            no_bound,
            no_bound,
            no_res,
            no_sel,
            0.0,
            0,
            dtau,
            dtau,
            False,
            no_table,
            no_bound,
            no_bound,
            no_res,
            no_sel,
            0.0,
            0,
            dtau,
            dtau,
            False,
            False,
            no_traj,
        )
        if status == STATUS_CONVERGED:
            out[lin - start] = nu
    return out, infeasible
