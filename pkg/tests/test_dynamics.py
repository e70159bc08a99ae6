import math

import numpy as np
import pytest

from cipsim import dynamics
from cipsim.control import CompositeController, PdController
from cipsim.dynamics import (
    EquilibriumDetector,
    Outcome,
    agent_statuses,
    classify_angles,
    eom_rhs,
    equilibrium_index,
    floor_forces,
    mirror_index,
    rkg4_step,
    rod_force,
    simulate,
    tip_kinematics,
    trivial_state,
    win_loss,
)
from cipsim.errors import DegenerateRodError, NonFiniteStateError
from cipsim.params import CipParams, SimulationSettings


def test_trivial_state_layout():
    s = trivial_state()
    assert s.shape == (8,)
    assert s[4] == 1.0
    assert np.count_nonzero(s) == 1


def test_smooth_step_limits():
    assert dynamics.smooth_step(0.0, 1e6) == 0.5
    assert dynamics.smooth_step(1.0, 1e6) == pytest.approx(1.0)
    assert dynamics.smooth_step(-1.0, 1e6) == pytest.approx(0.0)
    # large arguments must not overflow
    assert dynamics.smooth_step(-1e6, 1e6) == 0.0
    with pytest.raises(ValueError):
        dynamics.smooth_step(0.0, -1.0)


def test_tip_kinematics_upright():
    p = CipParams().pendulum
    (x1, y1, xd1, yd1), (x2, y2, xd2, yd2) = tip_kinematics(trivial_state(), p)
    assert (x1, y1) == (0.0, p.r)
    assert (x2, y2) == (1.0, p.r)
    assert xd1 == yd1 == xd2 == yd2 == 0.0


def test_tip_kinematics_horizontal():
    p = CipParams().pendulum
    s = trivial_state()
    s[2] = math.pi / 2
    s[3] = 2.0
    (x1, y1, xd1, yd1), _ = tip_kinematics(s, p)
    assert x1 == pytest.approx(p.r)
    assert y1 == pytest.approx(0.0, abs=1e-15)
    assert xd1 == pytest.approx(0.0, abs=1e-15)
    assert yd1 == pytest.approx(-p.r * 2.0)


def test_rod_force_zero_at_natural_length():
    p = CipParams()
    f = rod_force(trivial_state(), p.rod, p.pendulum)
    assert np.allclose(f, 0.0)


def test_rod_force_restoring():
    p = CipParams()
    s = trivial_state()
    s[4] = 1.1  # stretched rod pulls tip 2 back toward tip 1
    f = rod_force(s, p.rod, p.pendulum)
    assert f[0] < 0
    s[4] = 0.9  # compressed rod pushes tip 2 away
    f = rod_force(s, p.rod, p.pendulum)
    assert f[0] > 0


def test_rod_force_degenerate():
    p = CipParams()
    s = trivial_state()
    s[4] = 0.0  # tips coincide
    with pytest.raises(DegenerateRodError):
        rod_force(s, p.rod, p.pendulum)


def test_floor_forces_inactive_above_floor():
    p = CipParams()
    for (n, f) in floor_forces(trivial_state(), p.floor, p.pendulum):
        assert n == pytest.approx(0.0, abs=1e-12)
        assert f == pytest.approx(0.0, abs=1e-12)


def test_floor_normal_resists_penetration():
    p = CipParams()
    s = trivial_state()
    s[2] = math.pi / 2  # tip 1 at floor level
    s[0] = -0.01  # keep rod length sane
    s[3] = 1.0  # tip moving downward
    (n1, _), _ = floor_forces(s, p.floor, p.pendulum)
    assert n1 > 0


def test_eom_trivial_fixed_point():
    p = CipParams()
    out = eom_rhs(trivial_state(), (0.0, 0.0), p)
    assert np.allclose(out, 0.0, atol=1e-12)


def test_eom_rejects_nonfinite():
    s = trivial_state()
    s[3] = math.nan
    with pytest.raises(NonFiniteStateError):
        eom_rhs(s, (0.0, 0.0), CipParams())


def test_rkg4_matches_exponential():
    y = np.array([1.0])
    dt = 1e-2
    for _ in range(100):
        y = rkg4_step(lambda z: -z, y, dt)
    assert y[0] == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_rkg4_fourth_order():
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        y = np.array([1.0])
        for _ in range(int(round(1.0 / dt))):
            y = rkg4_step(lambda z: -z, y, dt)
        errs.append(abs(y[0] - math.exp(-1.0)))
    for i in range(2):
        order = math.log2(errs[i] / errs[i + 1])
        assert order == pytest.approx(4.0, abs=0.1)


def test_classify_angles_thresholds():
    q = math.pi / 4
    assert classify_angles(0.0, 0.0) == 1
    assert classify_angles(-q - 1e-9, 0.0) == 4
    assert classify_angles(q + 1e-9, 0.0) == 7
    assert classify_angles(0.0, -q - 1e-9) == 2
    assert classify_angles(0.0, q + 1e-9) == 3
    assert classify_angles(q - 1e-9, -q + 1e-9) == 1


def test_equilibrium_encoding_roundtrip():
    seen = set()
    for a in range(3):
        for b in range(3):
            nu = equilibrium_index(a, b)
            assert agent_statuses(nu) == (a, b)
            seen.add(nu)
    assert seen == set(range(1, 10))
    with pytest.raises(ValueError):
        equilibrium_index(3, 0)
    with pytest.raises(ValueError):
        agent_statuses(0)


def test_mirror_index_swaps_winners():
    assert {mirror_index(nu) for nu in (2, 3)} == {4, 7}
    assert {mirror_index(nu) for nu in (4, 7)} == {2, 3}
    for nu in range(1, 10):
        assert mirror_index(mirror_index(nu)) == nu


def test_win_loss_partition():
    assert win_loss(0)[0] is Outcome.UNRESOLVED
    assert win_loss(1)[0] is Outcome.BOTH_STANDING
    for nu in (2, 3):
        assert win_loss(nu)[0] is Outcome.AGENT1_WINS
    for nu in (4, 7):
        assert win_loss(nu)[0] is Outcome.AGENT2_WINS
    for nu in (5, 6, 8, 9):
        assert win_loss(nu)[0] is Outcome.DOUBLE_FALL
    with pytest.raises(ValueError):
        win_loss(10)


def test_detector_requires_sustained_quiet():
    st = SimulationSettings(dt=1e-3, t_dwell=3e-3)
    det = EquilibriumDetector(st)
    quiet = trivial_state()
    noisy = trivial_state()
    noisy[3] = 1.0
    assert det.update(quiet) is None
    assert det.update(quiet) is None
    assert det.update(quiet) == 1
    det.reset()
    assert det.update(quiet) is None
    assert det.update(noisy) is None  # resets the dwell counter
    assert det.update(quiet) is None
    assert det.update(quiet) is None
    assert det.update(quiet) == 1


def test_detector_ignores_common_drift():
    st = SimulationSettings(dt=1e-3, t_dwell=1e-3)
    det = EquilibriumDetector(st)
    s = trivial_state()
    s[1] = s[5] = 0.5  # both carts drifting together
    assert det.update(s) == 1


def test_simulate_converges_upright():
    p = CipParams()
    st = SimulationSettings()
    s0 = trivial_state()
    s0[2] = 0.2
    res = simulate(s0, CompositeController(PdController(p)), p, st)
    assert res.nu == 1
    assert res.t_converge < st.t_end
    assert abs(res.final_state[2]) < 1e-3


def test_simulate_records_trajectory():
    p = CipParams()
    st = SimulationSettings(t_end=0.01)
    res = simulate(trivial_state(), CompositeController(PdController(p)), p, st, record=True)
    assert res.trajectory is not None
    assert res.trajectory.shape[1] == len(dynamics.TRAJ_COLUMNS)
    assert res.trajectory[0, 0] == 0.0
    # the final row carries the post-step state with zeroed torque columns
    assert res.trajectory[-1, 9] == 0.0
    np.testing.assert_array_equal(res.trajectory[-1, 1:9], res.final_state)


def test_simulate_timeout_reports_zero():
    p = CipParams()
    st = SimulationSettings(t_end=0.05)
    s0 = trivial_state()
    s0[2] = 0.2
    res = simulate(s0, CompositeController(PdController(p)), p, st)
    assert res.nu == 0
    assert math.isnan(res.t_converge)


def _mechanical_energy(row, p):
    x1, v1, th1, w1, x2, v2, th2, w2 = row
    pen = p.pendulum
    rod = p.rod
    e = 0.0
    for x, v, th, om in ((x1, v1, th1, w1), (x2, v2, th2, w2)):
        tip_vx = v + pen.r * om * math.cos(th)
        tip_vy = -pen.r * om * math.sin(th)
        e += 0.5 * pen.m_x * v * v
        e += 0.5 * pen.m_theta * (tip_vx * tip_vx + tip_vy * tip_vy)
        e += pen.m_theta * pen.g * pen.r * math.cos(th)
    (xt1, yt1, _, _), (xt2, yt2, _, _) = tip_kinematics(np.asarray(row), pen)
    w = math.hypot(xt2 - xt1, yt2 - yt1)
    e += 0.5 * rod.k_w * (w - rod.w0) ** 2
    return e


def test_energy_dissipation_without_torques():
    p = CipParams()
    # short window with small angles so neither tip reaches the floor
    st = SimulationSettings(t_end=0.5)
    s0 = trivial_state()
    s0[2] = 0.05
    s0[6] = -0.03
    res = simulate(s0, lambda t, s: (0.0, 0.0), p, st, record=True)
    assert np.max(np.abs(res.trajectory[:, [3, 7]])) < 1.0  # stays off the floor
    energies = np.array([_mechanical_energy(row[1:9], p) for row in res.trajectory])
    rel_increase = np.diff(energies) / np.abs(energies[:-1])
    assert np.max(rel_increase) < 1e-6


def test_eom_residual_satisfies_equations():
    # plug the returned accelerations back into the per-agent force balance
    p = CipParams()
    s = trivial_state()
    s[:] = [0.02, -0.1, 0.3, 0.8, 1.05, 0.2, -0.25, -1.2]
    torques = (0.013, -0.041)
    out = eom_rhs(s, torques, p)
    rodf = rod_force(s, p.rod, p.pendulum)
    floorf = floor_forces(s, p.floor, p.pendulum)
    pen = p.pendulum
    for agent in (0, 1):
        x, v, th, om = s[4 * agent: 4 * agent + 4]
        xddot = out[4 * agent + 1]
        thddot = out[4 * agent + 3]
        sign = -1.0 if agent == 0 else 1.0
        fx = sign * rodf[0] + floorf[agent][1]
        fy = sign * rodf[1] + floorf[agent][0]
        sin_t, cos_t = math.sin(th), math.cos(th)
        res_x = ((pen.m_x + pen.m_theta) * xddot
                 + pen.m_theta * pen.r * cos_t * thddot
                 - pen.m_theta * pen.r * om * om * sin_t
                 + pen.c_x * v - fx)
        res_th = (pen.m_theta * pen.r * cos_t * xddot
                  + pen.m_theta * pen.r ** 2 * thddot
                  - pen.m_theta * pen.g * pen.r * sin_t
                  + pen.c_theta * om
                  - pen.r * (cos_t * fx - sin_t * fy) - torques[agent])
        assert abs(res_x) < 1e-9
        assert abs(res_th) < 1e-9


def test_rkg4_single_step_value():
    y = rkg4_step(lambda z: -z, np.array([1.0]), 0.01)
    assert abs(y[0] - 0.990049834) < 1e-9
    assert abs(y[0] - math.exp(-0.01)) < 1e-10


def test_fall_beyond_deadband():
    p = CipParams()
    s0 = trivial_state()
    # well past the deadband shoulder: agent 1 falls and the rod drags
    # agent 2 down to the same side
    s0[2] = 0.9
    res = simulate(s0, CompositeController(PdController(p)), p,
                   SimulationSettings(t_end=40.0))
    assert res.nu == 9
    assert res.t_converge < 5.0


def test_nearest_of_three_tolerates_floor_exceedance():
    assert classify_angles(-1.62, 0.0) == 4
    assert classify_angles(1.62, -1.58) == 8


def test_engine_run_deterministic(params):
    from cipsim import engine

    st = SimulationSettings(t_end=5.0)
    r1 = engine.run(trivial_state(), params, st, disturbance=(0, 0.06, 5e-4), record=True)
    r2 = engine.run(trivial_state(), params, st, disturbance=(0, 0.06, 5e-4), record=True)
    np.testing.assert_array_equal(r1.final_state, r2.final_state)
    np.testing.assert_array_equal(r1.trajectory, r2.trajectory)
