"""Coupled-pendula physics: forces, equations of motion, integration and
final-state interpretation.

The state vector is an 8-component float array
``(x1, v1, th1, w1, x2, v2, th2, w2)``: cart displacement, cart velocity,
pendulum angle from vertical, and angular rate, for each agent.

Final states are summarized by an equilibrium index ``nu`` in 0..9:
0 means "did not converge within the horizon"; 1..9 encode the pair of
per-agent statuses as ``nu = 3*a + b + 1`` with status 0 = standing,
1 = fallen toward -pi/2, 2 = fallen toward +pi/2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateRodError, NonFiniteStateError
from .params import CipParams, FloorParams, PendulumParams, RodParams, SimulationSettings

__all__ = [
    "trivial_state",
    "smooth_step",
    "tip_kinematics",
    "rod_force",
    "floor_forces",
    "eom_rhs",
    "rkg4_step",
    "rkg4_step_cip",
    "classify_angles",
    "equilibrium_index",
    "agent_statuses",
    "mirror_index",
    "Outcome",
    "win_loss",
    "WIN_LOSS_LABELS",
    "EquilibriumDetector",
    "SimResult",
    "simulate",
]

TRAJ_COLUMNS = (
    "t", "x1", "v1", "th1", "w1", "x2", "v2", "th2", "w2",
    "T1", "T2", "fired1", "fired2",
)


def trivial_state(w0: float = 1.0) -> np.ndarray:
    """Both agents upright and at rest, carts one natural rod length apart."""
    s = np.zeros(8)
    s[4] = w0
    return s


def _as_state(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (8,):
        raise ValueError(f"state must have shape (8,), got {s.shape}")
    return s


def smooth_step(s: float, sigma: float) -> float:
    """Overflow-safe sigmoid approximation of the unit step."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return _kernels.smooth_step(float(s), float(sigma))


def tip_kinematics(s, p: PendulumParams):
    """Per-agent tip position and velocity ((X, Y, Xdot, Ydot), ...)."""
    s = _as_state(s)
    r = p.r
    out = []
    for x, v, th, om in ((s[0], s[1], s[2], s[3]), (s[4], s[5], s[6], s[7])):
        sin_t, cos_t = math.sin(th), math.cos(th)
        out.append(
            (x + r * sin_t, r * cos_t, v + r * om * cos_t, -r * om * sin_t)
        )
    return tuple(out)


def rod_force(s, rod: RodParams, p: PendulumParams) -> np.ndarray:
    """Rod reaction vector along the tip-to-tip direction.

    The returned vector acts on tip 2; the opposite acts on tip 1.
    """
    (x1, y1, xd1, yd1), (x2, y2, xd2, yd2) = tip_kinematics(s, p)
    wx, wy = x2 - x1, y2 - y1
    w = math.hypot(wx, wy)
    if w < 1e-9:
        raise DegenerateRodError(f"rod length {w:.3g} m below 1e-9 m")
    w_dot = ((xd2 - xd1) * wx + (yd2 - yd1) * wy) / w
    p_scalar = -rod.k_w * (w - rod.w0) - rod.c_w * w_dot
    return np.array([p_scalar / w * wx, p_scalar / w * wy])


def floor_forces(s, f: FloorParams, p: PendulumParams):
    """Per-agent (normal, friction) floor forces acting on the pendulum tips."""
    tips = tip_kinematics(s, p)
    out = []
    for _, y, xd, yd in tips:
        normal = _kernels.smooth_step(-y, f.sigma) * (-f.k_f * y - f.c_f * yd)
        friction = -f.mu * normal * (2.0 * _kernels.smooth_step(xd, f.sigma) - 1.0)
        out.append((normal, friction))
    return tuple(out)


def eom_rhs(s, torques, params: CipParams) -> np.ndarray:
    """Full 8-D state derivative under constant torques (T1, T2)."""
    s = _as_state(s)
    if not np.all(np.isfinite(s)):
        raise NonFiniteStateError(float("nan"))
    t1, t2 = torques
    out, status = _kernels.rhs(s, float(t1), float(t2), params.to_array())
    if status == _kernels.STATUS_DEGENERATE_ROD:
        raise DegenerateRodError("tips coincident while evaluating the EOM")
    if status != 0:
        from .errors import SingularMassMatrixError

        raise SingularMassMatrixError("mass matrix numerically singular")
    return out


def rkg4_step(f: Callable[[np.ndarray], np.ndarray], y, dt: float) -> np.ndarray:
    """One Runge-Kutta-Gill step of an autonomous system ``ydot = f(y)``.

    Generic form for arbitrary derivative fields; the coupled-pendula fast
    path uses the identically-coded compiled version.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = np.asarray(y, dtype=np.float64)
    s2 = _kernels.SQRT2
    k1 = np.asarray(f(y), dtype=np.float64)
    k2 = np.asarray(f(y + (0.5 * dt) * k1), dtype=np.float64)
    k3 = np.asarray(f(y + dt * (((s2 - 1.0) / 2.0) * k1 + ((2.0 - s2) / 2.0) * k2)), dtype=np.float64)
    k4 = np.asarray(f(y + dt * ((-s2 / 2.0) * k2 + (1.0 + s2 / 2.0) * k3)), dtype=np.float64)
    return y + (dt / 6.0) * (k1 + (2.0 - s2) * k2 + (2.0 + s2) * k3 + k4)


def rkg4_step_cip(s, torques, dt: float, params: CipParams) -> np.ndarray:
    """One compiled Runge-Kutta-Gill step of the coupled model, torques held."""
    s = _as_state(s)
    t1, t2 = torques
    y, status = _kernels.rkg4_step(s, float(t1), float(t2), float(dt), params.to_array())
    if status == _kernels.STATUS_DEGENERATE_ROD:
        raise DegenerateRodError("tips coincident during an integration step")
    if status != 0:
        from .errors import SingularMassMatrixError

        raise SingularMassMatrixError("mass matrix numerically singular")
    return y


def classify_angles(th1: float, th2: float) -> int:
    """Equilibrium index for a converged angle pair (nearest of -pi/2, 0, +pi/2)."""
    return _kernels.classify_angles(float(th1), float(th2))


def equilibrium_index(status1: int, status2: int) -> int:
    """Index nu = 3*a + b + 1 from per-agent statuses in {0, 1, 2}."""
    if status1 not in (0, 1, 2) or status2 not in (0, 1, 2):
        raise ValueError("statuses must be in {0, 1, 2}")
    return 3 * status1 + status2 + 1


def agent_statuses(nu: int) -> tuple[int, int]:
    """Inverse of :func:`equilibrium_index` for nu in 1..9."""
    if not 1 <= nu <= 9:
        raise ValueError("nu must be in 1..9")
    return (nu - 1) // 3, (nu - 1) % 3


def mirror_index(nu: int) -> int:
    """Transpose image of an equilibrium index: swap the two agent statuses."""
    a, b = agent_statuses(nu)
    return equilibrium_index(b, a)


class Outcome(enum.Enum):
    BOTH_STANDING = "draw-both-standing"
    AGENT1_WINS = "agent1-wins"
    AGENT2_WINS = "agent2-wins"
    DOUBLE_FALL = "double-fall"
    UNRESOLVED = "unresolved"


# Human-readable labels.  Fall direction: status 1 leans toward -X (toward the
# left agent), status 2 toward +X; a standing agent beats a fallen one, and an
# opponent pulled inward fell toward the winner.
WIN_LOSS_LABELS = {
    1: "both standing",
    2: "agent 1 wins by pulling",
    3: "agent 1 wins by pushing",
    4: "agent 2 wins by pushing",
    5: "both fall leftward",
    6: "both fall outward",
    7: "agent 2 wins by pulling",
    8: "both fall inward",
    9: "both fall rightward",
}


def win_loss(nu: int) -> tuple[Outcome, str]:
    """Competitive interpretation of a final equilibrium index."""
    if nu == 0:
        return Outcome.UNRESOLVED, "unresolved"
    if nu == 1:
        return Outcome.BOTH_STANDING, WIN_LOSS_LABELS[1]
    if nu in (2, 3):
        return Outcome.AGENT1_WINS, WIN_LOSS_LABELS[nu]
    if nu in (4, 7):
        return Outcome.AGENT2_WINS, WIN_LOSS_LABELS[nu]
    if nu in (5, 6, 8, 9):
        return Outcome.DOUBLE_FALL, WIN_LOSS_LABELS[nu]
    raise ValueError("nu must be in 0..9")


class EquilibriumDetector:
    """Sustained-quiet convergence detector.

    Reports an equilibrium index once pendulum rates and the relative cart
    velocity have stayed below tolerance continuously for the dwell time;
    returns None while undecided.
    """

    def __init__(self, settings: SimulationSettings):
        self.omega_tol = settings.omega_tol
        self.v_tol = settings.v_tol
        self.dwell_steps = settings.dwell_steps
        self._dwell = 0

    def reset(self) -> None:
        self._dwell = 0

    def update(self, s) -> Optional[int]:
        if (
            abs(s[3]) < self.omega_tol
            and abs(s[7]) < self.omega_tol
            and abs(s[1] - s[5]) < self.v_tol
        ):
            self._dwell += 1
            if self._dwell >= self.dwell_steps:
                return classify_angles(s[2], s[6])
        else:
            self._dwell = 0
        return None


@dataclass
class SimResult:
    """Outcome of one simulation run."""

    final_state: np.ndarray
    nu: int  # 0 when the horizon elapsed unconverged
    t_converge: float  # nan on timeout
    trajectory: Optional[np.ndarray] = None  # rows follow TRAJ_COLUMNS


def simulate(
    s0,
    controller: Callable[[float, np.ndarray], Sequence[float]],
    params: CipParams,
    settings: SimulationSettings,
    record: bool = False,
) -> SimResult:
    """Integrate from ``s0`` with a per-step torque callback.

    ``controller(t, state)`` returns the full torque pair (T1, T2), held
    constant over each step.  Terminates early on sustained convergence;
    deterministic: identical inputs give bit-identical outputs.
    """
    y = _as_state(s0).copy()
    par = params.to_array()
    dt = settings.dt
    n_steps = settings.n_steps
    detector = EquilibriumDetector(settings)
    traj = np.empty((n_steps + 1, 13)) if record else None
    n_rec = 0
    nu = 0
    t_conv = math.nan
    k_done = 0

    for k in range(n_steps):
        t = k * dt
        t1, t2 = controller(t, y)
        fired1 = bool(getattr(controller, "fired_now_1", False))
        fired2 = bool(getattr(controller, "fired_now_2", False))
        if record:
            traj[n_rec, 0] = t
            traj[n_rec, 1:9] = y
            traj[n_rec, 9] = t1
            traj[n_rec, 10] = t2
            traj[n_rec, 11] = 1.0 if fired1 else 0.0
            traj[n_rec, 12] = 1.0 if fired2 else 0.0
            n_rec += 1
        y, status = _kernels.rkg4_step(y, float(t1), float(t2), dt, par)
        k_done = k + 1
        if status == _kernels.STATUS_DEGENERATE_ROD:
            raise DegenerateRodError(f"tips coincident at t = {k_done * dt:.6g} s")
        if status != 0 or not np.all(np.isfinite(y)):
            raise NonFiniteStateError(k_done * dt)
        found = detector.update(y)
        if found is not None:
            nu = found
            t_conv = k_done * dt
            break

    if record:
        traj[n_rec, 0] = k_done * dt
        traj[n_rec, 1:9] = y
        traj[n_rec, 9:13] = 0.0
        n_rec += 1
        traj = traj[:n_rec].copy()

    return SimResult(final_state=y, nu=nu, t_converge=t_conv, trajectory=traj)
