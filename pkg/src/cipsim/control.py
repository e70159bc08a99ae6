"""Torque-producing logic: deadband PD, measurement and rigid-rod
reconstruction, selector, impulse generator, and the composable controllers
used by the generic simulation loop.

Agent 2's intelligent controller is the mirror reuse of agent 1's: it
classifies the negate-and-swap image of the state against the same learned
table, with the opposite impulse sign and the transpose-image selector set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _kernels
from .errors import ConstraintInfeasibleError
from .params import CipParams, ImpulseParams, StandingControlParams

__all__ = [
    "trap",
    "pd_torque",
    "MeasurementMap",
    "measure",
    "reconstruct",
    "selector",
    "ImpulseGenerator",
    "mirror_transform",
    "mirror_set",
    "PdController",
    "DisturbanceImpulse",
    "TableController",
    "CompositeController",
]


def trap(theta: float, delta_theta: float, alpha: float) -> float:
    """Smooth unit-height trapezoid: ~1 inside |theta| < delta_theta, ~0 outside."""
    return _kernels.trap(float(theta), float(delta_theta), float(alpha))


def pd_torque(theta: float, theta_dot: float, p: StandingControlParams) -> float:
    """Deadband PD standing torque: plain PD inside the deadband, cut off outside."""
    return trap(theta, p.delta_theta, p.alpha) * (-p.k_p * theta - p.k_d * theta_dot)


@dataclass(frozen=True)
class MeasurementMap:
    """Linear measurement of the 8-D state plus its rigid-rod inverse.

    mode "four-dim": y = (th1, w1, th2, w2), reconstruction fixes x1 = v1 = 0.
    mode "six-dim":  y = (x1, v1, th1, w1, th2, w2).
    """

    mode: str = "four-dim"
    w0: float = 1.0
    r: float = 0.3

    def __post_init__(self):
        if self.mode not in ("four-dim", "six-dim"):
            raise ValueError("mode must be 'four-dim' or 'six-dim'")

    @property
    def dimension(self) -> int:
        return 4 if self.mode == "four-dim" else 6


def measure(s, m: MeasurementMap) -> np.ndarray:
    """Project a state onto the measurement vector y."""
    s = np.asarray(s, dtype=np.float64)
    if m.mode == "four-dim":
        return s[[2, 3, 6, 7]].copy()
    return s[[0, 1, 2, 3, 6, 7]].copy()


def reconstruct(y, m: MeasurementMap) -> np.ndarray:
    """Fill in the full state from a measurement using the rigid-rod constraint.

    Raises ConstraintInfeasibleError when the constraint has no real solution
    (square-root argument not positive).
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (m.dimension,):
        raise ValueError(f"measurement must have shape ({m.dimension},)")
    if m.mode == "four-dim":
        x1, v1 = 0.0, 0.0
        th1, w1, th2, w2 = y
    else:
        x1, v1, th1, w1, th2, w2 = y
    state, ok = _kernels.reconstruct4(
        float(th1), float(w1), float(th2), float(w2), m.w0, m.r
    )
    if not ok:
        raise ConstraintInfeasibleError(
            f"w0^2 - r^2 (cos th2 - cos th1)^2 <= 0 for th1={th1:.4g}, th2={th2:.4g}"
        )
    state[0] = x1
    state[1] = v1
    state[4] += x1
    state[5] += v1
    return state


def selector(nu: int, selected: Iterable[int]) -> int:
    """1 iff nu is a selected equilibrium index; unclassified (0) never fires."""
    if nu == 0:
        return 0
    return 1 if nu in set(selected) else 0


class ImpulseGenerator:
    """AND-gate plus two timers emitting rectangular unit-area pulses.

    A 0-to-1 rise of the gated selector signal at time t_r produces output
    1/delta_tau on [t_r, t_r + delta_tau); the gate is then held low for the
    relaxation time tau_g, so recorded rise times are strictly increasing and
    at least tau_g apart.
    """

    def __init__(self, p: ImpulseParams):
        self.params = p
        self.last_rise_time: Optional[float] = None
        self._last_rise = -1e18
        self._last_gated = False
        self._last_t = -math.inf
        self.rise_times: list[float] = []

    def reset(self) -> None:
        self._last_rise = -1e18
        self._last_gated = False
        self._last_t = -math.inf
        self.last_rise_time = None
        self.rise_times = []

    def step(self, delta: int, t: float) -> float:
        """Advance to time t (non-decreasing) with selector bit delta; return output."""
        if t < self._last_t:
            raise ValueError("generator time must be non-decreasing")
        self._last_t = t
        out, last_rise, self._last_gated = _kernels.generator_step(
            bool(delta), float(t), self._last_rise, self._last_gated,
            self.params.delta_tau, self.params.tau_g,
        )
        if last_rise != self._last_rise:
            self._last_rise = last_rise
            self.last_rise_time = last_rise
            self.rise_times.append(last_rise)
        return out

    @property
    def firing_until(self) -> Optional[float]:
        if self.last_rise_time is None:
            return None
        return self.last_rise_time + self.params.delta_tau

    @property
    def refractory_until(self) -> Optional[float]:
        if self.last_rise_time is None:
            return None
        return self.last_rise_time + self.params.tau_g


def mirror_transform(s) -> np.ndarray:
    """Negate-and-swap involution x' = -(x2, x1) used for controller reuse."""
    s = np.asarray(s, dtype=np.float64)
    return -np.concatenate([s[4:8], s[0:4]])


def mirror_set(selected: Iterable[int]) -> frozenset[int]:
    """Transpose image of a selector set under the agent-swap symmetry."""
    from .dynamics import mirror_index

    return frozenset(mirror_index(nu) for nu in selected)


class PdController:
    """Standing PD on both agents."""

    def __init__(self, params: CipParams):
        self._par = params.to_array()

    def torques(self, t: float, s) -> tuple[float, float]:
        return (
            _kernels.pd_torque(s[2], s[3], self._par),
            _kernels.pd_torque(s[6], s[7], self._par),
        )


class DisturbanceImpulse:
    """Rectangular torque impulse of area q on one agent starting at t = 0."""

    def __init__(self, agent: int, q: float, width: float):
        if agent not in (0, 1):
            raise ValueError("agent must be 0 or 1")
        if width <= 0:
            raise ValueError("width must be positive")
        self.agent = agent
        self.q = q
        self.width = width

    def torques(self, t: float, s) -> tuple[float, float]:
        if t < self.width * (1.0 - _kernels._TIMER_EPS):
            amp = self.q / self.width
            return (amp, 0.0) if self.agent == 0 else (0.0, amp)
        return (0.0, 0.0)


class TableController:
    """Intelligent controller: quantized classifier -> selector -> generator.

    ``agent`` selects which torque channel receives the impulse.  With
    ``mirrored=True`` the controller is the mirror reuse form: it classifies
    the negate-and-swap image of the (possibly delayed) measurement.  A
    positive ``delay`` evaluates the classifier on the state ``delay`` seconds
    in the past (step-quantized ring buffer; warm-up reads the initial state).
    """

    def __init__(
        self,
        table,
        selected: Iterable[int],
        impulse: ImpulseParams,
        agent: int = 0,
        delay: float = 0.0,
        dt: float = 5e-4,
        mirrored: bool = False,
    ):
        if agent not in (0, 1):
            raise ValueError("agent must be 0 or 1")
        selected = frozenset(selected)
        if not selected:
            raise ValueError("selector set must be non-empty")
        if not selected <= set(range(1, 10)):
            raise ValueError("selector set must be a subset of 1..9")
        self.table = table
        self.selected = selected
        self.agent = agent
        self.mirrored = mirrored
        self.delay_steps = int(round(delay / dt))
        self.generator = ImpulseGenerator(impulse)
        self.strength = impulse.strength
        self.out_of_range_count = 0
        self.fired = False
        self._sel_mask = np.zeros(10, dtype=np.bool_)
        for nu in self.selected:
            self._sel_mask[nu] = True
        self._history: list[np.ndarray] = []

    def reset(self) -> None:
        self.generator.reset()
        self._history = []
        self.fired = False
        self.out_of_range_count = 0

    def torques(self, t: float, s) -> tuple[float, float]:
        y4 = np.array([s[2], s[3], s[6], s[7]])
        self._history.append(y4)
        idx = len(self._history) - 1 - self.delay_steps
        if idx < 0:
            idx = 0
        y4 = self._history[idx]
        if self.mirrored:
            y4 = np.array([-y4[2], -y4[3], -y4[0], -y4[1]])
        grid = self.table.grid
        ci = _kernels.cell_of4(
            y4, grid.lower_array, grid.upper_array, grid.resolution_array
        )
        if ci >= 0:
            nu = int(self.table.labels_flat[ci])
        else:
            nu = 0
            self.out_of_range_count += 1
        if self.mirrored and nu > 0:
            # the table predicts the outcome of the impulse applied on the
            # opposite side; swap the statuses back to world coordinates
            nu = 3 * ((nu - 1) % 3) + (nu - 1) // 3 + 1
        out = self.generator.step(bool(self._sel_mask[nu]), t)
        if out > 0.0:
            self.fired = True
        torque = self.strength * out
        return (torque, 0.0) if self.agent == 0 else (0.0, torque)


class CompositeController:
    """Sum of component controllers, applied in order.

    Exposes per-step firing flags of any TableController components so the
    trajectory recorder can log them.
    """

    def __init__(self, *parts):
        self.parts = parts
        self.fired_now_1 = False
        self.fired_now_2 = False

    def __call__(self, t: float, s) -> tuple[float, float]:
        t1 = 0.0
        t2 = 0.0
        self.fired_now_1 = False
        self.fired_now_2 = False
        for part in self.parts:
            a, b = part.torques(t, s)
            t1 += a
            t2 += b
            if isinstance(part, TableController):
                firing = part.generator.last_rise_time is not None and (
                    a != 0.0 or b != 0.0
                )
                if part.agent == 0 and firing:
                    self.fired_now_1 = True
                if part.agent == 1 and firing:
                    self.fired_now_2 = True
        return t1, t2
