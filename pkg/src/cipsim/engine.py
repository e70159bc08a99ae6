"""Fast trial execution: a thin Python front end over the compiled loop.

This module runs the standard trial configuration (standing PD on both
agents, an optional rectangular disturbance at t = 0, optional per-agent
intelligent controllers) entirely inside one compiled call.  The generic
callback-based loop in :mod:`cipsim.dynamics` produces bit-identical
trajectories; this path exists for throughput in sweeps and learning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _kernels
from .errors import DegenerateRodError, NonFiniteStateError
from .params import CipParams, ImpulseParams, SimulationSettings

__all__ = ["AgentIC", "TrialResult", "run"]


@dataclass(frozen=True)
class AgentIC:
    """Intelligent-controller attachment for one agent in the fast path.

    ``table`` is a ClassifierTable; ``selected`` the firing equilibrium
    indices; ``strength`` the signed angular impulse; ``delay`` a sensing
    delay in seconds (rounded to integration steps).  ``mirrored`` classifies
    the negate-and-swap image of the measurement (the agent-2 reuse form).
    """

    table: object
    selected: frozenset[int]
    strength: float
    delay: float = 0.0
    delta_tau: float = 5e-4
    tau_g: float = 5e-4
    mirrored: bool = False

    def __init__(
        self,
        table,
        selected: Iterable[int],
        strength: float,
        delay: float = 0.0,
        delta_tau: float = 5e-4,
        tau_g: float = 5e-4,
        mirrored: bool = False,
    ):
        selected = frozenset(selected)
        if not selected or not selected <= set(range(1, 10)):
            raise ValueError("selector set must be a non-empty subset of 1..9")
        if delay < 0:
            raise ValueError("delay must be non-negative")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "strength", float(strength))
        object.__setattr__(self, "delay", float(delay))
        object.__setattr__(self, "delta_tau", float(delta_tau))
        object.__setattr__(self, "tau_g", float(tau_g))
        object.__setattr__(self, "mirrored", bool(mirrored))

    @classmethod
    def from_impulse(cls, table, selected, impulse: ImpulseParams, sign: float = 1.0,
                     delay: float = 0.0, mirrored: bool = False) -> "AgentIC":
        return cls(
            table,
            selected,
            sign * impulse.strength,
            delay=delay,
            delta_tau=impulse.delta_tau,
            tau_g=impulse.tau_g,
            mirrored=mirrored,
        )

    def _arrays(self):
        grid = self.table.grid
        sel = np.zeros(10, dtype=np.bool_)
        for nu in self.selected:
            sel[nu] = True
        return (
            True,
            self.table.labels_flat,
            grid.lower_array,
            grid.upper_array,
            grid.resolution_array,
            sel,
            self.strength,
        )


_IC_OFF = (
    False,
    _kernels._NO_TABLE,
    _kernels._NO_BOUND,
    _kernels._NO_BOUND,
    _kernels._NO_RES,
    _kernels._NO_SEL,
    0.0,
)


@dataclass
class TrialResult:
    """Outcome of one fast-path trial."""

    final_state: np.ndarray
    nu: int  # 0 on timeout
    t_converge: float  # nan on timeout
    fired1: bool
    fired2: bool
    trajectory: Optional[np.ndarray] = None


def run(
    x0,
    params: CipParams,
    settings: SimulationSettings,
    disturbance: Optional[tuple[int, float, float]] = None,
    ic1: Optional[AgentIC] = None,
    ic2: Optional[AgentIC] = None,
    record: bool = False,
) -> TrialResult:
    """Run one trial in compiled code.

    ``disturbance`` is (agent, impulse area, width): a rectangular torque pulse
    of area ``q`` over ``width`` seconds starting at t = 0 on agent 0 or 1.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (8,):
        raise ValueError("initial state must have shape (8,)")
    if disturbance is None:
        dist_agent, dist_q, dist_width = -1, 0.0, settings.dt
    else:
        dist_agent, dist_q, dist_width = disturbance
        if dist_agent not in (0, 1):
            raise ValueError("disturbance agent must be 0 or 1")
        if dist_width <= 0:
            raise ValueError("disturbance width must be positive")

    a1 = ic1._arrays() if ic1 is not None else _IC_OFF
    a2 = ic2._arrays() if ic2 is not None else _IC_OFF
    delay1 = int(round(ic1.delay / settings.dt)) if ic1 is not None else 0
    delay2 = int(round(ic2.delay / settings.dt)) if ic2 is not None else 0
    dtau1 = ic1.delta_tau if ic1 is not None else settings.dt
    taug1 = ic1.tau_g if ic1 is not None else settings.dt
    dtau2 = ic2.delta_tau if ic2 is not None else settings.dt
    taug2 = ic2.tau_g if ic2 is not None else settings.dt
    mirror2 = ic2.mirrored if ic2 is not None else False

    n_steps = settings.n_steps
    traj = np.empty((n_steps + 1, 13)) if record else _kernels._NO_TRAJ

    y, nu, status, t_conv, fired1, fired2, n_rec = _kernels.run_trial(
        x0, params.to_array(), settings.dt, n_steps, settings.dwell_steps,
        settings.omega_tol, settings.v_tol,
        dist_agent, float(dist_q), float(dist_width),
        a1[0], a1[1], a1[2], a1[3], a1[4], a1[5], a1[6], delay1, dtau1, taug1,
        a2[0], a2[1], a2[2], a2[3], a2[4], a2[5], a2[6], delay2, dtau2, taug2,
        mirror2, record, traj,
    )
    if status == _kernels.STATUS_DEGENERATE_ROD:
        raise DegenerateRodError(f"tips coincident at t = {t_conv:.6g} s")
    if status == _kernels.STATUS_NONFINITE:
        raise NonFiniteStateError(t_conv)
    if status == _kernels.STATUS_TIMEOUT:
        t_conv = math.nan
    return TrialResult(
        final_state=y,
        nu=int(nu),
        t_converge=float(t_conv),
        fired1=bool(fired1),
        fired2=bool(fired2),
        trajectory=traj[:n_rec].copy() if record else None,
    )
