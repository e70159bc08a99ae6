"""JSON run configuration for the command-line front end.

An empty config file ``{}`` reproduces the reference setup: default physical
parameters, the standard measurement box, impulse strength 0.06 N m s with
pulse width and relaxation time equal to the integration step, selector sets
{2, 3} for agent 1 and {4, 7} for the mirrored agent 2.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import trivial_state
from .engine import AgentIC
from .learning import PAPER_MEASUREMENT_BOX, GridSpec, load_table
from .params import (
    CipParams,
    FloorParams,
    ImpulseParams,
    PendulumParams,
    RodParams,
    SimulationSettings,
    StandingControlParams,
)

__all__ = ["RunConfig", "DEFAULT_SELECTED_1", "DEFAULT_SELECTED_2"]

DEFAULT_SELECTED_1 = frozenset({2, 3})
DEFAULT_SELECTED_2 = frozenset({4, 7})


def _build(cls, doc: dict, key: str):
    sub = doc.get(key, {})
    if not isinstance(sub, dict):
        raise ValueError(f"config section '{key}' must be an object")
    valid = cls.__dataclass_fields__
    unknown = set(sub) - set(valid)
    if unknown:
        raise ValueError(f"unknown keys in '{key}': {sorted(unknown)}")
    return cls(**sub)


@dataclass
class RunConfig:
    """Parsed configuration with defaults for every omitted section."""

    params: CipParams = field(default_factory=CipParams)
    impulse: ImpulseParams = field(default_factory=ImpulseParams)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    grid: GridSpec = field(
        default_factory=lambda: GridSpec.uniform(PAPER_MEASUREMENT_BOX, 10)
    )
    controllers: dict = field(default_factory=dict)  # raw per-agent sections
    sweep: dict = field(default_factory=dict)
    initial_state: Optional[np.ndarray] = None
    base_dir: str = "."

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = ".") -> "RunConfig":
        if not isinstance(doc, dict):
            raise ValueError("config root must be a JSON object")
        model = doc.get("model", {})
        params = CipParams(
            pendulum=_build(PendulumParams, model, "pendulum"),
            rod=_build(RodParams, model, "rod"),
            floor=_build(FloorParams, model, "floor"),
            standing=_build(StandingControlParams, model, "standing"),
        )
        sim_doc = dict(doc.get("simulation", {}))
        simulation = SimulationSettings(**sim_doc)
        imp_doc = dict(doc.get("impulse", {}))
        # pulse width and relaxation time track the integration step by default
        imp_doc.setdefault("delta_tau", simulation.dt)
        imp_doc.setdefault("tau_g", simulation.dt)
        impulse = ImpulseParams(**imp_doc)

        grid_doc = doc.get("grid", {})
        bounds = grid_doc.get("bounds", [list(b) for b in PAPER_MEASUREMENT_BOX])
        resolution = grid_doc.get("resolution", 10)
        if isinstance(resolution, int):
            grid = GridSpec.uniform(bounds, resolution)
        else:
            lo, hi = zip(*bounds)
            grid = GridSpec(lo, hi, tuple(resolution))

        initial = doc.get("initial_state")
        if initial is not None:
            initial = np.asarray(initial, dtype=np.float64)
            if initial.shape != (8,):
                raise ValueError("initial_state must have 8 components")

        return cls(
            params=params,
            impulse=impulse,
            simulation=simulation,
            grid=grid,
            controllers=doc.get("controllers", {}),
            sweep=doc.get("sweep", {}),
            initial_state=initial,
            base_dir=base_dir,
        )

    def start_state(self) -> np.ndarray:
        if self.initial_state is not None:
            return self.initial_state.copy()
        return trivial_state(self.params.rod.w0)

    def _resolve(self, path: str) -> str:
        if os.path.isabs(path):
            return path
        return os.path.join(self.base_dir, path)

    def with_resolution(self, m: int) -> GridSpec:
        return GridSpec(self.grid.lower, self.grid.upper, (m,) * self.grid.dimension)

    def controller(
        self,
        agent: int,
        table_override=None,
        delay_override: Optional[float] = None,
    ) -> Optional[AgentIC]:
        """Build the intelligent controller attached to agent 1 or 2.

        The config section ``controllers.agent1``/``controllers.agent2`` holds
        table path, selector set, sensing delay, signed impulse strength and
        the mirror flag; agent 2 defaults to the mirror-reuse form with the
        opposite impulse sign.  Table files are digest-checked on load.
        Returns None when the agent has no table configured and no override.
        """
        if agent not in (1, 2):
            raise ValueError("agent must be 1 or 2")
        sec = dict(self.controllers.get(f"agent{agent}", {}))
        if table_override is not None:
            table = table_override
        elif "table" in sec:
            table = load_table(
                self._resolve(sec["table"]), self.params, self.impulse, self.simulation
            )
        else:
            return None
        default_sel = DEFAULT_SELECTED_1 if agent == 1 else DEFAULT_SELECTED_2
        selected = frozenset(sec.get("selected", default_sel))
        sign = 1.0 if agent == 1 else -1.0
        strength = float(sec.get("strength", sign * self.impulse.strength))
        delay = float(sec.get("delay", 0.0))
        if delay_override is not None:
            delay = float(delay_override)
        mirrored = bool(sec.get("mirrored", agent == 2))
        return AgentIC(
            table,
            selected,
            strength,
            delay=delay,
            delta_tau=self.impulse.delta_tau,
            tau_g=self.impulse.tau_g,
            mirrored=mirrored,
        )
