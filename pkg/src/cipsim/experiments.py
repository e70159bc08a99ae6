"""Numerical studies on the coupled-pendula wrestling model.

Provides impulse-response sweeps with a success rate E, delay scans for the
delayed intelligent controller, and two-agent competitions with per-agent
success rates E1/E2, plus CSV/JSON export of the per-trial records.

Bookkeeping: a sweep runs N_Q disturbance strengths Q uniformly spaced over
[0, Q_max] (both endpoints included) on one or both agents.  N0 counts trials
where no intelligent controller fired; the success rate divides the selected
-outcome count by the number of trials that fired:

    E = N_J / (N_total - N0).

When every trial is in N0 the rate is undefined and the result carries the
status "no denominator" instead of a number.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import engine
from .dynamics import trivial_state, win_loss
from .engine import AgentIC
from .params import CipParams, SimulationSettings, canonical_json

__all__ = [
    "SweepConfig",
    "TrialRecord",
    "SweepResult",
    "impulse_response_sweep",
    "delay_scan",
    "competition_run",
    "export_results",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("trial_id", "Q", "side", "nu", "fired", "t_converge", "label")

NO_DENOMINATOR = "no denominator"
OK = "ok"


@dataclass(frozen=True)
class SweepConfig:
    """One sweep campaign: disturbance schedule, controllers and settings.

    ``side`` is "agent1", "agent2" or "both"; with "both" each Q runs once per
    disturbance placement and the trials are pooled into a single quotient.
    ``ic1``/``ic2`` attach intelligent controllers; the disturbance is a
    rectangular torque pulse of width ``disturbance_width`` at t = 0.
    """

    q_max: float = 0.06
    n_q: int = 100
    side: str = "agent1"
    ic1: Optional[AgentIC] = None
    ic2: Optional[AgentIC] = None
    params: CipParams = field(default_factory=CipParams)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    disturbance_width: float = 5e-4
    jobs: int = 1

    def __post_init__(self):
        if self.q_max < 0:
            raise ValueError("q_max must be non-negative")
        if self.n_q < 1:
            raise ValueError("n_q must be >= 1")
        if self.side not in ("agent1", "agent2", "both"):
            raise ValueError("side must be 'agent1', 'agent2' or 'both'")
        if self.disturbance_width <= 0:
            raise ValueError("disturbance_width must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def q_samples(self) -> np.ndarray:
        if self.n_q == 1:
            return np.array([0.0])
        return np.linspace(0.0, self.q_max, self.n_q)

    @property
    def sides(self) -> tuple[int, ...]:
        return {"agent1": (1,), "agent2": (2,), "both": (1, 2)}[self.side]

    def _ic_dict(self, ic: Optional[AgentIC]) -> Optional[dict]:
        if ic is None:
            return None
        return {
            "selected": sorted(ic.selected),
            "strength": ic.strength,
            "delay": ic.delay,
            "delta_tau": ic.delta_tau,
            "tau_g": ic.tau_g,
            "mirrored": ic.mirrored,
            "table_digest": ic.table.provenance.get("digest"),
            "table_resolution": list(ic.table.grid.resolution),
        }

    def to_dict(self) -> dict:
        return {
            "q_max": self.q_max,
            "n_q": self.n_q,
            "side": self.side,
            "ic1": self._ic_dict(self.ic1),
            "ic2": self._ic_dict(self.ic2),
            "params": asdict(self.params),
            "simulation": asdict(self.simulation),
            "disturbance_width": self.disturbance_width,
        }


@dataclass(frozen=True)
class TrialRecord:
    """One disturbance trial: inputs, outcome and firing flags."""

    trial_id: int
    q: float
    side: int  # disturbed agent, 1 or 2
    nu: int
    fired1: bool
    fired2: bool
    t_converge: float  # nan on timeout

    @property
    def fired(self) -> bool:
        return self.fired1 or self.fired2

    @property
    def label(self) -> str:
        return win_loss(self.nu)[1]


@dataclass
class SweepResult:
    """Per-trial records with success-rate aggregates.

    ``selected1``/``selected2`` are the outcome sets counted as success for
    each side; single-controller sweeps use only ``selected1`` and expose E,
    competitions expose E1 and E2 over the shared denominator.
    """

    records: list[TrialRecord]
    selected1: frozenset[int] = frozenset()
    selected2: frozenset[int] = frozenset()
    config: Optional[dict] = None

    @property
    def n_total(self) -> int:
        return len(self.records)

    @property
    def n0(self) -> int:
        return sum(1 for r in self.records if not r.fired)

    @property
    def denominator(self) -> int:
        return self.n_total - self.n0

    @property
    def n_j1(self) -> int:
        return sum(1 for r in self.records if r.fired and r.nu in self.selected1)

    @property
    def n_j2(self) -> int:
        return sum(1 for r in self.records if r.fired and r.nu in self.selected2)

    @property
    def status(self) -> str:
        return OK if self.denominator > 0 else NO_DENOMINATOR

    @property
    def e(self) -> Optional[float]:
        if self.denominator == 0:
            return None
        return self.n_j1 / self.denominator

    e1 = e

    @property
    def e2(self) -> Optional[float]:
        if self.denominator == 0:
            return None
        return self.n_j2 / self.denominator

    def aggregates(self) -> dict:
        return {
            "n_total": self.n_total,
            "n0": self.n0,
            "denominator": self.denominator,
            "n_j1": self.n_j1,
            "n_j2": self.n_j2,
            "e1": self.e1,
            "e2": self.e2,
            "status": self.status,
            "selected1": sorted(self.selected1),
            "selected2": sorted(self.selected2),
        }


def _run_one(c: SweepConfig, trial_id: int, q: float, side: int) -> TrialRecord:
    res = engine.run(
        trivial_state(c.params.rod.w0),
        c.params,
        c.simulation,
        disturbance=(side - 1, q, c.disturbance_width),
        ic1=c.ic1,
        ic2=c.ic2,
    )
    return TrialRecord(
        trial_id=trial_id,
        q=float(q),
        side=side,
        nu=res.nu,
        fired1=res.fired1,
        fired2=res.fired2,
        t_converge=res.t_converge,
    )


def _run_trials(c: SweepConfig) -> list[TrialRecord]:
    plan = [
        (i, float(q), side)
        for i, (side, q) in enumerate(
            (side, q) for side in c.sides for q in c.q_samples
        )
    ]
    if c.jobs == 1:
        return [_run_one(c, *p) for p in plan]
    with ThreadPoolExecutor(max_workers=c.jobs) as pool:
        return list(pool.map(lambda p: _run_one(c, *p), plan))


def impulse_response_sweep(c: SweepConfig) -> SweepResult:
    """Sweep the disturbance strength and compute the success rate E.

    Success counts trials whose final equilibrium lies in agent 1's selector
    set; trials where no controller fired form N0 and leave the denominator.
    """
    if c.ic1 is None and c.ic2 is None:
        raise ValueError("an impulse-response sweep needs at least one controller")
    sel1 = c.ic1.selected if c.ic1 is not None else frozenset()
    sel2 = c.ic2.selected if c.ic2 is not None else frozenset()
    return SweepResult(
        records=_run_trials(c),
        selected1=sel1,
        selected2=sel2,
        config=c.to_dict(),
    )


def delay_scan(
    c: SweepConfig, delays: Sequence[float]
) -> tuple[list[tuple[float, Optional[float]]], Optional[float]]:
    """Success rate E over a set of sensing delays for agent 1's controller.

    Returns (points, best_delay): one (delay, E) point per entry, E being None
    when undefined, and the delay maximizing E (None when all undefined).
    """
    if c.ic1 is None:
        raise ValueError("a delay scan needs an agent-1 controller")
    if len(delays) == 0:
        raise ValueError("delays must be non-empty")
    points: list[tuple[float, Optional[float]]] = []
    for tau_d in delays:
        delayed = AgentIC(
            c.ic1.table,
            c.ic1.selected,
            c.ic1.strength,
            delay=float(tau_d),
            delta_tau=c.ic1.delta_tau,
            tau_g=c.ic1.tau_g,
            mirrored=c.ic1.mirrored,
        )
        cfg = SweepConfig(
            q_max=c.q_max,
            n_q=c.n_q,
            side=c.side,
            ic1=delayed,
            ic2=c.ic2,
            params=c.params,
            simulation=c.simulation,
            disturbance_width=c.disturbance_width,
            jobs=c.jobs,
        )
        points.append((float(tau_d), impulse_response_sweep(cfg).e))
    defined = [(tau, e) for tau, e in points if e is not None]
    best = max(defined, key=lambda p: p[1])[0] if defined else None
    return points, best


def competition_run(c: SweepConfig) -> SweepResult:
    """Two-controller competition pooled over both disturbance placements.

    Requires both controllers; forces side = "both" bookkeeping so each Q runs
    once per disturbed agent.  E1 and E2 share the denominator of trials where
    at least one controller fired.
    """
    if c.ic1 is None or c.ic2 is None:
        raise ValueError("a competition needs controllers on both agents")
    if c.side != "both":
        c = SweepConfig(
            q_max=c.q_max, n_q=c.n_q, side="both", ic1=c.ic1, ic2=c.ic2,
            params=c.params, simulation=c.simulation,
            disturbance_width=c.disturbance_width, jobs=c.jobs,
        )
    return SweepResult(
        records=_run_trials(c),
        selected1=c.ic1.selected,
        selected2=c.ic2.selected,
        config=c.to_dict(),
    )


def _record_row(r: TrialRecord) -> list:
    return [
        r.trial_id,
        repr(r.q),
        r.side,
        r.nu,
        int(r.fired),
        repr(r.t_converge),
        r.label,
    ]


def export_results(result: SweepResult, format: str, sink) -> None:
    """Write per-trial records to ``sink`` as CSV or JSON.

    CSV holds exactly the columns trial_id, Q, side, nu, fired, t_converge
    and label; JSON additionally carries the aggregates and the configuration
    echo.  Floats are serialized with round-trip precision.
    """
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "w", newline="") as fh:
            export_results(result, format, fh)
        return
    if format == "csv":
        writer = csv.writer(sink)
        writer.writerow(CSV_COLUMNS)
        for r in result.records:
            writer.writerow(_record_row(r))
    elif format == "json":
        doc = {
            "records": [
                {
                    "trial_id": r.trial_id,
                    "Q": r.q,
                    "side": r.side,
                    "nu": r.nu,
                    "fired": r.fired,
                    "fired1": r.fired1,
                    "fired2": r.fired2,
                    "t_converge": None if np.isnan(r.t_converge) else r.t_converge,
                    "label": r.label,
                }
                for r in result.records
            ],
            "aggregates": result.aggregates(),
            "config": result.config,
        }
        sink.write(canonical_json(doc))
        sink.write("\n")
    else:
        raise ValueError("format must be 'csv' or 'json'")
