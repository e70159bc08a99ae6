"""Physical and control parameter sets with their default values.

Defaults reproduce the reference setup of the coupled-pendula wrestling
simulator: a light pendulum (0.067 kg) on a heavy free cart (0.68 kg),
a stiff viscoelastic tip-to-tip rod, a penalty-spring floor, and a
deadband PD standing controller per agent.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "PendulumParams",
    "RodParams",
    "FloorParams",
    "StandingControlParams",
    "ImpulseParams",
    "SimulationSettings",
    "CipParams",
    "canonical_json",
    "parameter_digest",
]


def canonical_json(obj) -> str:
    """Serialize to canonical JSON: sorted keys, no insignificant whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class PendulumParams:
    """Masses, geometry and viscous coefficients of one cart-pendulum unit."""

    m_theta: float = 0.067  # pendulum mass (kg)
    m_x: float = 0.68  # cart mass (kg)
    r: float = 0.3  # pendulum length (m)
    g: float = 9.8  # gravity (m/s^2)
    c_x: float = 0.01  # cart viscous coefficient (N s/m)
    c_theta: float = 0.01  # pendulum viscous coefficient (N m s)

    def __post_init__(self):
        if self.m_theta <= 0 or self.m_x <= 0 or self.r <= 0 or self.g <= 0:
            raise ValueError("m_theta, m_x, r and g must be positive")
        if self.c_x < 0 or self.c_theta < 0:
            raise ValueError("viscous coefficients must be non-negative")


@dataclass(frozen=True)
class RodParams:
    """Viscoelastic tip-to-tip connection rod."""

    w0: float = 1.0  # natural length (m)
    k_w: float = 5000.0  # spring coefficient (N/m)
    c_w: float = 50.0  # viscous coefficient (N s/m)

    def __post_init__(self):
        if self.w0 <= 0:
            raise ValueError("w0 must be positive")
        if self.k_w < 0 or self.c_w < 0:
            raise ValueError("k_w and c_w must be non-negative")


@dataclass(frozen=True)
class FloorParams:
    """Penalty-method floor: spring-damper normal force and smoothed Coulomb friction."""

    k_f: float = 500.0  # floor spring coefficient (N/m)
    c_f: float = 10.0  # floor viscous coefficient (N s/m)
    mu: float = 0.0  # Coulomb friction coefficient
    sigma: float = 1e6  # sigmoid steepness of the smoothed step/signum

    def __post_init__(self):
        if self.k_f < 0 or self.c_f < 0 or self.mu < 0:
            raise ValueError("k_f, c_f and mu must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class StandingControlParams:
    """Deadband PD standing controller: plain PD inside |theta| < delta_theta."""

    k_p: float = 1.0  # proportional gain (N m/rad)
    k_d: float = 0.01  # derivative gain (N m s/rad)
    delta_theta: float = math.pi / 6  # deadband half width (rad)
    alpha: float = 25.0  # trapezoid steepness

    def __post_init__(self):
        if self.k_p < 0 or self.k_d < 0:
            raise ValueError("gains must be non-negative")
        if self.delta_theta <= 0 or self.alpha <= 0:
            raise ValueError("delta_theta and alpha must be positive")


@dataclass(frozen=True)
class ImpulseParams:
    """Rectangular angular impulse: area `strength`, width delta_tau, refractory tau_g."""

    strength: float = 0.06  # angular impulse per firing (N m s)
    delta_tau: float = 5e-4  # pulse width (s)
    tau_g: float = 5e-4  # generator relaxation (refractory) time (s)

    def __post_init__(self):
        if self.delta_tau <= 0:
            raise ValueError("delta_tau must be positive")
        if self.tau_g < self.delta_tau:
            raise ValueError("tau_g must be >= delta_tau")


@dataclass(frozen=True)
class SimulationSettings:
    """Fixed-step integration and convergence-detection settings.

    A trial is declared converged when both pendulum rates and the relative
    cart velocity stay below tolerance continuously for ``t_dwell`` seconds.
    The common cart drift is excluded from the gate: it is a neutrally stable
    momentum mode that decays on a much longer timescale than anything that
    can change the final equilibrium.
    """

    dt: float = 5e-4  # integration step (s)
    t_end: float = 20.0  # horizon (s); index 0 is reported on timeout
    omega_tol: float = 1e-3  # pendulum rate tolerance (rad/s)
    v_tol: float = 1e-3  # relative cart velocity tolerance (m/s)
    t_dwell: float = 0.5  # required sustained-quiet time (s)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be >= dt")
        if self.omega_tol <= 0 or self.v_tol <= 0 or self.t_dwell < 0:
            raise ValueError("tolerances must be positive, t_dwell non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def dwell_steps(self) -> int:
        return int(round(self.t_dwell / self.dt))


@dataclass(frozen=True)
class CipParams:
    """All physical and standing-control constants of the coupled model."""

    pendulum: PendulumParams = field(default_factory=PendulumParams)
    rod: RodParams = field(default_factory=RodParams)
    floor: FloorParams = field(default_factory=FloorParams)
    standing: StandingControlParams = field(default_factory=StandingControlParams)

    def to_array(self) -> np.ndarray:
        """Pack into the flat layout consumed by the compiled kernels."""
        p, r, f, s = self.pendulum, self.rod, self.floor, self.standing
        return np.array(
            [
                p.m_theta, p.m_x, p.g, p.r, p.c_x, p.c_theta,
                r.w0, r.k_w, r.c_w,
                f.k_f, f.c_f, f.mu, f.sigma,
                s.alpha, s.k_p, s.k_d, s.delta_theta,
            ],
            dtype=np.float64,
        )


def parameter_digest(
    params: CipParams,
    impulse: ImpulseParams,
    simulation: SimulationSettings,
) -> str:
    """SHA-256 hex digest of the canonical JSON form of a full parameter set.

    Used as classifier-table provenance: a table is only valid for the exact
    parameters it was learned under.
    """
    doc = {
        "impulse": asdict(impulse),
        "model": asdict(params),
        "simulation": asdict(simulation),
    }
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()
