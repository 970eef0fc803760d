"""Instantaneous energy consumption of the ego vehicle.

A longitudinal-dynamics power surrogate (inertia + rolling resistance +
grade + aerodynamic drag, divided by drivetrain efficiency) stands in for
the calibrated electric-vehicle map, with the negative-acceleration
truncation applied by default and an optional regenerative-braking credit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .world import EGO_ACCEL_MAX, SPEED_LIMIT

import math


@dataclass(frozen=True)
class EnergyParams:
    mass: float = 1500.0            # kg
    rolling_coeff: float = 0.01
    air_density: float = 1.2        # kg/m^3
    drag_area: float = 0.8          # C_d * A, m^2
    efficiency: float = 0.85        # drivetrain, (0, 1]
    gravity: float = 9.81           # m/s^2
    grade: float = 0.0              # rad
    aux_load: float = 0.0           # W
    regen_efficiency: float = 0.6

    def __post_init__(self):
        if self.efficiency <= 0.0 or self.efficiency > 1.0:
            raise ValueError("efficiency must lie in (0, 1]")
        if not 0.0 <= self.regen_efficiency <= 1.0:
            raise ValueError("regen efficiency must lie in [0, 1]")
        if min(self.mass, self.air_density, self.drag_area, self.gravity) < 0:
            raise ValueError("physical parameters must be non-negative")


DEFAULT_ENERGY_PARAMS = EnergyParams()


def tractive_power(v: float, a: float, params: EnergyParams) -> float:
    """Wheel power demand in W (can be negative while braking)."""
    p = params
    force = (p.mass * a
             + p.mass * p.gravity * (p.rolling_coeff * math.cos(p.grade) + math.sin(p.grade))
             + 0.5 * p.air_density * p.drag_area * v * v)
    return force * v


def step_energy(v: float, a: float, params: EnergyParams = DEFAULT_ENERGY_PARAMS,
                regen: bool = False, dt: float = 0.02) -> float:
    """Energy drawn from the battery over one time step, in J.

    With regen off, braking steps (a < 0) cost nothing; otherwise the
    positive tractive power is scaled by the drivetrain efficiency and the
    auxiliary load is added.  With regen on, braking steps return a
    negative credit proportional to the recoverable braking power.
    """
    if v < 0.0:
        raise ValueError("speed must be non-negative")
    if a < 0.0:
        if not regen:
            return 0.0
        power = tractive_power(v, a, params)
        return -params.regen_efficiency * abs(min(0.0, power)) * dt
    power = max(0.0, tractive_power(v, a, params))
    return power * dt / params.efficiency + params.aux_load * dt


def journey_energy(energy_steps) -> float:
    """Total journey energy: the sum of per-step energies (0 for an empty
    log)."""
    return float(sum(energy_steps))


def normalization_energy(params: EnergyParams = DEFAULT_ENERGY_PARAMS,
                         dt: float = 0.02) -> float:
    """Step energy at the speed limit and maximum ego acceleration; used to
    scale the energy reward term into [0, 1]."""
    return step_energy(SPEED_LIMIT, EGO_ACCEL_MAX, params, dt=dt)
