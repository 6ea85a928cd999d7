"""Electrophoretic transport of a data-block molecule, micro-pump and chamber figures.

The molecule is treated as a compact sphere dragged through water in the Stokes
regime; the electric force it needs fixes its charge, and the charge per base
fixes its length in bases. All functions use SI units unless the name says
otherwise, and return unrounded values.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

from .codec import block_bit_capacity
from .errors import ConfigError, DomainError, ExtrapolationWarning, RegimeWarning

ELEMENTARY_CHARGE = 1.602176634e-19
STOKES_REYNOLDS_LIMIT = 10.0

# reported micro-pump operating points: (laser power mW, rotation Hz)
PUMP_LOW = (3.0, 0.8)
PUMP_HIGH = (9.0, 5.0)


@dataclass(frozen=True)
class FluidParams:
    density: float = 1.0e3  # kg/m^3
    viscosity: float = 1.0e-3  # N s/m^2
    temperature_c: float = 20.0  # informational only

    def __post_init__(self):
        if self.density <= 0 or self.viscosity <= 0:
            raise DomainError("fluid density and viscosity must be positive")


@dataclass(frozen=True)
class ParticleModel:
    radius: float = 5.0e-7  # m
    speed: float = 10.0  # m/s
    charge_per_base: float = 4.0e-19  # C, i.e. 2.5 electrons per base
    charge: float | None = None  # C; derived from the drag balance when None

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError("particle radius must be positive")
        if self.speed < 0:
            raise DomainError("particle speed must be >= 0")
        if self.charge_per_base <= 0:
            raise DomainError("charge_per_base must be positive")


@dataclass(frozen=True)
class FieldParams:
    applied_voltage: float = 10.0  # V
    electrode_gap: float = 1.0e-2  # m

    def __post_init__(self):
        if self.electrode_gap <= 0:
            raise DomainError("electrode_gap must be positive")

    @property
    def field(self) -> float:
        return self.applied_voltage / self.electrode_gap


class Mode(enum.Enum):
    IDEALIZED_SPHERE = "idealized_sphere"
    EMPIRICAL_GEL = "empirical_gel"
    VESICLE = "vesicle"


@dataclass(frozen=True)
class TransportMode:
    mode: Mode = Mode.IDEALIZED_SPHERE
    empirical_slowdown: float = 1.0e3
    vesicle_mobility: float | None = None  # m^2/(V s)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.empirical_slowdown < 1:
            raise DomainError("empirical_slowdown must be >= 1")


def reynolds_number(fluid: FluidParams, particle: ParticleModel) -> float:
    return 2.0 * fluid.density * particle.speed * particle.radius / fluid.viscosity


def stokes_drag(fluid: FluidParams, particle: ParticleModel) -> float:
    re = reynolds_number(fluid, particle)
    if re > STOKES_REYNOLDS_LIMIT * (1 + 1e-9):
        warnings.warn(
            f"Reynolds number {re:.3g} is above the Stokes-regime limit "
            f"{STOKES_REYNOLDS_LIMIT:g}; drag is underestimated",
            RegimeWarning,
            stacklevel=2,
        )
    return 6.0 * math.pi * fluid.viscosity * particle.radius * particle.speed


def required_charge(drag: float, field: FieldParams) -> float:
    """Charge whose electric force balances ``drag`` in the applied field."""
    if field.field <= 0:
        raise DomainError("electric field must be positive")
    return drag / field.field


def bases_for_charge(charge: float, charge_per_base: float = 4.0e-19) -> float:
    if charge_per_base <= 0:
        raise DomainError("charge_per_base must be positive")
    return charge / charge_per_base


def access_time(
    path_length: float,
    particle: ParticleModel = ParticleModel(),
    mode: TransportMode = TransportMode(),
    field: FieldParams = FieldParams(),
) -> float:
    """Seconds to move a block ``path_length`` metres between spot and station."""
    if path_length < 0:
        raise DomainError("path_length must be >= 0")
    if mode.mode is Mode.VESICLE:
        if mode.vesicle_mobility is None or mode.vesicle_mobility <= 0:
            raise ConfigError("vesicle mode needs a positive vesicle_mobility")
        return path_length / (mode.vesicle_mobility * field.field)
    if particle.speed <= 0:
        if path_length == 0:
            return 0.0
        raise DomainError("particle speed must be positive")
    t = path_length / particle.speed
    if mode.mode is Mode.EMPIRICAL_GEL:
        t *= mode.empirical_slowdown
    return t


def pump_rotation_frequency(power_mw: float) -> float:
    """Rotation rate of a laser-driven birefringent micro-rotor.

    Straight line through the two reported operating points. Powers outside
    [3.0, 9.0] mW are extrapolated and flagged with ExtrapolationWarning.
    """
    if power_mw < 0:
        raise DomainError("laser power must be >= 0")
    (p0, f0), (p1, f1) = PUMP_LOW, PUMP_HIGH
    if not p0 <= power_mw <= p1:
        warnings.warn(
            f"{power_mw} mW is outside the measured {p0}-{p1} mW range",
            ExtrapolationWarning,
            stacklevel=2,
        )
    w = (power_mw - p0) / (p1 - p0)
    # weight form keeps both endpoints exact in floating point
    return (1.0 - w) * f0 + w * f1


def chamber_volume(side_um: float) -> float:
    """Volume in nL of a cubic chamber with the given side (1 nL = 1e6 um^3)."""
    if side_um < 0:
        raise DomainError("side must be >= 0")
    return side_um**3 * 1.0e-6


def round_to_decade(x: float) -> float:
    """Nearest power of ten in log space (9.42e-8 -> 1e-7)."""
    if x == 0:
        return 0.0
    return math.copysign(10.0 ** round(math.log10(abs(x))), x)


def derivation_chain(
    fluid: FluidParams = FluidParams(),
    particle: ParticleModel = ParticleModel(),
    field: FieldParams = FieldParams(),
    path_length: float = 1.0e-2,
    mode: TransportMode = TransportMode(),
) -> dict:
    """Reynolds -> drag -> charge -> bases -> block size -> transit time.

    ``rounded`` repeats the chain after rounding the drag force to its decade,
    the way the order-of-magnitude estimate is usually quoted.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        drag = stokes_drag(fluid, particle)
    re = reynolds_number(fluid, particle)
    q = required_charge(drag, field) if particle.charge is None else particle.charge
    n = bases_for_charge(q, particle.charge_per_base)

    drag_r = round_to_decade(drag)
    q_r = required_charge(drag_r, field)
    n_r = bases_for_charge(q_r, particle.charge_per_base)

    def block(nb):
        bits = block_bit_capacity(nb)
        return {"bases": nb, "bits": bits, "bytes": bits / 8, "megabytes": bits / 8 / 1e6}

    gel = TransportMode(Mode.EMPIRICAL_GEL, mode.empirical_slowdown)
    return {
        "inputs": {
            "density_kg_m3": fluid.density,
            "viscosity_Pa_s": fluid.viscosity,
            "radius_m": particle.radius,
            "speed_m_s": particle.speed,
            "charge_per_base_C": particle.charge_per_base,
            "applied_voltage_V": field.applied_voltage,
            "electrode_gap_m": field.electrode_gap,
            "path_length_m": path_length,
        },
        "unrounded": {
            "reynolds": re,
            "stokes_regime": re <= STOKES_REYNOLDS_LIMIT * (1 + 1e-9),
            "drag_N": drag,
            "field_V_m": field.field,
            "charge_C": q,
            "electrons": q / ELEMENTARY_CHARGE,
            "block": block(n),
            "access_time_s": access_time(path_length, particle, mode, field),
            "access_time_gel_s": access_time(path_length, particle, gel, field),
        },
        "rounded": {
            "reynolds": round_to_decade(re),
            "drag_N": drag_r,
            "charge_C": q_r,
            "block": block(n_r),
        },
    }
