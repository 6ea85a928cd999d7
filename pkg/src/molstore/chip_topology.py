"""Parking-spot chip surface: binary valve tree, address lines, routes, densities.

The valve tree is a complete binary tree with the read/write station at the
root. Address line ``d`` drives every valve at depth ``d`` (depth 0 is nearest
the station), so a route is just the big-endian bit pattern of the spot address.
A relaxed valve passes flow to outlet 1 (the 0 branch); an energized valve
passes it to outlet 2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import AddressingError, InvalidLayoutError

UM_PER_CM = 1.0e4


class Command(enum.Enum):
    RELAXED = "relaxed"
    ENERGIZED = "energized"


class Outlet(enum.Enum):
    OUTLET1 = "outlet1"
    OUTLET2 = "outlet2"


class Direction(enum.Enum):
    TO_STATION = "to_station"
    TO_SPOT = "to_spot"


@dataclass(frozen=True)
class ValveState:
    valve_id: int  # address line / tree depth
    command: Command

    @property
    def position(self) -> Outlet:
        # spring return: only an energized valve sits at outlet 2
        return Outlet.OUTLET2 if self.command is Command.ENERGIZED else Outlet.OUTLET1


@dataclass(frozen=True)
class Route:
    spot_address: int
    valve_commands: tuple[ValveState, ...]
    direction: Direction = Direction.TO_STATION

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(int(v.command is Command.ENERGIZED) for v in self.valve_commands)


def is_power_of_two(n: int) -> bool:
    return isinstance(n, int) and n >= 1 and (n & (n - 1)) == 0


def address_line_count(spot_count: int) -> int:
    if not is_power_of_two(spot_count):
        raise InvalidLayoutError(f"spot_count must be a power of two >= 1, got {spot_count!r}")
    return spot_count.bit_length() - 1


@dataclass(frozen=True)
class StorageBudget:
    """Capacity side of a chip: how many blocks of what size on how much area.

    Unlike ChipLayout it does not need a valve tree, so any spot count is
    allowed; the density functions accept either.
    """

    spot_count: int
    block_bytes: float = 1.0e6
    chip_side_cm: float = 1.0
    layer_thickness_um: float = 10.0
    spot_pitch_um: float = 10.0

    def __post_init__(self):
        if self.spot_count < 0 or self.block_bytes < 0:
            raise InvalidLayoutError("spot_count and block_bytes must be >= 0")
        if self.chip_side_cm <= 0 or self.layer_thickness_um <= 0 or self.spot_pitch_um <= 0:
            raise InvalidLayoutError("chip side, layer thickness and pitch must be positive")

    @property
    def chip_area_cm2(self) -> float:
        return self.chip_side_cm**2

    @property
    def footprint_area_cm2(self) -> float:
        return self.spot_count * (self.spot_pitch_um / UM_PER_CM) ** 2


@dataclass(frozen=True)
class ChipLayout:
    spot_count: int = 16
    spot_pitch_um: float = 10.0
    chip_side_cm: float = 1.0
    layer_thickness_um: float = 10.0
    block_bytes: float = 1.0e6
    station_count: int = 1
    valve_switch_latency_s: float = 0.0

    def __post_init__(self):
        address_line_count(self.spot_count)
        if self.spot_pitch_um <= 0 or self.chip_side_cm <= 0:
            raise InvalidLayoutError("spot pitch and chip side must be positive")
        if self.layer_thickness_um <= 0:
            raise InvalidLayoutError("layer_thickness_um must be positive")
        if self.block_bytes < 0:
            raise InvalidLayoutError("block_bytes must be >= 0")
        if self.station_count < 1:
            raise InvalidLayoutError("station_count must be >= 1")
        footprint_um2 = self.spot_count * self.spot_pitch_um**2
        chip_um2 = (self.chip_side_cm * UM_PER_CM) ** 2
        if footprint_um2 > chip_um2 * (1 + 1e-12):
            raise InvalidLayoutError(
                f"{self.spot_count} spots at {self.spot_pitch_um} um pitch do not fit a "
                f"{self.chip_side_cm} cm chip"
            )

    @property
    def address_lines(self) -> int:
        return address_line_count(self.spot_count)

    @property
    def chip_area_cm2(self) -> float:
        return self.chip_side_cm**2

    @property
    def footprint_area_cm2(self) -> float:
        return self.spot_count * (self.spot_pitch_um / UM_PER_CM) ** 2

    @property
    def budget(self) -> StorageBudget:
        return StorageBudget(
            self.spot_count, self.block_bytes, self.chip_side_cm, self.layer_thickness_um, self.spot_pitch_um
        )

    @property
    def path_length_m(self) -> float:
        """Transport path between a spot and the station, taken as the chip side."""
        return self.chip_side_cm * 1.0e-2


def compute_route(layout: ChipLayout, spot_address: int, direction=Direction.TO_STATION) -> Route:
    if not 0 <= spot_address < layout.spot_count:
        raise AddressingError(
            f"spot address {spot_address} out of range for {layout.spot_count} spots"
        )
    lines = layout.address_lines
    cmds = tuple(
        ValveState(
            d,
            Command.ENERGIZED if (spot_address >> (lines - 1 - d)) & 1 else Command.RELAXED,
        )
        for d in range(lines)
    )
    return Route(spot_address, cmds, Direction(direction))


def station_for_spot(layout: ChipLayout, spot_address: int) -> int:
    """Stations own spots round-robin."""
    return spot_address % layout.station_count


class ValveBank:
    """Mutable state of every valve in the tree, driven through the address lines.

    Valves are stored heap-style: node 0 is the root, children of node k are
    2k+1 (outlet 1) and 2k+2 (outlet 2). Leaves past the last valve level are
    the parking spots.
    """

    def __init__(self, layout: ChipLayout):
        self.layout = layout
        self.depth = layout.address_lines
        self.valve_count = layout.spot_count - 1
        self.lines = [Command.RELAXED] * self.depth

    def energize(self, line: int) -> None:
        self.lines[line] = Command.ENERGIZED

    def release(self, line: int) -> None:
        self.lines[line] = Command.RELAXED

    def clear(self) -> None:
        for d in range(self.depth):
            self.release(d)

    def apply(self, route: Route) -> None:
        for v in route.valve_commands:
            if v.command is Command.ENERGIZED:
                self.energize(v.valve_id)
            else:
                self.release(v.valve_id)

    def level_of(self, node: int) -> int:
        return (node + 1).bit_length() - 1

    def position(self, node: int) -> Outlet:
        return ValveState(self.level_of(node), self.lines[self.level_of(node)]).position

    def trace(self) -> int:
        """Follow the open path from the station down to a parking spot."""
        node = 0
        while node < self.valve_count:
            node = 2 * node + (2 if self.position(node) is Outlet.OUTLET2 else 1)
        return node - self.valve_count


def areal_density(layout: ChipLayout | StorageBudget) -> float:
    """Stored bytes per cm^2 of chip surface."""
    return layout.spot_count * layout.block_bytes / layout.chip_area_cm2


def footprint_density(layout: ChipLayout | StorageBudget) -> float:
    """Stored bytes per cm^2 of the area actually covered by parking spots."""
    return layout.spot_count * layout.block_bytes / layout.footprint_area_cm2


def layers_per_cm(layout: ChipLayout | StorageBudget) -> float:
    return UM_PER_CM / layout.layer_thickness_um


def volumetric_density(layout: ChipLayout | StorageBudget) -> float:
    return areal_density(layout) * layers_per_cm(layout)


LAYOUT_KEYS = {
    "spot_count": "spot_count",
    "spot_pitch_um": "spot_pitch_um",
    "chip_side_cm": "chip_side_cm",
    "layer_thickness_um": "layer_thickness_um",
    "block_bytes": "block_bytes",
    "station_count": "station_count",
    "valve_switch_latency_s": "valve_switch_latency_s",
}


def layout_from_kv(values: dict[str, str]) -> ChipLayout:
    from .config import build_dataclass

    known = {k: v for k, v in values.items() if k in LAYOUT_KEYS}
    return build_dataclass(ChipLayout, known, LAYOUT_KEYS)


def layout_report(layout: ChipLayout) -> dict:
    return {
        "spot_count": layout.spot_count,
        "address_lines": layout.address_lines,
        "station_count": layout.station_count,
        "chip_area_cm2": layout.chip_area_cm2,
        "footprint_area_cm2": layout.footprint_area_cm2,
        "capacity_bytes": layout.spot_count * layout.block_bytes,
        "areal_density_bytes_per_cm2": areal_density(layout),
        "footprint_density_bytes_per_cm2": footprint_density(layout),
        "layers_per_cm": layers_per_cm(layout),
        "volumetric_density_bytes_per_cm3": volumetric_density(layout),
    }
