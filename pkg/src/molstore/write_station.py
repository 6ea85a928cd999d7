"""Write-station state machines.

Two schemes are modelled:

* photochemical: an anchored strand grows one base per reservoir visit. Bases in
  the reservoirs carry a blocking group, so the strand end is blocked after each
  attachment until a laser pulse in the main chamber removes it.
* activator: a precursor strand of identical active sites separated by inert
  spacers is pulled under an activator, which excites the sites chosen by the
  data pattern. The spacers are then removed and the sites spliced in order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .codec import BASES, validate_sequence
from .errors import AdjacencyError, CapabilityError, IncompleteWriteError, ProtocolViolation


class Action(enum.Enum):
    DEBLOCK = "deblock"
    OPEN_GATE = "open_gate"
    ATTACH = "attach"
    CLOSE_GATE = "close_gate"
    PULL = "pull"
    ENERGIZE = "energize"


@dataclass(frozen=True)
class LogEntry:
    seq: int
    action: Action
    base: str | None = None
    site: int | None = None
    level: int | None = None
    duration_s: float = 0.0
    ok: bool = True

    def to_dict(self) -> dict:
        d = {"seq": self.seq, "action": self.action.value, "duration_s": self.duration_s}
        for k in ("base", "site", "level"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        if not self.ok:
            d["ok"] = False
        return d


class PhotochemicalStation:
    """Anchored strand, four gated base reservoirs and a deblocking laser.

    Every action either succeeds or raises ProtocolViolation without touching
    the station state.
    """

    def __init__(
        self,
        precursor: str = "",
        action_durations: dict[Action, float] | None = None,
        attach_failure_prob: float = 0.0,
        seed: int = 0,
    ):
        validate_sequence(precursor)
        if not 0.0 <= attach_failure_prob < 1.0:
            raise ValueError("attach_failure_prob must lie in [0, 1)")
        self.strand: list[str] = list(precursor)
        self.blocked = True
        self.gates = {b: False for b in BASES}
        self.log: list[LogEntry] = []
        self.action_durations = dict(action_durations or {})
        self.attach_failure_prob = attach_failure_prob
        self._rng = np.random.default_rng(seed)

    @property
    def sequence(self) -> str:
        return "".join(self.strand)

    @property
    def open_gate_base(self) -> str | None:
        opened = [b for b, g in self.gates.items() if g]
        return opened[0] if opened else None

    @property
    def elapsed_s(self) -> float:
        return sum(e.duration_s for e in self.log)

    def _record(self, action, base=None, ok=True):
        self.log.append(
            LogEntry(len(self.log), action, base, duration_s=self.action_durations.get(action, 0.0), ok=ok)
        )

    def deblock(self) -> None:
        if self.open_gate_base is not None:
            raise ProtocolViolation("laser deblocking needs the strand back in the main chamber")
        self.blocked = False
        self._record(Action.DEBLOCK)

    def open_gate(self, base: str) -> None:
        if base not in self.gates:
            raise ProtocolViolation(f"no reservoir for {base!r}")
        if self.open_gate_base is not None:
            raise ProtocolViolation(
                f"gate {self.open_gate_base} is already open; only one reservoir at a time"
            )
        self.gates[base] = True
        self._record(Action.OPEN_GATE, base)

    def attach(self) -> bool:
        """Let one base from the open reservoir bind to the strand end.

        Returns False when the (optional) stochastic attachment fails; the end
        then stays deblocked and the attempt can be repeated.
        """
        base = self.open_gate_base
        if base is None:
            raise ProtocolViolation("attach needs an open reservoir gate")
        if self.blocked:
            raise ProtocolViolation("strand end is blocked; deblock before attaching")
        if self.attach_failure_prob and self._rng.random() < self.attach_failure_prob:
            self._record(Action.ATTACH, base, ok=False)
            return False
        self.strand.append(base)
        self.blocked = True
        self._record(Action.ATTACH, base)
        return True

    def close_gate(self) -> None:
        base = self.open_gate_base
        if base is None:
            raise ProtocolViolation("no gate is open")
        self.gates[base] = False
        self._record(Action.CLOSE_GATE, base)

    def detach(self) -> str:
        if self.open_gate_base is not None:
            raise ProtocolViolation("close the reservoir gate before detaching the strand")
        return self.sequence


def write_sequence(station: PhotochemicalStation, target: str, max_attempts: int = 1000) -> list[LogEntry]:
    """Grow ``target`` onto the station's strand; returns the log entries of this write."""
    validate_sequence(target)
    first = len(station.log)
    for b in target:
        station.deblock()
        station.open_gate(b)
        for _ in range(max_attempts):
            if station.attach():
                break
        else:
            raise ProtocolViolation(f"base {b} failed to attach after {max_attempts} attempts")
        station.close_gate()
    return station.log[first:]


# --- activator / spacer scheme -------------------------------------------------


class ActivatorKind(enum.Enum):
    FAR_FIELD_OPTICAL = "far_field_optical"
    NEAR_FIELD_OPTICAL = "near_field_optical"
    ELECTRIC_TIP = "electric_tip"


@dataclass(frozen=True)
class ActivatorModel:
    kind: ActivatorKind = ActivatorKind.FAR_FIELD_OPTICAL
    wavelength_nm: float | None = 200.0
    spot_size_nm: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ActivatorKind(self.kind))
        if self.spot_size_nm is None:
            if self.kind is not ActivatorKind.FAR_FIELD_OPTICAL or not self.wavelength_nm:
                raise ValueError(f"{self.kind.value} activator needs spot_size_nm")
            # far-field focus is limited to about half a wavelength
            object.__setattr__(self, "spot_size_nm", self.wavelength_nm / 2.0)
        if self.spot_size_nm <= 0:
            raise ValueError("spot_size_nm must be positive")


def min_spacer_length(activator: ActivatorModel, active_molecule_size_nm: float = 1.0) -> float:
    """Shortest site-to-site spacing (nm) at which the activator exposes one site only."""
    return max(activator.spot_size_nm, active_molecule_size_nm)


@dataclass(frozen=True)
class PrecursorStrand:
    sites: tuple[int, ...]  # 0 is the ground state
    spacer_length_nm: float = 100.0
    active_molecule_size_nm: float = 1.0
    n_states: int = 2
    erasable: bool = False
    written: bool = False
    log: tuple[LogEntry, ...] = field(default=(), repr=False, compare=False)

    @classmethod
    def blank(cls, n_sites: int, **kwargs) -> "PrecursorStrand":
        return cls((0,) * n_sites, **kwargs)

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError("an active molecule needs at least two states")
        if any(not 0 <= s < self.n_states for s in self.sites):
            raise ValueError("site state out of range")

    @property
    def excited_count(self) -> int:
        return sum(1 for s in self.sites if s)


def _pattern_levels(pattern) -> list[int]:
    if isinstance(pattern, str):
        return [int(c) for c in pattern]
    return [int(v) for v in pattern]


def activate_pattern(strand: PrecursorStrand, pattern: str | Sequence[int], activator: ActivatorModel) -> PrecursorStrand:
    """Pull the strand site by site under the activator, energizing per the pattern.

    ``pattern[i]`` is the target state of site i (0 keeps it in the ground state;
    levels above 1 need a multi-state molecule).
    """
    levels = _pattern_levels(pattern)
    if len(levels) != len(strand.sites):
        raise ValueError(f"pattern has {len(levels)} symbols for {len(strand.sites)} sites")
    need = min_spacer_length(activator, strand.active_molecule_size_nm)
    if strand.spacer_length_nm < need:
        raise AdjacencyError(
            f"spacer {strand.spacer_length_nm} nm < {need} nm activator footprint; "
            "neighbouring sites would be exposed together"
        )
    if any(not 0 <= v < strand.n_states for v in levels):
        raise ValueError(f"pattern symbols must lie in [0, {strand.n_states})")
    for i, (old, new) in enumerate(zip(strand.sites, levels)):
        if old and old != new:
            raise CapabilityError(f"site {i} is already excited; write-once sites cannot change")

    log = list(strand.log)
    for i, v in enumerate(levels):
        log.append(LogEntry(len(log), Action.PULL, site=i))
        if v:
            log.append(LogEntry(len(log), Action.ENERGIZE, site=i, level=v))
    return replace(strand, sites=tuple(levels), written=True, log=tuple(log))


def splice(strand: PrecursorStrand) -> list[int]:
    """Site states in strand order with the spacers cut out."""
    if not strand.written and strand.sites:
        raise IncompleteWriteError("strand has not been through a complete write pass")
    return list(strand.sites)


class EraseMode(enum.Enum):
    DESTROY_AND_REWRITE = "destroy_and_rewrite"
    REVERSE_EXCITATION = "reverse_excitation"


@dataclass(frozen=True)
class DisposalRecord:
    spot_address: int | None
    site_count: int
    excited_count: int


def erase_block(mode: EraseMode | str, strand: PrecursorStrand, spot_address: int | None = None):
    mode = EraseMode(mode)
    if mode is EraseMode.DESTROY_AND_REWRITE:
        return DisposalRecord(spot_address, len(strand.sites), strand.excited_count)
    if not strand.erasable:
        raise CapabilityError("strand is write-once; only destroy_and_rewrite can erase it")
    return replace(strand, sites=(0,) * len(strand.sites), written=False, log=())
