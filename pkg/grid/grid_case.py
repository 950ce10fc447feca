"""
Grid case domain model.
Immutable buses, branches and generators with structural validation.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, List, Tuple, Union

import numpy as np

from errors import DanglingReference, MalformedCase, NoSlackBus


class BusKind(str, Enum):
    """Bus role in the power flow."""

    SLACK = "slack"
    PV = "PV"
    PQ = "PQ"


# MATPOWER BUS_TYPE codes
MATPOWER_BUS_KINDS: Dict[int, BusKind] = {1: BusKind.PQ, 2: BusKind.PV, 3: BusKind.SLACK}


@dataclass(frozen=True)
class Bus:
    """
    A network bus.

    Attributes:
        id: Bus number as written in the case file
        kind: Slack, PV or PQ
        p_demand: Active demand (MW)
        q_demand: Reactive demand (MVAr)
        v_mag: Initial voltage magnitude (per unit)
        v_ang: Initial voltage angle (radians)
        g_shunt: Shunt conductance (MW at 1.0 pu)
        b_shunt: Shunt susceptance (MVAr at 1.0 pu)
    """

    id: int
    kind: BusKind
    p_demand: float
    q_demand: float
    v_mag: float = 1.0
    v_ang: float = 0.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0


@dataclass(frozen=True)
class Branch:
    """
    A transmission line or transformer.

    Attributes:
        index: 1-based line number over in-service branches, in file order
        from_bus: Sending-end bus id
        to_bus: Receiving-end bus id
        r: Series resistance (per unit)
        x: Series reactance (per unit)
        b_charging: Total line charging susceptance (per unit)
        rate_a: Long-term rating (MW, 0 = unspecified)
        status: 1 when in service
        tap: Off-nominal turns ratio (0 means 1.0)
        shift: Phase shift angle (degrees)
    """

    index: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float
    rate_a: float
    status: int = 1
    tap: float = 0.0
    shift: float = 0.0


@dataclass(frozen=True)
class Generator:
    """
    A generating unit.

    Attributes:
        bus: Bus id the unit is connected to
        p_out: Scheduled active output (MW)
        q_out: Initial reactive output (MVAr)
        q_min: Reactive lower limit (MVAr)
        q_max: Reactive upper limit (MVAr)
        v_setpoint: Voltage magnitude setpoint (per unit)
        status: 1 when in service
    """

    bus: int
    p_out: float
    q_out: float
    q_min: float
    q_max: float
    v_setpoint: float
    status: int = 1


@dataclass(frozen=True)
class GridCase:
    """
    Parsed and validated power network.

    Construction validates every structural invariant, so any GridCase
    instance is safe to hand to the solvers.

    Attributes:
        base_mva: System power base (MVA)
        buses: Buses in file order
        branches: In-service branches; branch k has index k + 1
        gens: In-service generators
        name: Case label used in artifact manifests
    """

    base_mva: float
    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...]
    gens: Tuple[Generator, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        self._validate()

    def _validate(self) -> None:
        """
        Check the structural invariants of the case.

        Raises:
            MalformedCase: Duplicate buses, empty branch set, zero reactance,
                self loops, bad voltages or generator limits, several slack buses
            DanglingReference: A branch or generator references an unknown bus
            NoSlackBus: No bus is marked as the reference
        """
        if not self.base_mva > 0:
            raise MalformedCase(f"baseMVA must be positive, got {self.base_mva}")
        ids = [bus.id for bus in self.buses]
        if len(set(ids)) != len(ids):
            raise MalformedCase("Bus identifiers are not unique")
        known = set(ids)

        for bus in self.buses:
            if not (np.isfinite(bus.p_demand) and np.isfinite(bus.q_demand)):
                raise MalformedCase(f"Bus {bus.id} has a non-finite demand")
            if not bus.v_mag > 0:
                raise MalformedCase(f"Bus {bus.id} has non-positive voltage magnitude")

        if not self.branches:
            raise MalformedCase("Case has no in-service branches")
        for expected, branch in enumerate(self.branches, start=1):
            if branch.index != expected:
                raise MalformedCase(
                    f"Branch indices must run 1..N in order, found {branch.index} at {expected}"
                )
            if branch.from_bus not in known or branch.to_bus not in known:
                raise DanglingReference(
                    f"Branch {branch.index} references unknown bus "
                    f"({branch.from_bus} -> {branch.to_bus})"
                )
            if branch.from_bus == branch.to_bus:
                raise MalformedCase(f"Branch {branch.index} is a self loop")
            if branch.x == 0:
                raise MalformedCase(f"Branch {branch.index} has zero reactance")
            if branch.status != 1:
                raise MalformedCase(f"Branch {branch.index} is out of service")

        for gen in self.gens:
            if gen.bus not in known:
                raise DanglingReference(f"Generator references unknown bus {gen.bus}")
            if gen.q_min > gen.q_max:
                raise MalformedCase(f"Generator at bus {gen.bus} has q_min > q_max")

        slack = [bus.id for bus in self.buses if bus.kind == BusKind.SLACK]
        if not slack:
            raise NoSlackBus("Case has no slack (reference) bus")
        if len(slack) > 1:
            raise MalformedCase(f"Case has {len(slack)} slack buses, expected exactly one")

    @property
    def n_lines(self) -> int:
        """Number of in-service branches (N_total)."""
        return len(self.branches)

    @cached_property
    def bus_position(self) -> Dict[int, int]:
        """Map from bus id to its 0-based position in `buses`."""
        return {bus.id: pos for pos, bus in enumerate(self.buses)}

    @cached_property
    def slack_position(self) -> int:
        """0-based position of the slack bus."""
        return next(pos for pos, bus in enumerate(self.buses) if bus.kind == BusKind.SLACK)

    @cached_property
    def load_bus_ids(self) -> Tuple[int, ...]:
        """Ids of buses carrying nonzero demand, in bus order."""
        return tuple(bus.id for bus in self.buses if bus.p_demand != 0 or bus.q_demand != 0)

    @property
    def total_load(self) -> float:
        """Total active demand (MW)."""
        return float(sum(bus.p_demand for bus in self.buses))

    def branch(self, line: int) -> Branch:
        """
        Look up a branch by its 1-based line number.

        Args:
            line: Line number

        Returns:
            The branch

        Raises:
            ValueError: If the line number is out of range
        """
        if not 1 <= line <= self.n_lines:
            raise ValueError(f"Line {line} is out of range 1..{self.n_lines}")
        return self.branches[line - 1]

    def scale_loads(self, scale: Union[float, np.ndarray, List[float]]) -> "GridCase":
        """
        Return a copy with scaled demand at constant power factor.

        Args:
            scale: One system-wide factor, or one factor per load bus
                (ordered as `load_bus_ids`)

        Returns:
            New GridCase with P and Q demand multiplied by the factors

        Raises:
            ValueError: If a per-load vector has the wrong length
        """
        factors = np.atleast_1d(np.asarray(scale, dtype=float))
        if factors.size == 1:
            per_bus = {bus_id: float(factors[0]) for bus_id in self.load_bus_ids}
        elif factors.size == len(self.load_bus_ids):
            per_bus = dict(zip(self.load_bus_ids, (float(f) for f in factors)))
        else:
            raise ValueError(
                f"Expected 1 or {len(self.load_bus_ids)} load factors, got {factors.size}"
            )

        buses = tuple(
            replace(bus, p_demand=bus.p_demand * per_bus[bus.id], q_demand=bus.q_demand * per_bus[bus.id])
            if bus.id in per_bus else bus
            for bus in self.buses
        )
        return replace(self, buses=buses)
