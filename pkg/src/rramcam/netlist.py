"""Circuit graph: named nodes, device instances and source stimuli.

Ground is node 0 and is never a device. Circuits are edited through
functions that return new ``Circuit`` objects, so a built circuit can be
shared freely between solver contexts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .devices import MemristorState, MosfetParams


class NetlistError(ValueError):
    pass


class DuplicateLabel(NetlistError):
    pass


class DanglingNode(NetlistError):
    pass


class NonPositiveResistance(NetlistError):
    pass


class UnknownSource(NetlistError, KeyError):
    pass


class UnknownDevice(NetlistError, KeyError):
    pass


class DeviceKind(enum.Enum):
    RESISTOR = "Resistor"
    MOSFET = "Mosfet"
    MEMRISTOR = "Memristor"
    VOLTAGE_SOURCE = "VoltageSource"
    CURRENT_PROBE = "CurrentProbe"


ARITY = {
    DeviceKind.RESISTOR: 2,
    DeviceKind.MEMRISTOR: 2,
    DeviceKind.VOLTAGE_SOURCE: 2,
    DeviceKind.CURRENT_PROBE: 2,
    DeviceKind.MOSFET: 4,
}

GROUND = 0


@dataclass(frozen=True)
class DeviceInstance:
    """A device bound to nodes.

    ``params`` is a resistance (ohms) for resistors, a ``MemristorState`` for
    memristors, a voltage for sources, ``MosfetParams`` for MOSFETs and is
    ignored for probes. MOSFET terminals are (drain, gate, source, body).
    """

    kind: DeviceKind
    terminals: tuple
    params: object
    label: str

    @property
    def resistance(self) -> float:
        if self.kind is DeviceKind.RESISTOR:
            return float(self.params)
        if self.kind is DeviceKind.MEMRISTOR:
            return self.params.resistance
        raise TypeError(f"{self.label} is not resistive")


def resistor(label, a, b, ohms) -> DeviceInstance:
    return DeviceInstance(DeviceKind.RESISTOR, (a, b), float(ohms), label)


def memristor(label, a, b, state: MemristorState) -> DeviceInstance:
    return DeviceInstance(DeviceKind.MEMRISTOR, (a, b), state, label)


def vsource(label, plus, minus, volts) -> DeviceInstance:
    return DeviceInstance(DeviceKind.VOLTAGE_SOURCE, (plus, minus), float(volts), label)


def probe(label, plus, minus) -> DeviceInstance:
    return DeviceInstance(DeviceKind.CURRENT_PROBE, (plus, minus), None, label)


def mosfet(label, drain, gate, source, body, params: MosfetParams) -> DeviceInstance:
    return DeviceInstance(DeviceKind.MOSFET, (drain, gate, source, body), params, label)


@dataclass
class Circuit:
    node_names: list = field(default_factory=lambda: ["0"])
    devices: list = field(default_factory=list)
    temperature: float = 25.0

    @property
    def node_count(self) -> int:
        return len(self.node_names)

    def node(self, name: str) -> int:
        """Index of node ``name``, creating it if new."""
        if name in ("0", "gnd", "GND"):
            return GROUND
        try:
            return self.node_names.index(name)
        except ValueError:
            self.node_names.append(name)
            return len(self.node_names) - 1

    @property
    def sources(self) -> dict:
        return {d.label: d for d in self.devices if d.kind is DeviceKind.VOLTAGE_SOURCE}

    def device(self, label: str) -> DeviceInstance:
        for d in self.devices:
            if d.label == label:
                return d
        raise UnknownDevice(label)

    def labels(self) -> list:
        return [d.label for d in self.devices]

    def copy(self) -> "Circuit":
        return Circuit(list(self.node_names), list(self.devices), self.temperature)


def _check_instance(circuit: Circuit, inst: DeviceInstance) -> None:
    if len(inst.terminals) != ARITY[inst.kind]:
        raise NetlistError(
            f"{inst.kind.value} {inst.label!r} needs {ARITY[inst.kind]} terminals, "
            f"got {len(inst.terminals)}")
    for t in inst.terminals:
        if not (isinstance(t, int) and 0 <= t < circuit.node_count):
            raise DanglingNode(f"{inst.label!r}: terminal {t!r} is not an existing node")
    if inst.kind in (DeviceKind.RESISTOR, DeviceKind.MEMRISTOR):
        r = inst.resistance
        if not (math.isfinite(r) and r > 0):
            raise NonPositiveResistance(f"{inst.label!r}: resistance {r!r}")


def add_device(circuit: Circuit, instance: DeviceInstance) -> Circuit:
    if instance.label in circuit.labels():
        raise DuplicateLabel(instance.label)
    _check_instance(circuit, instance)
    out = circuit.copy()
    out.devices.append(instance)
    return out


def remove_device(circuit: Circuit, label: str) -> Circuit:
    out = circuit.copy()
    out.devices = [d for d in circuit.devices if d.label != label]
    if len(out.devices) == len(circuit.devices):
        raise UnknownDevice(label)
    return out


def replace_device(circuit: Circuit, instance: DeviceInstance) -> Circuit:
    """Swap the device carrying ``instance.label`` for ``instance``."""
    out = circuit.copy()
    for i, d in enumerate(out.devices):
        if d.label == instance.label:
            _check_instance(circuit, instance)
            out.devices[i] = instance
            return out
    raise UnknownDevice(instance.label)


def set_source(circuit: Circuit, label: str, value: float) -> Circuit:
    src = circuit.sources.get(label)
    if src is None:
        raise UnknownSource(label)
    return replace_device(circuit, DeviceInstance(src.kind, src.terminals, float(value), label))


def source_value(circuit: Circuit, label: str) -> float:
    src = circuit.sources.get(label)
    if src is None:
        raise UnknownSource(label)
    return src.params


def node_degrees(circuit: Circuit) -> list:
    deg = [0] * circuit.node_count
    for d in circuit.devices:
        for t in d.terminals:
            deg[t] += 1
    return deg


def floating_nodes(circuit: Circuit) -> list:
    """Nodes with no DC path to ground.

    Resistive elements, sources, probes and MOSFET channels (drain-source)
    conduct; gate and body terminals do not. Nodes that carry no device at
    all are reported as well.
    """
    parent = list(range(circuit.node_count))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(a, b):
        parent[find(a)] = find(b)

    for d in circuit.devices:
        if d.kind is DeviceKind.MOSFET:
            union(d.terminals[0], d.terminals[2])
        else:
            union(*d.terminals)
    deg = node_degrees(circuit)
    root = find(GROUND)
    return [circuit.node_names[i] for i in range(1, circuit.node_count)
            if find(i) != root or deg[i] == 0]
