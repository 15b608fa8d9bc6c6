"""The 6T2R2M window-comparator cell.

Topology (``orientation="canonical"``)::

    branch 1:  VDD -- M1 -- P1 ==o1== N1 -- R1 -- GND
    branch 2:  VDD -- R2 -- P2 ==o2== N2 -- M2 -- GND
    output:    VDD -- IOS -- [PEN] -- P3(g=o1) -- N3(g=o2) -- [NEN] -- out -- IOUT -- RL -- GND

P1/N1 and P2/N2 are skewed inverters driven by the input; their switching
points are set by the ratio of the top to bottom degeneration resistance.
P3 conducts once the input passes the branch-1 threshold and N3 (a source
follower into RL) stops conducting past the branch-2 threshold, so output
current flows only inside the window. The optional PEN/NEN pair gates the
output stage from the complementary EN/ENB sources. IOUT and IOS are 0 V
probes on the load current and on the output stage's supply draw.

``orientation="mirrored"`` swaps each dynamic element with its balancing
resistor (M1 at the bottom of branch 1, M2 at the top of branch 2).
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import netlist as nl
from .devices import DISCRETE, GENERIC180, MemristorState, MosfetParams

log = logging.getLogger(__name__)


class InvalidVariant(ValueError):
    pass


class UnknownElement(KeyError):
    pass


class CellKind(enum.Enum):
    PCB_RESISTOR = "PcbResistor"
    PCB_MEMRISTOR = "PcbMemristor"
    INTEGRATED_MINIMUM = "IntegratedMinimum"
    INTEGRATED_WIDE = "IntegratedWide"
    INTEGRATED_NATIVE = "IntegratedNative"

    @property
    def is_pcb(self) -> bool:
        return self in (CellKind.PCB_RESISTOR, CellKind.PCB_MEMRISTOR)


INTEGRATED = (CellKind.INTEGRATED_MINIMUM, CellKind.INTEGRATED_WIDE, CellKind.INTEGRATED_NATIVE)

ROLES = ("in1_p", "in1_n", "in2_p", "in2_n", "out_p", "out_n", "en_p", "en_n")

# (NMOS W, NMOS L, PMOS W, PMOS L) of the input inverters
INPUT_GEOMETRY = {
    CellKind.INTEGRATED_MINIMUM: (220e-9, 180e-9, 220e-9, 180e-9),
    CellKind.INTEGRATED_WIDE: (1e-6, 180e-9, 1e-6, 180e-9),
    CellKind.INTEGRATED_NATIVE: (420e-9, 500e-9, 220e-9, 180e-9),
}
MIN_GEOMETRY = (220e-9, 180e-9)


@dataclass(frozen=True)
class CellVariant:
    kind: CellKind
    balancing_r: float
    dynamic_range: tuple
    output_load: float
    supply: float
    fet_params: dict
    orientation: str = "canonical"
    temperature: float = 25.0

    def validate(self) -> None:
        if self.kind.is_pcb:
            expect = (1e6, (100e3, 10e6), 1e6)
        else:
            expect = (10e3, (1e3, 100e3), 100e3)
        got = (self.balancing_r, tuple(self.dynamic_range), self.output_load)
        if not all(math.isclose(a, b) for a, b in
                   zip((got[0], *got[1], got[2]), (expect[0], *expect[1], expect[2]))):
            raise InvalidVariant(f"{self.kind.value}: resistances {got} != {expect}")
        missing = set(ROLES) - set(self.fet_params)
        if missing:
            raise InvalidVariant(f"missing fet roles {sorted(missing)}")
        if self.orientation not in ("canonical", "mirrored"):
            raise InvalidVariant(f"orientation {self.orientation!r}")
        if not self.supply > 0:
            raise InvalidVariant("supply must be positive")
        if self.kind in INPUT_GEOMETRY:
            nw, nlen, pw, plen = INPUT_GEOMETRY[self.kind]
            for role, (w, l) in (("in1_n", (nw, nlen)), ("in2_n", (nw, nlen)),
                                 ("in1_p", (pw, plen)), ("in2_p", (pw, plen))):
                p = self.fet_params[role]
                if not (math.isclose(p.width, w) and math.isclose(p.length, l)):
                    raise InvalidVariant(f"{role} geometry {p.width}x{p.length} != {w}x{l}")

    def replace(self, **changes) -> "CellVariant":
        return dataclasses.replace(self, **changes)

    def map_fets(self, fn) -> "CellVariant":
        return self.replace(fet_params={r: fn(r, p) for r, p in self.fet_params.items()})

    @property
    def widest(self) -> tuple:
        """(M1, M2) giving the widest window for this orientation."""
        lo, hi = self.dynamic_range
        return (hi, hi) if self.orientation == "canonical" else (lo, lo)


def make_variant(kind, orientation: str = "canonical", supply: float = 1.8,
                 temperature: float = 25.0) -> CellVariant:
    kind = CellKind(kind) if not isinstance(kind, CellKind) else kind
    if kind.is_pcb:
        fets = {r: DISCRETE["pmos" if r.endswith("_p") else "nmos"] for r in ROLES}
        return CellVariant(kind, 1e6, (100e3, 10e6), 1e6, supply, fets, orientation, temperature)
    nmos, pmos = GENERIC180["nmos"], GENERIC180["pmos"]
    fets = {r: (pmos if r.endswith("_p") else nmos) for r in ROLES}
    nw, nlen, pw, plen = INPUT_GEOMETRY[kind]
    n_in = (GENERIC180["native"] if kind is CellKind.INTEGRATED_NATIVE else nmos)
    n_in = n_in.replace(width=nw, length=nlen, cap_gate=None)
    p_in = pmos.replace(width=pw, length=plen, cap_gate=None)
    fets.update(in1_n=n_in, in2_n=n_in, in1_p=p_in, in2_p=p_in)
    return CellVariant(kind, 10e3, (1e3, 100e3), 100e3, supply, fets, orientation, temperature)


@dataclass(frozen=True)
class CellHandles:
    input: str = "VIN"
    supply: str = "VDD"
    enable: str | None = None
    enable_bar: str | None = None
    m1: str = "M1"
    m2: str = "M2"
    output_probe: str = "IOUT"
    stage_probe: str = "IOS"
    dynamic_range: tuple = (0.0, math.inf)


CORE_LABELS = ("P1", "N1", "P2", "N2", "P3", "N3", "R1", "R2", "M1", "M2", "RL")


def build_cell(variant: CellVariant, with_enable: bool = False, memristors: dict | None = None):
    """Build the cell circuit; returns ``(Circuit, CellHandles)``.

    ``memristors`` optionally maps ``"M1"``/``"M2"`` to a ``MemristorState``
    backing that dynamic element; otherwise both are plain resistors at the
    widest-window setting.
    """
    variant.validate()
    memristors = memristors or {}
    c = nl.Circuit(temperature=variant.temperature)
    vdd, vin = c.node("vdd"), c.node("in")
    s1p, o1, s1n = c.node("s1p"), c.node("o1"), c.node("s1n")
    s2p, o2, s2n = c.node("s2p"), c.node("o2"), c.node("s2n")
    fp = variant.fet_params
    gnd = nl.GROUND
    m1_r, m2_r = variant.widest
    devices = [
        nl.vsource("VDD", vdd, gnd, variant.supply),
        nl.vsource("VIN", vin, gnd, 0.0),
    ]

    def dynamic(label, a, b, r):
        if label in memristors:
            return nl.memristor(label, a, b, memristors[label])
        return nl.resistor(label, a, b, r)

    if variant.orientation == "canonical":
        top1, bot1 = dynamic("M1", vdd, s1p, m1_r), nl.resistor("R1", s1n, gnd, variant.balancing_r)
        top2, bot2 = nl.resistor("R2", vdd, s2p, variant.balancing_r), dynamic("M2", s2n, gnd, m2_r)
    else:
        top1, bot1 = nl.resistor("R1", vdd, s1p, variant.balancing_r), dynamic("M1", s1n, gnd, m1_r)
        top2, bot2 = dynamic("M2", vdd, s2p, m2_r), nl.resistor("R2", s2n, gnd, variant.balancing_r)
    devices += [
        top1,
        nl.mosfet("P1", o1, vin, s1p, vdd, fp["in1_p"]),
        nl.mosfet("N1", o1, vin, s1n, gnd, fp["in1_n"]),
        bot1,
        top2,
        nl.mosfet("P2", o2, vin, s2p, vdd, fp["in2_p"]),
        nl.mosfet("N2", o2, vin, s2n, gnd, fp["in2_n"]),
        bot2,
    ]
    top, mid = c.node("top"), c.node("mid")
    out, load = c.node("out"), c.node("load")
    if with_enable:
        en, enb = c.node("en"), c.node("enb")
        pe, ne = c.node("pe"), c.node("ne")
        devices += [
            nl.vsource("EN", en, gnd, 0.0),
            nl.vsource("ENB", enb, gnd, variant.supply),
            nl.probe("IOS", vdd, top),
            nl.mosfet("PEN", pe, enb, top, vdd, fp["en_p"]),
            nl.mosfet("P3", mid, o1, pe, vdd, fp["out_p"]),
            nl.mosfet("N3", mid, o2, ne, gnd, fp["out_n"]),
            nl.mosfet("NEN", ne, en, out, gnd, fp["en_n"]),
        ]
    else:
        devices += [
            nl.probe("IOS", vdd, top),
            nl.mosfet("P3", mid, o1, top, vdd, fp["out_p"]),
            nl.mosfet("N3", mid, o2, out, gnd, fp["out_n"]),
        ]
    devices += [
        nl.probe("IOUT", out, load),
        nl.resistor("RL", load, gnd, variant.output_load),
    ]
    for d in devices:
        c = nl.add_device(c, d)
    handles = CellHandles(enable="EN" if with_enable else None,
                          enable_bar="ENB" if with_enable else None,
                          dynamic_range=tuple(variant.dynamic_range))
    return c, handles


def component_count(circuit) -> dict:
    kinds = [d.kind for d in circuit.devices]
    return {
        "transistors": kinds.count(nl.DeviceKind.MOSFET),
        "resistors": kinds.count(nl.DeviceKind.RESISTOR),
        "memristors": kinds.count(nl.DeviceKind.MEMRISTOR),
    }


def clamp_dynamic(handles: CellHandles, element: str, resistance: float) -> float:
    lo, hi = handles.dynamic_range
    clamped = min(max(resistance, lo), hi)
    if clamped != resistance:
        log.warning("%s = %.4g ohm outside dynamic range [%.4g, %.4g]; clamped to %.4g",
                    element, resistance, lo, hi, clamped)
    return clamped


def set_dynamic(circuit, handles: CellHandles, element: str, resistance: float):
    label = {"M1": handles.m1, "M2": handles.m2}.get(element)
    if label is None:
        raise UnknownElement(element)
    r = clamp_dynamic(handles, element, resistance)
    dev = circuit.device(label)
    if dev.kind is nl.DeviceKind.MEMRISTOR:
        state = dev.params
        state = dataclasses.replace(state, resistance=min(max(r, state.r_min), state.r_max))
        new = nl.memristor(label, *dev.terminals, state)
    else:
        new = nl.resistor(label, *dev.terminals, r)
    return nl.replace_device(circuit, new)


def geometric_states(bounds, count: int) -> list:
    if count < 2:
        raise ValueError("need at least two states")
    lo, hi = bounds
    if not (0 < lo and 0 < hi):
        raise ValueError("bounds must be positive")
    return list(np.geomspace(lo, hi, count))
