"""Measurement protocols run on the simulated cell.

Every driver builds its own circuits and solver systems, so independent
states, corners or Monte Carlo runs can be farmed out to worker processes
with ``jobs > 1``; results always come back in input order.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .. import netlist as nl
from ..camcell import CellKind, CellVariant, build_cell, clamp_dynamic, make_variant, set_dynamic
from ..devices import MemristorState, memristor_read, memristor_relax, memristor_write
from ..solver import MnaSystem, NoConvergence, SolveOptions, pwl, sweep_system, transient
from ..trace import Trace
from .measure import DEFAULT_WINDOW, WindowMetrics, window_metrics

log = logging.getLogger(__name__)

PCB_SAMPLES = 5898
INTEGRATED_SAMPLES = 1801

# energy protocol timing
SETTLE = 2.35e-9
ENABLE_PULSE = 450e-12
RETURN_DELAY = 200e-12
INPUT_EDGE = 50e-12
ENABLE_EDGE = 20e-12
TAIL = 300e-12
ENERGY_DT = 1e-12

# hit / miss voltages listed per variant for the corner table
TABLE_VOLTAGES = {
    CellKind.INTEGRATED_MINIMUM: (0.9, 1.3),
    CellKind.INTEGRATED_WIDE: (0.9, 1.5),
    CellKind.INTEGRATED_NATIVE: (0.6, 1.2),
}


class Park(enum.Enum):
    GROUND = "Ground"
    SUPPLY = "Supply"


class Classification(enum.Enum):
    HIT = "Hit"
    MISS_LOW = "MissLow"
    MISS_HIGH = "MissHigh"


def default_park(kind: CellKind) -> Park:
    return Park.SUPPLY if kind is CellKind.INTEGRATED_NATIVE else Park.GROUND


def default_samples(variant: CellVariant) -> int:
    return PCB_SAMPLES if variant.kind.is_pcb else INTEGRATED_SAMPLES


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- DC window ---------------------------------------------------------------

def cell_trace(variant: CellVariant, m1: float | None = None, m2: float | None = None,
               samples: int | None = None, options: SolveOptions | None = None) -> Trace:
    """0 -> supply input sweep of the cell's output current."""
    w1, w2 = variant.widest
    circuit, handles = build_cell(variant)
    circuit = set_dynamic(circuit, handles, "M1", w1 if m1 is None else m1)
    circuit = set_dynamic(circuit, handles, "M2", w2 if m2 is None else m2)
    samples = samples or default_samples(variant)
    system = MnaSystem(circuit, options)
    x = np.linspace(0.0, variant.supply, samples)
    y, _ = sweep_system(system, handles.input, x, probe=handles.output_probe)
    meta = {"variant": variant.kind.value, "m1": circuit.device("M1").resistance,
            "m2": circuit.device("M2").resistance, "supply": variant.supply}
    return Trace(x, y, meta)


def dc_window(variant: CellVariant, m1=None, m2=None, samples=None, options=None,
              window: int = DEFAULT_WINDOW) -> WindowMetrics:
    return window_metrics(cell_trace(variant, m1, m2, samples, options), window)


def max_window_width(variant: CellVariant, samples=None, options=None) -> float:
    return dc_window(variant, samples=samples, options=options).width


class StatePoint(NamedTuple):
    state: float
    metrics: WindowMetrics
    trace: Trace


def _threshold_point(args):
    variant, element, state, fixed_other, samples, options = args
    m1, m2 = (state, fixed_other) if element == "M1" else (fixed_other, state)
    try:
        tr = cell_trace(variant, m1, m2, samples, options)
    except NoConvergence as exc:
        raise NoConvergence(f"{element}={state:g} ohm: {exc}", exc.best_residual,
                            exc.sweep_index) from None
    return StatePoint(state, window_metrics(tr), tr)


def threshold_sweep(variant: CellVariant, element: str, states, fixed_other: float | None = None,
                    samples: int | None = None, options=None, jobs: int = 1) -> list:
    """Window metrics with one dynamic element stepped through ``states``.

    The other element defaults to its widest-window value. Returns a list of
    ``StatePoint(state, metrics, trace)``.
    """
    if element not in ("M1", "M2"):
        raise KeyError(element)
    states = list(states)
    if not states:
        raise ValueError("states must be non-empty")
    if fixed_other is None:
        fixed_other = variant.widest[1 if element == "M1" else 0]
    args = [(variant, element, s, fixed_other, samples, options) for s in states]
    return _map(_threshold_point, args, jobs)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float
    supplies: tuple = ()
    widths: tuple = ()

    @property
    def zero_width_supply(self) -> float:
        """Supply at which the fitted width reaches zero (minimum headroom)."""
        return -self.intercept / self.slope


def linear_fit(x, y) -> LinearFit:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 3:
        raise ValueError("need at least three points")
    if len(np.unique(x)) < 2 or np.linalg.matrix_rank(np.column_stack([x, np.ones_like(x)])) < 2:
        raise ValueError("degenerate regression: supplies must not all coincide")
    if len(np.unique(x)) != len(x):
        raise ValueError("degenerate regression: repeated supply values")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), float(r2), tuple(x), tuple(y))


def _supply_width(args):
    variant, supply, pitch, options = args
    v = variant.replace(supply=supply)
    samples = int(round(supply / pitch)) + 1
    return max_window_width(v, samples=samples, options=options)


def supply_linearity(variant: CellVariant, supplies, options=None, jobs: int = 1) -> LinearFit:
    """Least-squares line of widest-window width against supply voltage.

    The input pitch of the nominal sweep is kept at every supply.
    """
    supplies = [float(s) for s in supplies]
    if len(supplies) < 3:
        raise ValueError("need at least three supply points")
    if len(set(supplies)) != len(supplies):
        raise ValueError("degenerate regression: repeated supply values")
    pitch = variant.supply / (default_samples(variant) - 1)
    widths = _map(_supply_width, [(variant, s, pitch, options) for s in supplies], jobs)
    return linear_fit(supplies, widths)


# -- energy ------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    test_voltage: float
    energy: float
    classification: Classification
    breakdown: dict
    output_stage: float = 0.0  # supply energy drawn through the output stage alone

    def __post_init__(self):
        total = sum(self.breakdown.values())
        if abs(total - self.energy) > 1e-18:
            raise ValueError("energy must equal the sum of its breakdown")


def classify(v_test: float, window: WindowMetrics) -> Classification:
    if v_test < window.lower_threshold:
        return Classification.MISS_LOW
    if v_test > window.upper_threshold:
        return Classification.MISS_HIGH
    return Classification.HIT


def _protocol_waves(park_v, v_test, supply, pulse):
    t_on = INPUT_EDGE + SETTLE
    t_off = t_on + pulse
    t_back = t_off + RETURN_DELAY
    t_stop = t_back + INPUT_EDGE + TAIL
    vin = pwl([(0.0, park_v), (INPUT_EDGE, v_test), (t_back, v_test),
               (t_back + INPUT_EDGE, park_v)])
    if pulse > 0:
        en = pwl([(0.0, 0.0), (t_on, 0.0), (t_on + ENABLE_EDGE, supply),
                  (t_off, supply), (t_off + ENABLE_EDGE, 0.0)])
    else:
        en = pwl([(0.0, 0.0), (1.0, 0.0)])
    enb = lambda t: supply - en(t)  # noqa: E731
    return vin, en, enb, t_stop


def energy_test(variant: CellVariant, m1: float | None = None, m2: float | None = None,
                v_test: float = 0.9, park: Park | None = None, pulse: float = ENABLE_PULSE,
                dt: float = ENERGY_DT, options=None, window: WindowMetrics | None = None) -> EnergyReport:
    """Transient energy of one enabled test at ``v_test``.

    The input leaves its park rail, settles, the output is enabled for
    ``pulse`` seconds and the input returns to park after the return delay.
    Energy integrates v*i over the input, enable (EN plus its complement)
    and supply sources for the whole run.
    """
    if not 0.0 <= v_test <= variant.supply:
        raise ValueError("v_test must lie within [0, supply]")
    park = park or default_park(variant.kind)
    w1, w2 = variant.widest
    m1 = w1 if m1 is None else m1
    m2 = w2 if m2 is None else m2
    circuit, h = build_cell(variant, with_enable=True)
    circuit = set_dynamic(circuit, h, "M1", m1)
    circuit = set_dynamic(circuit, h, "M2", m2)
    park_v = 0.0 if park is Park.GROUND else variant.supply
    vin, en, enb, t_stop = _protocol_waves(park_v, v_test, variant.supply, pulse)
    t_stop = round(t_stop / dt) * dt
    res = transient(circuit, {h.input: vin, h.enable: en, h.enable_bar: enb}, t_stop, dt, options)

    def integral(label):
        p = res.source_voltages[label] * res.source_currents[label]
        return float(np.trapezoid(p, res.times))

    breakdown = {
        "input": integral(h.input),
        "enable": integral(h.enable) + integral(h.enable_bar),
        "supply": integral(h.supply),
    }
    stage = float(np.trapezoid(res.source_voltages[h.supply] * res.source_currents[h.stage_probe],
                               res.times))
    if window is None:
        window = dc_window(variant, m1, m2, options=options)
    return EnergyReport(v_test, sum(breakdown.values()), classify(v_test, window), breakdown, stage)


def miss_voltages(window: WindowMetrics, supply: float, park: Park) -> tuple:
    """(near-side, far-side) miss voltages relative to the park rail.

    Each sits midway between a window edge and the rail beyond it.
    """
    low = 0.5 * window.lower_threshold
    high = 0.5 * (window.upper_threshold + supply)
    return (low, high) if park is Park.GROUND else (high, low)


# -- corners -----------------------------------------------------------------

@dataclass(frozen=True)
class CornerSpec:
    """Process/temperature corner.

    Threshold magnitudes scale by ``1 - vth_shift`` and ``kp`` by
    ``1 + kp_shift``; positive shifts are fast, negative slow.
    """

    name: str
    temperature: float = 25.0
    vth_shift: float = 0.0
    kp_shift: float = 0.0

    def __post_init__(self):
        if abs(self.vth_shift) > 0.5 or abs(self.kp_shift) > 0.5:
            raise ValueError("corner shifts must lie within +/-0.5")

    def apply(self, variant: CellVariant) -> CellVariant:
        if self.vth_shift == 0 and self.kp_shift == 0:
            return variant.replace(temperature=self.temperature)
        shifted = variant.map_fets(lambda role, p: p.replace(
            vth0=p.vth0 * (1.0 - self.vth_shift), kp=p.kp * (1.0 + self.kp_shift)))
        return shifted.replace(temperature=self.temperature)


CORNER_SHIFT = 0.1
STANDARD_CORNERS = (
    CornerSpec("25C", 25.0),
    CornerSpec("37C", 37.0),
    CornerSpec("FF", 25.0, CORNER_SHIFT, CORNER_SHIFT),
    CornerSpec("SS", 25.0, -CORNER_SHIFT, -CORNER_SHIFT),
)


@dataclass(frozen=True)
class CornerReport:
    corner: str
    variant: str
    max_width: float
    hit_energy: float
    miss_energy: float
    hit_voltage: float
    miss_voltage: float


def corner_run(variant: CellVariant, corner: CornerSpec, hit_voltage: float | None = None,
               miss_voltage: float | None = None, options=None, energy: bool = True) -> CornerReport:
    v = corner.apply(variant)
    fixture = TABLE_VOLTAGES.get(variant.kind, (None, None))
    hit_voltage = fixture[0] if hit_voltage is None else hit_voltage
    miss_voltage = fixture[1] if miss_voltage is None else miss_voltage
    win = dc_window(v, options=options)
    hit = miss = math.nan
    if energy:
        if hit_voltage is None or miss_voltage is None:
            raise ValueError(f"no hit/miss voltages for {variant.kind.value}")
        hit = energy_test(v, v_test=hit_voltage, options=options, window=win).energy
        miss = energy_test(v, v_test=miss_voltage, options=options, window=win).energy
    return CornerReport(corner.name, variant.kind.value, win.width, hit, miss,
                        hit_voltage or math.nan, miss_voltage or math.nan)


def _corner_job(args):
    variant, corner, options, energy = args
    return corner_run(variant, corner, options=options, energy=energy)


def corner_table(variants, corners=STANDARD_CORNERS, options=None, energy=True, jobs=1) -> list:
    args = [(v, c, options, energy) for v in variants for c in corners]
    return _map(_corner_job, args, jobs)


# -- Monte Carlo -------------------------------------------------------------

A_VT = 3.5e-3 * 1e-6  # V*m  (3.5 mV*um)
A_KP = 0.01 * 1e-6  # fraction*m  (1 %*um)


@dataclass(frozen=True)
class MonteCarloReport:
    variant: str
    samples: tuple
    mu: float
    sigma: float
    run_count: int
    seed: int
    failed_runs: tuple = ()

    @property
    def cv(self) -> float:
        return self.sigma / self.mu


def perturb(variant: CellVariant, rng: np.random.Generator, a_vt: float, a_kp: float) -> CellVariant:
    """Independent Pelgrom-scaled vth0 and kp draws for every MOSFET role."""
    def one(role, p):
        root_area = math.sqrt(p.area)
        dv = rng.normal(0.0, a_vt / root_area) if a_vt else 0.0
        dk = rng.normal(0.0, a_kp / root_area) if a_kp else 0.0
        return p.replace(vth0=p.vth0 + p.sign * dv, kp=p.kp * (1.0 + dk))
    return variant.map_fets(one)


def _mc_run(args):
    variant, seed_seq, a_vt, a_kp, samples, options = args
    rng = np.random.default_rng(seed_seq)
    v = perturb(variant, rng, a_vt, a_kp)
    try:
        return max_window_width(v, samples=samples, options=options)
    except NoConvergence as exc:
        log.warning("Monte Carlo run did not converge: %s", exc)
        return None


def monte_carlo(variant: CellVariant, run_count: int = 250, seed: int = 0, a_vt: float = A_VT,
                a_kp: float = A_KP, samples: int | None = None, options=None,
                jobs: int = 1) -> MonteCarloReport:
    """Max window width under random device mismatch.

    Run ``k`` draws from child ``k`` of ``SeedSequence(seed)``, so results
    do not depend on ``jobs``. Non-converged runs are listed and excluded.
    """
    if run_count < 2:
        raise ValueError("run_count must be >= 2")
    children = np.random.SeedSequence(seed).spawn(run_count)
    args = [(variant, ch, a_vt, a_kp, samples, options) for ch in children]
    widths = _map(_mc_run, args, jobs)
    failed = tuple(i for i, w in enumerate(widths) if w is None)
    good = np.array([w for w in widths if w is not None])
    if len(good) < 2:
        raise NoConvergence("fewer than two Monte Carlo runs converged")
    return MonteCarloReport(variant.kind.value, tuple(float(w) for w in good),
                            float(good.mean()), float(good.std(ddof=1)),
                            len(good), seed, failed)


# -- memristor emulation ------------------------------------------------------

READ_VOLTAGE = 0.25
PULSE_MIN, PULSE_MAX = 100e-6, 500e-6


@dataclass(frozen=True)
class ProgrammingPlan:
    write_voltage: float = 1.0
    settle_time: float = 1e-3
    tolerance: float = 0.02
    max_pulses: int = 40


def program(state: MemristorState, target: float, rng, plan: ProgrammingPlan = ProgrammingPlan()):
    """Write-verify loop: pulse toward ``target``, relax, read at 250 mV.

    Pulse width is chosen within 100-500 us for the needed volt-seconds; the
    amplitude drops below ``write_voltage`` only when even the shortest pulse
    would overshoot. Returns ``(state, read_resistance, pulses)``.
    """
    target = min(max(target, state.r_min), state.r_max)
    current, state = memristor_read(state, READ_VOLTAGE, rng)
    read_r = READ_VOLTAGE / current
    pulses = 0
    while abs(math.log(read_r / target)) > math.log1p(plan.tolerance) and pulses < plan.max_pulses:
        decades = math.log10(target) - math.log10(state.resistance)
        volt_seconds = decades / state.write_rate
        duration = min(max(abs(volt_seconds) / plan.write_voltage, PULSE_MIN), PULSE_MAX)
        amplitude = math.copysign(min(plan.write_voltage, abs(volt_seconds) / duration), volt_seconds)
        state = memristor_write(state, amplitude, duration)
        state = memristor_relax(state, plan.settle_time)
        current, state = memristor_read(state, READ_VOLTAGE, rng)
        read_r = READ_VOLTAGE / current
        pulses += 1
    return state, read_r, pulses


class MemristorPoint(NamedTuple):
    target: float
    read_state: float
    metrics: WindowMetrics
    trace: Trace
    resistance: np.ndarray  # dynamic element resistance at each sweep sample


def memristor_emulation_sweep(variant: CellVariant | None = None, element: str = "M1",
                              target_states=(), seed: int = 0,
                              device: MemristorState | None = None,
                              fixed_other: float | None = None, samples: int = 1801,
                              plan: ProgrammingPlan = ProgrammingPlan(), options=None) -> list:
    """Program the memristor-backed element to each target and sweep the input.

    Each sweep sample counts as a read of the device, so telegraph switching
    acts sample by sample. Returns a list of ``MemristorPoint``.
    """
    variant = variant or make_variant(CellKind.PCB_MEMRISTOR)
    if element not in ("M1", "M2"):
        raise KeyError(element)
    rng = np.random.default_rng(seed)
    lo, hi = variant.dynamic_range
    state = device or MemristorState(resistance=hi, r_min=min(30e3, lo), r_max=hi)
    other = "M2" if element == "M1" else "M1"
    if fixed_other is None:
        fixed_other = variant.widest[0 if other == "M1" else 1]
    circuit, h = build_cell(variant, memristors={element: state})
    circuit = set_dynamic(circuit, h, other, fixed_other)
    system = MnaSystem(circuit, options)
    x = np.linspace(0.0, variant.supply, samples)
    out = []
    for target in target_states:
        target = clamp_dynamic(h, element, float(target))
        state, read_r, _ = program(state, target, rng, plan)
        trace_r = np.empty(samples)

        def on_point(k, sys_):
            nonlocal state
            if k:
                _, state = memristor_read(state, READ_VOLTAGE, rng)
            sys_.set_resistance(element, state.resistance)
            trace_r[k] = state.resistance

        y, _ = sweep_system(system, h.input, x, probe=h.output_probe, on_point=on_point)
        tr = Trace(x, y, {"variant": variant.kind.value, element: read_r,
                          other: fixed_other, "supply": variant.supply})
        out.append(MemristorPoint(target, read_r, window_metrics(tr), tr, trace_r))
    return out
