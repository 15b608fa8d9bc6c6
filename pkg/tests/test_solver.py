import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rramcam import netlist as nl
from rramcam.camcell import build_cell, make_variant
from rramcam.devices import GENERIC180, MosfetParams, mosfet_eval
from rramcam.solver import (
    FloatingNodes, MnaSystem, NoConvergence, SingularMatrix, SolveOptions, dc_solve, dc_sweep,
    pwl, sweep_system, transient,
)


def build(devices, names):
    c = nl.Circuit()
    idx = {n: c.node(n) for n in names}
    for make in devices:
        c = nl.add_device(c, make(idx))
    return c


def two_resistor_divider(top_r, bot_r, supply=1.8):
    return build([lambda n: nl.vsource("VDD", n["top"], 0, supply),
                  lambda n: nl.resistor("RT", n["top"], n["mid"], top_r),
                  lambda n: nl.resistor("RB", n["mid"], 0, bot_r)], ["top", "mid"])


def test_symmetric_divider():
    sol = dc_solve(two_resistor_divider(1e6, 1e6))
    assert abs(sol.voltage("mid") - 0.9) < 1e-6
    # delivered current is the negative of the branch unknown
    assert sol.branch_currents["VDD"] == pytest.approx(-0.9e-6, rel=1e-9)


def test_dynamic_range_divider():
    sol = dc_solve(two_resistor_divider(10e6, 100e3))
    assert sol.voltage("mid") == pytest.approx(1.8 * 0.1 / 10.1, rel=1e-9)
    assert sol.voltage("mid") == pytest.approx(17.82e-3, abs=5e-6)


def inverter(v_in=0.0):
    return build([
        lambda n: nl.vsource("VDD", n["vdd"], 0, 1.8),
        lambda n: nl.vsource("VIN", n["in"], 0, v_in),
        lambda n: nl.mosfet("MP", n["out"], n["in"], n["vdd"], n["vdd"], GENERIC180["pmos"]),
        lambda n: nl.mosfet("MN", n["out"], n["in"], 0, 0, GENERIC180["nmos"]),
    ], ["vdd", "in", "out"])


def test_inverter_low_input():
    sol = dc_solve(inverter(0.0))
    assert abs(sol.voltage("out") - 1.8) < 1e-3
    assert dc_solve(inverter(1.8)).voltage("out") < 1e-3


def independent_residual(circuit, sol, gmin):
    """KCL mismatch from a separate scalar stamping pass."""
    v = sol.node_voltages
    kcl = np.zeros(circuit.node_count)
    touched = set()
    for d in circuit.devices:
        t = d.terminals
        if d.kind in (nl.DeviceKind.RESISTOR, nl.DeviceKind.MEMRISTOR):
            i = (v[t[0]] - v[t[1]]) / d.resistance
            kcl[t[0]] += i
            kcl[t[1]] -= i
        elif d.kind in (nl.DeviceKind.VOLTAGE_SOURCE, nl.DeviceKind.CURRENT_PROBE):
            i = sol.branch_currents[d.label]
            kcl[t[0]] += i
            kcl[t[1]] -= i
        else:
            ev = mosfet_eval(d.params, v[t[1]] - v[t[2]], v[t[0]] - v[t[2]], circuit.temperature)
            for node, cur in zip(t, ev.currents):
                kcl[node] += cur
            touched.update(t[:3])
    for node in touched:
        kcl[node] += gmin * v[node]
    return np.max(np.abs(kcl[1:]))


@pytest.mark.parametrize("kind", ["PcbResistor", "IntegratedMinimum", "IntegratedNative"])
@pytest.mark.parametrize("v_in", [0.0, 0.5, 0.9, 1.3, 1.8])
def test_recomputed_kcl(kind, v_in):
    circuit, h = build_cell(make_variant(kind), with_enable=True)
    circuit = nl.set_source(circuit, "VIN", v_in)
    circuit = nl.set_source(circuit, "EN", 1.8)
    circuit = nl.set_source(circuit, "ENB", 0.0)
    opts = SolveOptions()
    sol = dc_solve(circuit, opts)
    assert independent_residual(circuit, sol, opts.gmin_floor) < opts.abs_tol_current


def random_network(rng, n_nodes):
    """Connected random resistor network with 1-3 grounded voltage sources."""
    names = [f"n{i}" for i in range(1, n_nodes + 1)]
    c = nl.Circuit()
    ids = [c.node(n) for n in names]
    edges = set()
    for k in range(1, n_nodes + 1):  # spanning tree over ground + nodes
        edges.add((int(rng.integers(0, k)), k))
    for _ in range(int(rng.integers(0, 2 * n_nodes))):
        a, b = sorted(rng.choice(n_nodes + 1, 2, replace=False).tolist())
        edges.add((a, b))
    for j, (a, b) in enumerate(sorted(edges)):
        r = 10 ** rng.uniform(2, 7)
        c = nl.add_device(c, nl.resistor(f"R{j}", a, b, r))
    driven = rng.choice(ids, int(rng.integers(1, min(3, n_nodes) + 1)), replace=False)
    fixed = {}
    for j, node in enumerate(driven):
        val = float(rng.uniform(-2, 2))
        c = nl.add_device(c, nl.vsource(f"V{j}", int(node), 0, val))
        fixed[int(node)] = val
    return c, fixed


def nodal_oracle(circuit, fixed):
    """Reduced nodal analysis: eliminate source-driven nodes, dense solve the rest."""
    n = circuit.node_count
    g = np.zeros((n, n))
    for d in circuit.devices:
        if d.kind is nl.DeviceKind.RESISTOR:
            a, b = d.terminals
            y = 1.0 / d.resistance
            g[a, a] += y
            g[b, b] += y
            g[a, b] -= y
            g[b, a] -= y
    known = [0] + sorted(fixed)
    free = [i for i in range(n) if i not in known]
    vk = np.array([0.0] + [fixed[i] for i in sorted(fixed)])
    v = np.zeros(n)
    v[known] = vk
    if free:
        v[free] = np.linalg.solve(g[np.ix_(free, free)], -g[np.ix_(free, known)] @ vk)
    return v


@pytest.mark.parametrize("seed", range(50))
def test_linear_networks_match_dense_solve(seed):
    rng = np.random.default_rng(seed)
    circuit, fixed = random_network(rng, int(rng.integers(2, 13)))
    got = dc_solve(circuit).node_voltages
    want = nodal_oracle(circuit, fixed)
    scale = np.max(np.abs(want))
    assert np.max(np.abs(got - want)) <= 1e-9 * scale


def test_resistor_sweep_is_linear():
    c = build([lambda n: nl.vsource("VIN", n["a"], 0, 0.0),
               lambda n: nl.probe("I", n["a"], n["b"]),
               lambda n: nl.resistor("R", n["b"], 0, 470e3)], ["a", "b"])
    tr = dc_sweep(c, "VIN", 0.0, 1.8, 101)
    line = tr.x / 470e3
    assert np.max(np.abs(tr.y - line)) < 1e-9 * np.max(np.abs(line))


def test_reversed_sweep_matches_forward(minimum):
    circuit, h = build_cell(minimum)
    fwd = dc_sweep(circuit, "VIN", 0.0, 1.8, 361, probe="IOUT")
    rev = dc_sweep(circuit, "VIN", 1.8, 0.0, 361, probe="IOUT")
    np.testing.assert_array_equal(fwd.x, rev.x)
    assert np.max(np.abs(fwd.y - rev.y)) < 1e-12


def test_warm_start_equals_cold(minimum):
    circuit, h = build_cell(minimum)
    opts = SolveOptions()
    x = np.linspace(0.0, 1.8, 91)
    _, warm = sweep_system(MnaSystem(circuit, opts), "VIN", x, probe="IOUT", warm_start=True)
    _, cold = sweep_system(MnaSystem(circuit, opts), "VIN", x, probe="IOUT", warm_start=False)
    nv = len(circuit.node_names) - 1
    tol = 10 * (opts.rel_tol_voltage * np.abs(cold[:, :nv]) + 1e-9)
    assert np.all(np.abs(warm[:, :nv] - cold[:, :nv]) <= tol)


def test_floating_node_detected_before_solve():
    c = two_resistor_divider(1e3, 1e3)
    g = c.node("g")
    c = nl.add_device(c, nl.mosfet("M", 2, g, 0, 0, GENERIC180["nmos"]))
    with pytest.raises(FloatingNodes, match="g"):
        dc_solve(c)


def test_conflicting_sources_singular():
    c = build([lambda n: nl.vsource("V1", n["a"], 0, 1.0),
               lambda n: nl.vsource("V2", n["a"], 0, 2.0)], ["a"])
    with pytest.raises(SingularMatrix):
        dc_solve(c)


def test_no_convergence_reports_diagnostics():
    circuit, _ = build_cell(make_variant("PcbResistor"))
    circuit = nl.set_source(circuit, "VIN", 0.9)
    opts = SolveOptions(max_iters=1, source_steps=1)
    with pytest.raises(NoConvergence) as err:
        dc_solve(circuit, opts)
    assert math.isfinite(err.value.best_residual)


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(abs_tol_current=0.0)
    with pytest.raises(ValueError):
        SolveOptions(gmin_start=1e-12, gmin_floor=1e-9)


def rc_circuit(c_total=10e-15, r=10e3):
    # the only storage element the solver knows is gate capacitance; a MOSFET
    # with drain, source and body grounded becomes a grounded capacitor
    cap = MosfetParams("N", 1e-6, 1e-6, vth0=0.5, kp=1e-4, cap_gate=c_total)
    return build([lambda n: nl.vsource("VS", n["s"], 0, 0.0),
                  lambda n: nl.resistor("R", n["s"], n["g"], r),
                  lambda n: nl.mosfet("C", 0, n["g"], 0, 0, cap)], ["s", "g"])


def test_rc_step_response():
    dt = 0.1e-12
    res = transient(rc_circuit(), {"VS": pwl([(0.0, 0.0), (dt, 1.0)])}, 200e-12, dt)
    k = int(round(100e-12 / dt))
    assert res.voltage("g")[k] == pytest.approx(1 - math.exp(-1), rel=0.01)


def ramp_response(t, tau, rise):
    f = lambda u: np.where(u > 0, (u - tau + tau * np.exp(-u / tau)) / rise, 0.0)  # noqa: E731
    return f(t) - f(t - rise)


def test_trapezoidal_second_order():
    tau, rise = 100e-12, 20e-12
    stim = {"VS": pwl([(0.0, 0.0), (rise, 1.0)])}
    errs = []
    for dt in (4e-12, 2e-12, 1e-12):
        res = transient(rc_circuit(), stim, 200e-12, dt)
        errs.append(np.max(np.abs(res.voltage("g") - ramp_response(res.times, tau, rise))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)
    assert errs[2] < 1e-4


def test_constant_stimuli_hold_dc(minimum):
    circuit, h = build_cell(minimum, with_enable=True)
    circuit = nl.set_source(circuit, "VIN", 0.8)
    dc = dc_solve(circuit)
    res = transient(circuit, {}, 50e-12, 1e-12)
    drift = np.abs(res.node_voltages - dc.node_voltages[None, :])
    assert np.max(drift) < 1e-9


def test_transient_requires_whole_steps():
    with pytest.raises(ValueError, match="multiple"):
        transient(rc_circuit(), {}, 10.5e-12, 1e-12)


@settings(max_examples=30, deadline=None)
@given(r_top=st.floats(1e3, 1e7), r_bot=st.floats(1e3, 1e7), v=st.floats(0.1, 3.0))
def test_divider_property(r_top, r_bot, v):
    sol = dc_solve(two_resistor_divider(r_top, r_bot, v))
    assert sol.voltage("mid") == pytest.approx(v * r_bot / (r_top + r_bot), rel=1e-9)
