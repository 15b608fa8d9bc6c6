import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rramcam.devices import (
    DISCRETE, GENERIC180, MemristorState, MosfetParams, NonFiniteInput, Telegraph,
    ekv_drain_current, memristor_read, memristor_relax, memristor_write, mosfet_eval,
    mosfet_jacobian_check,
)

# kp*W/L = 1 mA/V^2
UNIT = MosfetParams("N", 1e-6, 1e-6, vth0=0.5, kp=1e-3, lam=0.0)


def test_saturation_square_law():
    i_d = mosfet_eval(UNIT, 1.5, 2.0).currents[0]
    assert i_d == pytest.approx(0.5e-3, rel=0.05)


def test_deep_subthreshold_off():
    p = GENERIC180["nmos"].replace(vth0=0.5)
    assert abs(mosfet_eval(p, 0.0, 1.8).currents[0]) < 1e-9


def test_pmos_mirror():
    pmos = UNIT.replace(polarity="P", vth0=-0.5)
    i_n = mosfet_eval(UNIT, 1.2, 0.7).currents[0]
    i_p = mosfet_eval(pmos, -1.2, -0.7).currents[0]
    assert i_p == pytest.approx(-i_n, rel=1e-12)
    assert i_n > 0


def test_drain_source_exchange():
    # the model is symmetric: swapping drain and source reverses the current
    fwd = mosfet_eval(UNIT, 1.2, 0.4).currents[0]
    # with source and drain swapped, Vgs' = Vgs - Vds and Vds' = -Vds
    rev = mosfet_eval(UNIT, 0.8, -0.4).currents[0]
    assert rev == pytest.approx(-fwd, rel=1e-12)


def test_nonfinite_rejected():
    with pytest.raises(NonFiniteInput):
        mosfet_eval(UNIT, float("nan"), 1.0)
    with pytest.raises(NonFiniteInput):
        mosfet_eval(UNIT, 1.0, 1.0, temperature=float("inf"))


@pytest.mark.parametrize("vgs,vds", [(1.0, 1.5), (1.8, 0.3), (1.2, 1.8), (0.9, 0.05)])
def test_jacobian_strong_inversion(vgs, vds):
    for p in (GENERIC180["nmos"], GENERIC180["native"], DISCRETE["nmos"], UNIT):
        assert mosfet_jacobian_check(p, (vgs, vds)) < 1e-4


@pytest.mark.parametrize("vgs,vds", [(0.2, 1.0), (0.0, 1.8), (0.35, 0.02)])
def test_jacobian_subthreshold(vgs, vds):
    assert mosfet_jacobian_check(GENERIC180["nmos"], (vgs, vds)) < 1e-3


@pytest.mark.parametrize("vgs,vds", [(1.5, 0.2), (1.8, 0.6), (1.0, 0.1)])
def test_jacobian_triode_no_clm(vgs, vds):
    assert mosfet_jacobian_check(UNIT, (vgs, vds)) < 1e-4


def test_jacobian_pmos():
    assert mosfet_jacobian_check(GENERIC180["pmos"], (-1.2, -0.9)) < 1e-4


def test_temperature_laws():
    p = GENERIC180["nmos"]
    assert p.vth_at(37.0) == pytest.approx(0.45 - 12 * 0.5e-3)
    ratio = p.beta_at(37.0) / p.beta_at(25.0)
    assert ratio == pytest.approx((310.15 / 298.15) ** -1.5)


def test_cap_default_from_area():
    p = MosfetParams("N", 1e-6, 2e-6, vth0=0.4, kp=1e-4)
    assert p.cap_gate == pytest.approx(2e-12 * p.cox)


def test_smoothness_on_grid():
    # 1 mV grid over 0-2 V: no jumps in Id or its slopes
    p = GENERIC180["nmos"]
    v = np.arange(0.0, 2.0 + 1e-12, 1e-3)
    vgs, vds = np.meshgrid(v, v[::50])
    i_d, gm, gds = ekv_drain_current(vgs, vds, p.vth_at(25), p.beta_at(25), p.n_slope, p.lam,
                                     0.025693)
    gmax = gm.max()
    assert np.max(np.abs(np.diff(i_d, axis=1))) < 1e-3 * gmax * 2
    # second differences along vgs stay small: first derivative is continuous
    assert np.max(np.abs(np.diff(gm, axis=1))) < 0.01 * gmax
    # along vds the slope changes smoothly too, apart from the lambda*|Vds| kink at 0
    _, _, gds_fine = ekv_drain_current(1.2, v[1:], p.vth_at(25), p.beta_at(25), p.n_slope,
                                       p.lam, 0.025693)
    assert np.max(np.abs(np.diff(gds_fine))) < 0.01 * np.max(gds_fine)


bias = st.floats(0.0, 2.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(vgs=bias, dv=st.floats(1e-4, 0.5), vds=bias,
       vth=st.floats(0.0, 0.9), kp=st.floats(1e-5, 1e-3), lam=st.floats(0.0, 0.1),
       n=st.floats(1.0, 2.0))
def test_monotone_in_vgs(vgs, dv, vds, vth, kp, lam, n):
    p = MosfetParams("N", 1e-6, 1e-6, vth0=vth, kp=kp, lam=lam, n_slope=n)
    lo = mosfet_eval(p, vgs, vds).currents[0]
    hi = mosfet_eval(p, vgs + dv, vds).currents[0]
    assert hi >= lo


@settings(max_examples=100, deadline=None)
@given(vgs=st.floats(-2, 2), vds=st.floats(-2, 2), polarity=st.sampled_from("NP"))
def test_terminal_currents_sum_to_zero(vgs, vds, polarity):
    p = GENERIC180["nmos" if polarity == "N" else "pmos"]
    ev = mosfet_eval(p, vgs, vds)
    assert abs(ev.currents.sum()) < 1e-15
    assert np.allclose(ev.conductances.sum(axis=0), 0.0, atol=1e-18)


# --- memristor ---------------------------------------------------------------

def test_null_pulse():
    s = MemristorState(1e6, prior_resistance=2e6)
    assert memristor_write(s, 0.0, 1e-4) == s


def test_negative_pulses_clamp_at_rmin():
    s = MemristorState(1e6)
    for _ in range(20):
        s = memristor_write(s, -1.0, 500e-6)
    assert s.resistance == s.r_min
    s2 = memristor_write(s, -1.0, 500e-6)
    assert s2.resistance == s.r_min


def test_relaxation_toward_prior():
    s = MemristorState(100e3, relax_rate=0.1)
    s = memristor_write(s, 1.0, 1.0 / s.write_rate)  # one decade up
    assert s.resistance == pytest.approx(1e6, rel=1e-9)
    assert s.prior_resistance == pytest.approx(100e3)
    r = memristor_relax(s, 1.0).resistance
    assert 100e3 < r < 1e6
    assert abs(r - 1e6) < abs(r - 100e3)
    assert r == pytest.approx(10 ** (5 + math.exp(-0.1)), rel=1e-9)


def test_read_ohmic():
    current, s = memristor_read(MemristorState(1e6), 0.25)
    assert current == pytest.approx(250e-9, rel=1e-15)
    assert s.resistance == 1e6


def test_read_voltage_limit():
    with pytest.raises(ValueError, match="read limit"):
        memristor_read(MemristorState(1e6), 0.5)


def test_no_switching_without_probability():
    s = MemristorState(6e6, telegraph=Telegraph(6e6, 8e6, 0.0))
    _, s2 = memristor_read(s, 0.25, np.random.default_rng(0))
    assert s2.resistance == s.resistance


def test_telegraph_flip_fraction():
    rng = np.random.default_rng(1234)
    s = MemristorState(6e6, telegraph=Telegraph(6e6, 8e6, 0.5))
    flips = 0
    for _ in range(10_000):
        before = s.resistance
        _, s = memristor_read(s, 0.25, rng)
        flips += s.resistance != before
    assert flips / 10_000 == pytest.approx(0.5, abs=0.02)


def test_telegraph_needs_rng():
    s = MemristorState(6e6, telegraph=Telegraph(6e6, 8e6, 0.3))
    with pytest.raises(ValueError, match="rng"):
        memristor_read(s, 0.25)


@settings(max_examples=100, deadline=None)
@given(log_r=st.floats(5.0, 6.5), amp=st.floats(-1.0, 1.0).filter(lambda a: abs(a) > 1e-3),
       dur=st.floats(1e-5, 1e-4))
def test_write_reversibility(log_r, amp, dur):
    s0 = MemristorState(10 ** log_r, r_min=30e3, r_max=10e6)
    s = memristor_write(memristor_write(s0, amp, dur), -amp, dur)
    assert s.resistance == pytest.approx(s0.resistance, rel=0.01)


def test_state_validation():
    with pytest.raises(ValueError):
        MemristorState(1e3)  # below r_min
    with pytest.raises(ValueError):
        MemristorState(1e6, telegraph=Telegraph(1e6, 20e6, 0.1))
    with pytest.raises(ValueError):
        Telegraph(1e6, 2e6, 1.5)
