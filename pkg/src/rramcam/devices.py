"""Device constitutive models.

The MOSFET model is a single smooth expression: the level-1 square law
written in terms of a softplus-smoothed overdrive,

    Veff(x) = 2 n Ut ln(1 + exp(x / (2 n Ut)))
    Id      = beta/2 * (Veff(Vgs - Vth)^2 - Veff(Vgs - Vth - Vds)^2) * (1 + lambda |Vds|)

which tends to ``beta/2 (Vgs - Vth)^2`` in strong inversion saturation and to
an exponential with slope factor ``n`` below threshold. The expression is
symmetric under drain/source exchange, so reverse operation needs no
special casing. PMOS devices reuse it through polarity reflection.

The memristor model is behavioral: log-resistance moves linearly with the
applied volt-seconds, relaxes exponentially toward the pre-write state, and
can show two-level (telegraph) switching on read.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

BOLTZMANN_OVER_Q = 8.617333262e-5  # V/K
T_NOMINAL = 25.0
COX_180 = 8.6e-3  # F/m^2, ~4 nm gate oxide


class NonFiniteInput(ValueError):
    pass


def thermal_voltage(temperature: float) -> float:
    return BOLTZMANN_OVER_Q * (temperature + 273.15)


@dataclass(frozen=True)
class MosfetParams:
    """Compact-model parameters for one MOSFET.

    ``vth0`` carries its sign (negative for PMOS). ``cap_gate`` defaults to
    ``width * length * cox`` when left as ``None``.
    """

    polarity: str
    width: float
    length: float
    vth0: float
    kp: float
    lam: float = 0.0
    n_slope: float = 1.4
    cap_gate: float | None = None
    temp_coeff_vth: float = 0.5e-3
    temp_exp_mobility: float = 1.5
    cox: float = COX_180

    def __post_init__(self):
        if self.polarity not in ("N", "P"):
            raise ValueError(f"polarity must be 'N' or 'P', got {self.polarity!r}")
        if not self.width > 0 or not self.length > 0:
            raise ValueError("width and length must be positive")
        if not self.kp > 0:
            raise ValueError("kp must be positive")
        if self.n_slope < 1:
            raise ValueError("n_slope must be >= 1")
        if self.cap_gate is None:
            object.__setattr__(self, "cap_gate", self.width * self.length * self.cox)
        if self.cap_gate < 0:
            raise ValueError("cap_gate must be non-negative")

    @property
    def sign(self) -> float:
        return 1.0 if self.polarity == "N" else -1.0

    @property
    def area(self) -> float:
        return self.width * self.length

    def check_geometry(self, min_width: float, min_length: float) -> None:
        if self.width < min_width or self.length < min_length:
            raise ValueError(
                f"geometry {self.width:g} x {self.length:g} m below process minimum "
                f"{min_width:g} x {min_length:g} m"
            )

    def vth_at(self, temperature: float) -> float:
        """Threshold magnitude at ``temperature`` (degC)."""
        return abs(self.vth0) - self.temp_coeff_vth * (temperature - T_NOMINAL)

    def beta_at(self, temperature: float) -> float:
        ratio = (temperature + 273.15) / (T_NOMINAL + 273.15)
        return self.kp * self.width / self.length * ratio ** (-self.temp_exp_mobility)

    def replace(self, **changes) -> "MosfetParams":
        return dataclasses.replace(self, **changes)


def ekv_from_overdrive(overdrive, vds, beta, two_nut, lam):
    """Model core on a stacked ``(2, n)`` array of forward/reverse overdrives.

    ``overdrive[0] = Vgs - Vth`` and ``overdrive[1] = Vgs - Vth - Vds``. Kept
    separate so the solver can fill the stack in place.
    """
    z = overdrive / two_nut
    v = two_nut * np.logaddexp(0.0, z)
    sig = expit(z)
    vf, vr = v
    clm = 1.0 + lam * np.abs(vds)
    core = 0.5 * beta * (vf * vf - vr * vr)
    vrs = vr * sig[1]
    gm = beta * (vf * sig[0] - vrs) * clm
    gds = beta * vrs * clm + core * lam * np.sign(vds)
    return core * clm, gm, gds


def ekv_drain_current(vgs, vds, vth, beta, n_slope, lam, ut):
    """Vectorized NMOS-oriented drain current and its two partial derivatives.

    All arguments broadcast. Returns ``(id, gm, gds)`` where ``gm = dId/dVgs``
    and ``gds = dId/dVds``.
    """
    x = np.asarray(vgs, float) - vth
    vds = np.asarray(vds, float)
    stacked = np.stack(np.broadcast_arrays(x, x - vds))
    return ekv_from_overdrive(stacked, vds, beta, 2.0 * n_slope * ut, lam)


@dataclass
class DeviceEval:
    """Terminal currents (into each terminal) and their Jacobian.

    Terminal order is drain, gate, source, body.
    """

    currents: np.ndarray
    conductances: np.ndarray


def mosfet_eval(params: MosfetParams, v_gs: float, v_ds: float,
                temperature: float = T_NOMINAL) -> DeviceEval:
    if not (math.isfinite(v_gs) and math.isfinite(v_ds) and math.isfinite(temperature)):
        raise NonFiniteInput(f"non-finite bias v_gs={v_gs}, v_ds={v_ds}, T={temperature}")
    s = params.sign
    i_d, gm, gds = ekv_drain_current(
        s * v_gs, s * v_ds, params.vth_at(temperature), params.beta_at(temperature),
        params.n_slope, params.lam, thermal_voltage(temperature),
    )
    i_d = s * float(i_d)
    gm, gds = float(gm), float(gds)
    currents = np.array([i_d, 0.0, -i_d, 0.0])
    # d(I_terminal)/d(V_terminal) with Vgs = Vg - Vs, Vds = Vd - Vs
    row = np.array([gds, gm, -(gm + gds), 0.0])
    jac = np.zeros((4, 4))
    jac[0] = row
    jac[2] = -row
    return DeviceEval(currents, jac)


def mosfet_jacobian_check(params: MosfetParams, operating_point, temperature: float = T_NOMINAL,
                          step: float = 1e-6) -> float:
    """Max relative error of analytic (gm, gds) against central differences.

    ``operating_point`` is ``(v_gs, v_ds)``. Each entry's error is scaled by
    the larger of its own finite-difference magnitude and 1e-3 of the largest
    conductance, so a vanishing ``gds`` in saturation does not blow up the ratio.
    """
    v_gs, v_ds = operating_point
    ev = mosfet_eval(params, v_gs, v_ds, temperature)
    gm, gds = ev.conductances[0, 1], ev.conductances[0, 0]

    def idrain(a, b):
        return mosfet_eval(params, a, b, temperature).currents[0]

    gm_fd = (idrain(v_gs + step, v_ds) - idrain(v_gs - step, v_ds)) / (2 * step)
    gds_fd = (idrain(v_gs, v_ds + step) - idrain(v_gs, v_ds - step)) / (2 * step)
    scale = 1e-3 * max(abs(gm_fd), abs(gds_fd), 1e-300)
    errs = [abs(a - f) / max(abs(f), scale) for a, f in ((gm, gm_fd), (gds, gds_fd))]
    return max(errs)


# --- parameter presets -------------------------------------------------------

GENERIC180 = {
    "nmos": MosfetParams("N", 220e-9, 180e-9, vth0=0.45, kp=280e-6, lam=0.05, n_slope=1.4),
    "pmos": MosfetParams("P", 220e-9, 180e-9, vth0=-0.45, kp=70e-6, lam=0.05, n_slope=1.4),
    "native": MosfetParams("N", 420e-9, 500e-9, vth0=0.05, kp=280e-6, lam=0.05, n_slope=1.4),
}

# Small-signal discrete pair (SSM6L36TU class); gate capacitance is a
# package-level lumped value.
DISCRETE = {
    "nmos": MosfetParams("N", 100e-6, 1e-6, vth0=0.5, kp=60e-6, lam=0.02, n_slope=1.5,
                         cap_gate=50e-12),
    "pmos": MosfetParams("P", 100e-6, 1e-6, vth0=-0.5, kp=30e-6, lam=0.02, n_slope=1.5,
                         cap_gate=50e-12),
}

PRESETS = {"generic180": GENERIC180, "discrete": DISCRETE}


# --- memristor ---------------------------------------------------------------

@dataclass(frozen=True)
class Telegraph:
    r_a: float
    r_b: float
    switch_prob: float

    def __post_init__(self):
        if not 0.0 <= self.switch_prob <= 1.0:
            raise ValueError("switch_prob must be a probability")


@dataclass(frozen=True)
class MemristorState:
    """Behavioral memristor state.

    Positive write amplitude increases resistance. ``write_rate`` is in
    decades of resistance per volt-second.
    """

    resistance: float
    r_min: float = 30e3
    r_max: float = 10e6
    prior_resistance: float | None = None
    relax_rate: float = 0.0
    telegraph: Telegraph | None = None
    write_rate: float = 4000.0
    max_read_voltage: float = 0.3

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max:
            raise ValueError("need 0 < r_min <= r_max")
        if not self.r_min <= self.resistance <= self.r_max:
            raise ValueError(
                f"resistance {self.resistance:g} outside [{self.r_min:g}, {self.r_max:g}]")
        if self.prior_resistance is None:
            object.__setattr__(self, "prior_resistance", self.resistance)
        tg = self.telegraph
        if tg is not None:
            for r in (tg.r_a, tg.r_b):
                if not self.r_min <= r <= self.r_max:
                    raise ValueError("telegraph states must lie within [r_min, r_max]")

    def _clamp(self, r: float) -> float:
        return min(max(r, self.r_min), self.r_max)


def memristor_write(state: MemristorState, amplitude: float, duration: float) -> MemristorState:
    if not duration > 0:
        raise ValueError("pulse duration must be positive")
    if amplitude == 0:
        return state
    log_r = math.log10(state.resistance) + state.write_rate * amplitude * duration
    return dataclasses.replace(
        state, resistance=state._clamp(10.0 ** log_r), prior_resistance=state.resistance)


def memristor_relax(state: MemristorState, elapsed: float) -> MemristorState:
    """Exponential decay of log-resistance toward ``prior_resistance``."""
    if state.relax_rate == 0 or elapsed <= 0:
        return state
    lp, lr = math.log10(state.prior_resistance), math.log10(state.resistance)
    log_r = lp + (lr - lp) * math.exp(-state.relax_rate * elapsed)
    return dataclasses.replace(state, resistance=state._clamp(10.0 ** log_r))


def memristor_read(state: MemristorState, v_read: float,
                   rng: np.random.Generator | None = None):
    """Read at ``v_read``; returns ``(current, new_state)``.

    With telegraph switching active the state first snaps to the nearer of the
    two levels, then flips with ``switch_prob``.
    """
    if abs(v_read) > state.max_read_voltage:
        raise ValueError(f"|v_read| = {abs(v_read):g} V exceeds the non-disturbing read limit")
    tg = state.telegraph
    if tg is not None and tg.switch_prob > 0:
        if rng is None:
            raise ValueError("telegraph read needs an rng")
        r = state.resistance
        near_a = abs(math.log(r / tg.r_a)) <= abs(math.log(r / tg.r_b))
        current_level, other = (tg.r_a, tg.r_b) if near_a else (tg.r_b, tg.r_a)
        r_new = other if rng.random() < tg.switch_prob else current_level
        if r_new != r:
            state = dataclasses.replace(state, resistance=r_new)
    return v_read / state.resistance, state
