"""Modified nodal analysis: DC operating point, DC sweep and transient.

Unknowns are the non-ground node voltages followed by one branch current per
voltage source / current probe. A source's branch current flows from its
``+`` terminal through the source to its ``-`` terminal, so the current it
*delivers* to the circuit is the negative of that unknown.

Newton steps use a dense direct solve; the cell has about a dozen nodes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dgesv

from .devices import ekv_from_overdrive, thermal_voltage
from .netlist import Circuit, DeviceKind, UnknownDevice, UnknownSource, floating_nodes
from .trace import Trace

log = logging.getLogger(__name__)

VOLTAGE_ABS_TOL = 1e-9
SOURCE_ROW_TOL = 1e-9


class SolverError(RuntimeError):
    pass


class SingularMatrix(SolverError):
    pass


class FloatingNodes(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, message, best_residual=math.inf, sweep_index=None, time=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.sweep_index = sweep_index
        self.time = time


@dataclass(frozen=True)
class SolveOptions:
    abs_tol_current: float = 1e-12
    rel_tol_voltage: float = 1e-6
    max_iters: int = 200
    gmin_start: float = 1e-3
    gmin_floor: float = 1e-12
    source_steps: int = 10
    damping: float = 0.3

    def __post_init__(self):
        for name in ("abs_tol_current", "rel_tol_voltage", "gmin_start", "gmin_floor", "damping"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.gmin_floor < self.gmin_start:
            raise ValueError("gmin_floor must be below gmin_start")
        if self.max_iters < 1 or self.source_steps < 1:
            raise ValueError("max_iters and source_steps must be >= 1")


@dataclass
class DcSolution:
    node_names: list
    node_voltages: np.ndarray  # includes ground at index 0
    branch_currents: dict
    iterations: int
    converged: bool
    residual: float = 0.0
    stage: str = "newton"

    def voltage(self, node: str) -> float:
        return float(self.node_voltages[self.node_names.index(node)])


@dataclass
class TransientResult:
    times: np.ndarray
    node_names: list
    node_voltages: np.ndarray  # (steps, nodes) including ground column
    source_currents: dict  # label -> delivered current (probe: + to - current), (steps,)
    source_voltages: dict  # label -> applied voltage, (steps,)

    def voltage(self, node: str) -> np.ndarray:
        return self.node_voltages[:, self.node_names.index(node)]


class MnaSystem:
    """A circuit compiled into dense MNA matrices.

    Holds its own copy of source values and resistances, so sweeps and
    per-run edits never touch the ``Circuit`` it was built from.
    """

    def __init__(self, circuit: Circuit, options: SolveOptions | None = None):
        bad = floating_nodes(circuit)
        if bad:
            raise FloatingNodes(f"nodes without a DC path to ground: {bad}")
        self.options = options or SolveOptions()
        self.node_names = list(circuit.node_names)
        nv = circuit.node_count - 1
        self.nv = nv
        res = [d for d in circuit.devices
               if d.kind in (DeviceKind.RESISTOR, DeviceKind.MEMRISTOR)]
        srcs = [d for d in circuit.devices
                if d.kind in (DeviceKind.VOLTAGE_SOURCE, DeviceKind.CURRENT_PROBE)]
        fets = [d for d in circuit.devices if d.kind is DeviceKind.MOSFET]
        self.nsrc = len(srcs)
        self.size = nv + self.nsrc

        def select(nodes):
            m = np.zeros((len(nodes), nv))
            for row, node in enumerate(nodes):
                if node:
                    m[row, node - 1] = 1.0
            return m

        self.res_labels = [d.label for d in res]
        self._res_index = {lab: i for i, lab in enumerate(self.res_labels)}
        self.res_inc = select([d.terminals[0] for d in res]) - select([d.terminals[1] for d in res])
        self.conductance = np.array([1.0 / d.resistance for d in res])

        self.src_labels = [d.label for d in srcs]
        self._src_index = {lab: i for i, lab in enumerate(self.src_labels)}
        self.src_is_probe = np.array([d.kind is DeviceKind.CURRENT_PROBE for d in srcs], bool)
        self.src_inc = (select([d.terminals[0] for d in srcs])
                        - select([d.terminals[1] for d in srcs]))
        self.src_values = np.array([0.0 if d.params is None else d.params for d in srcs])

        self.fet_labels = [d.label for d in fets]
        ed = select([d.terminals[0] for d in fets])
        eg = select([d.terminals[1] for d in fets])
        es = select([d.terminals[2] for d in fets])
        self.fet_ds = ed - es
        self.fet_gs = eg - es
        self.fet_ds_t = self.fet_ds.T.copy()
        self.temperature = circuit.temperature
        self.set_fet_params([d.params for d in fets])

        # permanent gmin on every node a MOSFET touches
        touched = np.zeros(nv)
        for d in fets:
            for t in d.terminals[:3]:
                if t:
                    touched[t - 1] = 1.0
        self.gmin_diag = touched * self.options.gmin_floor

        # gate capacitance split equally gate-source / gate-drain
        cmat = np.zeros((nv, nv))
        for d in fets:
            half = 0.5 * d.params.cap_gate
            for other in (d.terminals[2], d.terminals[0]):
                v = np.zeros(nv)
                if d.terminals[1]:
                    v[d.terminals[1] - 1] += 1.0
                if other:
                    v[other - 1] -= 1.0
                cmat += half * np.outer(v, v)
        self.cap_matrix = cmat
        self._rebuild_linear()

    # -- parameter edits ------------------------------------------------------

    def set_fet_params(self, params):
        t = self.temperature
        self.fet_sign = np.array([p.sign for p in params])
        self.fet_vth = np.array([p.vth_at(t) for p in params])
        self.fet_beta = np.array([p.beta_at(t) for p in params])
        self.fet_n = np.array([p.n_slope for p in params])
        self.fet_lam = np.array([p.lam for p in params])
        self.ut = thermal_voltage(t)
        self.fet_two_nut = 2.0 * self.fet_n * self.ut
        self._overdrive = np.empty((2, len(params)))

    def set_source(self, label: str, value: float):
        try:
            i = self._src_index[label]
        except KeyError:
            raise UnknownSource(label) from None
        if self.src_is_probe[i]:
            raise UnknownSource(f"{label} is a current probe, not a source")
        self.src_values[i] = value

    def set_resistance(self, label: str, ohms: float):
        try:
            i = self._res_index[label]
        except KeyError:
            raise UnknownDevice(label) from None
        if not (math.isfinite(ohms) and ohms > 0):
            raise ValueError(f"resistance must be positive and finite, got {ohms!r}")
        self.conductance[i] = 1.0 / ohms
        self._rebuild_linear()

    def source_index(self, label: str) -> int:
        try:
            return self._src_index[label]
        except KeyError:
            raise UnknownSource(label) from None

    def _rebuild_linear(self):
        nv = self.nv
        a = np.zeros((self.size, self.size))
        a[:nv, :nv] = self.res_inc.T @ (self.conductance[:, None] * self.res_inc)
        a[:nv, :nv] += np.diag(self.gmin_diag)
        a[:nv, nv:] = self.src_inc.T
        a[nv:, :nv] = self.src_inc
        self.linear = a

    # -- evaluation -----------------------------------------------------------

    def fet_currents(self, v):
        """Drain currents and (gm, gds) of every MOSFET for node voltages ``v``."""
        s = self.fet_sign
        vds = s * (self.fet_ds @ v)
        od = self._overdrive
        np.subtract(s * (self.fet_gs @ v), self.fet_vth, out=od[0])
        np.subtract(od[0], vds, out=od[1])
        i_d, gm, gds = ekv_from_overdrive(od, vds, self.fet_beta, self.fet_two_nut, self.fet_lam)
        return s * i_d, gm, gds

    def evaluate(self, x, gmin_extra=0.0, scale=1.0, cap_g=None, cap_rhs=None):
        """Residual ``F(x)`` and Jacobian ``J(x)``.

        ``cap_g``/``cap_rhs`` carry the trapezoidal companion conductance
        matrix and history current vector of the transient step.
        """
        nv = self.nv
        jac = self.linear.copy()
        f = jac @ x
        f[nv:] -= scale * self.src_values
        v = x[:nv]
        if self.fet_labels:
            i_d, gm, gds = self.fet_currents(v)
            f[:nv] += self.fet_ds_t @ i_d
            jac[:nv, :nv] += self.fet_ds_t @ (gm[:, None] * self.fet_gs + gds[:, None] * self.fet_ds)
        if gmin_extra:
            f[:nv] += gmin_extra * v
            jac[:nv, :nv] += gmin_extra * np.eye(nv)
        if cap_g is not None:
            f[:nv] += cap_g @ v - cap_rhs
            jac[:nv, :nv] += cap_g
        return f, jac

    def kcl_residual(self, x) -> float:
        f, _ = self.evaluate(x)
        return float(np.max(np.abs(f[:self.nv]), initial=0.0))

    # -- Newton and homotopy --------------------------------------------------

    def newton(self, x0, gmin_extra=0.0, scale=1.0, cap_g=None, cap_rhs=None, max_iters=None):
        """Damped Newton; returns ``(x, converged, iterations, residual)``."""
        opt = self.options
        nv = self.nv
        max_iters = max_iters or opt.max_iters
        x = np.array(x0, dtype=float)
        f, jac = self.evaluate(x, gmin_extra, scale, cap_g, cap_rhs)
        best = math.inf
        for it in range(1, max_iters + 1):
            _, _, dx, info = dgesv(jac, -f)
            if info > 0:
                raise SingularMatrix(f"singular Jacobian (pivot {info})")
            if not np.isfinite(dx).all():
                return x, False, it, best
            adv = np.abs(dx[:nv])
            big = adv.max() if nv else 0.0
            if big > opt.damping:
                dx *= opt.damping / big
                adv *= opt.damping / big
            x += dx
            f, jac = self.evaluate(x, gmin_extra, scale, cap_g, cap_rhs)
            af = np.abs(f)
            kcl = af[:nv].max() if nv else 0.0
            best = min(best, kcl)
            if (kcl < opt.abs_tol_current
                    and (nv == self.size or af[nv:].max() < SOURCE_ROW_TOL)
                    and (adv <= opt.rel_tol_voltage * np.abs(x[:nv]) + VOLTAGE_ABS_TOL).all()):
                return x, True, it, kcl
        return x, False, max_iters, best

    def solve(self, x0=None):
        """Operating point via Newton, then gmin stepping, then source stepping."""
        opt = self.options
        x0 = np.zeros(self.size) if x0 is None else np.asarray(x0, float)
        x, ok, iters, res = self.newton(x0)
        total = iters
        if ok:
            return x, iters, res, "newton"
        log.info("plain Newton failed (residual %.3g A); trying gmin stepping", res)

        xg = x0.copy()
        gmin = opt.gmin_start
        ok = True
        while gmin >= opt.gmin_floor * (1 - 1e-9):
            xg, ok, iters, res = self.newton(xg, gmin_extra=gmin)
            total += iters
            if not ok:
                break
            gmin /= 10.0
        if ok:
            xg, ok, iters, res = self.newton(xg)
            total += iters
            if ok:
                return xg, total, res, "gmin"
        log.info("gmin stepping failed (residual %.3g A); trying source stepping", res)

        xs = np.zeros(self.size)
        ok = True
        for k in range(1, opt.source_steps + 1):
            xs, ok, iters, res = self.newton(xs, scale=k / opt.source_steps)
            total += iters
            if not ok:
                break
        if ok:
            return xs, total, res, "source"
        raise NoConvergence(f"homotopy ladder exhausted (best residual {res:.3g} A)",
                            best_residual=res)

    def solution(self, x, iterations, residual, stage) -> DcSolution:
        volts = np.concatenate([[0.0], x[:self.nv]])
        currents = dict(zip(self.src_labels, x[self.nv:].tolist()))
        return DcSolution(self.node_names, volts, currents, iterations, True, residual, stage)


def dc_solve(circuit: Circuit, options: SolveOptions | None = None, initial_guess=None) -> DcSolution:
    system = MnaSystem(circuit, options)
    guess = None
    if initial_guess is not None:
        guess = _guess_vector(system, initial_guess)
    x, iters, res, stage = system.solve(guess)
    return system.solution(x, iters, res, stage)


def _guess_vector(system: MnaSystem, guess):
    if isinstance(guess, DcSolution):
        x = np.zeros(system.size)
        x[:system.nv] = guess.node_voltages[1:]
        x[system.nv:] = [guess.branch_currents.get(lab, 0.0) for lab in system.src_labels]
        return x
    return np.asarray(guess, float)


def _default_probe(system: MnaSystem) -> str:
    probes = [lab for lab, p in zip(system.src_labels, system.src_is_probe) if p]
    if len(probes) != 1:
        raise ValueError(f"specify probe explicitly; circuit has probes {probes}")
    return probes[0]


def sweep_system(system: MnaSystem, source_label: str, values, probe: str | None = None,
                 warm_start: bool = True, on_point=None):
    """Sweep ``source_label`` over ``values`` on a compiled system.

    Returns ``(probe_currents, solutions)`` where ``solutions`` is the
    (points, unknowns) array. ``on_point(k, system)`` runs before point ``k``
    is solved and may edit the system (used for per-sample device noise).
    """
    probe = probe or _default_probe(system)
    pidx = system.nv + system.source_index(probe)
    system.source_index(source_label)
    values = np.asarray(values, float)
    out = np.empty((len(values), system.size))
    prev = prev2 = None
    for k, val in enumerate(values):
        if on_point is not None:
            on_point(k, system)
        system.set_source(source_label, val)
        try:
            if warm_start and prev is not None:
                guess = prev if prev2 is None else 2.0 * prev - prev2
                x, ok, _, _ = system.newton(guess)
                if not ok:
                    x, _, _, _ = system.solve(prev)
            else:
                x, _, _, _ = system.solve(None)
        except NoConvergence as exc:
            exc.sweep_index = k
            raise NoConvergence(f"sweep point {k} ({source_label}={val:g} V): {exc}",
                                exc.best_residual, sweep_index=k) from None
        out[k] = x
        prev2, prev = prev, x
    return out[:, pidx].copy(), out


def dc_sweep(circuit: Circuit, source_label: str, start: float, stop: float, samples: int,
             options: SolveOptions | None = None, probe: str | None = None,
             warm_start: bool = True, meta: dict | None = None) -> Trace:
    """Sweep a source, returning the probe current as a ``Trace``.

    The returned trace is always ordered by increasing input voltage; a
    downward sweep is solved in its own order and then reversed.
    """
    if samples < 2:
        raise ValueError("a sweep needs at least two samples")
    system = MnaSystem(circuit, options)
    # one ascending grid for both directions, so up and down sweeps share x exactly
    grid = np.linspace(min(start, stop), max(start, stop), samples)
    order = grid if stop >= start else grid[::-1]
    current, _ = sweep_system(system, source_label, order, probe, warm_start)
    if stop < start:
        current = current[::-1]
    return Trace(grid, current, dict(meta or {}))


# -- transient ----------------------------------------------------------------

def pwl(points):
    """Piecewise-linear waveform from ``[(t, v), ...]``; held constant outside."""
    pts = sorted(points)
    ts = np.array([p[0] for p in pts], float)
    vs = np.array([p[1] for p in pts], float)
    return lambda t: np.interp(t, ts, vs)


def transient(circuit: Circuit, stimuli: dict, t_stop: float, dt: float,
              options: SolveOptions | None = None) -> TransientResult:
    """Fixed-step trapezoidal transient.

    ``stimuli`` maps source labels to callables ``v(t)`` (see ``pwl``);
    unlisted sources keep their circuit value. Gate capacitances are the only
    storage elements.
    """
    if not dt > 0 or not t_stop > 0:
        raise ValueError("dt and t_stop must be positive")
    steps = int(round(t_stop / dt))
    if abs(steps * dt - t_stop) > 1e-9 * t_stop:
        raise ValueError("t_stop must be an integer multiple of dt")
    system = MnaSystem(circuit, options)
    times = np.arange(steps + 1) * dt
    waves = {}
    for label, wave in stimuli.items():
        system.source_index(label)
        waves[label] = np.asarray(wave(times), float)

    def apply(k):
        for label, w in waves.items():
            system.set_source(label, w[k])

    apply(0)
    x, _, _, _ = system.solve()
    nv = system.nv
    xs = np.empty((steps + 1, system.size))
    xs[0] = x
    cap_g = (2.0 / dt) * system.cap_matrix
    i_cap = np.zeros(nv)
    vals = np.empty((steps + 1, system.nsrc))
    vals[0] = system.src_values
    for k in range(1, steps + 1):
        apply(k)
        v_old = x[:nv]
        rhs = cap_g @ v_old + i_cap
        x_new, ok, _, res = system.newton(x, cap_g=cap_g, cap_rhs=rhs)
        if not ok:
            raise NoConvergence(f"transient step at t={times[k]:.4g} s failed "
                                f"(residual {res:.3g} A)", res, time=times[k])
        i_cap = cap_g @ x_new[:nv] - rhs
        x = x_new
        xs[k] = x
        vals[k] = system.src_values
    volts = np.concatenate([np.zeros((steps + 1, 1)), xs[:, :nv]], axis=1)
    # sources report delivered current; probes report current from + to -
    currents = {lab: (1.0 if probe else -1.0) * xs[:, nv + i]
                for i, (lab, probe) in enumerate(zip(system.src_labels, system.src_is_probe))}
    applied = {lab: vals[:, i] for i, lab in enumerate(system.src_labels)}
    return TransientResult(times, system.node_names, volts, currents, applied)
