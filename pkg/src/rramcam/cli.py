"""Batch front-end.

    rramcam run thresholds.toml --set cell.kind=IntegratedWide --out out/wide
    rramcam defaults

Exit codes: 0 success, 1 configuration error, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import config as cfgmod
from .analysis import experiments as ex
from .analysis.measure import DegenerateTrace, fwhm_metrics, moving_average, window_metrics
from .camcell import CellKind, geometric_states, make_variant
from .devices import PRESETS, MemristorState, Telegraph
from .report import atomic_write, csv_text, histogram_rows, table_text
from .solver import NoConvergence, SolveOptions

log = logging.getLogger("rramcam")


@dataclass
class Artifact:
    name: str
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    text: str | None = None  # plain-text artifact when set


def emit_report(reports, out_dir, meta: dict | None = None) -> list:
    """Write each artifact under ``out_dir``; returns the written paths."""
    out_dir = Path(out_dir)
    paths = []
    for art in reports:
        target = (out_dir / art.name).resolve()
        if out_dir.resolve() not in target.parents:
            raise ValueError(f"artifact {art.name!r} escapes the output directory")
        if art.text is not None:
            paths.append(atomic_write(target, art.text))
        else:
            merged = {**(meta or {}), **art.meta}
            paths.append(atomic_write(target, csv_text(art.columns, art.rows, merged)))
    return paths


def variant_from_config(cfg: dict, kind=None):
    cell = cfg["cell"]
    v = make_variant(kind or cell["kind"], orientation=cell["orientation"],
                     supply=float(cell["supply"]), temperature=float(cell["temperature"]))
    if cfg["fets"]:
        fets = dict(v.fet_params)
        for role, changes in cfg["fets"].items():
            fets[role] = fets[role].replace(**changes)
        v = v.replace(fet_params=fets)
    return v


def _metric_row(m):
    return [m.lower_threshold, m.upper_threshold, m.width, m.peak_current]


METRIC_COLUMNS = ["lower_threshold_v", "upper_threshold_v", "width_v", "peak_current_a"]


def run_sweep(cfg, opts, jobs):
    v = variant_from_config(cfg)
    sec = cfg["sweep"]
    tr = ex.cell_trace(v, sec["m1"], sec["m2"], sec["samples"], opts)
    m = window_metrics(tr)
    smooth = moving_average(tr)
    arts = [Artifact("trace.csv", ["v_in", "i_out", "i_denoised"],
                     list(zip(tr.x, tr.y, smooth.y)), {"m1": tr.meta["m1"], "m2": tr.meta["m2"]})]
    row = _metric_row(m)
    try:
        f = fwhm_metrics(tr)
        row += [f.lower_threshold, f.upper_threshold, f.width]
    except DegenerateTrace:
        row += ["", "", ""]
    arts.append(Artifact("window.csv", METRIC_COLUMNS + ["fwhm_lower_v", "fwhm_upper_v",
                                                         "fwhm_width_v"], [row]))
    return arts


def _long_traces(points, key="state"):
    rows = []
    for p in points:
        state = getattr(p, key)
        rows += [(state, x, y) for x, y in zip(p.trace.x, p.trace.y)]
    return rows


def run_thresholds(cfg, opts, jobs):
    v = variant_from_config(cfg)
    sec = cfg["thresholds"]
    states = geometric_states(v.dynamic_range, int(sec["count"]))[::-1]
    pts = ex.threshold_sweep(v, sec["element"], states, sec["fixed_other"], sec["samples"],
                             opts, jobs)
    meta = {"element": sec["element"]}
    return [
        Artifact("thresholds.csv", ["state_ohm"] + METRIC_COLUMNS,
                 [[p.state] + _metric_row(p.metrics) for p in pts], meta),
        Artifact("traces.csv", ["state_ohm", "v_in", "i_out"], _long_traces(pts), meta),
    ]


def run_supply(cfg, opts, jobs):
    v = variant_from_config(cfg)
    fit = ex.supply_linearity(v, cfg["supply"]["supplies"], opts, jobs)
    return [Artifact("supply.csv", ["supply_v", "max_width_v"],
                     list(zip(fit.supplies, fit.widths)),
                     {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2})]


ENERGY_COLUMNS = ["v_test", "classification", "energy_j", "input_j", "enable_j", "supply_j",
                  "output_stage_j"]


def _energy_row(r):
    b = r.breakdown
    return [r.test_voltage, r.classification.value, r.energy, b["input"], b["enable"],
            b["supply"], r.output_stage]


def run_energy(cfg, opts, jobs):
    v = variant_from_config(cfg)
    sec = cfg["energy"]
    park = ex.Park(sec["park"]) if sec["park"] else None
    tests = sec["v_test"] if isinstance(sec["v_test"], list) else [sec["v_test"]]
    window = ex.dc_window(v, sec["m1"], sec["m2"], options=opts)
    rows = [_energy_row(ex.energy_test(v, sec["m1"], sec["m2"], float(t), park,
                                       float(sec["pulse"]), float(sec["dt"]), opts, window))
            for t in tests]
    meta = {"park": (park or ex.default_park(v.kind)).value,
            "lower_threshold": window.lower_threshold, "upper_threshold": window.upper_threshold}
    return [Artifact("energy.csv", ENERGY_COLUMNS, rows, meta)]


def run_corners(cfg, opts, jobs):
    sec = cfg["corners"]
    s = float(sec["shift"])
    corners = (ex.CornerSpec("25C", 25.0), ex.CornerSpec("37C", 37.0),
               ex.CornerSpec("FF", 25.0, s, s), ex.CornerSpec("SS", 25.0, -s, -s))
    variants = [variant_from_config(cfg, kind) for kind in sec["variants"]]
    rows = ex.corner_table(variants, corners, opts, bool(sec["energy"]), jobs)
    arts = [Artifact("corners.csv",
                     ["variant", "corner", "max_width_v", "hit_energy_j", "miss_energy_j",
                      "hit_voltage", "miss_voltage"],
                     [[r.variant, r.corner, r.max_width, r.hit_energy, r.miss_energy,
                       r.hit_voltage, r.miss_voltage] for r in rows])]
    arts.append(Artifact("summary.txt", text=corner_summary(rows, [c.name for c in corners],
                                                            sec["variants"])))
    return arts


def _cell(value, scale, unit):
    return "-" if value != value else f"{value * scale:.2f} {unit}"


def corner_summary(rows, corner_names, variant_names) -> str:
    by = {(r.variant, r.corner): r for r in rows}
    blocks = []
    for title, attr, scale, unit in (("Hit energy", "hit_energy", 1e15, "fJ"),
                                     ("Miss energy", "miss_energy", 1e15, "fJ"),
                                     ("Max window width", "max_width", 1e3, "mV")):
        cells = [[_cell(getattr(by[(v, c)], attr), scale, unit) for v in variant_names]
                 for c in corner_names]
        blocks.append(table_text(title, variant_names, corner_names, cells))
    return "\n".join(blocks)


def run_montecarlo(cfg, opts, jobs):
    v = variant_from_config(cfg)
    sec = cfg["montecarlo"]
    rep = ex.monte_carlo(v, int(sec["run_count"]), int(cfg["seed"]), float(sec["a_vt"]),
                         float(sec["a_kp"]), sec["samples"], opts, jobs)
    meta = {"variant": rep.variant, "seed": rep.seed}
    fit = [rep.mu, rep.sigma, rep.run_count, len(rep.failed_runs)]
    text = table_text("Normal fit", [rep.variant],
                      ["mu", "sigma", "runs"],
                      [[f"{rep.mu * 1e3:.1f} mV"], [f"{rep.sigma * 1e3:.2f} mV"],
                       [str(rep.run_count)]])
    return [
        Artifact("samples.csv", ["run", "max_width_v"], list(enumerate(rep.samples)), meta),
        Artifact("histogram.csv", ["bin_low_v", "bin_high_v", "count"],
                 histogram_rows(rep.samples, int(sec["bins"])), meta),
        Artifact("fit.csv", ["mu_v", "sigma_v", "run_count", "failed_runs"], [fit], meta),
        Artifact("summary.txt", text=text),
    ]


def run_memristor(cfg, opts, jobs):
    v = variant_from_config(cfg)
    if v.kind is not CellKind.PCB_MEMRISTOR:
        raise cfgmod.ConfigError("memristor experiment needs cell.kind = 'PcbMemristor'")
    sec = cfg["memristor"]
    lo, hi = v.dynamic_range
    tg = Telegraph(sec["r_a"], sec["r_b"], sec["switch_prob"]) if sec["telegraph"] else None
    # programming ceiling of the device class (bilayer stacks stop near 500 kOhm)
    top = min(hi, float(sec["ceiling"]))
    device = MemristorState(top, r_min=min(30e3, lo), r_max=top,
                            relax_rate=float(sec["relax_rate"]), telegraph=tg)
    targets = geometric_states(v.dynamic_range, int(sec["count"]))[::-1]
    pts = ex.memristor_emulation_sweep(v, sec["element"], targets, int(cfg["seed"]), device,
                                       samples=int(sec["samples"]), options=opts)
    meta = {"element": sec["element"]}
    return [
        Artifact("memristor.csv", ["target_ohm", "read_state_ohm"] + METRIC_COLUMNS,
                 [[p.target, p.read_state] + _metric_row(p.metrics) for p in pts], meta),
        Artifact("traces.csv", ["read_state_ohm", "v_in", "i_out"],
                 _long_traces(pts, "read_state"), meta),
    ]


RUNNERS = {
    "sweep": run_sweep,
    "thresholds": run_thresholds,
    "supply": run_supply,
    "energy": run_energy,
    "corners": run_corners,
    "montecarlo": run_montecarlo,
    "memristor": run_memristor,
}


def run(config_path=None, overrides=(), out=None, seed=None, jobs=None) -> int:
    try:
        cfg = cfgmod.load(config_path, overrides)
        if out is not None:
            cfg["output_dir"] = str(out)
        if seed is not None:
            cfg["seed"] = int(seed)
        opts = SolveOptions(**cfg["solver"])
        out_dir = Path(cfg["output_dir"])
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise cfgmod.ConfigError(f"output_dir {out_dir} not writable: {exc}") from None
        if not os.access(out_dir, os.W_OK):
            raise cfgmod.ConfigError(f"output_dir {out_dir} not writable")
        jobs = jobs or int(os.environ.get("CAMCELL_JOBS", "1"))
        digest = cfgmod.config_hash(cfg)
        reports = RUNNERS[cfg["experiment"]](cfg, opts, jobs)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NoConvergence as exc:
        diag = {"error": "NoConvergence", "message": str(exc),
                "best_residual": exc.best_residual, "sweep_index": exc.sweep_index,
                "time": exc.time}
        print(json.dumps(diag), file=sys.stderr)
        return 2
    meta = {"tool": f"rramcam {__version__}", "experiment": cfg["experiment"],
            "variant": cfg["cell"]["kind"], "seed": cfg["seed"], "config_hash": digest}
    paths = emit_report(reports, out_dir, meta)
    manifest = {"tool_version": __version__, "config_hash": digest, "config": cfg,
                "artifacts": sorted(p.name for p in paths)}
    atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d artifacts to %s", len(paths), out_dir)
    return 0


def print_defaults(stream=None) -> None:
    stream = stream or sys.stdout
    data = {
        "presets": {name: {role: dataclasses.asdict(p) for role, p in preset.items()}
                    for name, preset in PRESETS.items()},
        "solver": dataclasses.asdict(SolveOptions()),
        "config": cfgmod.defaults(),
    }
    json.dump(data, stream, indent=2, sort_keys=True, default=str)
    stream.write("\n")


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors; exit code 2 means non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    parser = _Parser(prog="rramcam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config_file", nargs="?", help="config path (same as --config)")
    p_run.add_argument("--config", dest="config_opt")
    p_run.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V")
    p_run.add_argument("--out")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--jobs", type=int)
    p_run.add_argument("--quiet", action="store_true")
    sub.add_parser("defaults", help="print default parameters as JSON")
    args = parser.parse_args(argv)
    if args.command == "defaults":
        print_defaults()
        return 0
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    path = args.config_opt or args.config_file
    return run(path, args.overrides, args.out, args.seed, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
