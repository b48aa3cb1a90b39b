"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import circuitqed as cq
from . import fluxcal as fc
from . import spectra as sp
from . import tightbinding as tb
from .config import RunConfig, load_config, load_preset, preset_names
from .errors import ConfigError, NumericError
from .lattice import validate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("bands", "dos", "finite", "boundstates", "crossing", "fluxcal", "validate")
DEFAULT_TRANSMON = cq.TransmonSpec(0.122, 103.0)


class Run:
    """Resolved command context: config, output directory and formats."""

    def __init__(self, cfg: RunConfig, base: Path, args):
        self.cfg = cfg
        self.base = base
        self.out = Path(args.out) if args.out else Path(cfg.output.dir)
        self.formats = list(dict.fromkeys(args.format or cfg.output.formats))
        self.seed = args.seed
        self.command = args.command

    @property
    def inputs(self) -> dict:
        return {"command": self.command, "seed": self.seed, "config": self.cfg.model_dump(mode="json")}

    def write(self, obj, stem: str, formats=None, kind=None):
        for fmt in formats or self.formats:
            path = sp.export(obj, fmt, self.out / f"{stem}.{fmt}", inputs=self.inputs, kind=kind)
            print(f"wrote {path}")

    def write_json(self, data: dict, name: str):
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")


def _fmt_mhz(x: float) -> str:
    return f"{1e3 * x:.1f} MHz"


def _print_groups(groups):
    print("band groups (corrected, GHz):")
    for lo, hi in groups:
        print(f"  [{lo:.4f}, {hi:.4f}]  width {_fmt_mhz(hi - lo)}")
    if len(groups) > 1:
        print("gaps:")
        for (_, a), (b, _) in zip(groups[:-1], groups[1:]):
            print(f"  ({a:.4f}, {b:.4f})  width {_fmt_mhz(b - a)}")
    else:
        print("gaps: none")


def _family_line(fam: tb.ModeFamily) -> str:
    return f"mode family mu={fam.mu} ({fam.parity}), omega={fam.omega_mu:.6g} GHz, t0={fam.t0:.6g} GHz"


def cmd_bands(run: Run, with_bands: bool = True) -> int:
    fam = run.cfg.require_family()
    cell = run.cfg.cell(run.base)
    bands = tb.bloch_bands(cell, fam, tb.default_k_grid(run.cfg.bands.n_k))
    dos = tb.density_of_states(bands, run.cfg.bands.dos_bin_width)
    print(_family_line(fam))
    _print_groups(tb.band_groups(bands))
    print(f"DOS integral: {dos.integral():.6f} states per cell")
    if with_bands:
        run.write(bands, "bands")
    run.write(dos, "dos")
    return EXIT_OK


def cmd_dos(run: Run) -> int:
    return cmd_bands(run, with_bands=False)


def cmd_finite(run: Run) -> int:
    fam = run.cfg.require_family()
    cell = run.cfg.cell(run.base)
    lat = run.cfg.chain(run.base)
    es = tb.finite_spectrum(lat, fam, corrected=True)
    groups = tb.band_groups(tb.bloch_bands(cell, fam))
    print(_family_line(fam))
    print(f"{lat.n_sites} sites, {lat.n_cells} cells, boundary {lat.boundary}")
    gaps = [(a, b) for (_, a), (b, _) in zip(groups[:-1], groups[1:])]
    found = False
    for i, f in enumerate(es.frequencies):
        w = tb.outer_cell_weight(es.vectors[:, i], lat)
        if any(a < f < b for a, b in gaps) and w > 0.5:
            print(f"  in-gap edge mode {i}: {f:.4f} GHz, outer-cell weight {w:.2f}")
            found = True
    if not found:
        print("  no in-gap edge modes")
    run.write(es, "finite")
    return EXIT_OK


def _require_qubits(cfg: RunConfig, n: int):
    if len(cfg.qubits) < n:
        raise ConfigError(f"this command needs {n} qubit(s) in 'qubits', found {len(cfg.qubits)}")
    return cfg.qubits[:n] if n == 2 else cfg.qubits


def cmd_boundstates(run: Run) -> int:
    fam = run.cfg.require_family()
    qubits = _require_qubits(run.cfg, 1)
    lat = run.cfg.chain(run.base)
    scan = cq.bound_states(lat, fam, [q.placement() for q in qubits], [q.spec() for q in qubits],
                           run.cfg.flux.values(), cell=run.cfg.cell(run.base))
    print(_family_line(fam))
    bottom, top = scan.band_groups[0][0], scan.band_groups[-1][1]
    for name, gap in [("below bands", (-np.inf, bottom))] + [
            (f"gap ({a:.4f}, {b:.4f})", (a, b)) for a, b in scan.gaps()] + [("above bands", (top, np.inf))]:
        f, w = scan.in_gap_states(gap, threshold=0.01)
        ok = np.isfinite(f)
        if ok.any():
            print(f"  {name}: qubit-like state spans {np.nanmin(f):.4f}-{np.nanmax(f):.4f} GHz, "
                  f"max qubit weight {np.nanmax(w):.2f}")
    run.write(scan, "boundstates")
    if run.cfg.ports is not None:
        p = run.cfg.ports
        lo = min(r.eigenfrequencies.min() for r in scan.results)
        hi = max(r.eigenfrequencies.max() for r in scan.results)
        grid = np.linspace(lo - 0.02, hi + 0.02, p.freq_points)
        run.write(sp.flux_map(scan, p.coupling(), grid), "map")
    return EXIT_OK


def cmd_crossing(run: Run) -> int:
    fam = run.cfg.require_family()
    q1, q2 = _require_qubits(run.cfg, 2)
    cross = run.cfg.crossing
    if cross is None:
        raise ConfigError("config has no 'crossing' section")
    lat = run.cfg.chain(run.base)
    es = tb.finite_spectrum(lat, fam)
    edge = es.frequencies.min() if cross.reference == "bottom" else es.frequencies.max()
    sign = -1.0 if cross.reference == "bottom" else 1.0
    s1, s2 = q1.spec(), q2.spec()
    print(_family_line(fam))
    print(f"reference band edge ({cross.reference}): {edge:.4f} GHz")
    print("  detuning_GHz  min_gap_MHz")
    gaps = []
    for n, d in enumerate(cross.detunings_GHz):
        f_target = edge + sign * d
        phi2 = cq.flux_for_frequency(s2, f_target)
        centre = cq.flux_for_frequency(s1, f_target)
        grid = np.linspace(centre - cross.flux_window, centre + cross.flux_window, cross.num)
        scan = cq.avoided_crossing_scan(lat, fam, q1.placement(), q2.placement(), s1, s2, grid, phi2)
        gaps.append(scan.min_gap)
        print(f"  {d:12.4f}  {1e3 * scan.min_gap:11.4f}")
        run.write(scan, f"crossing_{n}")
    order = np.argsort(cross.detunings_GHz)[::-1]
    ordered = np.asarray(gaps)[order]
    mono = bool(np.all(np.diff(ordered) > 0))
    print(f"gap grows as detuning shrinks: {'yes' if mono else 'no'}")
    return EXIT_OK


def cmd_fluxcal(run: Run) -> int:
    sec = run.cfg.fluxcal
    if sec is None:
        raise ConfigError("config has no 'fluxcal' section")
    specs = [q.spec() for q in run.cfg.qubits[: sec.n_qubits]]
    if not specs:
        specs = [DEFAULT_TRANSMON] * sec.n_qubits
    if len(specs) != sec.n_qubits:
        raise ConfigError(f"fluxcal needs {sec.n_qubits} qubit specs, found {len(specs)}")

    truth = None
    if sec.measurements:
        path = Path(sec.measurements)
        if not path.is_absolute():
            path = run.base / path
        meas = fc.MeasurementSet.from_dict(json.loads(path.read_text()))
        print(f"calibrating from {path}")
    else:
        if sec.model is not None:
            truth = sec.model.model()
        elif sec.random_model:
            truth = fc.random_model(sec.n_qubits, np.random.default_rng(run.seed))
        else:
            truth = fc.CrosstalkModel.identity(sec.n_qubits)
        if truth.n != sec.n_qubits:
            raise ConfigError(f"model is {truth.n}x{truth.n} but n_qubits = {sec.n_qubits}")
        meas = fc.simulate_measurements(truth, specs, sec.protocol.protocol(run.seed))
        run.write_json(meas.to_dict(), "measurements.json")
    result = fc.calibrate(meas)
    model = result.model
    print("recovered M (flux quanta per volt):")
    for row in model.M:
        print("  " + "  ".join(f"{x: .6f}" for x in row))
    print("offsets: " + "  ".join(f"{x: .6f}" for x in model.phi_offsets))
    print(f"condition number: {model.condition_number:.4g}")
    if truth is not None:
        print(f"max |M - M_true|: {np.abs(model.M - truth.M).max():.3e}")
    self_path = run.out / "crosstalk.json"
    run.out.mkdir(parents=True, exist_ok=True)
    self_path.write_text(model.to_json())
    print(f"wrote {self_path}")
    run.write_json(result.to_dict(), "calibration.json")
    if sec.target_flux is not None:
        v = fc.voltages_for_flux(model, sec.target_flux)
        back = fc.flux_from_voltage(model, v)
        print("feed-forward voltages: " + "  ".join(f"{x: .6f}" for x in v))
        print(f"round-trip flux error: {np.abs(back - np.asarray(sec.target_flux)).max():.3e}")
    return EXIT_OK


def cmd_validate(run: Run) -> int:
    lat = run.cfg.chain(run.base)
    problems = validate(lat)
    for p in problems:
        print(f"  {p.code}: {p.message}")
    if run.cfg.family is not None:
        fam = run.cfg.require_family()
        print(_family_line(fam))
    if problems:
        print(f"{len(problems)} problem(s)", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {lat.n_sites} sites, {len(lat.couplers)} couplers, {lat.n_cells} cells, "
          f"boundary {lat.boundary}, connected={lat.is_connected()}")
    return EXIT_OK


HANDLERS = {
    "bands": cmd_bands,
    "dos": cmd_dos,
    "finite": cmd_finite,
    "boundstates": cmd_boundstates,
    "crossing": cmd_crossing,
    "fluxcal": cmd_fluxcal,
    "validate": cmd_validate,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpwlattice",
                                     description="CPW resonator lattice and transmon simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "bands": "Bloch bands and DOS with a gap-edge summary",
        "dos": "density of states only",
        "finite": "finite-chain normal modes and edge states",
        "boundstates": "qubit flux sweep in the single-excitation sector",
        "crossing": "two-qubit avoided-crossing scans at several detunings",
        "fluxcal": "crosstalk calibration demo or calibration from measurement JSON",
        "validate": "check lattice invariants",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        src = p.add_mutually_exclusive_group(required=name != "validate")
        src.add_argument("--config", metavar="PATH", help="run configuration JSON")
        src.add_argument("--preset", metavar="NAME", help="bundled configuration name")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
        p.add_argument("--format", action="append", choices=sp.FORMATS,
                       help="output format; repeat for several (overrides config)")
        p.add_argument("--seed", type=int, default=0, help="RNG seed for noise and random-model demos")
    return parser


def _resolve(args) -> tuple[RunConfig, Path]:
    if args.config:
        return load_config(args.config)
    if args.preset:
        return load_preset(args.preset), Path.cwd()
    return RunConfig(version=1), Path.cwd()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "preset", None) == "list":
        print("\n".join(preset_names()))
        return EXIT_OK
    try:
        cfg, base = _resolve(args)
        return HANDLERS[args.command](Run(cfg, base, args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
