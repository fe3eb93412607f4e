"""Command-line front end: presets and JSON configs in, CSV/JSON results out.

Exit codes: 0 ok, 1 configuration error, 2 computation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .dispersion import (
    Conventions,
    PhasematchError,
    PhasematchParams,
    dgd_map,
    find_degeneracy,
    extract_jsa_params,
    group_index,
    load_params,
    preset_params,
    save_params,
    sensitivity_table,
    write_dgd_map_csv,
    write_sensitivity_csv,
)
from .entanglement import (
    DichroicSpec,
    FilterSpec,
    band_separation_sweep,
    density_matrix,
    filtered_amplitudes,
    write_separation_csv,
)
from .interference import hom_scan, pump_detuning_sweep, write_scan_csv, write_sweep_csv
from .jsa import (
    PUMP_WINDOW,
    GridSpec,
    PumpSpec,
    build_jsa,
    export_header_json,
    export_jsa_csv,
    export_marginals_csv,
    write_json_header,
)
from .material import MaterialDomainError
from .multilayer import LayerStack, Polarization, SolverError, find_guided_modes, load_stack, preset_stack

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "BRWPDC_OUTPUT_DIR"
COMMANDS = ("modes", "dispersion", "sensitivity", "dgd_map", "jsa", "hom", "pump_sweep", "entangle")
PRESETS = ("graded", "m_core")
FWHM_MODES = ("amplitude", "intensity")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    preset: str = "graded"  # graded, m_core, or a JSON path (layer stack or JSA parameters)
    output: str | None = None  # output directory
    # optical settings
    pump: float | None = None  # nm; default: half the degeneracy wavelength
    pump_fwhm: float = 0.25  # nm
    pump_fwhm_mode: str = "amplitude"
    filter_fwhm: float = 2.0  # nm
    filter_fwhm_mode: str = "amplitude"
    signal_pol: str = "TE"
    pump_pol: str = "TE"
    ridge: bool = True
    params_source: str = "preset"  # JSA parameters: "preset" tables or "solver" from the layer stack
    # grid
    grid_half_width: float = 0.25  # rad/fs
    grid_n: int = 2048
    # delay scans
    tau_min: float = -100.0  # fs
    tau_max: float = 100.0
    tau_n: int = 401
    tau_step: float = 0.5
    # sweeps
    pump_min: float | None = None  # nm
    pump_max: float | None = None
    pump_n: int = 21
    separations: list = field(default_factory=lambda: [0.0, 100.0, 5.0])  # start, stop, step in nm
    filter_centers: list | None = None  # explicit [center_1, center_2] in nm for entangle
    # mode solver
    wavelength: float = 1550.0  # nm
    guess: float = 1550.0  # nm, degeneracy search start
    half_span: float = 20.0  # nm, dispersion window half width
    sensitivity_case: str = "relative"  # relative (+1 %) or fabrication (+5 % thickness, +2 pp Al)
    al_core: list = field(default_factory=lambda: [0.3, 0.6])
    al_graded: list = field(default_factory=lambda: [0.3, 0.6])
    map_n: int = 5

    def conventions(self):
        return Conventions(Polarization(self.signal_pol), Polarization(self.pump_pol), self.ridge)

    def grid(self):
        return GridSpec(self.grid_half_width, self.grid_half_width, self.grid_n, self.grid_n)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**d)


def separation_values(spec):
    start, stop, step = spec
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _preset_kind(preset):
    if preset in PRESETS:
        return "builtin"
    p = Path(preset)
    if not p.is_file():
        return None
    try:
        d = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError):
        return "invalid"
    if "layers" in d:
        return "stack"
    if "kappa_s" in d:
        return "params"
    return "invalid"


def validate(config: RunConfig):
    """Violations of ``config``, each naming the field and its bound; empty when valid."""
    c = config
    out = []
    if c.command not in COMMANDS:
        out.append(f"command: must be one of {', '.join(COMMANDS)}, got {c.command!r}")
    kind = _preset_kind(c.preset)
    if kind is None:
        out.append(f"preset: must be {' or '.join(PRESETS)} or an existing JSON file, got {c.preset!r}")
    elif kind == "invalid":
        out.append(f"preset: {c.preset!r} is neither a layer stack (has 'layers') nor a parameter set (has 'kappa_s')")
    needs_stack = c.command in ("modes", "dispersion", "sensitivity", "dgd_map") or c.params_source == "solver"
    if kind == "params" and needs_stack:
        out.append(f"preset: command {c.command!r} needs a layer stack, got a parameter file")
    if kind == "stack" and not needs_stack:
        out.append("params_source: a layer-stack preset requires params_source='solver'")
    if c.params_source not in ("preset", "solver"):
        out.append(f"params_source: must be 'preset' or 'solver', got {c.params_source!r}")
    for name in ("pump_fwhm_mode", "filter_fwhm_mode"):
        if getattr(c, name) not in FWHM_MODES:
            out.append(f"{name}: must be one of {', '.join(FWHM_MODES)}, got {getattr(c, name)!r}")
    for name in ("signal_pol", "pump_pol"):
        if getattr(c, name) not in ("TE", "TM"):
            out.append(f"{name}: must be 'TE' or 'TM', got {getattr(c, name)!r}")
    for name in ("pump_fwhm", "filter_fwhm", "grid_half_width", "tau_step", "wavelength", "guess", "half_span"):
        if not getattr(c, name) > 0:
            out.append(f"{name}: must be > 0, got {getattr(c, name)}")
    if int(c.grid_n) != c.grid_n or c.grid_n < 64 or c.grid_n % 2:
        out.append(f"grid_n: must be an even integer >= 64, got {c.grid_n}")
    if not c.tau_max > c.tau_min:
        out.append(f"tau_max: must exceed tau_min ({c.tau_min}), got {c.tau_max}")
    if c.tau_n < 2:
        out.append(f"tau_n: must be >= 2, got {c.tau_n}")
    lo, hi = PUMP_WINDOW
    for name in ("pump", "pump_min", "pump_max"):
        v = getattr(c, name)
        if v is not None and not lo <= v <= hi:
            out.append(f"{name}: must lie in [{lo}, {hi}] nm, got {v}")
    if c.pump_n < 1:
        out.append(f"pump_n: must be >= 1, got {c.pump_n}")
    if len(c.separations) != 3:
        out.append(f"separations: must be [start, stop, step], got {c.separations}")
    else:
        start, stop, step = c.separations
        if start < 0 or not step > 0 or stop < start:
            out.append(f"separations: need 0 <= start <= stop and step > 0, got {c.separations}")
    if c.filter_centers is not None:
        if len(c.filter_centers) != 2 or min(c.filter_centers) <= 0:
            out.append(f"filter_centers: must be two positive wavelengths, got {c.filter_centers}")
        elif c.pump is None:
            out.append("filter_centers: explicit centers need an explicit pump wavelength")
        else:
            err = FilterSpec(*c.filter_centers).conservation_error(c.pump)
            if err > 1e-9:
                out.append(f"filter_centers: violate energy conservation 1/center_1 + 1/center_2 = 1/pump "
                           f"(relative error {err:.2e} > 1e-9)")
    if c.sensitivity_case not in ("relative", "fabrication"):
        out.append(f"sensitivity_case: must be 'relative' or 'fabrication', got {c.sensitivity_case!r}")
    for name in ("al_core", "al_graded"):
        r = getattr(c, name)
        if len(r) != 2 or not all(0 <= v <= 1 for v in r):
            out.append(f"{name}: must be [lo, hi] within [0, 1], got {r}")
    if c.map_n < 1:
        out.append(f"map_n: must be >= 1, got {c.map_n}")
    return out


# ---------------------------------------------------------------------------
# input resolution


def load_stack_input(preset) -> LayerStack:
    return preset_stack(preset) if preset in PRESETS else load_stack(preset)


def load_params_input(config: RunConfig) -> PhasematchParams:
    if config.params_source == "solver":
        stack = load_stack_input(config.preset)
        _, td = find_degeneracy(stack, config.guess, conventions=config.conventions())
        return extract_jsa_params(td, stack.length, name=stack.name)
    return preset_params(config.preset) if config.preset in PRESETS else load_params(config.preset)


def output_dir(config: RunConfig) -> Path:
    d = Path(config.output or os.environ.get(OUTPUT_DIR_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def metadata(config: RunConfig, **extra):
    c = config
    return {
        "artifact": "brwpdc",
        "version": __version__,
        "command": c.command,
        "preset": c.preset,
        "conventions": {
            "pump_fwhm_mode": c.pump_fwhm_mode,
            "filter_fwhm_mode": c.filter_fwhm_mode,
            "signal_pol": c.signal_pol,
            "idler_pol": c.conventions().idler_pol.value,
            "pump_pol": c.pump_pol,
            "ridge": c.ridge,
            "params_source": c.params_source,
        },
        "config": c.to_dict(),
        **extra,
    }


def _pump(config: RunConfig, p: PhasematchParams):
    wl = config.pump if config.pump is not None else p.lambda_d / 2
    return PumpSpec(wl, config.pump_fwhm, config.pump_fwhm_mode)


# ---------------------------------------------------------------------------
# commands


def cmd_modes(c: RunConfig, out: Path):
    stack = load_stack_input(c.preset)
    rows = []
    for pol in (Polarization.TE, Polarization.TM):
        for wl in (c.wavelength, c.wavelength / 2):
            for m in find_guided_modes(stack, wl, pol):
                rows.append((wl, pol.value, m.n_eff, m.mode_class.value))
    path = out / f"modes_{stack.name}.csv"
    with open(path, "w") as fh:
        write_json_header(fh, metadata(c))
        fh.write("wavelength_nm,polarization,n_eff,mode_class\n")
        for wl, pol, n, cls in rows:
            fh.write(f"{wl:.6f},{pol},{n:.10f},{cls}\n")
    return [path]


def cmd_dispersion(c: RunConfig, out: Path):
    stack = load_stack_input(c.preset)
    lam_d, td = find_degeneracy(stack, c.guess, half_span=c.half_span, conventions=c.conventions())
    p = extract_jsa_params(td, stack.length, name=stack.name)
    ng = {"signal": group_index(td.signal, lam_d), "idler": group_index(td.idler, lam_d),
          "pump": group_index(td.pump, lam_d / 2)}
    meta = metadata(c, lambda_d_nm=lam_d, group_index=ng, params=p.to_dict())
    path = out / f"dispersion_{stack.name}.csv"
    with open(path, "w") as fh:
        write_json_header(fh, meta)
        fh.write("mode,wavelength_nm,n_eff\n")
        for name, curve in (("signal", td.signal), ("idler", td.idler), ("pump", td.pump)):
            for wl, n in zip(curve.wavelengths, curve.n):
                fh.write(f"{name},{wl:.6f},{n:.10f}\n")
    ppath = out / f"params_{stack.name}.json"
    save_params(p, ppath)
    return [path, ppath]


def cmd_sensitivity(c: RunConfig, out: Path):
    stack = load_stack_input(c.preset)
    if c.sensitivity_case == "relative":
        kw = dict(thickness_delta=0.01, al_delta=0.01, al_mode="relative")
    else:
        kw = dict(thickness_delta=0.05, al_delta=0.02, al_mode="absolute")
    base, rows = sensitivity_table(stack, guess=c.guess, conventions=c.conventions(), **kw)
    path = out / f"sensitivity_{stack.name}_{c.sensitivity_case}.csv"
    write_sensitivity_csv(rows, path, metadata(c, lambda_d_nm=base, perturbation=kw))
    return [path]


def cmd_dgd_map(c: RunConfig, out: Path):
    stack = load_stack_input(c.preset)
    x_core, x_grad, vals = dgd_map(stack, tuple(c.al_core), tuple(c.al_graded), c.map_n,
                                   wavelength=c.wavelength, conventions=c.conventions())
    path = out / f"dgd_map_{stack.name}.csv"
    write_dgd_map_csv(x_core, x_grad, vals, path, metadata(c))
    return [path]


def cmd_jsa(c: RunConfig, out: Path):
    p = load_params_input(c)
    jsa = build_jsa(p, _pump(c, p), c.grid())
    meta = metadata(c)
    paths = [out / f"jsa_{p.name}.csv", out / f"marginals_{p.name}.csv", out / f"jsa_{p.name}.json"]
    export_jsa_csv(jsa, paths[0], meta)
    export_marginals_csv(jsa, paths[1], meta)
    export_header_json(jsa, paths[2], meta)
    return paths


def cmd_hom(c: RunConfig, out: Path):
    p = load_params_input(c)
    pump = _pump(c, p)
    jsa = build_jsa(p, pump, c.grid())
    scan = hom_scan(jsa, c.tau_min, c.tau_max, c.tau_n, c.tau_step)
    path = out / f"hom_{p.name}_{pump.central_wavelength:.2f}.csv"
    write_scan_csv(scan, path, metadata(c, **jsa.header()))
    return [path]


def cmd_pump_sweep(c: RunConfig, out: Path):
    p = load_params_input(c)
    center = p.lambda_d / 2
    lo = c.pump_min if c.pump_min is not None else center - 1.0
    hi = c.pump_max if c.pump_max is not None else center + 1.0
    tau_c, rows = pump_detuning_sweep(p, np.linspace(lo, hi, c.pump_n), c.pump_fwhm, grid=c.grid(),
                                      fwhm_mode=c.pump_fwhm_mode, tau_range=(c.tau_min, c.tau_max))
    path = out / f"pump_sweep_{p.name}.csv"
    write_sweep_csv(rows, tau_c, path, metadata(c, params=p.to_dict()))
    return [path]


def cmd_entangle(c: RunConfig, out: Path):
    p = load_params_input(c)
    pump = _pump(c, p)
    meta = metadata(c, params=p.to_dict(), pump_nm=pump.central_wavelength)
    if c.filter_centers is not None:
        filt = FilterSpec(*c.filter_centers, c.filter_fwhm, c.filter_fwhm_mode)
        jsa = build_jsa(p, pump, c.grid())
        rho = density_matrix(*filtered_amplitudes(jsa, filt, DichroicSpec(2 * pump.central_wavelength)))
        path = out / f"entangle_{p.name}_point.json"
        path.write_text(json.dumps({**meta, "alpha": rho.alpha, "beta": rho.beta, "absD": abs(rho.D),
                                    "argD_rad": abs(float(np.angle(rho.D))),
                                    "concurrence": rho.concurrence}, indent=2, sort_keys=True) + "\n")
        return [path]
    rows = band_separation_sweep(p, separation_values(c.separations), c.filter_fwhm, pump, c.grid(),
                                 c.filter_fwhm_mode)
    path = out / f"entangle_{p.name}.csv"
    write_separation_csv(rows, path, meta)
    return [path]


HANDLERS = {
    "modes": cmd_modes,
    "dispersion": cmd_dispersion,
    "sensitivity": cmd_sensitivity,
    "dgd_map": cmd_dgd_map,
    "jsa": cmd_jsa,
    "hom": cmd_hom,
    "pump_sweep": cmd_pump_sweep,
    "entangle": cmd_entangle,
}


def run(config: RunConfig):
    """Validate and execute one command; returns (exit code, written paths)."""
    problems = validate(config)
    if problems:
        for msg in problems:
            print(f"config error: {msg}", file=sys.stderr)
        return 1, []
    try:
        paths = HANDLERS[config.command](config, output_dir(config))
    except (SolverError, PhasematchError, MaterialDomainError, ValueError, KeyError) as exc:
        print(f"{config.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2, []
    for p in paths:
        print(p)
    return 0, paths


# ---------------------------------------------------------------------------
# argument parsing


def _range3(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
    try:
        return [float(v) for v in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric range {text!r}") from None


def _pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    try:
        return [float(v) for v in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric pair {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="brwpdc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; command-line flags override its fields")
    common.add_argument("--preset", help="graded, m_core, or a JSON stack/parameter file")
    common.add_argument("--output", "-o", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    common.add_argument("--signal-pol", dest="signal_pol", choices=("TE", "TM"))
    common.add_argument("--pump-pol", dest="pump_pol", choices=("TE", "TM"))
    common.add_argument("--no-ridge", dest="ridge", action="store_false", default=None,
                        help="slab-only dispersion without the lateral correction")
    common.add_argument("-v", "--verbose", action="store_true")

    spectral = argparse.ArgumentParser(add_help=False)
    spectral.add_argument("--pump", type=float, help="pump central wavelength in nm")
    spectral.add_argument("--pump-fwhm", dest="pump_fwhm", type=float, help="pump FWHM in nm")
    spectral.add_argument("--pump-fwhm-mode", dest="pump_fwhm_mode", choices=FWHM_MODES)
    spectral.add_argument("--params-source", dest="params_source", choices=("preset", "solver"))
    spectral.add_argument("--grid-half-width", dest="grid_half_width", type=float, help="rad/fs")
    spectral.add_argument("--grid-n", dest="grid_n", type=int)
    spectral.add_argument("--guess", type=float, help="degeneracy search start (nm), solver source")

    delay = argparse.ArgumentParser(add_help=False)
    delay.add_argument("--tau-min", dest="tau_min", type=float, help="fs")
    delay.add_argument("--tau-max", dest="tau_max", type=float, help="fs")
    delay.add_argument("--tau-n", dest="tau_n", type=int)
    delay.add_argument("--tau-step", dest="tau_step", type=float, help="fs, optimum search step")

    p = sub.add_parser("modes", parents=[common], help="guided modes at a wavelength and its half")
    p.add_argument("--wavelength", type=float)
    p = sub.add_parser("dispersion", parents=[common], help="mode curves, degeneracy and JSA parameters")
    p.add_argument("--guess", type=float)
    p.add_argument("--half-span", dest="half_span", type=float)
    p = sub.add_parser("sensitivity", parents=[common], help="degeneracy shift per layer perturbation")
    p.add_argument("--guess", type=float)
    p.add_argument("--case", dest="sensitivity_case", choices=("relative", "fabrication"))
    p = sub.add_parser("dgd_map", parents=[common], help="DGD over core and graded-reflector Al content")
    p.add_argument("--al-core", dest="al_core", type=_pair, help="lo,hi")
    p.add_argument("--al-graded", dest="al_graded", type=_pair, help="lo,hi")
    p.add_argument("--map-n", dest="map_n", type=int)
    p.add_argument("--wavelength", type=float)
    sub.add_parser("jsa", parents=[common, spectral], help="joint spectral amplitude and marginals")
    sub.add_parser("hom", parents=[common, spectral, delay], help="two-photon interference delay scan")
    p = sub.add_parser("pump_sweep", parents=[common, spectral, delay], help="overlap versus pump wavelength")
    p.add_argument("--pump-min", dest="pump_min", type=float)
    p.add_argument("--pump-max", dest="pump_max", type=float)
    p.add_argument("--pump-n", dest="pump_n", type=int)
    p = sub.add_parser("entangle", parents=[common, spectral], help="density matrix versus band separation")
    p.add_argument("--separations", type=_range3, help="start:stop:step in nm")
    p.add_argument("--filter-fwhm", dest="filter_fwhm", type=float, help="nm")
    p.add_argument("--filter-fwhm-mode", dest="filter_fwhm_mode", choices=FWHM_MODES)
    p.add_argument("--filter-centers", dest="filter_centers", type=_pair,
                   help="center_1,center_2 in nm for a single evaluation")
    return parser


def config_from_args(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config!r}: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config: top level must be a JSON object")
    skip = {"config", "verbose"}
    overrides = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    merged = {**base, **overrides}
    try:
        return RunConfig.from_dict(merged)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here those are configuration errors
        return 1 if exc.code else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    code, _ = run(config)
    return code


if __name__ == "__main__":
    sys.exit(main())
