"""Phasematching and group-index analysis of the three interacting modes."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .material import DEFAULT_MODEL, MaterialModel, DispersionCurve
from .multilayer import (
    SCAN_STEP,
    LayerStack,
    ModeClass,
    ModeSolution,
    Polarization,
    SolverError,
    classify_mode,
    find_guided_modes,
    lateral_index,
    select_mode,
    slab_field,
    slab_from_stack,
    slab_roots,
)
from .units import C_NM_PER_FS, C_UM_PER_FS, omega_from_wavelength, wavelength_from_omega

log = logging.getLogger(__name__)

FD_STEP_NM = 1.0  # wavelength step behind every finite difference
PUMP_WINDOW = (750.0, 800.0)


class PhasematchError(ValueError):
    pass


@dataclass(frozen=True)
class Conventions:
    """Which physical mode plays which role."""

    signal_pol: Polarization = Polarization.TE
    pump_pol: Polarization = Polarization.TE
    ridge: bool = True  # apply the effective-index ridge correction

    @property
    def idler_pol(self):
        return Polarization.TM if Polarization(self.signal_pol) is Polarization.TE else Polarization.TE


@dataclass(frozen=True)
class TripletDispersion:
    signal: DispersionCurve
    idler: DispersionCurve
    pump: DispersionCurve


@dataclass(frozen=True)
class PhasematchParams:
    """Taylor coefficients of the phase mismatch around degeneracy.

    kappa in fs/um, K in fs^2/um, lambda_d in nm, length in um.
    """

    kappa_s: float
    kappa_i: float
    K_s: float
    K_i: float
    K_p: float
    lambda_d: float
    length: float
    name: str = ""

    def __post_init__(self):
        if not self.lambda_d > 0:
            raise ValueError(f"lambda_d must be positive, got {self.lambda_d}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def omega0_s(self):
        return float(omega_from_wavelength(self.lambda_d))

    @property
    def omega0_i(self):
        return float(omega_from_wavelength(self.lambda_d))

    @property
    def omega0_p(self):
        return float(omega_from_wavelength(self.lambda_d / 2.0))

    def swapped(self):
        """Parameters with the roles of signal and idler exchanged."""
        return replace(self, kappa_s=self.kappa_i, kappa_i=self.kappa_s, K_s=self.K_i, K_i=self.K_s)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        keys = {"kappa_s", "kappa_i", "K_s", "K_i", "K_p", "lambda_d", "length", "name"}
        return cls(**{k: v for k, v in d.items() if k in keys})


def load_params(path):
    return PhasematchParams.from_dict(json.loads(Path(path).read_text()))


def save_params(params: PhasematchParams, path):
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def preset_params(name):
    """Reference JSA parameter sets ``graded`` and ``m_core`` shipped with the package."""
    fname = {"graded": "graded_params.json", "m_core": "m_core_params.json"}.get(name)
    if fname is None:
        raise KeyError(f"unknown parameter preset {name!r}; expected 'graded' or 'm_core'")
    with resources.as_file(resources.files("brwpdc") / "data" / fname) as p:
        return load_params(p)


# ---------------------------------------------------------------------------
# curve calculus


def _omega_spline(curve: DispersionCurve):
    w = omega_from_wavelength(curve.wavelengths)[::-1]
    return CubicSpline(w, curve.n[::-1])


def index_at(curve: DispersionCurve, wavelength):
    lo, hi = curve.span
    wl = np.asarray(wavelength, dtype=float)
    if np.any(wl < lo - 1e-9) or np.any(wl > hi + 1e-9):
        raise PhasematchError(f"wavelength {wavelength} outside curve {curve.label!r} span [{lo}, {hi}] nm")
    if len(curve) == 1:
        return np.full(wl.shape, curve.n[0]) if wl.ndim else float(curve.n[0])
    out = _omega_spline(curve)(omega_from_wavelength(wl))
    return float(out) if np.ndim(out) == 0 else out


def _omega_step(wavelength, step_nm):
    """Angular-frequency step corresponding to ``step_nm`` at ``wavelength``."""
    return 2.0 * np.pi * C_NM_PER_FS * step_nm / wavelength**2


def _fd_window_ok(curve, wavelength, h_omega, reach):
    w0 = omega_from_wavelength(wavelength)
    lo, hi = curve.span
    return (wavelength_from_omega(w0 + reach * h_omega) >= lo - 1e-9
            and wavelength_from_omega(w0 - reach * h_omega) <= hi + 1e-9)


def group_index(curve: DispersionCurve, wavelength, step_nm=FD_STEP_NM):
    """n + w dn/dw by a central difference on the frequency axis."""
    h = _omega_step(wavelength, step_nm)
    if len(curve) < 3 or not _fd_window_ok(curve, wavelength, h, 1):
        raise PhasematchError(
            f"group index at {wavelength} nm needs samples on both sides within curve span {curve.span}"
        )
    w0 = omega_from_wavelength(wavelength)
    s = _omega_spline(curve)
    dn = (s(w0 + h) - s(w0 - h)) / (2 * h)
    return float(s(w0) + w0 * dn)


def group_index_slope(curve: DispersionCurve, wavelength, step_nm=FD_STEP_NM):
    """d(group index)/dw in fs, central differences with the same step."""
    h = _omega_step(wavelength, step_nm)
    if len(curve) < 3 or not _fd_window_ok(curve, wavelength, h, 2):
        raise PhasematchError(f"group-index slope at {wavelength} nm needs a wider curve span {curve.span}")
    w0 = omega_from_wavelength(wavelength)
    ng_plus = group_index(curve, float(wavelength_from_omega(w0 + h)), step_nm)
    ng_minus = group_index(curve, float(wavelength_from_omega(w0 - h)), step_nm)
    return (ng_plus - ng_minus) / (2 * h)


def dgd(ng_s, ng_i, length):
    """Average differential group delay in fs for a length in um."""
    if not length > 0:
        raise ValueError(f"length must be positive, got {length}")
    return length / (2.0 * C_UM_PER_FS) * abs(ng_s - ng_i)


def _mismatch(td: TripletDispersion, wavelength):
    """n_p(l/2)/(l/2) - (n_s(l) + n_i(l))/l  (1/nm)."""
    return (index_at(td.pump, wavelength / 2) / (wavelength / 2)
            - (index_at(td.signal, wavelength) + index_at(td.idler, wavelength)) / wavelength)


def _common_window(td: TripletDispersion):
    lo = max(td.signal.span[0], td.idler.span[0], 2 * td.pump.span[0])
    hi = min(td.signal.span[1], td.idler.span[1], 2 * td.pump.span[1])
    if not hi > lo:
        raise PhasematchError("signal/idler curves and the doubled pump curve do not overlap")
    return lo, hi


def degeneracy_wavelength(td: TripletDispersion, xtol=1e-6):
    """Wavelength where signal = idler = twice the pump wavelength is phasematched."""
    lo, hi = _common_window(td)
    grid = np.linspace(lo, hi, max(int((hi - lo) / 0.5), 2) + 1)
    f = np.array([_mismatch(td, w) for w in grid])
    flips = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]
    if flips.size == 0:
        raise PhasematchError(f"no phasematching in range [{lo:.2f}, {hi:.2f}] nm")
    if flips.size > 1:
        log.warning("%d phasematching crossings in range; using the first", flips.size)
    i = flips[0]
    if f[i] == 0:
        return float(grid[i])
    return float(brentq(lambda w: _mismatch(td, w), grid[i], grid[i + 1], xtol=xtol))


def phasematched_triplets(td: TripletDispersion, pump_wavelength):
    """All (signal, idler) wavelength pairs phasematched for one pump wavelength."""
    lo_p, hi_p = td.pump.span
    if not lo_p <= pump_wavelength <= hi_p:
        raise PhasematchError(f"pump wavelength {pump_wavelength} nm outside pump curve [{lo_p}, {hi_p}]")
    wp = float(omega_from_wavelength(pump_wavelength))
    kp = index_at(td.pump, pump_wavelength) * wp
    s_lo, s_hi = td.signal.span
    i_lo, i_hi = td.idler.span
    # signal frequency range that keeps both photons on their curves
    w_lo = max(float(omega_from_wavelength(s_hi)), wp - float(omega_from_wavelength(i_lo)))
    w_hi = min(float(omega_from_wavelength(s_lo)), wp - float(omega_from_wavelength(i_hi)))
    if not w_hi > w_lo:
        raise PhasematchError("signal and idler curves cannot both be reached for this pump")

    def g(ws):
        wi = wp - ws
        return (index_at(td.signal, float(wavelength_from_omega(ws))) * ws
                + index_at(td.idler, float(wavelength_from_omega(wi))) * wi - kp)

    grid = np.linspace(w_lo, w_hi, 2001)
    vals = np.array([g(w) for w in grid])
    out = []
    for j in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        ws = grid[j] if vals[j] == 0 else brentq(g, grid[j], grid[j + 1], xtol=1e-14)
        lam_s = float(wavelength_from_omega(ws))
        lam_i = 1.0 / (1.0 / pump_wavelength - 1.0 / lam_s)
        out.append((lam_s, lam_i))
    if not out:
        raise PhasematchError(f"no phasematched signal/idler pair for pump {pump_wavelength} nm")
    return sorted(set(out))


def phasematched_triplet(td: TripletDispersion, pump_wavelength):
    """The phasematched pair closest to degeneracy for this pump wavelength."""
    pairs = phasematched_triplets(td, pump_wavelength)
    return min(pairs, key=lambda p: abs(p[0] - p[1]))


def extract_jsa_params(td: TripletDispersion, length, step_nm=FD_STEP_NM, name=""):
    """kappa and K coefficients at the degeneracy point of ``td``."""
    lam_d = degeneracy_wavelength(td)
    lam_p = lam_d / 2
    ng_p = group_index(td.pump, lam_p, step_nm)
    kappa_s = (group_index(td.signal, lam_d, step_nm) - ng_p) / C_UM_PER_FS
    kappa_i = (group_index(td.idler, lam_d, step_nm) - ng_p) / C_UM_PER_FS
    K_s = group_index_slope(td.signal, lam_d, step_nm) / C_UM_PER_FS
    K_i = group_index_slope(td.idler, lam_d, step_nm) / C_UM_PER_FS
    K_p = group_index_slope(td.pump, lam_p, step_nm) / C_UM_PER_FS
    return PhasematchParams(kappa_s, kappa_i, K_s, K_i, K_p, lam_d, float(length), name=name)


# ---------------------------------------------------------------------------
# solver-driven curves


def _track(stack, wavelengths, pol, mode_class, model, scan_step):
    """Vertical-slab index of one mode along a wavelength grid.

    The mode is identified by class at the first grid point, then followed by
    searching a narrow window around the linearly extrapolated index. When the
    followed root loses its class, a full solve looks for a same-class mode near
    the prediction; if there is none the track ends early and the shorter
    array is returned.
    """
    out = []
    for wl in wavelengths:
        m = None
        guess = width = None
        if out:
            guess = out[-1] if len(out) < 2 else 2 * out[-1] - out[-2]
            width = max(2e-3, 4 * abs(out[-1] - out[-2])) if len(out) > 1 else 5e-3
            slab = slab_from_stack(stack, wl, pol, model)
            lo, hi = slab.bracket
            roots = slab_roots(slab, max(guess - width, lo + 1e-9), min(guess + width, hi - 1e-9), scan_step)
            if roots.size:
                n = float(roots[np.argmin(np.abs(roots - guess))])
                y, psi = slab_field(slab, n)
                cand = ModeSolution(n, Polarization(pol), float(wl), y, psi)
                if classify_mode(cand, stack, model) == ModeClass(mode_class):
                    m = cand
        if m is None:
            same = [c for c in find_guided_modes(stack, wl, pol, scan_step=scan_step, model=model)
                    if c.mode_class == ModeClass(mode_class)]
            if guess is not None:
                same = [c for c in same if abs(c.n_eff - guess) < 5 * width]
                same.sort(key=lambda c: abs(c.n_eff - guess))
            if not same:
                if not out:
                    raise SolverError(
                        f"no {ModeClass(mode_class).value} {Polarization(pol).value} mode at {wl:g} nm"
                    )
                log.warning("%s %s mode lost at %g nm; curve truncated",
                            ModeClass(mode_class).value, Polarization(pol).value, wl)
                break
            m = same[0]
        out.append(m.n_eff)
    return np.array(out)


def _etched_index(stack, wl, pol, mode_class, n_ridge, model, scan_step):
    """Side-region index for the lateral slab: same-class mode of the etched stack, else substrate."""
    etched = stack.etched(stack.etch_depth * 1e3)
    if etched is not None:
        modes = [m for m in find_guided_modes(etched, wl, pol, scan_step=scan_step, model=model)
                 if m.n_eff < n_ridge]
        m = select_mode(modes, mode_class)
        if m is not None:
            return m.n_eff
    return stack.indices(wl, model)[1]


def mode_index_curve(stack: LayerStack, wavelengths, pol, mode_class, ridge=True,
                     model: MaterialModel = DEFAULT_MODEL, scan_step=SCAN_STEP, label="", start=None):
    """DispersionCurve of one guided mode, optionally with the ridge correction.

    Tracking starts at ``start`` (default: the middle of the grid) and runs
    outward in both directions, so the mode class is fixed where the mode is
    best defined. The curve can come back shorter than the grid when the
    mode stops being guided or changes character.
    """
    wavelengths = np.asarray(wavelengths, dtype=float)
    mid = len(wavelengths) // 2 if start is None else int(np.argmin(np.abs(wavelengths - start)))
    up = _track(stack, wavelengths[mid:], pol, mode_class, model, scan_step)
    down = _track(stack, wavelengths[:mid + 1][::-1], pol, mode_class, model, scan_step)[::-1]
    wl = wavelengths[mid + 1 - len(down):mid + len(up)]
    n = np.concatenate([down[:-1], up])
    if ridge:
        lateral = Polarization.TM if Polarization(pol) is Polarization.TE else Polarization.TE
        n = np.array([
            lateral_index(nv, _etched_index(stack, w, pol, mode_class, nv, model, scan_step),
                          stack.ridge_width * 1e3, w, lateral)
            for w, nv in zip(wl, n)
        ])
    return DispersionCurve(wl, n, label=label or f"{Polarization(pol).value}/{ModeClass(mode_class).value}")


def triplet_dispersion(stack: LayerStack, center=1550.0, half_span=150.0, step=1.0,
                       conventions: Conventions = Conventions(), model: MaterialModel = DEFAULT_MODEL,
                       pump_step=None):
    """Solve signal, idler and pump curves around ``center`` (nm).

    The pump curve covers half the signal window, clipped to the pump
    validity window of the material model, and may end early where the
    Bragg mode ceases to exist.
    """
    wl = np.arange(center - half_span, center + half_span + 0.5 * step, step)
    pump_step = step / 2 if pump_step is None else pump_step
    p_lo = max(wl[0] / 2, PUMP_WINDOW[0])
    p_hi = min(wl[-1] / 2, PUMP_WINDOW[1])
    wl_p = np.arange(p_lo, p_hi + 0.5 * pump_step, pump_step)
    c = conventions
    sig = mode_index_curve(stack, wl, c.signal_pol, ModeClass.TIR_FUNDAMENTAL, c.ridge, model,
                           label="signal", start=center)
    idl = mode_index_curve(stack, wl, c.idler_pol, ModeClass.TIR_FUNDAMENTAL, c.ridge, model,
                           label="idler", start=center)
    pmp = mode_index_curve(stack, wl_p, c.pump_pol, ModeClass.BRAGG, c.ridge, model,
                           label="pump", start=center / 2)
    return TripletDispersion(sig, idl, pmp)


def find_degeneracy(stack: LayerStack, guess=1550.0, half_span=8.0, step=1.0,
                    conventions: Conventions = Conventions(), model: MaterialModel = DEFAULT_MODEL,
                    max_span=150.0):
    """Solve curves around ``guess`` and return (lambda_d, TripletDispersion).

    The window is doubled until it brackets the degeneracy or exceeds ``max_span``.
    """
    span = half_span
    while True:
        td = triplet_dispersion(stack, guess, span, step, conventions, model)
        try:
            return degeneracy_wavelength(td), td
        except PhasematchError:
            if span >= max_span:
                raise
            span = min(2 * span, max_span)


def pipeline_params(stack: LayerStack, guess=1550.0, conventions: Conventions = Conventions(),
                    model: MaterialModel = DEFAULT_MODEL, name=""):
    """JSA parameters of a layer stack via the mode solver."""
    _, td = find_degeneracy(stack, guess, conventions=conventions, model=model)
    return extract_jsa_params(td, stack.length, name=name or stack.name)


# ---------------------------------------------------------------------------
# layer sensitivity and DGD maps

#: the eight rows of the sensitivity table: (label, group, field)
SENSITIVITY_ROWS = (
    ("ML thickness", "matching", "thickness"),
    ("ML Al content", "matching", "al_fraction"),
    ("CL thickness", "core", "thickness"),
    ("CL Al content", "core", "al_fraction"),
    ("Type 1 DBR thickness", "dbr1", "thickness"),
    ("Type 1 DBR Al content", "dbr1", "al_fraction"),
    ("Type 2 DBR thickness", "dbr2", "thickness"),
    ("Type 2 DBR Al content", "dbr2", "al_fraction"),
)


def perturb_stack(stack: LayerStack, group, field, delta, al_mode="relative"):
    """Copy of ``stack`` with one layer group changed.

    Thickness is always scaled by (1 + delta). The Al fraction is scaled by
    (1 + delta) for ``al_mode="relative"`` or shifted by ``delta`` (a fraction,
    so 0.02 is two percentage points) for ``al_mode="absolute"``.
    """
    if group not in stack.groups:
        raise ValueError(f"stack {stack.name!r} has no layer group {group!r}")
    if field not in ("thickness", "al_fraction"):
        raise ValueError(f"field must be 'thickness' or 'al_fraction', got {field!r}")
    if al_mode not in ("relative", "absolute"):
        raise ValueError(f"al_mode must be 'relative' or 'absolute', got {al_mode!r}")
    layers = []
    for lyr in stack.layers:
        if lyr.group == group:
            if field == "thickness":
                lyr = replace(lyr, thickness=lyr.thickness * (1 + delta))
            elif al_mode == "relative":
                lyr = replace(lyr, al_fraction=lyr.al_fraction * (1 + delta))
            else:
                lyr = replace(lyr, al_fraction=lyr.al_fraction + delta)
        layers.append(lyr)
    return stack.with_layers(layers)


def sensitivity_sweep(stack: LayerStack, group, field, delta, al_mode="relative", guess=1550.0,
                      conventions: Conventions = Conventions(), model: MaterialModel = DEFAULT_MODEL,
                      base=None):
    """Signed shift of the degeneracy wavelength (nm) for one perturbed layer group."""
    if delta == 0:
        return 0.0
    if base is None:
        base, _ = find_degeneracy(stack, guess, conventions=conventions, model=model)
    shifted, _ = find_degeneracy(perturb_stack(stack, group, field, delta, al_mode), base,
                                 conventions=conventions, model=model)
    return shifted - base


@dataclass(frozen=True)
class SensitivityRow:
    label: str
    group: str
    field: str
    delta: float
    shift_nm: float


def sensitivity_table(stack: LayerStack, thickness_delta=0.01, al_delta=0.01, al_mode="relative",
                      guess=1550.0, conventions: Conventions = Conventions(),
                      model: MaterialModel = DEFAULT_MODEL, rows=SENSITIVITY_ROWS):
    """Shift of the degeneracy wavelength for each row of ``rows``.

    Defaults give +1 % relative changes. Fabrication-tolerance style tables
    use ``thickness_delta=0.05, al_delta=0.02, al_mode="absolute"``.
    """
    base, _ = find_degeneracy(stack, guess, conventions=conventions, model=model)
    out = []
    for label, group, field in rows:
        if group not in stack.groups:
            continue
        delta = thickness_delta if field == "thickness" else al_delta
        shift = sensitivity_sweep(stack, group, field, delta, al_mode, conventions=conventions,
                                  model=model, base=base)
        out.append(SensitivityRow(label, group, field, delta, shift))
    return base, out


def group_indices_at(stack: LayerStack, wavelength=1550.0, conventions: Conventions = Conventions(),
                     model: MaterialModel = DEFAULT_MODEL, half_span=3.0):
    """Group indices of signal and idler at one wavelength."""
    wl = np.arange(wavelength - half_span, wavelength + half_span + 0.5, 1.0)
    c = conventions
    sig = mode_index_curve(stack, wl, c.signal_pol, ModeClass.TIR_FUNDAMENTAL, c.ridge, model)
    idl = mode_index_curve(stack, wl, c.idler_pol, ModeClass.TIR_FUNDAMENTAL, c.ridge, model)
    return group_index(sig, wavelength), group_index(idl, wavelength)


def dgd_per_mm(ng_s, ng_i):
    return dgd(ng_s, ng_i, 1000.0)


def set_al_fraction(stack: LayerStack, groups, x):
    return stack.with_layers([replace(lyr, al_fraction=x) if lyr.group in groups else lyr
                              for lyr in stack.layers])


def dgd_map(stack: LayerStack, al_range_core, al_range_graded_dbr, grid_n, wavelength=1550.0,
            conventions: Conventions = Conventions(), model: MaterialModel = DEFAULT_MODEL,
            core_groups=("core",), graded_groups=("graded_dbr",)):
    """DGD per length (fs/mm) over core and graded-reflector Al contents.

    Rows follow the core axis, columns the graded-reflector axis; all graded
    layers move together. Cells where a mode cannot be found hold NaN.
    """
    if not (set(core_groups) & set(stack.groups)) or not (set(graded_groups) & set(stack.groups)):
        raise ValueError(f"stack {stack.name!r} lacks the {core_groups} or {graded_groups} layer groups")
    n_c, n_g = (grid_n, grid_n) if np.isscalar(grid_n) else grid_n
    x_core = _axis(al_range_core, n_c)
    x_grad = _axis(al_range_graded_dbr, n_g)
    out = np.full((len(x_core), len(x_grad)), np.nan)
    for a, xc in enumerate(x_core):
        for b, xg in enumerate(x_grad):
            st = set_al_fraction(set_al_fraction(stack, core_groups, xc), graded_groups, xg)
            try:
                out[a, b] = dgd_per_mm(*group_indices_at(st, wavelength, conventions, model))
            except (SolverError, PhasematchError, ValueError) as exc:
                log.info("dgd map cell (%g, %g) missing: %s", xc, xg, exc)
    return x_core, x_grad, out


def _axis(rng, n):
    lo, hi = rng
    if not (0 <= lo <= 1 and 0 <= hi <= 1):
        raise ValueError(f"Al range {rng} must lie within [0, 1]")
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n}")
    return np.array([lo]) if n == 1 else np.linspace(lo, hi, n)


def write_sensitivity_csv(rows, path, header: dict):
    from .jsa import write_json_header

    with open(path, "w") as fh:
        write_json_header(fh, header)
        fh.write("parameter,delta,shift_nm\n")
        for r in rows:
            fh.write(f"{r.label},{r.delta:.6g},{r.shift_nm:.6f}\n")


def write_dgd_map_csv(x_core, x_grad, values, path, header: dict):
    from .jsa import write_json_header

    with open(path, "w") as fh:
        write_json_header(fh, header)
        fh.write("al_core,al_dbr,dgd_fs_per_mm\n")
        for a, xc in enumerate(x_core):
            for b, xg in enumerate(x_grad):
                v = values[a, b]
                fh.write(f"{xc:.6g},{xg:.6g},{'' if np.isnan(v) else f'{v:.6f}'}\n")
