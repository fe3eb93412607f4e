"""Transfer-matrix mode solver for planar AlGaAs layer stacks.

Fields are written as psi(y) = E_x (TE) or H_x (TM).  Across every interface
psi and q = p * dpsi/dy are continuous, with p = 1 for TE and p = 1/n**2 for
TM.  Inside a layer with transverse wavenumber squared
k2 = k0**2 (n**2 - n_eff**2) the pair (psi, q) is propagated by the unimodular
matrix

    [[cos(kd),        sin(kd) / (k p)],
     [-k p sin(kd),   cos(kd)        ]]

which is evaluated through k2 only, so oscillatory (k2 > 0), evanescent
(k2 < 0) and cut-off (k2 = 0) layers share one code path.

Depth y is measured in nm downward from the top surface of the first listed
layer: the cap occupies y < 0 and the substrate lies below the last layer.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .material import DEFAULT_MODEL, MaterialModel, check_al_fraction

log = logging.getLogger(__name__)

ROOT_TOL = 1e-8
SCAN_STEP = 1e-4
_EDGE = 1e-9  # keep scans strictly inside the bound-mode bracket
GUIDE_GROUPS = ("core", "matching")


class Polarization(str, Enum):
    TE = "TE"
    TM = "TM"


class ModeClass(str, Enum):
    TIR_FUNDAMENTAL = "TIR_FUNDAMENTAL"
    BRAGG = "BRAGG"
    OTHER = "OTHER"


class SolverError(ValueError):
    pass


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class Layer:
    thickness: float  # nm
    al_fraction: float
    group: str = ""

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValueError(f"layer thickness must be positive, got {self.thickness}")
        check_al_fraction(self.al_fraction)


@dataclass(frozen=True)
class LayerStack:
    """Layers listed from the top (cap side) down to the substrate.

    ``substrate_al_fraction=None`` repeats the bottom-most layer;
    ``cap_al_fraction=None`` means air.
    """

    layers: tuple
    substrate_al_fraction: float | None = None
    cap_al_fraction: float | None = None
    ridge_width: float = 4.0  # um
    etch_depth: float = 3.3  # um
    length: float = 2000.0  # um
    name: str = "custom"

    def __post_init__(self):
        layers = tuple(lyr if isinstance(lyr, Layer) else Layer(**lyr) for lyr in self.layers)
        object.__setattr__(self, "layers", layers)
        if len(layers) < 3:
            raise ValueError(f"a stack needs at least 3 layers, got {len(layers)}")
        for name in ("ridge_width", "etch_depth", "length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("substrate_al_fraction", "cap_al_fraction"):
            if getattr(self, name) is not None:
                check_al_fraction(getattr(self, name))

    @property
    def thicknesses(self):
        return np.array([lyr.thickness for lyr in self.layers])

    @property
    def al_fractions(self):
        return np.array([lyr.al_fraction for lyr in self.layers])

    @property
    def groups(self):
        return [lyr.group for lyr in self.layers]

    @property
    def total_thickness(self):
        return float(self.thicknesses.sum())

    @property
    def substrate_x(self):
        if self.substrate_al_fraction is None:
            return self.layers[-1].al_fraction
        return self.substrate_al_fraction

    def interfaces(self):
        """Depths (nm) of all layer boundaries, starting with 0 at the top."""
        return np.concatenate([[0.0], np.cumsum(self.thicknesses)])

    def indices(self, wavelength, model: MaterialModel = DEFAULT_MODEL):
        """Return (layer indices, substrate index, cap index) at one wavelength."""
        xs = self.al_fractions
        uniq = np.unique(np.append(xs, self.substrate_x))
        table = {float(x): float(model.refractive_index(x, wavelength)) for x in uniq}
        n_layers = np.array([table[float(x)] for x in xs])
        n_sub = table[float(self.substrate_x)]
        if self.cap_al_fraction is None:
            n_cap = 1.0
        else:
            n_cap = float(model.refractive_index(self.cap_al_fraction, wavelength))
        return n_layers, n_sub, n_cap

    def with_layers(self, layers):
        return replace(self, layers=tuple(layers))

    def etched(self, depth_nm):
        """Stack left in the etched region: the top ``depth_nm`` removed, air above.

        Returns None when the etch reaches the substrate.
        """
        remaining = []
        removed = 0.0
        for lyr in self.layers:
            top, bottom = removed, removed + lyr.thickness
            removed = bottom
            if bottom <= depth_nm:
                continue
            cut = max(0.0, depth_nm - top)
            remaining.append(replace(lyr, thickness=lyr.thickness - cut))
        if not remaining:
            return None
        # keep the 3-layer minimum by splitting the last layer if needed
        while len(remaining) < 3:
            last = remaining.pop()
            half = replace(last, thickness=last.thickness / 2)
            remaining.extend([half, half])
        return replace(self, layers=tuple(remaining), cap_al_fraction=None,
                       substrate_al_fraction=self.substrate_x)

    def to_dict(self):
        return {
            "name": self.name,
            "layers": [
                {"thickness": lyr.thickness, "al_fraction": lyr.al_fraction, "group": lyr.group}
                for lyr in self.layers
            ],
            "substrate_al_fraction": self.substrate_al_fraction,
            "cap_al_fraction": self.cap_al_fraction,
            "ridge_width": self.ridge_width,
            "etch_depth": self.etch_depth,
            "length": self.length,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("description", None)
        d["layers"] = tuple(Layer(**lyr) for lyr in d["layers"])
        return cls(**d)


def expand_layers(blocks):
    """Expand ``{"repeat": n, "layers": [...]}`` blocks into a flat layer list."""
    out = []
    for block in blocks:
        if "repeat" in block:
            for _ in range(int(block["repeat"])):
                out.extend(expand_layers(block["layers"]))
        else:
            out.append(block)
    return out


def load_stack(path):
    """Read a LayerStack from JSON (repeat blocks allowed in ``layers``)."""
    d = json.loads(Path(path).read_text())
    d["layers"] = expand_layers(d["layers"])
    return LayerStack.from_dict(d)


def preset_stack(name):
    """The shipped ``graded`` and ``m_core`` layer stacks."""
    fname = {"graded": "graded_stack.json", "m_core": "m_core_stack.json"}.get(name)
    if fname is None:
        raise KeyError(f"unknown stack preset {name!r}; expected 'graded' or 'm_core'")
    with resources.as_file(resources.files("brwpdc") / "data" / fname) as p:
        return load_stack(p)


# ---------------------------------------------------------------------------
# slab kernel (plain index/thickness arrays)


@dataclass(frozen=True)
class Slab:
    """Planar index profile: interior layers between two semi-infinite media."""

    indices: np.ndarray
    thicknesses: np.ndarray  # nm
    n_sub: float
    n_cap: float
    wavelength: float  # nm
    pol: Polarization = Polarization.TE

    @property
    def k0(self):
        return 2.0 * np.pi / self.wavelength

    @property
    def bracket(self):
        """Open interval of n_eff that can host a bound mode."""
        return max(self.n_sub, self.n_cap), float(np.max(self.indices))

    def weight(self, n):
        return 1.0 if Polarization(self.pol) is Polarization.TE else 1.0 / np.asarray(n) ** 2


def slab_from_stack(stack: LayerStack, wavelength, pol, model: MaterialModel = DEFAULT_MODEL):
    n_layers, n_sub, n_cap = stack.indices(wavelength, model)
    return Slab(n_layers, stack.thicknesses, n_sub, n_cap, float(wavelength), Polarization(pol))


def _layer_matrix(k2, d, p):
    """Elements of the unimodular layer matrix for arrays of k2."""
    k2 = np.asarray(k2, dtype=float)
    arg2 = k2 * d * d
    pos = arg2 >= 0
    root = np.sqrt(np.abs(arg2))
    with np.errstate(over="ignore", invalid="ignore"):
        cos_ = np.where(pos, np.cos(root), np.cosh(root))
        small = root < 1e-8
        safe = np.where(small, 1.0, root)
        sinc = np.where(small, 1.0 - arg2 / 6.0,
                        np.where(pos, np.sin(safe) / safe, np.sinh(safe) / safe))
    m11 = cos_
    m12 = d * sinc / p
    m21 = -k2 * d * sinc * p
    return m11, m12, m21, cos_


def _propagate(slab: Slab, n_eff):
    """(psi, q) at the top surface, for unit substrate tail, plus the cap decay term."""
    n_eff = np.asarray(n_eff, dtype=float)
    k0 = slab.k0
    gamma_s = k0 * np.sqrt(n_eff**2 - slab.n_sub**2)
    psi = np.ones_like(n_eff)
    q = slab.weight(slab.n_sub) * gamma_s
    # substrate -> cap: iterate the listed (top-down) layers in reverse
    for n, d in zip(slab.indices[::-1], slab.thicknesses[::-1]):
        m11, m12, m21, m22 = _layer_matrix(k0**2 * (n**2 - n_eff**2), d, slab.weight(n))
        psi, q = m11 * psi + m12 * q, m21 * psi + m22 * q
        scale = np.maximum(np.abs(psi), np.abs(q))
        psi, q = psi / scale, q / scale
    gamma_c = k0 * np.sqrt(n_eff**2 - slab.n_cap**2)
    return psi, q, slab.weight(slab.n_cap) * gamma_c


def transfer_matrix(slab: Slab, n_eff):
    """Total 2x2 matrix mapping (psi, q) from the substrate side to the cap side."""
    k0 = slab.k0
    total = np.eye(2)
    for n, d in zip(slab.indices[::-1], slab.thicknesses[::-1]):
        m11, m12, m21, m22 = _layer_matrix(k0**2 * (n**2 - n_eff**2), d, slab.weight(n))
        total = np.array([[m11, m12], [m21, m22]], dtype=float) @ total
    return total


def slab_residual(slab: Slab, n_eff):
    """Normalized dispersion-relation residual in [-1, 1]; zero at a bound mode."""
    lo, hi = slab.bracket
    n_arr = np.asarray(n_eff, dtype=float)
    if np.any(n_arr <= lo) or np.any(n_arr >= hi):
        raise SolverError(
            f"n_trial must lie in the bound-mode bracket ({lo:.6f}, {hi:.6f}), got {n_eff}"
        )
    psi, q, cap = _propagate(slab, n_arr)
    r = (q + cap * psi) / (np.abs(q) + np.abs(cap * psi))
    return float(r) if np.ndim(r) == 0 else r


def _bisect(slab, a, b, fa, tol):
    a, b, fa = a.copy(), b.copy(), fa.copy()
    while np.max(b - a) > tol:
        m = 0.5 * (a + b)
        fm = slab_residual(slab, m)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, m, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, m)
    return 0.5 * (a + b)


def slab_roots(slab: Slab, n_lo=None, n_hi=None, scan_step=SCAN_STEP, tol=1e-11):
    """All bound-mode effective indices in (n_lo, n_hi), descending.

    Roots closer together than ``scan_step`` can be missed; choosing the step
    is the caller's responsibility.
    """
    lo, hi = slab.bracket
    n_lo = lo + _EDGE if n_lo is None else max(n_lo, lo + _EDGE)
    n_hi = hi - _EDGE if n_hi is None else min(n_hi, hi - _EDGE)
    if not n_hi > n_lo:
        return np.array([])
    count = max(int(np.ceil((n_hi - n_lo) / scan_step)), 1) + 1
    grid = np.linspace(n_lo, n_hi, count)
    r = slab_residual(slab, grid)
    exact = r == 0.0
    flips = np.nonzero(np.sign(r[:-1]) * np.sign(r[1:]) < 0)[0]
    roots = list(grid[exact])
    if flips.size:
        roots.extend(_bisect(slab, grid[flips], grid[flips + 1], r[flips], tol))
    return np.sort(np.array(roots))[::-1]


def slab_field(slab: Slab, n_eff, spacing=5.0, tail=None):
    """Sample psi(y) for a mode by back-substitution, normalized to unit peak."""
    k0 = slab.k0
    gamma_s = k0 * np.sqrt(n_eff**2 - slab.n_sub**2)
    gamma_c = k0 * np.sqrt(n_eff**2 - slab.n_cap**2)
    bounds = np.concatenate([[0.0], np.cumsum(slab.thicknesses)])
    total = bounds[-1]
    tail_s = tail if tail is not None else min(4.0 / gamma_s, 3 * total + 1000.0)
    tail_c = tail if tail is not None else min(4.0 / gamma_c, 3 * total + 1000.0)

    # (psi, q) at the bottom of every layer, walking upward from the substrate
    states = [None] * len(slab.indices)
    psi, q = 1.0, slab.weight(slab.n_sub) * gamma_s
    scale_log = 0.0
    for j in range(len(slab.indices) - 1, -1, -1):
        states[j] = (psi, q, scale_log)
        n, d = slab.indices[j], slab.thicknesses[j]
        m11, m12, m21, m22 = _layer_matrix(k0**2 * (n**2 - n_eff**2), d, slab.weight(n))
        psi, q = m11 * psi + m12 * q, m21 * psi + m22 * q
        s = max(abs(psi), abs(q))
        psi, q = psi / s, q / s
        scale_log += np.log(s)
    top_psi, top_log = psi, scale_log
    ref = max([top_log] + [s[2] for s in states])  # common scale avoids overflow

    ys, vals = [], []
    # cap tail (y < 0): psi decays upward from the top surface
    yc = -np.linspace(tail_c, 0.0, max(int(tail_c / spacing), 8), endpoint=False)
    ys.append(yc)
    vals.append(top_psi * np.exp(-gamma_c * (-yc)) * np.exp(top_log - ref))
    for j, (n, d) in enumerate(zip(slab.indices, slab.thicknesses)):
        psi_b, q_b, lg = states[j]
        npts = max(int(np.ceil(d / spacing)), 4)
        h = np.linspace(0.0, d, npts, endpoint=False)  # height above layer bottom
        m11, m12, _, _ = _layer_matrix(k0**2 * (n**2 - n_eff**2), h, slab.weight(n))
        y = bounds[j + 1] - h
        ys.append(y[::-1])
        vals.append(((m11 * psi_b + m12 * q_b) * np.exp(lg - ref))[::-1])
    ysub = total + np.linspace(0.0, tail_s, max(int(tail_s / spacing), 8))
    ys.append(ysub)
    vals.append(np.exp(-gamma_s * (ysub - total) - ref))
    y = np.concatenate(ys)
    v = np.concatenate(vals)
    v = v / v[np.argmax(np.abs(v))]
    return y, v


# ---------------------------------------------------------------------------
# stack-level operations


@dataclass
class ModeSolution:
    n_eff: float
    polarization: Polarization
    wavelength: float
    y: np.ndarray = field(repr=False)  # nm, depth from the top surface
    field_profile: np.ndarray = field(repr=False)
    mode_class: ModeClass = ModeClass.OTHER


def mode_condition(stack: LayerStack, n_trial, wavelength, pol, model: MaterialModel = DEFAULT_MODEL):
    """Dispersion-relation residual of ``stack``; its roots are the guided modes."""
    return slab_residual(slab_from_stack(stack, wavelength, pol, model), n_trial)


def find_guided_modes(stack: LayerStack, wavelength, pol, n_lo=None, n_hi=None,
                      scan_step=SCAN_STEP, model: MaterialModel = DEFAULT_MODEL,
                      classify=True):
    """Bound modes of the stack sorted by descending n_eff (empty list if none)."""
    pol = Polarization(pol)
    slab = slab_from_stack(stack, wavelength, pol, model)
    if n_lo is not None and n_hi is not None and not n_hi > n_lo:
        raise SolverError(f"search bracket is empty: n_lo={n_lo}, n_hi={n_hi}")
    modes = []
    for n_eff in slab_roots(slab, n_lo, n_hi, scan_step):
        y, psi = slab_field(slab, n_eff)
        m = ModeSolution(float(n_eff), pol, float(wavelength), y, psi)
        if classify:
            m.mode_class = classify_mode(m, stack, model)
        modes.append(m)
    return modes


def _region_mask(y, stack: LayerStack, groups):
    bounds = stack.interfaces()
    mask = np.zeros(y.shape, dtype=bool)
    for j, g in enumerate(stack.groups):
        if g in groups:
            mask |= (y >= bounds[j]) & (y < bounds[j + 1])
    return mask


def _guide_groups(stack: LayerStack, model, wavelength):
    groups = set(stack.groups)
    if groups & set(GUIDE_GROUPS):
        return set(GUIDE_GROUPS)
    # untagged stack: the highest-index layers form the guide
    n_layers, _, _ = stack.indices(wavelength, model)
    top = np.max(n_layers)
    return {f"#{j}" for j in range(len(n_layers)) if n_layers[j] == top}


def _sign_changes(v, rel=1e-6):
    peak = np.max(np.abs(v)) if v.size else 0.0
    w = v[np.abs(v) > rel * peak] if peak > 0 else v[:0]
    return int(np.count_nonzero(np.diff(np.sign(w)) != 0)) if w.size > 1 else 0


def classify_mode(m: ModeSolution, stack: LayerStack, model: MaterialModel = DEFAULT_MODEL):
    """Label a solved mode as TIR_FUNDAMENTAL, BRAGG or OTHER."""
    if m.field_profile is None or len(m.field_profile) == 0:
        raise SolverError("mode has no field profile to classify")
    y, v = np.asarray(m.y), np.asarray(m.field_profile)
    guide = _guide_groups(stack, model, m.wavelength)
    if any(g.startswith("#") for g in guide):
        tagged = stack.with_layers(
            [replace(lyr, group=f"#{j}") for j, lyr in enumerate(stack.layers)]
        )
        in_guide = _region_mask(y, tagged, guide)
        in_dbr = np.zeros_like(in_guide)
    else:
        in_guide = _region_mask(y, stack, guide)
        in_dbr = _region_mask(y, stack, {g for g in stack.groups if "dbr" in g})
    intensity = v**2
    total = np.trapezoid(intensity, y)
    frac = np.trapezoid(np.where(in_guide, intensity, 0.0), y) / total if total > 0 else 0.0

    if _sign_changes(v[in_guide]) == 0 and frac >= 0.7:
        return ModeClass.TIR_FUNDAMENTAL

    if in_dbr.any():
        n_layers, _, _ = stack.indices(m.wavelength, model)
        matching = [n for n, g in zip(n_layers, stack.groups) if g == "matching"]
        n_match = min(matching) if matching else np.max(n_layers)
        # oscillatory (not evanescent) in every reflector layer
        n_dbr = min(n for n, g in zip(n_layers, stack.groups) if "dbr" in g)
        peak_in_guide = in_guide[np.argmax(intensity)]
        if (_sign_changes(v[in_dbr]) > 0 and peak_in_guide
                and m.n_eff < min(n_match, n_dbr)):
            return ModeClass.BRAGG
    return ModeClass.OTHER


def select_mode(modes, mode_class):
    """Highest-index mode of the requested class, or None."""
    for m in modes:
        if m.mode_class == ModeClass(mode_class):
            return m
    return None


def solve_mode(stack: LayerStack, wavelength, pol, mode_class, model: MaterialModel = DEFAULT_MODEL,
               scan_step=SCAN_STEP):
    m = select_mode(find_guided_modes(stack, wavelength, pol, scan_step=scan_step, model=model),
                    mode_class)
    if m is None:
        raise SolverError(
            f"no {ModeClass(mode_class).value} {Polarization(pol).value} mode at {wavelength:g} nm"
        )
    return m


def lateral_index(n_ridge, n_side, width_nm, wavelength, pol):
    """Fundamental mode of the symmetric lateral slab of the effective-index method."""
    if not n_ridge > n_side:
        raise SolverError(
            f"lateral guide has no bound mode (ridge index {n_ridge:.6f} <= side index {n_side:.6f})"
        )
    slab = Slab(np.array([n_ridge]), np.array([width_nm]), n_side, n_side, float(wavelength),
                Polarization(pol))
    # only the fundamental is needed: scan finely near the top of the bracket
    roots = slab_roots(slab, scan_step=min(SCAN_STEP, (n_ridge - n_side) / 200))
    if roots.size == 0:
        raise SolverError("ridge too narrow: lateral guide supports no bound mode")
    return float(roots[0])


def effective_index_2d(stack: LayerStack, wavelength, pol, mode_class=ModeClass.TIR_FUNDAMENTAL,
                       model: MaterialModel = DEFAULT_MODEL, scan_step=SCAN_STEP):
    """Effective-index-method estimate of the ridge mode index.

    The vertical slab under the ridge and the slab left in the etched regions
    are solved for the same polarization and mode class; the two indices then
    form a symmetric lateral three-region guide of width ``ridge_width``, which
    is solved in the orthogonal polarization.  When the etched region carries
    no such mode its substrate index is used as the lateral cladding.
    """
    pol = Polarization(pol)
    n_ridge = solve_mode(stack, wavelength, pol, mode_class, model, scan_step).n_eff
    etched = stack.etched(stack.etch_depth * 1e3)
    n_side = None
    if etched is not None:
        modes = [m for m in find_guided_modes(etched, wavelength, pol, scan_step=scan_step, model=model)
                 if m.n_eff < n_ridge]
        m = select_mode(modes, mode_class)
        if m is not None:
            n_side = m.n_eff
    if n_side is None:
        _, n_sub, _ = stack.indices(wavelength, model)
        n_side = n_sub
    lateral_pol = Polarization.TM if pol is Polarization.TE else Polarization.TE
    return lateral_index(n_ridge, n_side, stack.ridge_width * 1e3, wavelength, lateral_pol)
