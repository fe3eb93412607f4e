"""Joint spectral amplitude of the photon pair on a detuning grid."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dispersion import PhasematchParams
from .units import bandwidth_to_sigma, omega_from_wavelength, wavelength_from_omega

log = logging.getLogger(__name__)

PUMP_WINDOW = (750.0, 800.0)
#: frozen pump-bandwidth convention, see README
DEFAULT_FWHM_MODE = "amplitude"
#: fraction of the grid extent treated as the boundary band
BOUNDARY_BAND = 0.05
BOUNDARY_MASS_LIMIT = 1e-4


@dataclass(frozen=True)
class PumpSpec:
    central_wavelength: float  # nm
    fwhm: float  # nm
    fwhm_mode: str = DEFAULT_FWHM_MODE

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError(f"pump fwhm must be positive, got {self.fwhm}")
        lo, hi = PUMP_WINDOW
        if not lo <= self.central_wavelength <= hi:
            raise ValueError(
                f"pump central_wavelength {self.central_wavelength} nm outside [{lo}, {hi}] nm"
            )
        bandwidth_to_sigma(self.fwhm, self.central_wavelength, self.fwhm_mode)

    @property
    def sigma(self):
        """Gaussian width in rad/fs of exp(-(w - w0)**2 / sigma**2)."""
        return bandwidth_to_sigma(self.fwhm, self.central_wavelength, self.fwhm_mode)

    @property
    def omega(self):
        return float(omega_from_wavelength(self.central_wavelength))


@dataclass(frozen=True)
class GridSpec:
    half_width_s: float = 0.25  # rad/fs
    half_width_i: float = 0.25
    n_s: int = 2048
    n_i: int = 2048

    def __post_init__(self):
        for name in ("n_s", "n_i"):
            n = getattr(self, name)
            if int(n) != n or n < 64 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 64, got {n}")
        for name in ("half_width_s", "half_width_i"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def nu_s(self):
        return np.linspace(-self.half_width_s, self.half_width_s, self.n_s)

    @property
    def nu_i(self):
        return np.linspace(-self.half_width_i, self.half_width_i, self.n_i)

    @property
    def d_nu_s(self):
        return 2 * self.half_width_s / (self.n_s - 1)

    @property
    def d_nu_i(self):
        return 2 * self.half_width_i / (self.n_i - 1)

    @property
    def is_square(self):
        return self.half_width_s == self.half_width_i and self.n_s == self.n_i

    def refined(self, factor=2):
        """Same extents, ``factor`` times as many samples per axis."""
        return GridSpec(self.half_width_s, self.half_width_i, factor * self.n_s, factor * self.n_i)


@dataclass(frozen=True)
class JointSpectrum:
    grid: GridSpec
    amplitude: np.ndarray  # complex, shape (n_s, n_i); rows are signal detunings
    origin: tuple  # (omega0_s, omega0_i) in rad/fs
    norm: float
    boundary_mass: float = 0.0
    params: PhasematchParams | None = None
    pump: PumpSpec | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def boundary_warning(self):
        return self.boundary_mass > BOUNDARY_MASS_LIMIT

    @property
    def nu_s(self):
        return self.grid.nu_s

    @property
    def nu_i(self):
        return self.grid.nu_i

    @property
    def cell(self):
        return self.grid.d_nu_s * self.grid.d_nu_i

    def total_mass(self):
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.cell)

    def wavelengths_s(self):
        return wavelength_from_omega(self.origin[0] + self.nu_s)

    def wavelengths_i(self):
        return wavelength_from_omega(self.origin[1] + self.nu_i)

    def header(self):
        return {
            "params": None if self.params is None else self.params.to_dict(),
            "pump": None if self.pump is None else asdict(self.pump),
            "grid": asdict(self.grid),
            "norm": self.norm,
            "boundary_mass": self.boundary_mass,
            **self.metadata,
        }


def phase_mismatch(nu_s, nu_i, p: PhasematchParams):
    """Quadratic phase mismatch in rad/um for detunings in rad/fs."""
    nu_s = np.asarray(nu_s, dtype=float)
    nu_i = np.asarray(nu_i, dtype=float)
    # signal and idler terms are paired so that swapping them is exact in floating point
    linear = p.kappa_s * nu_s + p.kappa_i * nu_i
    quadratic = 0.5 * (p.K_s - p.K_p) * nu_s**2 + 0.5 * (p.K_i - p.K_p) * nu_i**2
    return linear + quadratic - p.K_p * (nu_s * nu_i)


def phasematching_function(nu_s, nu_i, p: PhasematchParams):
    """sinc(dk L/2) exp(-i dk L/2), with sinc(x) = sin(x)/x."""
    x = phase_mismatch(nu_s, nu_i, p) * p.length / 2.0
    return np.sinc(x / np.pi) * np.exp(-1j * x)


def pump_detuning(p: PhasematchParams, pump: PumpSpec):
    """Pump frequency offset from the degeneracy pump frequency (rad/fs)."""
    return pump.omega - p.omega0_p


def _boundary_mass(intensity, band=BOUNDARY_BAND):
    n_s, n_i = intensity.shape
    bs, bi = max(1, int(round(band * n_s))), max(1, int(round(band * n_i)))
    inner = intensity[bs:n_s - bs, bi:n_i - bi].sum()
    total = intensity.sum()
    return float((total - inner) / total) if total > 0 else 0.0


def build_jsa(p: PhasematchParams, pump: PumpSpec, grid: GridSpec = GridSpec()):
    """Normalized JSA: Gaussian pump envelope times the phasematching function."""
    nu_s = grid.nu_s[:, None]
    nu_i = grid.nu_i[None, :]
    shift = pump_detuning(p, pump)
    envelope = np.exp(-((nu_s + nu_i - shift) ** 2) / pump.sigma**2)
    f = envelope * phasematching_function(nu_s, nu_i, p)
    cell = grid.d_nu_s * grid.d_nu_i
    intensity = np.abs(f) ** 2
    mass = float(intensity.sum() * cell)
    if not mass > 0:
        raise ValueError("JSA vanishes on the grid; check the pump detuning and grid extents")
    b = _boundary_mass(intensity)
    if b > BOUNDARY_MASS_LIMIT:
        log.warning("JSA boundary band holds %.2e of the mass; widen the grid", b)
    return JointSpectrum(
        grid=grid,
        amplitude=f / np.sqrt(mass),
        origin=(p.omega0_s, p.omega0_i),
        norm=np.sqrt(mass),
        boundary_mass=b,
        params=p,
        pump=pump,
    )


@dataclass(frozen=True)
class Spectrum:
    nu: np.ndarray  # rad/fs detuning
    wavelength: np.ndarray  # nm
    density: np.ndarray  # per rad/fs


def marginals(jsa: JointSpectrum):
    """Signal, idler and their pointwise product (the latter on the signal axis)."""
    intensity = np.abs(jsa.amplitude) ** 2
    sig = intensity.sum(axis=1) * jsa.grid.d_nu_i
    idl = intensity.sum(axis=0) * jsa.grid.d_nu_s
    s = Spectrum(jsa.nu_s, jsa.wavelengths_s(), sig)
    i = Spectrum(jsa.nu_i, jsa.wavelengths_i(), idl)
    if jsa.grid.is_square and jsa.origin[0] == jsa.origin[1]:
        prod = Spectrum(jsa.nu_s, jsa.wavelengths_s(), sig * idl)
    else:
        idl_on_s = np.interp(jsa.wavelengths_s()[::-1], jsa.wavelengths_i()[::-1], idl[::-1],
                             left=0.0, right=0.0)[::-1]
        prod = Spectrum(jsa.nu_s, jsa.wavelengths_s(), sig * idl_on_s)
    return s, i, prod


def write_json_header(fh, header: dict):
    """Write a metadata block as '#'-prefixed JSON lines."""
    for line in json.dumps(header, indent=1, sort_keys=True, default=_jsonable).splitlines():
        fh.write("# " + line + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")


def export_jsa_csv(jsa: JointSpectrum, path, header_extra=None):
    nu_s, nu_i = np.meshgrid(jsa.nu_s, jsa.nu_i, indexing="ij")
    data = np.column_stack([nu_s.ravel(), nu_i.ravel(), jsa.amplitude.real.ravel(), jsa.amplitude.imag.ravel()])
    with open(path, "w") as fh:
        write_json_header(fh, {**jsa.header(), **(header_extra or {})})
        fh.write("nu_s_rad_per_fs,nu_i_rad_per_fs,re_f,im_f\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.10e")


def export_marginals_csv(jsa: JointSpectrum, path, header_extra=None):
    s, i, prod = marginals(jsa)
    with open(path, "w") as fh:
        write_json_header(fh, {**jsa.header(), **(header_extra or {})})
        fh.write("signal_wavelength_nm,signal_density_fs,idler_wavelength_nm,idler_density_fs,product_fs2\n")
        np.savetxt(fh, np.column_stack([s.wavelength, s.density, i.wavelength, i.density, prod.density]),
                   delimiter=",", fmt="%.10e")


def export_header_json(jsa: JointSpectrum, path, header_extra=None):
    Path(path).write_text(json.dumps({**jsa.header(), **(header_extra or {})}, indent=2,
                                     sort_keys=True, default=_jsonable) + "\n")
