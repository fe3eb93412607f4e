"""Polarization entanglement of frequency-filtered pairs split by a dichroic mirror."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import PhasematchParams
from .jsa import DEFAULT_FWHM_MODE, GridSpec, JointSpectrum, PumpSpec, build_jsa, write_json_header
from .units import C_NM_PER_FS, bandwidth_to_sigma, omega_from_wavelength

#: how many filter widths the grid must extend beyond each band center
COVERAGE_SIGMAS = 4.0


@dataclass(frozen=True)
class FilterSpec:
    """Two Gaussian band-pass filters, exp(-(w - w_k)**2 / sigma**2) in amplitude.

    ``center_1`` is the band that path 1 selects for the signal photon.
    ``fwhm=None`` means an all-pass filter pair.
    """

    center_1: float  # nm
    center_2: float  # nm
    fwhm: float | None = 2.0  # nm
    fwhm_mode: str = DEFAULT_FWHM_MODE

    def __post_init__(self):
        if not (self.center_1 > 0 and self.center_2 > 0):
            raise ValueError("filter centers must be positive wavelengths")
        if self.fwhm is not None and not self.fwhm > 0:
            raise ValueError(f"filter fwhm must be positive, got {self.fwhm}")

    @property
    def all_pass(self):
        return self.fwhm is None

    @property
    def omega_1(self):
        return float(omega_from_wavelength(self.center_1))

    @property
    def omega_2(self):
        return float(omega_from_wavelength(self.center_2))

    @property
    def sigma_1(self):
        return np.inf if self.all_pass else bandwidth_to_sigma(self.fwhm, self.center_1, self.fwhm_mode)

    @property
    def sigma_2(self):
        return np.inf if self.all_pass else bandwidth_to_sigma(self.fwhm, self.center_2, self.fwhm_mode)

    def conservation_error(self, pump_wavelength):
        """Relative violation of 1/center_1 + 1/center_2 = 1/pump."""
        return abs((1 / self.center_1 + 1 / self.center_2) * pump_wavelength - 1.0)

    def check_energy_conservation(self, pump_wavelength, rtol=1e-9):
        err = self.conservation_error(pump_wavelength)
        if err > rtol:
            raise ValueError(
                f"filter centers {self.center_1}, {self.center_2} nm violate "
                f"1/center_1 + 1/center_2 = 1/pump for pump {pump_wavelength} nm (relative error {err:.2e})"
            )

    @classmethod
    def symmetric(cls, pump_wavelength, separation, fwhm=2.0, fwhm_mode=DEFAULT_FWHM_MODE):
        """Energy-conserving centers ``separation`` nm apart, symmetric in frequency about degeneracy.

        ``center_1`` is the shorter wavelength.
        """
        c1, c2 = band_centers(pump_wavelength, separation)
        return cls(c1, c2, fwhm, fwhm_mode)


def band_centers(pump_wavelength, separation):
    """Wavelengths (short, long) with w1 + w2 = w_pump, w1 - w_d = w_d - w2, and long - short = separation."""
    if separation < 0:
        raise ValueError(f"separation must be >= 0, got {separation}")
    w_d = float(omega_from_wavelength(2 * pump_wavelength))
    if separation == 0:
        return 2.0 * pump_wavelength, 2.0 * pump_wavelength
    # long - short = 2 pi c (1/(w_d - d) - 1/(w_d + d)) = separation, solved for d
    a = 2 * np.pi * C_NM_PER_FS
    d = (-2 * a + np.sqrt(4 * a**2 + 4 * separation**2 * w_d**2)) / (2 * separation)
    short = a / (w_d + d)
    # long from energy conservation so the pair satisfies it to rounding
    long = 1.0 / (1.0 / pump_wavelength - 1.0 / short)
    return float(short), float(long)


@dataclass(frozen=True)
class DichroicSpec:
    """Step-function dichroic mirror with R = 1 - T.

    With ``cutoff=None`` the mirror is replaced by a frequency-independent
    splitter of transmission ``flat_transmission``.
    """

    cutoff: float | None = None  # nm
    transmit_above: bool = True  # transmit frequencies above the cutoff frequency
    flat_transmission: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.flat_transmission <= 1.0:
            raise ValueError(f"flat_transmission must lie in [0, 1], got {self.flat_transmission}")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ValueError(f"cutoff must be a positive wavelength, got {self.cutoff}")

    def transmission(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.cutoff is None:
            return np.full(omega.shape, self.flat_transmission)
        w_c = float(omega_from_wavelength(self.cutoff))
        step = np.where(omega > w_c, 1.0, np.where(omega < w_c, 0.0, 0.5))
        return step if self.transmit_above else 1.0 - step

    def reflection(self, omega):
        return 1.0 - self.transmission(omega)


def _gauss(omega, center, sigma):
    if np.isinf(sigma):
        return np.ones_like(omega)
    return np.exp(-((omega - center) ** 2) / sigma**2)


def filtered_amplitudes(jsa: JointSpectrum, filters: FilterSpec, dichroic: DichroicSpec):
    """The amplitudes g and h of the two polarization orderings, on the JSA grid."""
    w_s = jsa.origin[0] + jsa.nu_s
    w_i = jsa.origin[1] + jsa.nu_i
    if not filters.all_pass:
        for w_k, sig in ((filters.omega_1, filters.sigma_1), (filters.omega_2, filters.sigma_2)):
            for axis in (w_s, w_i):
                if w_k - COVERAGE_SIGMAS * sig < axis.min() or w_k + COVERAGE_SIGMAS * sig > axis.max():
                    raise ValueError(
                        f"filter band at {2 * np.pi * C_NM_PER_FS / w_k:.2f} nm is not covered to "
                        f"{COVERAGE_SIGMAS:g} sigma by the JSA grid; extend grid"
                    )
    g1_s = _gauss(w_s, filters.omega_1, filters.sigma_1)[:, None]
    g2_i = _gauss(w_i, filters.omega_2, filters.sigma_2)[None, :]
    g1_i = _gauss(w_i, filters.omega_1, filters.sigma_1)[None, :]
    g2_s = _gauss(w_s, filters.omega_2, filters.sigma_2)[:, None]
    t_s, r_s = dichroic.transmission(w_s)[:, None], dichroic.reflection(w_s)[:, None]
    t_i, r_i = dichroic.transmission(w_i)[None, :], dichroic.reflection(w_i)[None, :]
    f = jsa.amplitude
    g = f * g1_s * g2_i * np.sqrt(t_s * r_i)
    h = f * g1_i * g2_s * np.sqrt(t_i * r_s)
    return g, h


@dataclass(frozen=True)
class PolarizationDensity:
    alpha: float
    beta: float
    D: complex

    def __post_init__(self):
        if self.alpha < -1e-12 or self.beta < -1e-12:
            raise ValueError("diagonal elements must be non-negative")
        if abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise ValueError(f"alpha + beta = {self.alpha + self.beta}, expected 1")
        if abs(self.D) > np.sqrt(max(self.alpha * self.beta, 0.0)) + 1e-9:
            raise ValueError(f"|D| = {abs(self.D)} exceeds sqrt(alpha beta)")

    @property
    def concurrence(self):
        return concurrence(self)

    def matrix(self):
        """4x4 density matrix in the basis HH, HV, VH, VV."""
        rho = np.zeros((4, 4), dtype=complex)
        rho[1, 1] = self.alpha
        rho[2, 2] = self.beta
        rho[2, 1] = self.D
        rho[1, 2] = np.conj(self.D)
        return rho


def density_matrix(g, h):
    """alpha, beta and the coherence D from the two filtered amplitudes.

    The grid cell area cancels in every ratio, so plain sums are used.
    """
    g = np.asarray(g)
    h = np.asarray(h)
    if g.shape != h.shape or g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("g and h must share one square grid")
    mg = float(np.sum(np.abs(g) ** 2))
    mh = float(np.sum(np.abs(h) ** 2))
    total = mg + mh
    if not total > 0:
        raise ValueError("no pairs pass filters")
    d = complex(np.sum(h.T * np.conj(g))) / total
    return PolarizationDensity(mg / total, mh / total, d)


def concurrence(rho: PolarizationDensity):
    """2|D|, the concurrence of this two-population state family."""
    return float(min(1.0, 2.0 * abs(rho.D)))


def wootters_concurrence(matrix):
    """Concurrence of a general two-qubit density matrix from the spin-flip eigenvalues."""
    yy = np.fliplr(np.diag([-1.0, 1.0, 1.0, -1.0]))
    rho = np.asarray(matrix, dtype=complex)
    tilde = yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(rho @ tilde).real)[::-1], 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


@dataclass(frozen=True)
class SeparationRow:
    separation_nm: float
    center_1: float
    center_2: float
    delta_omega: float  # |w1 - w2| in rad/fs
    alpha: float
    beta: float
    abs_D: float
    arg_D: float  # |arg D|
    concurrence: float


def band_separation_sweep(p: PhasematchParams, separations, filter_fwhm=2.0, pump: PumpSpec | None = None,
                          grid: GridSpec = GridSpec(), filter_fwhm_mode=DEFAULT_FWHM_MODE,
                          transmit_above=True):
    """Density-matrix elements versus spectral distance of the two filter bands."""
    pump = pump or PumpSpec(p.lambda_d / 2, 0.25)
    jsa = build_jsa(p, pump, grid)
    dichroic = DichroicSpec(cutoff=2 * pump.central_wavelength, transmit_above=transmit_above)
    rows = []
    for sep in separations:
        filt = FilterSpec.symmetric(pump.central_wavelength, float(sep), filter_fwhm, filter_fwhm_mode)
        rho = density_matrix(*filtered_amplitudes(jsa, filt, dichroic))
        rows.append(SeparationRow(
            float(sep), filt.center_1, filt.center_2, abs(filt.omega_1 - filt.omega_2),
            rho.alpha, rho.beta, abs(rho.D), abs(float(np.angle(rho.D))), rho.concurrence,
        ))
    return rows


def write_separation_csv(rows, path, header: dict):
    with open(path, "w") as fh:
        write_json_header(fh, header)
        fh.write("separation_nm,alpha,beta,absD,argD_rad,concurrence,delta_omega_rad_per_fs\n")
        for r in rows:
            fh.write(f"{r.separation_nm:.6g},{r.alpha:.10f},{r.beta:.10f},{r.abs_D:.10f},"
                     f"{r.arg_D:.10f},{r.concurrence:.10f},{r.delta_omega:.10e}\n")
