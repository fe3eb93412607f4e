"""Refractive index of Al(x)Ga(1-x)As below the band gap.

The default model is the empirical fit of Gehrsitz et al. (J. Appl. Phys. 87,
7825, 2000).  All energies in that fit are expressed as vacuum wavenumbers in
1/um, so the photon "energy" entering the formula is simply 1/wavelength[um].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

ROOM_TEMPERATURE_K = 295.0

#: wavelength windows (nm) in which indices may be requested
VALIDITY_WINDOWS = ((970.0, 1800.0), (750.0, 800.0))

#: minimum ratio between the requested wavelength and the gap wavelength
GAP_MARGIN = 1.03


class MaterialDomainError(ValueError):
    """Requested material point lies outside the model's domain."""


@dataclass(frozen=True)
class MaterialPoint:
    al_fraction: float
    wavelength: float  # nm

    def __post_init__(self):
        check_al_fraction(self.al_fraction)
        if not self.wavelength > 0:
            raise MaterialDomainError(f"wavelength must be > 0 nm, got {self.wavelength}")


def check_al_fraction(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise MaterialDomainError(f"al_fraction must lie in [0, 1], got {x}")


def check_window(wavelength, windows=VALIDITY_WINDOWS):
    wl = np.atleast_1d(np.asarray(wavelength, dtype=float))
    inside = np.zeros(wl.shape, dtype=bool)
    for lo, hi in windows:
        inside |= (wl >= lo) & (wl <= hi)
    if not np.all(inside):
        bad = wl[~inside][0]
        spans = ", ".join(f"[{lo:g}, {hi:g}] nm" for lo, hi in windows)
        raise MaterialDomainError(f"wavelength {bad:g} nm outside validity windows {spans}")


class MaterialModel(Protocol):
    """Anything that maps (Al fraction, wavelength in nm) to a real index."""

    name: str

    def refractive_index(self, al_fraction, wavelength): ...


@dataclass(frozen=True)
class GehrsitzModel:
    temperature: float = ROOM_TEMPERATURE_K
    windows: tuple = VALIDITY_WINDOWS
    name: str = field(default="gehrsitz", init=False)

    def gap_wavenumber(self, x):
        """Gamma-gap oscillator position E0 in 1/um (temperature-shifted)."""
        T = self.temperature
        e_gaas = (
            1.225316977778989
            + 0.023083578135884 * (1.0 - 1.0 / np.tanh(92.255357763322920 / T))
            + 0.029810239269821 * (1.0 - 1.0 / np.tanh(194.9547182923050 / T))
        )
        return e_gaas + 1.1308 * x + 0.1436 * x**2

    def gap_wavelength(self, x):
        return 1e3 / self.gap_wavenumber(np.asarray(x, dtype=float))

    def permittivity(self, x, wavelength):
        x = np.asarray(x, dtype=float)
        T = self.temperature
        e2 = (1e3 / np.asarray(wavelength, dtype=float)) ** 2
        a = (
            5.9613 + 7.178e-4 * T - 0.953e-6 * T**2
            - 16.159 * x + 43.511 * x**2 - 71.317 * x**3 + 57.535 * x**4 - 17.451 * x**5
        )
        c0 = 1.0 / (50.535 - 150.7 * x - 62.209 * x**2 + 797.16 * x**3 - 1125.0 * x**4 + 503.79 * x**5)
        e0 = self.gap_wavenumber(x)
        c1 = 21.5647 + 113.74 * x - 122.5 * x**2 + 108.401 * x**3 - 47.318 * x**4
        e1_sq = 4.7171 - 3.237e-4 * T - 1.358e-6 * T**2 + 11.006 * x - 3.08 * x**2
        # TO-phonon (reststrahlen) contributions of the GaAs and AlAs sublattices
        phonon = (1.0 - x) * 1.55e-3 / (0.724e-3 - e2) + x * 2.61e-3 / (1.331e-3 - e2)
        return a + c0 / (e0**2 - e2) + c1 / (e1_sq - e2) + phonon

    def refractive_index(self, al_fraction, wavelength):
        check_al_fraction(al_fraction)
        check_window(wavelength, self.windows)
        wl = np.asarray(wavelength, dtype=float)
        gap = GAP_MARGIN * self.gap_wavelength(al_fraction)
        if np.any(wl < gap):
            raise MaterialDomainError(
                f"wavelength {np.min(wl):g} nm is above the band gap of Al fraction "
                f"{np.max(al_fraction):g} (must exceed {np.max(gap):.1f} nm)"
            )
        n = np.sqrt(self.permittivity(al_fraction, wl))
        return float(n) if np.ndim(n) == 0 else n


DEFAULT_MODEL = GehrsitzModel()


def get_model(name="gehrsitz", temperature=ROOM_TEMPERATURE_K):
    if name == "gehrsitz":
        return GehrsitzModel(temperature=temperature)
    raise ValueError(f"unknown material model {name!r}")


def refractive_index(p: MaterialPoint, model: MaterialModel = DEFAULT_MODEL) -> float:
    return float(model.refractive_index(p.al_fraction, p.wavelength))


@dataclass(frozen=True)
class DispersionCurve:
    """Sampled (effective) refractive index versus wavelength.

    ``label`` identifies what was sampled: an Al fraction for bulk material,
    or a mode name such as ``"signal/TE"`` for solver output.
    """

    wavelengths: np.ndarray  # nm, strictly increasing
    n: np.ndarray
    label: str = ""
    al_fraction: float | None = None

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        n = np.asarray(self.n, dtype=float)
        if wl.ndim != 1 or wl.shape != n.shape or wl.size == 0:
            raise ValueError("wavelengths and n must be equal-length 1D arrays")
        if wl.size > 1 and np.any(np.diff(wl) <= 0):
            raise ValueError("wavelength grid must be strictly increasing")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "n", n)

    def __len__(self):
        return self.wavelengths.size

    @property
    def span(self):
        return float(self.wavelengths[0]), float(self.wavelengths[-1])


def sample_dispersion(al_fraction, lambda_min, lambda_max, step, model: MaterialModel = DEFAULT_MODEL):
    """Bulk index of one alloy on the grid ``lambda_min, lambda_min + step, ... <= lambda_max``."""
    if not lambda_max > lambda_min:
        raise ValueError(f"empty wavelength range [{lambda_min}, {lambda_max}]")
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    count = int(np.floor((lambda_max - lambda_min) / step + 1e-9)) + 1
    wl = lambda_min + step * np.arange(count)
    n = np.atleast_1d(model.refractive_index(al_fraction, wl))
    return DispersionCurve(wl, n, label=f"Al{al_fraction:g}", al_fraction=float(al_fraction))
