"""Physical constants and wavelength/frequency conversions.

Internal unit system: lengths of layers in nanometers, waveguide lengths in
micrometers, times in femtoseconds, angular frequencies in rad/fs.
"""

import numpy as np

#: speed of light in nm/fs
C_NM_PER_FS = 299.792458
#: speed of light in um/fs
C_UM_PER_FS = C_NM_PER_FS * 1e-3


def omega_from_wavelength(wavelength_nm):
    """Angular frequency in rad/fs for a vacuum wavelength in nm (exact, not linearized)."""
    return 2.0 * np.pi * C_NM_PER_FS / np.asarray(wavelength_nm, dtype=float)


def wavelength_from_omega(omega):
    """Vacuum wavelength in nm for an angular frequency in rad/fs."""
    return 2.0 * np.pi * C_NM_PER_FS / np.asarray(omega, dtype=float)


def bandwidth_to_sigma(fwhm_nm, center_nm, mode="amplitude"):
    """Convert a wavelength FWHM into the Gaussian width sigma (rad/fs).

    The Gaussian is written as ``exp(-(w - w0)**2 / sigma**2)``. With
    ``mode="intensity"`` the FWHM refers to ``|amplitude|**2``, with
    ``mode="amplitude"`` to the amplitude itself.
    """
    if fwhm_nm <= 0:
        raise ValueError(f"fwhm must be positive, got {fwhm_nm}")
    d_omega = 2.0 * np.pi * C_NM_PER_FS * fwhm_nm / center_nm**2
    if mode == "intensity":
        return d_omega / np.sqrt(2.0 * np.log(2.0))
    if mode == "amplitude":
        return d_omega / (2.0 * np.sqrt(np.log(2.0)))
    raise ValueError(f"unknown FWHM mode {mode!r}; expected 'amplitude' or 'intensity'")
