"""Signal-idler exchange overlap and two-photon (HOM) interference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import PhasematchParams
from .jsa import GridSpec, JointSpectrum, PumpSpec, build_jsa, write_json_header


@dataclass(frozen=True)
class OverlapResult:
    tau: float  # fs
    value: float
    residual_imag: float

    def __post_init__(self):
        if abs(self.value) > 1 + 1e-9:
            raise ValueError(f"overlap {self.value} outside [-1, 1]")


def _require_square(jsa: JointSpectrum):
    g = jsa.grid
    if not g.is_square or jsa.origin[0] != jsa.origin[1]:
        raise ValueError(
            "overlap needs identical signal and idler axes (equal half widths, sample counts "
            "and origins); rebuild the JSA on a square grid"
        )


def diagonal_sums(jsa: JointSpectrum):
    """Sums of f(j,k) f*(k,j) along each diagonal j - k = d.

    Returns ``(d, s)`` with ``d`` running from -(n-1) to n-1. On a uniform grid
    the delay phase depends only on ``d``, so every overlap value is a short
    sum over these numbers.
    """
    _require_square(jsa)
    f = jsa.amplitude
    n = f.shape[0]
    prod = f * np.conj(f.T)
    d = np.arange(-(n - 1), n)
    # diagonal(offset=k) holds prod[j, j + k], i.e. j - k_index = -k
    s = np.array([prod.diagonal(-k).sum() for k in d])
    return d, s


def _overlap_values(jsa: JointSpectrum, taus):
    d, s = diagonal_sums(jsa)
    mass = np.sum(np.abs(jsa.amplitude) ** 2)
    h = jsa.grid.d_nu_s
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    phase = np.exp(1j * h * np.outer(taus, d))
    return phase @ s / mass


def overlap(jsa: JointSpectrum, tau=0.0):
    """Exchange overlap O(tau) for a delay in fs."""
    z = complex(_overlap_values(jsa, [tau])[0])
    return OverlapResult(float(tau), z.real, abs(z.imag))


def overlap_curve(jsa: JointSpectrum, taus):
    """Real overlap at many delays and the largest imaginary residual."""
    z = _overlap_values(jsa, taus)
    return z.real, float(np.max(np.abs(z.imag)))


def optimal_delay(jsa: JointSpectrum, tau_range=(-100.0, 100.0), tau_step=0.5):
    """Delay maximizing the overlap: coarse scan, then a parabola through the best three samples."""
    lo, hi = tau_range
    if not tau_step > 0:
        raise ValueError(f"tau_step must be positive, got {tau_step}")
    if not hi > lo:
        raise ValueError(f"empty tau range {tau_range}")
    taus = np.arange(lo, hi + 0.5 * tau_step, tau_step)
    vals, _ = overlap_curve(jsa, taus)
    j = int(np.argmax(vals))
    if j == 0 or j == len(taus) - 1:
        raise ValueError(f"overlap maximum at the edge of tau range {tau_range}; widen range")
    y0, y1, y2 = vals[j - 1:j + 2]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom < 0 else 0.0
    tau_c = taus[j] + float(np.clip(shift, -1.0, 1.0)) * tau_step
    o_c = overlap(jsa, tau_c).value
    if o_c < y1:
        tau_c, o_c = float(taus[j]), float(y1)
    return float(tau_c), float(o_c)


def hom_probability(jsa: JointSpectrum, tau=0.0):
    """Coincidence probability behind a balanced beam splitter."""
    return 0.5 - 0.5 * overlap(jsa, tau).value


@dataclass(frozen=True)
class HomScan:
    tau: np.ndarray
    overlap: np.ndarray
    probability: np.ndarray
    tau_c: float
    overlap_max: float
    residual_imag: float

    @property
    def visibility(self):
        """(P(inf) - P(tau_c)) / P(inf) with P(inf) = 1/2."""
        p_c = 0.5 - 0.5 * self.overlap_max
        return (0.5 - p_c) / 0.5


def hom_scan(jsa: JointSpectrum, tau_min=-100.0, tau_max=100.0, n=401, tau_step=0.5):
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    taus = np.linspace(tau_min, tau_max, n)
    vals, resid = overlap_curve(jsa, taus)
    tau_c, o_max = optimal_delay(jsa, (tau_min, tau_max), tau_step)
    return HomScan(taus, vals, 0.5 - 0.5 * vals, tau_c, o_max, resid)


@dataclass(frozen=True)
class SweepRow:
    pump_nm: float
    overlap_0: float
    overlap_tau_c: float


def pump_detuning_sweep(p: PhasematchParams, pump_wavelengths, fwhm=0.25, tau_c=None,
                        grid: GridSpec = GridSpec(), fwhm_mode=None, tau_range=(-100.0, 100.0)):
    """O(0) and O(tau_c) per pump wavelength with tau_c held at its degeneracy value."""
    kw = {} if fwhm_mode is None else {"fwhm_mode": fwhm_mode}
    if tau_c is None:
        jsa0 = build_jsa(p, PumpSpec(p.lambda_d / 2, fwhm, **kw), grid)
        tau_c, _ = optimal_delay(jsa0, tau_range)
    rows = []
    for wl in pump_wavelengths:
        jsa = build_jsa(p, PumpSpec(float(wl), fwhm, **kw), grid)
        o = overlap_curve(jsa, [0.0, tau_c])[0]
        rows.append(SweepRow(float(wl), float(o[0]), float(o[1])))
    return tau_c, rows


def write_scan_csv(scan: HomScan, path, header: dict):
    with open(path, "w") as fh:
        write_json_header(fh, {**header, "tau_c_fs": scan.tau_c, "overlap_max": scan.overlap_max,
                               "visibility": scan.visibility})
        fh.write("tau_fs,overlap,P\n")
        np.savetxt(fh, np.column_stack([scan.tau, scan.overlap, scan.probability]), delimiter=",", fmt="%.10e")


def write_sweep_csv(rows, tau_c, path, header: dict):
    with open(path, "w") as fh:
        write_json_header(fh, {**header, "tau_c_fs": tau_c})
        fh.write("pump_nm,O_at_0,O_at_tauc\n")
        np.savetxt(fh, np.array([[r.pump_nm, r.overlap_0, r.overlap_tau_c] for r in rows]).reshape(-1, 3),
                   delimiter=",", fmt="%.10e")
