"""Photon-pair generation in Bragg-reflection waveguides: modes, joint spectra, interference and entanglement."""

__version__ = "0.1.0"

from .dispersion import (  # noqa: E402
    Conventions,
    PhasematchError,
    PhasematchParams,
    degeneracy_wavelength,
    extract_jsa_params,
    find_degeneracy,
    group_index,
    pipeline_params,
    preset_params,
    sensitivity_table,
    triplet_dispersion,
)
from .entanglement import (  # noqa: E402
    DichroicSpec,
    FilterSpec,
    PolarizationDensity,
    band_separation_sweep,
    concurrence,
    density_matrix,
    filtered_amplitudes,
)
from .interference import hom_scan, optimal_delay, overlap, overlap_curve  # noqa: E402
from .jsa import GridSpec, JointSpectrum, PumpSpec, build_jsa  # noqa: E402
from .material import GehrsitzModel, MaterialDomainError  # noqa: E402
from .multilayer import (  # noqa: E402
    Layer,
    LayerStack,
    ModeClass,
    Polarization,
    SolverError,
    find_guided_modes,
    load_stack,
    preset_stack,
)
