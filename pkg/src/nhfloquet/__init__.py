"""Single-resonance non-Hermitian Floquet calculations for a 1D model atom.

Complex-scaled Floquet resonances in the acceleration (Kramers-Henneberger)
frame, and the observables derived from one resonance: harmonic spectra,
photon-number fluctuations, natural expansions and ATI partial widths.
Atomic units (hbar = m_e = e = 1) throughout.
"""

from .model import Gauge, LaserField, PotentialModel, evaluate_force, evaluate_potential, quiver_amplitude
from .basis import BasisSpec, BoxBasis, FieldFreeSolution, box_function, solve_field_free, spatial_quadrature
from .floquet import FloquetMatrix, FloquetProblem, assemble_floquet, potential_fourier_blocks
from .resonance import ResonanceSolution, diagonalize, select_resonance, solve_resonance, theta_trajectory
from .observables import (
    AmplitudeTable,
    NaturalExpansion,
    SpectrumSeries,
    amplitude,
    amplitude_table,
    ati_channel_momentum,
    ati_partial_width,
    ati_sd_overlay,
    hgs,
    natural_expansion,
    photon_distributions,
    photon_sd,
    total_amplitude,
)

__version__ = "0.1.0"

__all__ = [
    "AmplitudeTable",
    "BasisSpec",
    "BoxBasis",
    "FieldFreeSolution",
    "FloquetMatrix",
    "FloquetProblem",
    "Gauge",
    "LaserField",
    "NaturalExpansion",
    "PotentialModel",
    "ResonanceSolution",
    "SpectrumSeries",
    "amplitude",
    "amplitude_table",
    "assemble_floquet",
    "ati_channel_momentum",
    "ati_partial_width",
    "ati_sd_overlay",
    "box_function",
    "diagonalize",
    "evaluate_force",
    "evaluate_potential",
    "hgs",
    "natural_expansion",
    "photon_distributions",
    "photon_sd",
    "potential_fourier_blocks",
    "quiver_amplitude",
    "select_resonance",
    "solve_field_free",
    "solve_resonance",
    "spatial_quadrature",
    "theta_trajectory",
    "total_amplitude",
]
