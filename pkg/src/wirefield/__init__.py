"""Charged-particle dynamics around a straight wire with a periodic current.

The package evaluates the retarded potential of the wire current, integrates
the particle's equations of motion, continues radially periodic orbits in the
perturbation amplitude k, checks their twist character and searches
subharmonic orbits.
"""

from .current import CurrentProfile, fourier, sinusoid, smoothed_square, validate
from .potential import PotentialField, QuadConfig
from .triplets import Triplet, complete_triplet, classify
from .continuation import PeriodMap, continue_in_k, newton_shoot
from .twist import check_twist, compute_coefficients
from .orbit_search import find_subharmonic, rotation_number, stability_probe

__all__ = [
    "CurrentProfile",
    "fourier",
    "sinusoid",
    "smoothed_square",
    "validate",
    "PotentialField",
    "QuadConfig",
    "Triplet",
    "complete_triplet",
    "classify",
    "PeriodMap",
    "continue_in_k",
    "newton_shoot",
    "check_twist",
    "compute_coefficients",
    "find_subharmonic",
    "rotation_number",
    "stability_probe",
]

__version__ = "0.1.0"
