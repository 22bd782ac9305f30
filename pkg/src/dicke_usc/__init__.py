"""Energy levels and incoherent emission spectra of N two-level emitters
ultrastrongly coupled to a single cavity mode."""

__version__ = "0.1.0"

from .algebra import DickeJ, FullProduct, HilbertSpace, Oscillator, SparseOperator
from .models import HopfieldParams, ModelParams, build_hamiltonian
from .spectrum import EigenSolution, adaptive_solve, sweep
from .open_system import BathChannel, build_gme, steady_state
from .emission import EmissionSetup, field_ops, qrt_spectrum, spectrum_at

__all__ = [
    "DickeJ",
    "FullProduct",
    "HilbertSpace",
    "Oscillator",
    "SparseOperator",
    "ModelParams",
    "HopfieldParams",
    "build_hamiltonian",
    "EigenSolution",
    "adaptive_solve",
    "sweep",
    "BathChannel",
    "build_gme",
    "steady_state",
    "EmissionSetup",
    "field_ops",
    "qrt_spectrum",
    "spectrum_at",
]
