"""Toolkit for a two-spin-gadget annealing schedule, its diabatic two-qubit
gate, and the translation of the spin-model schedules into flux-bias
schedules for coupled flux-qubit circuits."""

from fluxgate.spin_model import SpinParams

__all__ = ["SpinParams"]
__version__ = "0.1.0"
