"""First-order unitary perturbation propagators for a laser-kicked rigid rotor."""

__version__ = "0.1.0"
