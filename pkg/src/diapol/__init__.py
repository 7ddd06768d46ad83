"""Dynamic dipole polarizabilities of diatomic molecules from potential curves."""

__version__ = "0.1.0"
