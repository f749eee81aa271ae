"""lipdev: difference- and wavelet-based smoothness deviation analysis.

A numerical library + CLI for measuring how far a sampled function is from
the classical smoothness subspaces of a Lipschitz (Hoelder) space: difference
moduli and their super-level ("bad") sets in the upper half-space, orthonormal
Daubechies coefficient families and their super-level cube families, Carleson
functionals and sequence-lattice quasi-norms, and the deviation constants and
distance proxies built from them.
"""

from lipdev.grid import GridSpec, SampledFunction, DyadicCube, Tent

__all__ = ["GridSpec", "SampledFunction", "DyadicCube", "Tent"]

__version__ = "0.1.0"
