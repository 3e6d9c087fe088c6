"""Arbitrary-precision spectra of exponential potentials.

Two routes to the same physics: exact quantization conditions built from
modified Bessel functions of complex order, and a determinant-based
rational-approximation solver that converges to the same energies from the
Riccati expansion of the logarithmic derivative.
"""

__version__ = "0.1.0"
