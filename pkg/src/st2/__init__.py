"""st2: a workbench for strictly tangled spectral triples.

Finite-dimensional models of operator families whose pairwise commutator
growth is governed by a nonnegative bounding matrix: cone geometry for the
admissible exponents, anticommuting operator calculus, weighted Hilbert
complexes, graded nilpotent group truncations, dynamical crossed products,
and oscillator symbol checks, plus a CLI that runs the bundled experiments.
"""

__version__ = "0.1.0"
