"""Numerical toolkit for nonlocal perimeter energies of lattice tilings.

Submodules:
    lattice    bases, reduction, Voronoi cells, moduli of planar lattices
    kernel     interaction kernel families and lattice periodization
    density    window densities over lattice translates
    energy     interaction and perimeter energies, potentials, gradients
    optimizer  projected gradient ascent and optimality diagnostics
    polygon2d  hexagon geometry, Steiner symmetrization, polygon perimeters
    search     outer search over the lattice moduli space
    cli        command line entry points
"""

__version__ = "0.1.0"
