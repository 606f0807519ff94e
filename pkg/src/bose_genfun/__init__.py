"""Depletion statistics of a weakly interacting Bose gas.

Generating functions, moment/cumulant machinery, tail bounds and exact
small-system oracles for the particle-number statistics of quasi-free
(Bogoliubov) states on a punctured momentum lattice.
"""

__version__ = "0.1.0"
