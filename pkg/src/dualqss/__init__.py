"""Quantized-state step control for explicit DAEs.

Time steps are derived from a dual view of the dynamics in which time is a
function of the state. The package provides scalar QSS1 and Adams-Bashforth
QSS integrators, global step proposals for DAE systems, PI control of the
quantum size, a trapezoidal DAE solver and classical power-system models.
"""
__version__ = "0.1.0"
