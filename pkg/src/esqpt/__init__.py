"""Excited-state quantum phase transitions in systems with many degrees of freedom.

Subpackages of interest:

``hamiltonian``   polynomial Hamiltonian specs, derivatives, config parsing
``stationary``    multistart Newton search and Morse-index classification
``semiclassics``  Monte Carlo phase-space volumes and smoothed densities
``singularity``   defect classification, irregular densities, detection
``quantum``       oscillator-basis spectra of separable models
``flow``          spectral flow rates and the continuity check
``cuspmodel``     the triple-cusp preset and its reference table
``cli``           the ``esqpt`` command
"""
__version__ = "0.1.0"
