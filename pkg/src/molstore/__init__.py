"""Simulator for a macromolecular data-storage chip.

Modules: ``codec`` (bytes <-> bases), ``chip_topology`` (valve tree, routes,
densities), ``transport_physics`` (electrophoretic transfer), ``nanopore_readout``
(current-trace synthesis), ``event_decoder`` (detection and decoding),
``write_station`` (write protocols) and ``sim_orchestrator`` (scenarios).
"""

from ._kernels import backend

__version__ = "0.1.0"
__all__ = ["backend", "__version__"]
