"""Analytical performance/energy simulator and mapping toolchain for a
heterogeneous DNN inference cluster coupling programmable cores, a 256x256
analog in-memory crossbar accelerator and a dedicated depth-wise accelerator.
"""

__version__ = "0.1.0"
