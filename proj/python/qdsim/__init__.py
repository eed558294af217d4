"""Two-electron spin dynamics in a tunnel-coupled silicon double quantum dot.

Five-level singlet-triplet Hamiltonian model, pulse-schedule time evolution,
protocol sweeps (spin funnel, Landau-Zener, LZS interferometry, exchange
oscillations, ESR spectroscopy), latched Pauli-spin-blockade readout
statistics and nonlinear parameter fits.
"""

from ._qdsim import *  # noqa: F401,F403
from ._qdsim import __doc__ as _core_doc  # noqa: F401
