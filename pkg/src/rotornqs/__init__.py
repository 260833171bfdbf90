"""Ground-state solvers for the quantum rotor model on weighted graphs.

Three independent routes to the lowest eigenvalue:

* :mod:`rotornqs.vmc`     variational Monte Carlo with a rotor RBM
* :mod:`rotornqs.fourier` truncated Fourier spectral inverse iteration
* :mod:`rotornqs.jastrow` closed-form Jastrow energy on chains
"""

__version__ = "0.1.0"
