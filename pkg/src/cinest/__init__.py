"""Distributed estimation with nonlinear consensus+innovations updates
under heavy-tailed observation and communication noise.

Subpackages and modules:

* ``graphs`` -- topologies, Laplacians and spectra, the k-hop ring family
* ``noise`` -- symmetric noise laws with exact inverse-CDF sampling
* ``nonlinearities`` -- the bounded odd map library and derived quantities
* ``estimator`` -- the recursion itself plus the Monte Carlo harness
* ``asymptotics`` -- analytic asymptotic covariance and topology sweeps
* ``config`` / ``cli`` -- experiment files and the command-line front end

The per-step simulation kernel is compiled (Cython) when available and
falls back to a numpy implementation with bit-identical results; see
``cinest._kernels``.
"""

__version__ = "0.1.0"

from .graphs import Graph, ring_khop_graph
from .noise import NoiseModel
from .nonlinearities import Clip, Identity, Quantizer, Sign
from .estimator import EstimatorConfig, run, run_ensemble
from .asymptotics import asymptotic_covariance, topology_sweep

__all__ = [
    "__version__",
    "Graph",
    "ring_khop_graph",
    "NoiseModel",
    "Sign",
    "Clip",
    "Quantizer",
    "Identity",
    "EstimatorConfig",
    "run",
    "run_ensemble",
    "asymptotic_covariance",
    "topology_sweep",
]
