"""mcflab: a desk-scale mean curvature flow laboratory.

Numerical solvers evolving surfaces in R^3 by mean curvature (graph and
level-set formulations) plus the analysis layer: exact shrinking solutions,
Gaussian density and monotonicity checks, epsilon-regularity probes,
noncollapsing quantities, Brakke-inequality monitoring, dual (outer/inner)
flows, and spectral neck analysis with automatic singularity classification.
"""

from mcflab._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
