"""Self-adjoint extensions of gapped symmetric operators.

Modules, bottom-up:

* :mod:`kvbext.linalg`: frames, null spaces, Jacobi eigensolver;
* :mod:`kvbext.relations`: linear relations and their adjoints;
* :mod:`kvbext.kvb_core`: extension problems, Birman parameters, ``S_T``;
* :mod:`kvbext.expoly` and :mod:`kvbext.halfline`: the exact half-line model;
* :mod:`kvbext.engineering`: extensions with prescribed eigenvalues;
* :mod:`kvbext.cli`: the ``kvbext`` command.
"""

from .errors import KVBError

__version__ = "0.1.0"

__all__ = ["KVBError", "__version__"]
