"""lvr-lab: loop vertex representation and expansion toolkit.

Tools for the complex matrix model with interaction lambda * Tr (M M^dag)^p:
Fuss-Catalan generating functions, the loop vertex action built from the
matrix square root change of variables, keyhole contour machinery, small-N
partition function oracles, exact perturbative series, and the forest
expansion of log Z.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
