"""Counter-based random streams.

Every random draw in the pipeline comes from a generator keyed by
``(root_seed, *key)``. Keys are fixed tuples, so a given simulation index
always gets the same stream regardless of execution order or thread count.

Key layout used across the package:

=================  ==========================================
``(0, ...)``       synthetic data generation
``(1, stratum)``   DLNM coefficient bootstrap for a stratum
``(2, sim)``       time-series innovations for simulation ``sim``
``(3, ...)``       Poisson sampling in forecast checks
=================  ==========================================
"""

import numpy as np

SYNTH = 0
BOOTSTRAP = 1
TREND = 2
POISSON = 3


def stream(root_seed, *key):
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
