"""Central tolerance table.

Every numeric threshold used by the pipelines lives here.  Set the
``LOOPCMC_TOLERANCES`` environment variable to a JSON file to override
individual entries, e.g. ``{"rank": 1e-7}``.
"""

import json
import os

ENV_VAR = "LOOPCMC_TOLERANCES"

DEFAULTS = {
    # loop algebra
    "parity": 1e-12,
    "reality": 1e-12,
    "det_inverse": 1e-6,
    "tail_warn": 1e-8,
    "tail_overflow": 1e-6,
    # Birkhoff factorization
    "residual": 1e-9,
    "condition": 1e8,
    "signature": 1e-6,
    # potentials
    "root_order": 1e-9,
    # geometry / classification
    "rank": 1e-6,
    "zero": 1e-8,
    "agreement": 1e-5,
    "nondegenerate": 1e-6,
    "transverse": 1e-6,
}


def load(path=None):
    """Return the tolerance table, merged with the override file if any."""
    table = dict(DEFAULTS)
    path = path or os.environ.get(ENV_VAR)
    if path:
        with open(path) as fh:
            override = json.load(fh)
        unknown = set(override) - set(DEFAULTS)
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        table.update({k: float(v) for k, v in override.items()})
    return table


TOL = load()
