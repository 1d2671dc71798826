from __future__ import annotations

__version__ = "0.1.0"

from .root_data import (  # noqa: F401
    ALG_TYPES,
    Atom,
    Coeff,
    ConfigError,
    LatticeContext,
    LatticeVector,
    build_lattice,
    pair_atoms,
)
