"""Strings-and-scalars bindings for ssrkit.

Every function takes and returns only str, float, int, and bool, so the
surface can be re-exposed over FFI, RPC, or a subprocess boundary without
marshalling Python objects. Structured values cross as JSON text.
"""

__version__ = "0.1.0"

from .bindings import (bind_compute_vbl, bind_delta_vbl, bind_dss,
                       bind_greedy_asset, bind_group_advantage, bind_pms,
                       bind_sample_asset, bind_score_candidate)

__all__ = [
    "bind_compute_vbl",
    "bind_delta_vbl",
    "bind_dss",
    "bind_greedy_asset",
    "bind_group_advantage",
    "bind_pms",
    "bind_sample_asset",
    "bind_score_candidate",
]
