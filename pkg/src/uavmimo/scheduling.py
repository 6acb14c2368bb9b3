"""Per-cell PRB scheduling.

All schedulers return an (n_prb, k) int array of local user indices, padded
with -1 where a slot is empty. A rotating window of min(max_layers, n_users)
consecutive users (mod n_users) advances by the window size every PRB, so
per-user air time over the band is equal up to one PRB regardless of how
n_prb, n_users and the layer cap divide.
"""

import numpy as np

from .errors import SchedulingError

MAX_LAYERS = 8


def rotation_schedule(n_users: int, n_prb: int, max_layers: int = MAX_LAYERS) -> np.ndarray:
    if n_prb < 0 or n_users < 0 or max_layers < 1:
        raise SchedulingError("invalid schedule dimensions")
    k = min(max_layers, n_users)
    if k == 0:
        return np.full((n_prb, 0), -1, dtype=np.int64)
    p = np.arange(n_prb)[:, None]
    i = np.arange(k)[None, :]
    return (k * p + i) % n_users


def round_robin_schedule(n_users: int, n_prb: int) -> np.ndarray:
    """Single-user variant: PRB p serves user p mod n_users."""
    return rotation_schedule(n_users, n_prb, max_layers=1)


def split_prb_counts(n_prb: int, n_gue: int, n_uav: int):
    """Proportional band split, each non-empty kind keeps at least one PRB."""
    if n_prb < 1:
        raise SchedulingError("need at least one PRB to split")
    if n_gue == 0 and n_uav == 0:
        return n_prb, 0
    if n_uav == 0:
        return n_prb, 0
    if n_gue == 0:
        return 0, n_prb
    n_uav_prb = int(round(n_prb * n_uav / (n_uav + n_gue)))
    n_uav_prb = min(max(n_uav_prb, 1), n_prb - 1)
    return n_prb - n_uav_prb, n_uav_prb


def split_schedule(n_gue: int, n_uav: int, n_prb: int, max_layers: int = MAX_LAYERS) -> np.ndarray:
    """Kind-partitioned band: GUEs on the leading PRBs, UAVs on the rest.

    Local indices follow the drop convention, GUEs 0..n_gue-1 then UAVs.
    Each partition runs its own rotation.
    """
    n_g_prb, n_u_prb = split_prb_counts(n_prb, n_gue, n_uav)
    k_g = min(max_layers, n_gue)
    k_u = min(max_layers, n_uav)
    k = max(k_g, k_u, 1)
    out = np.full((n_prb, k), -1, dtype=np.int64)
    if n_g_prb and k_g:
        out[:n_g_prb, :k_g] = rotation_schedule(n_gue, n_g_prb, max_layers)
    if n_u_prb and k_u:
        out[n_g_prb:, :k_u] = rotation_schedule(n_uav, n_u_prb, max_layers) + n_gue
    return out


def allocation_counts(schedule: np.ndarray, n_users: int) -> np.ndarray:
    """PRBs assigned to each local user under the given schedule."""
    flat = schedule[schedule >= 0]
    return np.bincount(flat, minlength=n_users)[:n_users]
